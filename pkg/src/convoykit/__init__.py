"""Cooperative-driving (platooning) framework with a lossy V2V simulation harness."""

__version__ = "0.1.0"
