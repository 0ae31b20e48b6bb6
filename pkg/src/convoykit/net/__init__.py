from .codec import FRAME_SIZE, MAGIC, decode_bsm, encode_bsm
from .loss import LossModel, loss_gate
from .transport import (
    DEFAULT_GROUP,
    DEFAULT_PORT,
    MulticastTransport,
    Transport,
    TransportStats,
    VirtualChannel,
    VirtualEndpoint,
)

__all__ = [
    "DEFAULT_GROUP",
    "DEFAULT_PORT",
    "FRAME_SIZE",
    "MAGIC",
    "LossModel",
    "MulticastTransport",
    "Transport",
    "TransportStats",
    "VirtualChannel",
    "VirtualEndpoint",
    "decode_bsm",
    "encode_bsm",
    "loss_gate",
]
