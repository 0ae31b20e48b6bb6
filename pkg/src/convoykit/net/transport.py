"""Frame transports: a deterministic in-process channel and IPv6 UDP multicast.

Both hand received frames through the same admission path: decode, drop
foreign or malformed datagrams, drop our own frames, then apply the
receiver's loss model.
"""

from __future__ import annotations

import errno
import select
import logging
import socket
import struct
from collections import deque
from dataclasses import dataclass
from typing import Optional

from ..errors import ForeignFrameError, MalformedFrameError, TransportError
from ..model import VehicleState
from .codec import decode_bsm
from .loss import LossModel

LOG = logging.getLogger(__name__)

DEFAULT_GROUP = "ff02::1:7f01"
DEFAULT_PORT = 47001
MAX_DATAGRAM = 2048


@dataclass
class TransportStats:
    sent: int = 0
    offered: int = 0  # frames from other vehicles reaching the loss gate
    lost: int = 0
    delivered: int = 0
    self_filtered: int = 0
    foreign: int = 0
    malformed: int = 0


class Transport:
    def __init__(self, vehicle_id: int, loss: Optional[LossModel] = None):
        self.vehicle_id = vehicle_id
        self.loss = loss if loss is not None else LossModel(0.0)
        self.stats = TransportStats()

    def _admit(self, raw: bytes) -> Optional[VehicleState]:
        try:
            state = decode_bsm(raw)
        except ForeignFrameError:
            self.stats.foreign += 1
            return None
        except MalformedFrameError as exc:
            LOG.debug("dropping malformed frame: %s", exc)
            self.stats.malformed += 1
            return None
        if state.vehicle_id == self.vehicle_id:
            self.stats.self_filtered += 1
            return None
        self.stats.offered += 1
        if not self.loss.deliver():
            self.stats.lost += 1
            return None
        self.stats.delivered += 1
        return state

    def send(self, frame: bytes) -> None:
        raise NotImplementedError

    def _drain(self) -> list[bytes]:
        raise NotImplementedError

    def recv(self) -> list[VehicleState]:
        """All pending frames that survive admission, in arrival order."""
        out = []
        for raw in self._drain():
            state = self._admit(raw)
            if state is not None:
                out.append(state)
        return out

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class VirtualChannel:
    """Shared medium for single-process runs; every send reaches every endpoint, sender included."""

    def __init__(self):
        self.endpoints: list[VirtualEndpoint] = []

    def endpoint(self, vehicle_id: int, loss: Optional[LossModel] = None) -> VirtualEndpoint:
        ep = VirtualEndpoint(self, vehicle_id, loss)
        self.endpoints.append(ep)
        return ep

    def inject(self, raw: bytes) -> None:
        for ep in self.endpoints:
            ep.inbox.append(raw)


class VirtualEndpoint(Transport):
    def __init__(self, channel: VirtualChannel, vehicle_id: int, loss: Optional[LossModel] = None):
        super().__init__(vehicle_id, loss)
        self.channel = channel
        self.inbox: deque[bytes] = deque()

    def send(self, frame: bytes) -> None:
        self.stats.sent += 1
        self.channel.inject(frame)

    def _drain(self) -> list[bytes]:
        frames = list(self.inbox)
        self.inbox.clear()
        return frames


def _link_local_interfaces() -> list[str]:
    """Interfaces holding an IPv6 link-local address (Linux only; empty elsewhere)."""
    try:
        with open("/proc/net/if_inet6") as fh:
            rows = [line.split() for line in fh]
    except OSError:
        return []
    # columns: address, ifindex, prefix length, scope, flags, name
    return [r[5] for r in rows if len(r) >= 6 and r[3] == "20"]


def default_interface() -> str:
    """First non-loopback interface, preferring ones with an IPv6 link-local address."""
    names = [name for _, name in socket.if_nameindex()]
    candidates = [n for n in _link_local_interfaces() if n != "lo"]
    candidates += [n for n in names if n != "lo" and n not in candidates]
    if candidates:
        return candidates[0]
    if names:
        return names[0]
    raise TransportError("no network interfaces available")


class MulticastTransport(Transport):
    """IPv6 UDP multicast endpoint (non-blocking receive)."""

    def __init__(
        self,
        vehicle_id: int,
        loss: Optional[LossModel] = None,
        group: str = DEFAULT_GROUP,
        port: int = DEFAULT_PORT,
        interface: Optional[str] = None,
        hops: int = 1,
    ):
        super().__init__(vehicle_id, loss)
        self.group = group
        self.port = port
        self.interface = interface or default_interface()
        try:
            self.ifindex = socket.if_nametoindex(self.interface)
            group_bin = socket.inet_pton(socket.AF_INET6, group)
        except OSError as exc:
            raise TransportError(f"bad interface or group {self.interface!r}/{group!r}: {exc}") from exc
        if group_bin[0] != 0xFF:
            raise TransportError(f"{group} is not an IPv6 multicast address")
        sock = socket.socket(socket.AF_INET6, socket.SOCK_DGRAM)
        try:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            if hasattr(socket, "SO_REUSEPORT"):
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
            sock.bind(("::", port))
            mreq = group_bin + struct.pack("@I", self.ifindex)
            sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_JOIN_GROUP, mreq)
            sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_MULTICAST_IF, self.ifindex)
            sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_MULTICAST_LOOP, 1)
            sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_MULTICAST_HOPS, hops)
            sock.setblocking(False)
        except OSError as exc:
            sock.close()
            raise TransportError(f"multicast setup on {self.interface} failed: {exc}") from exc
        self.sock = sock

    def send(self, frame: bytes) -> None:
        try:
            self.sock.sendto(frame, (self.group, self.port, 0, self.ifindex))
        except OSError as exc:
            raise TransportError(f"send to [{self.group}]:{self.port} failed: {exc}") from exc
        self.stats.sent += 1

    def _drain(self) -> list[bytes]:
        frames = []
        while True:
            try:
                raw, _ = self.sock.recvfrom(MAX_DATAGRAM)
            except BlockingIOError:
                break
            except OSError as exc:
                if exc.errno in (errno.EAGAIN, errno.EWOULDBLOCK):
                    break
                raise TransportError(f"receive failed: {exc}") from exc
            frames.append(raw)
        return frames

    def wait(self, timeout: float) -> bool:
        """Block until a datagram is readable or ``timeout`` elapses."""
        readable, _, _ = select.select([self.sock], [], [], timeout)
        return bool(readable)

    def close(self) -> None:
        self.sock.close()
