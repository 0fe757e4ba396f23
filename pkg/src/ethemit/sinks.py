"""Packet sinks: where transmitted datagrams go.

The trace format shared by the recording sink, the jammer and the traffic
detector is one datagram per line: ``<t_seconds> <length>``.
"""
from __future__ import annotations

import os
import socket
from pathlib import Path
from typing import Iterable

# TEST-NET-1 (RFC 5737), discard port: never routed anywhere useful.
DEFAULT_DESTINATION = ("192.0.2.1", 9)


class SinkError(OSError):
    pass


class UdpSink:
    def __init__(self, destination: tuple[str, int] = DEFAULT_DESTINATION, broadcast: bool = False):
        self.destination = destination
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        if broadcast:
            self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)

    def send(self, datagram: bytes, t: float) -> None:
        try:
            self._sock.sendto(datagram, self.destination)
        except OSError as exc:
            raise SinkError(f"sendto {self.destination} failed: {exc}") from exc

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RecordingSink:
    """Keeps ``(t, length)`` per datagram and optionally streams them to a file."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.records: list[tuple[float, int]] = []
        self._fh = open(path, "w") if path is not None else None

    def send(self, datagram: bytes, t: float) -> None:
        self.records.append((t, len(datagram)))
        if self._fh is not None:
            self._fh.write(f"{t:.9f} {len(datagram)}\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace(path: str | os.PathLike, records: Iterable[tuple[float, int]]) -> None:
    with open(path, "w") as fh:
        for t, length in records:
            fh.write(f"{t:.9f} {int(length)}\n")


def read_trace(path: str | os.PathLike) -> list[tuple[float, int]]:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<t_seconds> <length>'")
        records.append((float(parts[0]), int(parts[1])))
    return records
