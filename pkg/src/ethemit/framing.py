"""Fixed-size packet framing: enable byte, 4-byte payload, CRC-8.

Wire layout (MSB-first bit order)::

    +--------+---------------------+--------+
    |  0xAA  |   payload (4 bytes) |  CRC-8 |
    +--------+---------------------+--------+

The CRC covers the payload only; the enable byte is excluded.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

ENABLE = 0xAA
PAYLOAD_LEN = 4
FRAME_LEN = 1 + PAYLOAD_LEN + 1
FRAME_BITS = FRAME_LEN * 8
PAYLOAD_BITS = PAYLOAD_LEN * 8


@dataclass(frozen=True)
class CrcParams:
    """Rocksoft-style CRC-8 parameter set."""

    polynomial: int
    init: int = 0x00
    reflect_in: bool = False
    reflect_out: bool = False
    xor_out: int = 0x00
    name: str = ""

    def __post_init__(self):
        for field in ("polynomial", "init", "xor_out"):
            value = getattr(self, field)
            if not 0 <= value <= 0xFF:
                raise ValueError(f"{field} must fit in one byte, got {value:#x}")


# Well-known CRC-8 variants (parameters as listed in the common CRC catalogues).
CRC8_CATALOG: dict[str, CrcParams] = {
    p.name: p
    for p in [
        CrcParams(0x07, 0x00, False, False, 0x00, "CRC-8/SMBUS"),
        CrcParams(0x07, 0x00, False, False, 0x55, "CRC-8/I-432-1"),
        CrcParams(0x07, 0xFF, True, True, 0x00, "CRC-8/ROHC"),
        CrcParams(0x31, 0x00, True, True, 0x00, "CRC-8/MAXIM-DOW"),
        CrcParams(0x9B, 0xFF, False, False, 0x00, "CRC-8/CDMA2000"),
        CrcParams(0x39, 0x00, True, True, 0x00, "CRC-8/DARC"),
        CrcParams(0xD5, 0x00, False, False, 0x00, "CRC-8/DVB-S2"),
        CrcParams(0x1D, 0xFF, True, True, 0x00, "CRC-8/TECH-3250"),
        CrcParams(0x1D, 0xFD, False, False, 0x00, "CRC-8/I-CODE"),
        CrcParams(0x9B, 0x00, True, True, 0x00, "CRC-8/WCDMA"),
        CrcParams(0x2F, 0xFF, False, False, 0xFF, "CRC-8/AUTOSAR"),
        CrcParams(0xA7, 0x00, True, True, 0x00, "CRC-8/BLUETOOTH"),
        CrcParams(0x1D, 0x00, False, False, 0x00, "CRC-8/GSM-A"),
        CrcParams(0x49, 0x00, False, False, 0xFF, "CRC-8/GSM-B"),
        CrcParams(0x1D, 0xFF, False, False, 0x00, "CRC-8/HITAG"),
        CrcParams(0x9B, 0x00, False, False, 0x00, "CRC-8/LTE"),
        CrcParams(0x1D, 0xC7, False, False, 0x00, "CRC-8/MIFARE-MAD"),
        CrcParams(0x31, 0xFF, False, False, 0x00, "CRC-8/NRSC-5"),
        CrcParams(0x2F, 0x00, False, False, 0x00, "CRC-8/OPENSAFETY"),
        CrcParams(0x1D, 0xFF, False, False, 0xFF, "CRC-8/SAE-J1850"),
    ]
}

# Plain poly-0x07 CRC-8; reproduces the reference vector b"DATA" -> 0xB6.
DEFAULT_CRC = CRC8_CATALOG["CRC-8/SMBUS"]


def _reflect8(x: int) -> int:
    return int(f"{x:08b}"[::-1], 2)


@lru_cache(maxsize=None)
def _table(poly: int) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        reg = byte
        for _ in range(8):
            reg = ((reg << 1) ^ poly) & 0xFF if reg & 0x80 else (reg << 1) & 0xFF
        table.append(reg)
    return tuple(table)


def crc8(data: bytes, params: CrcParams = DEFAULT_CRC) -> int:
    table = _table(params.polynomial)
    reg = params.init
    for byte in bytes(data):
        if params.reflect_in:
            byte = _reflect8(byte)
        reg = table[reg ^ byte]
    if params.reflect_out:
        reg = _reflect8(reg)
    return reg ^ params.xor_out


def find_crc_variants(data: bytes, expected: int) -> list[CrcParams]:
    """Catalogued CRC-8 variants whose checksum of ``data`` equals ``expected``."""
    return [p for p in CRC8_CATALOG.values() if crc8(data, p) == expected]


class FrameError(ValueError):
    """A received bit group is not a valid frame."""

    reason = "invalid-frame"


class BadLength(FrameError):
    reason = "bad-length"


class BadPreamble(FrameError):
    reason = "bad-preamble"


class BadCrc(FrameError):
    reason = "bad-crc"


class EmptyMessage(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    payload: bytes
    crc: int
    enable: int = ENABLE

    def __post_init__(self):
        if self.enable != ENABLE:
            raise BadPreamble(f"enable byte must be {ENABLE:#04x}, got {self.enable:#04x}")
        if len(self.payload) != PAYLOAD_LEN:
            raise BadLength(f"payload must be {PAYLOAD_LEN} bytes, got {len(self.payload)}")

    def to_bytes(self) -> bytes:
        return bytes([self.enable]) + self.payload + bytes([self.crc])

    def to_bits(self) -> list[int]:
        return bytes_to_bits(self.to_bytes())


def bytes_to_bits(data: bytes) -> list[int]:
    return [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit count must be a multiple of 8")
    out = bytearray()
    for i in range(0, len(bits), 8):
        value = 0
        for b in bits[i:i + 8]:
            value = (value << 1) | (1 if b else 0)
        out.append(value)
    return bytes(out)


def build_frame(payload: bytes, params: CrcParams = DEFAULT_CRC) -> Frame:
    payload = bytes(payload)
    if len(payload) != PAYLOAD_LEN:
        raise BadLength(f"payload must be exactly {PAYLOAD_LEN} bytes, got {len(payload)}")
    return Frame(payload=payload, crc=crc8(payload, params))


def parse_frame(bits: Sequence[int], params: CrcParams = DEFAULT_CRC) -> Frame:
    """Validate a 48-bit group and return the frame it carries.

    Raises BadLength, BadPreamble or BadCrc (all FrameError) on rejection.
    """
    if len(bits) != FRAME_BITS:
        raise BadLength(f"expected {FRAME_BITS} bits, got {len(bits)}")
    raw = bits_to_bytes(bits)
    if raw[0] != ENABLE:
        raise BadPreamble(f"enable byte {raw[0]:#04x} != {ENABLE:#04x}")
    payload, crc = raw[1:1 + PAYLOAD_LEN], raw[-1]
    expected = crc8(payload, params)
    if crc != expected:
        raise BadCrc(f"crc {crc:#04x} != computed {expected:#04x}")
    return Frame(payload=payload, crc=crc)


def chunk_message(data: bytes, params: CrcParams = DEFAULT_CRC) -> list[Frame]:
    """Split ``data`` into frames; the last payload is zero-padded.

    The original length is not encoded and must be conveyed out of band.
    """
    data = bytes(data)
    if not data:
        raise EmptyMessage("cannot frame an empty message")
    frames = []
    for i in range(0, len(data), PAYLOAD_LEN):
        chunk = data[i:i + PAYLOAD_LEN].ljust(PAYLOAD_LEN, b"\x00")
        frames.append(build_frame(chunk, params))
    return frames


def join_payloads(frames: Iterable[Frame]) -> bytes:
    return b"".join(f.payload for f in frames)
