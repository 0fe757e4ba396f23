"""Complex baseband buffers and their on-disk formats.

Formats:

``cu8``  interleaved unsigned 8-bit I,Q; 127.5 is zero (RTL-SDR native).
``cf32`` interleaved little-endian float32 I,Q.

Each capture ``foo.cu8`` has a sidecar ``foo.cu8.meta`` of ``key=value``
lines: ``center_frequency_hz``, ``sample_rate``, ``format``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

FORMATS = ("cu8", "cf32")
SIDECAR_SUFFIX = ".meta"


class IqFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IqBuffer:
    samples: np.ndarray
    sample_rate: float
    center_frequency: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise IqFormatError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise IqFormatError("IQ samples must be finite")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, factor: float) -> "IqBuffer":
        return IqBuffer(self.samples * factor, self.sample_rate, self.center_frequency)


def sidecar_path(path) -> Path:
    return Path(str(path) + SIDECAR_SUFFIX)


def write_sidecar(path, center_frequency: float, sample_rate: float, fmt: str) -> None:
    sidecar_path(path).write_text(
        f"center_frequency_hz={center_frequency!r}\nsample_rate={sample_rate!r}\nformat={fmt}\n")


def read_sidecar(path) -> dict:
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise IqFormatError(f"missing sidecar metadata {meta_path}")
    meta = {}
    for line in meta_path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IqFormatError(f"{meta_path}: bad line {line!r}")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    missing = {"center_frequency_hz", "sample_rate", "format"} - meta.keys()
    if missing:
        raise IqFormatError(f"{meta_path}: missing {', '.join(sorted(missing))}")
    if meta["format"] not in FORMATS:
        raise IqFormatError(f"{meta_path}: unknown format {meta['format']!r}")
    try:
        out = {"center_frequency": float(meta["center_frequency_hz"]),
               "sample_rate": float(meta["sample_rate"]), "format": meta["format"]}
    except ValueError as exc:
        raise IqFormatError(f"{meta_path}: {exc}") from None
    if not out["sample_rate"] > 0:
        raise IqFormatError(f"{meta_path}: sample_rate must be positive")
    return out


def encode(samples: np.ndarray, fmt: str, gain: float = 1.0) -> bytes:
    x = np.asarray(samples) * gain
    inter = np.empty(2 * len(x), dtype=np.float64)
    inter[0::2] = x.real
    inter[1::2] = x.imag
    if fmt == "cf32":
        return inter.astype("<f4").tobytes()
    if fmt == "cu8":
        return np.clip(np.rint(inter * 127.5 + 127.5), 0, 255).astype(np.uint8).tobytes()
    raise IqFormatError(f"unknown format {fmt!r}")


def decode(raw: bytes, fmt: str) -> np.ndarray:
    """Bytes -> complex128 samples; a trailing partial sample is dropped."""
    if fmt == "cu8":
        v = np.frombuffer(raw, dtype=np.uint8)
        v = v[: len(v) // 2 * 2].astype(np.float64)
        v = (v - 127.5) / 127.5
    elif fmt == "cf32":
        v = np.frombuffer(raw[: len(raw) // 8 * 8], dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(v)):
            raise IqFormatError("cf32 capture contains non-finite values")
    else:
        raise IqFormatError(f"unknown format {fmt!r}")
    return v[0::2] + 1j * v[1::2]


def auto_gain(samples: np.ndarray, fmt: str) -> float:
    """Gain keeping a cu8 capture near a quarter of full scale RMS; 1 for cf32."""
    if fmt != "cu8":
        return 1.0
    rms = float(np.sqrt(np.mean(np.abs(samples) ** 2))) if len(samples) else 0.0
    peak = float(np.max(np.abs(np.concatenate([samples.real, samples.imag])))) if len(samples) else 0.0
    if rms == 0:
        return 1.0
    return min(0.25 / rms * np.sqrt(2), 0.98 / peak)


def write_iq(path, buf: IqBuffer, fmt: str = "cf32", gain: float | None = None) -> float:
    """Write ``buf`` plus sidecar; returns the gain applied."""
    if fmt not in FORMATS:
        raise IqFormatError(f"unknown format {fmt!r}")
    g = auto_gain(buf.samples, fmt) if gain is None else gain
    with open(path, "wb") as fh:
        fh.write(encode(buf.samples, fmt, g))
    write_sidecar(path, buf.center_frequency, buf.sample_rate, fmt)
    return g


class IqWriter:
    """Incremental writer for chunked synthesis; gain must be fixed up front."""

    def __init__(self, path, sample_rate: float, center_frequency: float, fmt: str = "cf32", gain: float = 1.0):
        if fmt not in FORMATS:
            raise IqFormatError(f"unknown format {fmt!r}")
        self.path, self.fmt, self.gain = path, fmt, gain
        self._fh = open(path, "wb")
        write_sidecar(path, center_frequency, sample_rate, fmt)

    def write(self, samples: np.ndarray) -> None:
        self._fh.write(encode(samples, self.fmt, self.gain))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def iter_iq(path, chunk_samples: int = 1 << 18) -> Iterator[np.ndarray]:
    meta = read_sidecar(path)
    width = 2 if meta["format"] == "cu8" else 8
    with open(path, "rb") as fh:
        while True:
            raw = fh.read(chunk_samples * width)
            if not raw:
                return
            yield decode(raw, meta["format"])


def read_iq(path) -> IqBuffer:
    meta = read_sidecar(path)
    raw = Path(path).read_bytes()
    return IqBuffer(decode(raw, meta["format"]), meta["sample_rate"], meta["center_frequency"])

