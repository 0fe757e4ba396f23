"""Manchester line code (bit 1 = high-then-low, bit 0 = low-then-high)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

ON = 1
OFF = 0

# Chip pair per bit value.
_CHIPS = {1: (ON, OFF), 0: (OFF, ON)}


@dataclass(frozen=True)
class ChipStream:
    chips: tuple[int, ...]
    chip_duration: float

    def __post_init__(self):
        if len(self.chips) % 2:
            raise ValueError("a chip stream holds whole bits, so its length must be even")
        if not self.chip_duration > 0:
            raise ValueError("chip_duration must be positive")

    @property
    def bit_time(self) -> float:
        return 2 * self.chip_duration

    @property
    def duration(self) -> float:
        return len(self.chips) * self.chip_duration

    def __len__(self):
        return len(self.chips)

    def __add__(self, other: "ChipStream") -> "ChipStream":
        if not math.isclose(self.chip_duration, other.chip_duration):
            raise ValueError("cannot join chip streams with different chip durations")
        return ChipStream(self.chips + other.chips, self.chip_duration)

    @classmethod
    def idle(cls, bits: int, chip_duration: float) -> "ChipStream":
        """Silence lasting ``bits`` bit periods (no Manchester transitions)."""
        return cls((OFF,) * (2 * bits), chip_duration)


def manchester_encode(bits: Sequence[int], bit_time: float = 1.0) -> ChipStream:
    chips: list[int] = []
    for b in bits:
        chips.extend(_CHIPS[1 if b else 0])
    return ChipStream(tuple(chips), bit_time / 2)


class InvalidSample(ValueError):
    pass


@dataclass
class SoftErrors:
    """Counts ambiguous (equal-amplitude) chip pairs seen while decoding."""

    ties: int = 0


def manchester_decode_pair(first: float, second: float, stats: SoftErrors | None = None) -> int:
    """Decide one bit from the mean amplitudes of its two half-bit chips.

    Only the sign of ``first - second`` matters, so no absolute threshold is
    involved. Ties decode to 0 and are counted in ``stats``.
    """
    if not (math.isfinite(first) and math.isfinite(second)):
        raise InvalidSample(f"non-finite amplitude pair ({first}, {second})")
    if first > second:
        return 1
    if first < second:
        return 0
    if stats is not None:
        stats.ties += 1
    return 0


def manchester_decode(chips: Sequence[float], stats: SoftErrors | None = None) -> list[int]:
    if len(chips) % 2:
        raise ValueError("need an even number of chip amplitudes")
    return [manchester_decode_pair(chips[i], chips[i + 1], stats) for i in range(0, len(chips), 2)]
