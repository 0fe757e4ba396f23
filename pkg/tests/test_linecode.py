import math

import pytest
from hypothesis import given, strategies as st

from ethemit.linecode import (OFF, ON, ChipStream, InvalidSample, SoftErrors, manchester_decode,
                              manchester_decode_pair, manchester_encode)

from oracles import manchester_chips

bit_lists = st.lists(st.integers(0, 1), max_size=200)


def test_convention():
    assert manchester_encode([1]).chips == (ON, OFF)
    assert manchester_encode([0]).chips == (OFF, ON)


@given(bit_lists, st.floats(1e-3, 100))
def test_encode_matches_oracle(bits, bit_time):
    s = manchester_encode(bits, bit_time)
    assert list(s.chips) == manchester_chips(bits)
    assert math.isclose(s.chip_duration, bit_time / 2)
    assert math.isclose(s.duration, len(bits) * bit_time)


@given(bit_lists)
def test_roundtrip(bits):
    assert manchester_decode(manchester_encode(bits).chips) == bits


@given(bit_lists)
def test_every_bit_has_one_transition(bits):
    chips = manchester_encode(bits).chips
    assert all(chips[2 * i] != chips[2 * i + 1] for i in range(len(bits)))
    assert sum(chips) == len(bits)  # duty cycle exactly one half


@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(0, 1e6)), max_size=50),
       st.floats(1e-6, 1e6))
def test_decision_is_scale_invariant(pairs, scale):
    flat = [v for p in pairs for v in p]
    assert manchester_decode(flat) == manchester_decode([v * scale for v in flat])


def test_tie_goes_to_zero_and_is_counted():
    stats = SoftErrors()
    assert manchester_decode_pair(0.5, 0.5, stats) == 0
    assert manchester_decode([1, 1, 1, 0, 2, 2], stats) == [0, 1, 0]
    assert stats.ties == 3


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(InvalidSample):
        manchester_decode_pair(bad, 0.0)


def test_odd_chip_count_rejected():
    with pytest.raises(ValueError):
        manchester_decode([1, 0, 1])
    with pytest.raises(ValueError):
        ChipStream((1, 0, 1), 0.5)


def test_chipstream_join_and_idle():
    a = manchester_encode([1, 0], 0.2)
    idle = ChipStream.idle(3, 0.1)
    joined = a + idle
    assert joined.chips == (ON, OFF, OFF, ON) + (OFF,) * 6
    assert math.isclose(joined.duration, 1.0)
    with pytest.raises(ValueError):
        a + ChipStream.idle(1, 0.3)
    with pytest.raises(ValueError):
        ChipStream((), 0)
