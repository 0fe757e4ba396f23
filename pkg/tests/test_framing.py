import pytest
from hypothesis import given, strategies as st

from ethemit.framing import (CRC8_CATALOG, DEFAULT_CRC, FRAME_BITS, BadCrc, BadLength, BadPreamble,
                             CrcParams, EmptyMessage, Frame, bits_to_bytes, build_frame, bytes_to_bits,
                             chunk_message, crc8, find_crc_variants, join_payloads, parse_frame)

from oracles import CRC8_CHECK_VALUES, crc8_bitwise, frame_bits

payloads = st.binary(min_size=4, max_size=4)


@pytest.mark.parametrize("name", sorted(CRC8_CHECK_VALUES))
def test_catalog_check_values(name):
    assert crc8(b"123456789", CRC8_CATALOG[name]) == CRC8_CHECK_VALUES[name]


def test_catalog_is_covered_by_oracle():
    assert set(CRC8_CATALOG) == set(CRC8_CHECK_VALUES)


def test_data_vector():
    f = build_frame(b"DATA")
    assert f.crc == 0xB6
    assert f.to_bytes() == bytes.fromhex("AA44415441B6")


def test_data_vector_variant_search():
    names = [p.name for p in find_crc_variants(b"DATA", 0xB6)]
    assert names == ["CRC-8/SMBUS"]


def test_crc_over_payload_only():
    assert crc8(b"\xaaDATA") != 0xB6


@given(st.binary(max_size=64), st.integers(0, 255), st.integers(0, 255), st.booleans(), st.integers(0, 255))
def test_table_crc_matches_bitwise(data, poly, init, refl, xorout):
    p = CrcParams(poly, init, refl, refl, xorout)
    assert crc8(data, p) == crc8_bitwise(data, poly, init, refl, refl, xorout)


@given(payloads)
def test_roundtrip(payload):
    f = build_frame(payload)
    assert parse_frame(f.to_bits()) == f
    assert f.to_bits() == frame_bits(payload, crc8_bitwise(payload))


@given(payloads, st.integers(0, 47))
def test_any_single_bit_flip_rejected(payload, k):
    bits = build_frame(payload).to_bits()
    bits[k] ^= 1
    with pytest.raises((BadPreamble, BadCrc)):
        parse_frame(bits)


@given(payloads, st.integers(8, 47), st.integers(8, 47))
def test_double_flip_in_body_detected(payload, i, j):
    # x^8+x^2+x+1 has period 127, so any two flips inside a 40-bit body are caught
    bits = build_frame(payload).to_bits()
    bits[i] ^= 1
    bits[j] ^= 1
    if i == j:
        assert parse_frame(bits).payload == payload
    else:
        with pytest.raises(BadCrc):
            parse_frame(bits)


def test_bad_preamble():
    bits = build_frame(b"DATA").to_bits()
    bits[0] = 0
    with pytest.raises(BadPreamble) as exc:
        parse_frame(bits)
    assert exc.value.reason == "bad-preamble"


@pytest.mark.parametrize("n", [0, 47, 49, 96])
def test_bad_length(n):
    with pytest.raises(BadLength):
        parse_frame([0] * n)


@pytest.mark.parametrize("p", [b"", b"abc", b"abcde"])
def test_build_rejects_length(p):
    with pytest.raises(BadLength):
        build_frame(p)


def test_frame_validates_fields():
    with pytest.raises(BadPreamble):
        Frame(b"DATA", 0xB6, enable=0x55)
    with pytest.raises(BadLength):
        Frame(b"DAT", 0)


@given(st.binary(max_size=40))
def test_bits_bytes_roundtrip(data):
    bits = bytes_to_bits(data)
    assert len(bits) == 8 * len(data)
    assert bits_to_bytes(bits) == data


def test_bits_msb_first():
    assert bytes_to_bits(b"\x80\x01") == [1] + [0] * 14 + [1]


@given(st.binary(min_size=1, max_size=40))
def test_chunking(data):
    frames = chunk_message(data)
    assert len(frames) == -(-len(data) // 4)
    joined = join_payloads(frames)
    assert joined[:len(data)] == data
    assert set(joined[len(data):]) <= {0}


def test_empty_message():
    with pytest.raises(EmptyMessage):
        chunk_message(b"")


def test_frame_size():
    assert FRAME_BITS == 48 and len(build_frame(b"\0\0\0\0").to_bits()) == 48


def test_crc_params_validate():
    with pytest.raises(ValueError):
        CrcParams(0x107)
    assert DEFAULT_CRC.name == "CRC-8/SMBUS"
