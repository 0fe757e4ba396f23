import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ethemit import spectral
from ethemit.channel import (Activity, ChannelConfigError, ChannelParams, activity_from_trace,
                             device_preset, interference_from_trace, snr_sweep, suggested_gain, synthesize,
                             synthesize_chunks)
from ethemit.iqfile import (IqBuffer, IqFormatError, IqWriter, decode, encode, iter_iq, read_iq, read_sidecar,
                            write_iq)
from ethemit.tx import TxSchedule
from ethemit.linecode import manchester_encode

from oracles import welch_two_sided

FS, N = 32000.0, 320
SEG = spectral.segment_length(N)
OFFSET = 10 * FS / SEG  # exactly on bin 10


def small(**kw):
    kw.setdefault("sample_rate", FS)
    kw.setdefault("carrier_offset", OFFSET)
    kw.setdefault("window_size", N)
    return device_preset("pc", **kw)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([80, 320, 2400]))
def test_welch_matches_scipy(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f, p = spectral.welch_psd(x, 1000.0)
    fo, po = welch_two_sided(x, 1000.0)
    assert np.allclose(f, fo) and np.allclose(p, po)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 127), st.integers(0, 2))
def test_bin_power_is_a_welch_bin(seed, k, band):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, N)) + 1j * rng.standard_normal((3, N))
    freq = k * FS / SEG
    got = spectral.bin_power(x, freq, FS, band_bins=band)
    _, p = spectral.welch_psd(x, FS)
    want = sum(p[:, (k + d) % SEG] for d in range(-band, band + 1))
    assert np.allclose(got, want)


def test_pure_tone_concentration():
    n = np.arange(N)
    x = np.exp(2j * np.pi * OFFSET / FS * n)
    _, p = spectral.welch_psd(x, FS)
    far = [p[(10 + d) % SEG] for d in range(5, SEG - 5)]
    assert p[10] >= 100 * max(far)


def test_zero_input():
    assert not spectral.welch_psd(np.zeros(N, complex), FS)[1].any()


def test_too_short_window():
    with pytest.raises(ValueError):
        spectral.segment_length(16)


def test_segments_cover_window():
    starts = spectral.segment_starts(2400)
    assert list(starts) == [0, 480, 960, 1440] and starts[-1] + 960 == 2400


# iq files

@given(st.lists(st.complex_numbers(max_magnitude=0.7, allow_nan=False, allow_infinity=False), max_size=50))
def test_cf32_roundtrip(vals):
    x = np.array(vals, dtype=complex)
    assert np.allclose(decode(encode(x, "cf32"), "cf32"), x.astype(np.complex64), atol=0)


@given(st.lists(st.complex_numbers(max_magnitude=0.7, allow_nan=False, allow_infinity=False), max_size=50))
def test_cu8_quantization(vals):
    x = np.array(vals, dtype=complex)
    y = decode(encode(x, "cu8"), "cu8")
    assert np.all(np.abs(y.real - x.real) <= 0.5 / 127.5 + 1e-12)
    assert np.all(np.abs(y.imag - x.imag) <= 0.5 / 127.5 + 1e-12)


def test_cu8_zero_is_mid_scale():
    assert set(encode(np.zeros(3, complex), "cu8")) <= {127, 128}
    assert decode(bytes([0, 255]), "cu8")[0] == complex(-1, 1)


def test_partial_sample_dropped():
    assert len(decode(b"\x80\x80\x80", "cu8")) == 1
    assert len(decode(b"\0" * 12, "cf32")) == 1


def test_nan_cf32_rejected():
    raw = np.array([np.nan, 0], dtype="<f4").tobytes()
    with pytest.raises(IqFormatError):
        decode(raw, "cf32")
    with pytest.raises(IqFormatError):
        IqBuffer(np.array([np.nan]), 1.0)


@pytest.mark.parametrize("fmt", ["cu8", "cf32"])
def test_file_roundtrip(tmp_path, fmt):
    rng = np.random.default_rng(1)
    buf = IqBuffer(0.3 * (rng.standard_normal(1000) + 1j * rng.standard_normal(1000)), 2.4e6, 249.99e6)
    path = tmp_path / f"cap.{fmt}"
    gain = write_iq(path, buf, fmt)
    meta = read_sidecar(path)
    assert meta == {"center_frequency": 249.99e6, "sample_rate": 2.4e6, "format": fmt}
    back = read_iq(path)
    tol = 1 / 127.5 if fmt == "cu8" else 1e-6
    assert np.allclose(back.samples / gain, buf.samples, atol=tol / gain)
    assert np.allclose(np.concatenate(list(iter_iq(path, 64))), back.samples)


def test_missing_or_bad_sidecar(tmp_path):
    (tmp_path / "x.cu8").write_bytes(b"\x80" * 8)
    with pytest.raises(IqFormatError, match="missing"):
        read_iq(tmp_path / "x.cu8")
    (tmp_path / "x.cu8.meta").write_text("sample_rate=1\nformat=cs16\ncenter_frequency_hz=0\n")
    with pytest.raises(IqFormatError):
        read_sidecar(tmp_path / "x.cu8")


# channel

def test_presets():
    assert device_preset("pc").carrier == 250.000e6
    assert device_preset("laptop").carrier == pytest.approx(249.99488e6)
    assert device_preset("embedded").carrier == pytest.approx(250.00285e6)
    with pytest.raises(ChannelConfigError, match="pc, laptop, embedded"):
        device_preset("phone")


def test_config_validation():
    with pytest.raises(ChannelConfigError):
        ChannelParams(sample_rate=15e3, carrier_offset=10e3)
    with pytest.raises(ChannelConfigError):
        ChannelParams(harmonics=((1.0, 0.0), (2.0, 3.0)))


def test_harmonic_bands():
    p = device_preset("pc")
    assert len(p.lines()) == 1  # other bands lie far outside 2.4 MHz
    half = p.tuned_to(0.5)
    assert half.carrier == pytest.approx(125e6)
    (f, a), = half.lines()
    assert f == pytest.approx(10e3) and 20 * math.log10(a) == pytest.approx(-9.0)


def test_all_off_is_noise_only():
    buf = synthesize(Activity((), 1.0), small(snr_db=10, seed=4))
    stack = buf.samples[: len(buf) // N * N].reshape(-1, N)
    p = spectral.welch_psd(stack, FS)[1].mean(axis=0)
    assert abs(10 * np.log10(p[10] / np.median(p[[8, 9, 11, 12]]))) < 3


@pytest.mark.parametrize("snr", [5.0, 13.0, 20.0, 24.0])
def test_snr_knob_is_measured_snr(snr):
    buf = synthesize(Activity(((0.0, 2.0),), 2.0), small(snr_db=snr, seed=9))
    assert spectral.measure_snr(buf.samples, OFFSET, FS, N) == pytest.approx(snr, abs=1.0)


def test_keying_follows_schedule():
    sched = TxSchedule.from_chips(manchester_encode([1, 0, 1, 0, 1, 0, 1, 0], 0.1))
    buf = synthesize(sched, small())
    amps = spectral.bin_power(buf.samples.reshape(-1, N), OFFSET, FS)
    on = amps > amps.max() / 2
    chips = on.reshape(16, -1).mean(axis=1)
    assert list(np.round(chips).astype(int)) == [1, 0, 0, 1] * 4
    assert len(buf) == round(sched.duration * FS)


def test_chunks_equal_whole_and_deterministic():
    act = Activity(((0.1, 0.4), (0.7, 0.9)), 1.0)
    p = small(snr_db=12, seed=21)
    a = np.concatenate(list(synthesize_chunks(act, p, chunk_size=777)))
    b = synthesize(act, p).samples
    assert np.array_equal(a, b)
    assert np.array_equal(b, synthesize(act, p).samples)
    assert not np.array_equal(b, synthesize(act, small(snr_db=12, seed=22)).samples)


def test_sweep():
    act = Activity(((0.0, 0.5),), 0.5)
    bufs = snr_sweep(act, small(seed=1), [24, 12, 5])
    again = snr_sweep(act, small(seed=1), [24, 12, 5])
    assert all(np.array_equal(x.samples, y.samples) for x, y in zip(bufs, again))
    with pytest.raises(ValueError):
        snr_sweep(act, small(), [])
    with pytest.raises(ValueError):
        synthesize(Activity((), 0.0), small())


def test_trace_activity_and_interference():
    act = activity_from_trace([(0.0, 10), (0.01, 10), (0.5, 10)], hold=0.01)
    assert act.on_intervals() == [(0.0, 0.02), (0.5, 0.51)]
    jam = interference_from_trace([(0.2, 64)], hold=0.1, relative_amplitude=2.0)
    quiet = synthesize(Activity((), 0.5), small()).samples
    loud = synthesize(Activity((), 0.5), small(), jam).samples
    assert not quiet.any() and np.abs(loud[int(0.25 * FS)]) == pytest.approx(2.0)


def test_cu8_writer_does_not_clip(tmp_path):
    p = small(snr_db=10, seed=2)
    act = Activity(((0.0, 0.5),), 0.5)
    with IqWriter(tmp_path / "c.cu8", FS, p.center_frequency, "cu8", suggested_gain(p, "cu8")) as w:
        for chunk in synthesize_chunks(act, p):
            w.write(chunk)
    raw = np.frombuffer((tmp_path / "c.cu8").read_bytes(), np.uint8)
    assert np.mean((raw == 0) | (raw == 255)) < 1e-3
