"""Small-scale end-to-end fixtures shared by the demod, harness and acceptance tests."""
import numpy as np

from ethemit.channel import device_preset, synthesize
from ethemit.demod import DemodConfig
from ethemit.framing import build_frame
from ethemit.sinks import RecordingSink
from ethemit.spectral import segment_length
from ethemit.timing import SimulatedClock
from ethemit.tx import UdpBurstConfig, message_stream, modulate_udp

N = 64


def random_frames(n, seed):
    rng = np.random.default_rng(seed)
    return [build_frame(bytes(rng.integers(0, 256, 4, dtype=np.uint8))) for _ in range(n)]


def capture(frames, rate=10.0, snr=float("inf"), seed=0, windows_per_bit=10, window_size=N):
    """UDP-transmit ``frames`` into a recording sink and synthesize the capture."""
    fs = rate * windows_per_bit * window_size
    offset = 4 * fs / segment_length(window_size)
    chips, starts = message_stream(frames, 1.0 / rate)
    report = modulate_udp(chips, UdpBurstConfig(), SimulatedClock(), RecordingSink())
    params = device_preset("pc", sample_rate=fs, carrier_offset=offset, snr_db=snr, seed=seed,
                           window_size=window_size)
    buf = synthesize(report, params)
    cfg = DemodConfig(freq=params.carrier, sample_rate=fs, bit_time=1.0 / rate, window_size=window_size,
                      center_frequency=params.center_frequency)
    return buf, cfg, [s * chips.chip_duration for s in starts]
