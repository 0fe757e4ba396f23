"""Render a simulated capture of one frame as a spectrogram and a per-window tone-power trace."""
import argparse

import numpy as np

from ethemit.channel import device_preset, synthesize
from ethemit.framing import build_frame
from ethemit.sinks import RecordingSink
from ethemit.spectral import bin_power, segment_length
from ethemit.timing import SimulatedClock
from ethemit.tx import UdpBurstConfig, message_stream, modulate_udp


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--message", default="DATA")
    ap.add_argument("--rate", type=float, default=10.0)
    ap.add_argument("--snr", type=float, default=8.0)
    ap.add_argument("--window-size", type=int, default=64)
    ap.add_argument("--out", default="spectrogram.png")
    args = ap.parse_args()
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    N = args.window_size
    fs = args.rate * 10 * N
    offset = 4 * fs / segment_length(N)
    chips, _ = message_stream([build_frame(args.message.encode()[:4].ljust(4, b"\0"))], 1.0 / args.rate)
    report = modulate_udp(chips, UdpBurstConfig(), SimulatedClock(), RecordingSink())
    params = device_preset("pc", sample_rate=fs, carrier_offset=offset, snr_db=args.snr, window_size=N)
    buf = synthesize(report, params)
    x = buf.samples[: len(buf.samples) // N * N].reshape(-1, N)
    power = bin_power(x, offset, fs)
    t = np.arange(len(power)) * N / fs

    fig, (a0, a1) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    a0.specgram(buf.samples, NFFT=N, Fs=fs, noverlap=0, sides="twosided")
    a0.axhline(offset, color="w", lw=0.5, ls="--")
    a0.set_ylabel("baseband Hz")
    a1.plot(t, 10 * np.log10(power + 1e-20))
    a1.set_xlabel("s")
    a1.set_ylabel("tone power, dB")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
