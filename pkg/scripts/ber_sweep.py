"""BER/FER sweep over SNR and bit rate; prints a table and optionally writes CSV."""
import argparse
import time

from ethemit.harness import DEFAULT_SNRS, ExperimentSpec, render_report, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="pc")
    ap.add_argument("--rates", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    ap.add_argument("--snrs", type=float, nargs="+", default=[-20.0, *DEFAULT_SNRS])
    ap.add_argument("--bits", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv")
    args = ap.parse_args()
    spec = ExperimentSpec(preset=args.preset, bit_rates=tuple(args.rates), snr_points=tuple(args.snrs),
                          bits_per_point=args.bits, seed=args.seed, workers=args.workers)
    t0 = time.perf_counter()
    report = run_experiment(spec)
    print(render_report(report, "table"))
    print(f"{len(report.cells)} cells in {time.perf_counter() - t0:.1f} s")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(render_report(report, "csv"))


if __name__ == "__main__":
    main()
