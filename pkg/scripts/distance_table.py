"""Print the distance-to-SNR table and the expected BER for each reachable cell."""
import argparse

from ethemit.harness import DISTANCES_CM, SNR_AT_DISTANCE, ExperimentSpec, distance_table, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rate", type=float, default=5.0)
    ap.add_argument("--bits", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(distance_table())
    snrs = sorted({s for row in SNR_AT_DISTANCE.values() for s in row if s is not None})
    report = run_experiment(ExperimentSpec(bit_rates=(args.rate,), snr_points=tuple(snrs),
                                           bits_per_point=args.bits, seed=args.seed))
    print(f"\nsimulated BER at {args.rate:g} bit/s")
    print("method/device      " + " ".join(f"{d:>6}" for d in DISTANCES_CM))
    for (method, device), row in SNR_AT_DISTANCE.items():
        cells = ["     -" if s is None else f"{100 * report.cell(args.rate, s).ber:5.1f}%" for s in row]
        print(f"{method + '/' + device:<18} " + " ".join(cells))


if __name__ == "__main__":
    main()
