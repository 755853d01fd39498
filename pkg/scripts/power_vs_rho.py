"""Average transmit power of every scheme versus the AoD error level rho.

    python3 scripts/power_vs_rho.py --realizations 100 --out rho.csv
"""
import argparse
from dataclasses import replace

from uavbeam.experiments import aggregate, load_config, run_points, sweep_points, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.toml")
    ap.add_argument("--realizations", type=int)
    ap.add_argument("--antennas", type=int, nargs="+", default=[4, 6])
    ap.add_argument("--out", default="power_vs_rho.csv")
    args = ap.parse_args()
    cfg = load_config(args.config, realizations=args.realizations)
    points = [replace(p, n_antennas=n) for n in args.antennas for p in sweep_points(cfg, "rho")]
    records = run_points(cfg, points)
    with open(args.out, "w", newline="") as fh:
        write_csv(records, fh)
    print(f"{'scheme':10s} {'N_T':>3s} {'rho':>5s} {'ok':>7s} {'mean dBm':>9s}")
    for row in aggregate(records):
        print(f"{row.scheme:10s} {row.n_antennas:3d} {row.rho:5.2f} {row.n_success:3d}/{row.count:<3d} "
              f"{row.mean_power_dbm:9.3f}")


if __name__ == "__main__":
    main()
