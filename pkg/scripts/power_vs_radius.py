"""Average transmit power versus the location uncertainty radius D."""
import argparse
from dataclasses import replace

from uavbeam.experiments import aggregate, load_config, run_points, sweep_points, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.toml")
    ap.add_argument("--realizations", type=int)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--out", default="power_vs_radius.csv")
    args = ap.parse_args()
    cfg = replace(load_config(args.config, realizations=args.realizations), rho=[args.rho])
    records = run_points(cfg, sweep_points(cfg, "radius"))
    with open(args.out, "w", newline="") as fh:
        write_csv(records, fh)
    for row in aggregate(records):
        print(f"{row.scheme:10s} D={row.radius:5.1f} m  ok {row.n_success:3d}/{row.count:<3d} "
              f"{row.mean_power_dbm:8.3f} dBm")


if __name__ == "__main__":
    main()
