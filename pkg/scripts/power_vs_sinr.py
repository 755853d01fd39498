"""Average transmit power versus the SINR requirement, at a fixed rho."""
import argparse
from dataclasses import replace

from uavbeam.experiments import aggregate, load_config, run_points, sweep_points, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.toml")
    ap.add_argument("--realizations", type=int)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--out", default="power_vs_sinr.csv")
    args = ap.parse_args()
    cfg = load_config(args.config, realizations=args.realizations)
    cfg = replace(cfg, rho=[args.rho])
    records = run_points(cfg, sweep_points(cfg, "sinr"))
    with open(args.out, "w", newline="") as fh:
        write_csv(records, fh)
    for row in aggregate(records):
        print(f"{row.scheme:10s} {row.sinr_db:5.1f} dB  ok {row.n_success:3d}/{row.count:<3d} "
              f"outage {row.n_outage:3d}  {row.mean_power_dbm:8.3f} dBm")


if __name__ == "__main__":
    main()
