"""Command line front end for the Monte Carlo experiment driver."""

import argparse
import sys
from dataclasses import replace

from .harness import (BEAMFORMER_NAMES, ExperimentSpec, pilot_sweep,
                      run_experiment, save_results, save_sweep)
from .scenario import SystemConfig, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfmimo",
        description="Max-min downlink beamforming Monte Carlo experiments for "
                    "a cell-free massive MIMO network.")
    parser.add_argument("--config", default=None,
                        help="key = value config file (defaults used if omitted)")
    parser.add_argument("--beamformer", default="all",
                        choices=sorted(BEAMFORMER_NAMES) + ["all"],
                        help="which precoder(s) to evaluate")
    parser.add_argument("--realizations", type=int, default=1,
                        help="number of Monte Carlo realizations")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides the config's rng_seed)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--pilot-sweep", default=None, metavar="T1,T2,...",
                        help="comma-separated uplink pilot lengths to sweep")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for realizations")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config) if args.config else SystemConfig()
    if args.seed is not None:
        config = replace(config, rng_seed=args.seed)
    beamformers = BEAMFORMER_NAMES if args.beamformer == "all" else (args.beamformer,)
    sweep_values = None
    if args.pilot_sweep:
        sweep_values = [int(part) for part in args.pilot_sweep.split(",") if part]

    spec = ExperimentSpec(config=config, beamformers=beamformers,
                          num_realizations=args.realizations,
                          pilot_sweep=sweep_values, output_dir=args.out,
                          jobs=args.jobs)

    if sweep_values:
        sweep = pilot_sweep(spec)
        save_sweep(sweep, spec, args.out)
        for row in sweep.rows:
            print(f"tau_p={row.tau_p:4d} {row.beamformer}: "
                  f"mean={row.mean_bps:.4g} bps  min={row.min_bps:.4g} bps  "
                  f"mean-min={row.mean_min_bps:.4g} bps")
    else:
        result = run_experiment(spec)
        save_results(result, spec, args.out)
        for name in beamformers:
            samples = result.samples(name)
            if samples.size == 0:
                print(f"{name}: no surviving realizations")
                continue
            print(f"{name}: {samples.size} samples, "
                  f"mean={samples.mean():.4g} bps, min={samples.min():.4g} bps")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
