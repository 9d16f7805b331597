"""Command line entry point: ``barcsim simulate | validate-config | list-studies | schema``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
"""

import argparse
import json
import sys

from .errors import BarcError, ConfigError
from .harness import CONFIG_SCHEMA, STUDIES, emit_results, load_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="barcsim", description="BARC interference-suppression Monte Carlo simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a study from a JSON config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--study", choices=sorted(STUDIES))
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int, dest="num_runs")
    sim.add_argument("--out", default="results")
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--emit-plot", action="store_true")

    val = sub.add_parser("validate-config", help="check a config file")
    val.add_argument("path")
    sub.add_parser("list-studies", help="list study kinds")
    sub.add_parser("schema", help="print the config JSON schema")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "list-studies":
        for name, text in STUDIES.items():
            print(f"{name:20s} {text}")
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    path = args.path if args.command == "validate-config" else args.config
    overrides = {}
    if args.command == "simulate":
        overrides = {"study": args.study, "seed": args.seed, "num_runs": args.num_runs}
    try:
        cfg = load_config(path, overrides)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate-config":
        print(f"{path}: ok ({cfg.study}, {len(cfg.grid)} grid points x {cfg.num_runs} runs)")
        return EXIT_OK
    if args.threads < 1:
        print("config error at --threads: must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg, threads=args.threads)
        files = emit_results(result, args.out, emit_plot=args.emit_plot)
    except (BarcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for pt in result.points:
        ber = "NA" if pt.ber is None else f"{pt.ber:.5f} +/- {pt.stderr:.5f}"
        note = f"  ({pt.failed_runs} failed runs)" if pt.failed_runs else ""
        print(f"{cfg.study} {pt.grid_value}: BER {ber}{note}")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
