"""``bpfrls`` command line.

    bpfrls preset list
    bpfrls simulate   --preset example1 --out runs/sim
    bpfrls identify   --preset example1 --sigma-v 0.45 --seed 3 --out runs/ex1
    bpfrls compare    --preset example1 --sigma-v 0.8 --out runs/cmp
    bpfrls montecarlo --preset example2 --runs 50 --jobs 4 --out runs/mc

``--config`` reads a YAML file merged over the preset (if any); the flags
override both.
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from ..joint import ESTIMATORS, WEIGHT_MODES
from . import io, runner
from .config import ConfigError, load_config, load_preset, preset_names


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="built-in experiment (see 'preset list')")
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="base seed for data and filter")
    p.add_argument("--length", type=int, help="identification samples L")
    p.add_argument("--sigma-v", type=float, nargs="+", dest="sigma_v",
                   help="measurement noise standard deviation(s); one output cell each")
    p.add_argument("--variant", help="model variant stored in the preset")
    p.add_argument("--jobs", type=int, help="worker processes for sweep cells and runs")


def _add_estimator(p: argparse.ArgumentParser) -> None:
    p.add_argument("--particles", type=int, help="particle count N")
    p.add_argument("--weight-mode", choices=WEIGHT_MODES, dest="weight_mode")
    p.add_argument("--estimator", choices=ESTIMATORS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpfrls", description="Bilinear system identification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate datasets only")
    _add_common(p)

    p = sub.add_parser("identify", help="simulate and identify at each noise level")
    _add_common(p)
    _add_estimator(p)

    p = sub.add_parser("compare", help="run several estimators on the same data")
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--estimators", nargs="+", help="estimator names to compare (overrides the config list)")

    p = sub.add_parser("montecarlo", help="repeat identification over consecutive seeds")
    _add_common(p)
    _add_estimator(p)
    p.add_argument("--runs", type=int, help="number of runs M (>= 2)")

    p = sub.add_parser("preset", help="inspect built-in presets")
    psub = p.add_subparsers(dest="preset_command", required=True)
    psub.add_parser("list", help="list preset names")
    show = psub.add_parser("show", help="print a preset as YAML")
    show.add_argument("name")
    return parser


def overrides_from_args(args) -> dict:
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        over["jobs"] = args.jobs
    put("data", "length", getattr(args, "length", None))
    put("data", "sigma_v", getattr(args, "sigma_v", None))
    put("model", "variant", getattr(args, "variant", None))
    put("estimator", "particles", getattr(args, "particles", None))
    put("estimator", "weight_mode", getattr(args, "weight_mode", None))
    put("estimator", "kind", getattr(args, "estimator", None))
    put("compare", "estimators", getattr(args, "estimators", None))
    put("montecarlo", "runs", getattr(args, "runs", None))
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            if args.preset_command == "list":
                for name in preset_names():
                    print(f"{name}\t{load_preset(name).get('description', '').strip()}")
            else:
                print(yaml.safe_dump(load_preset(args.name), sort_keys=False), end="")
            return 0
        if not args.preset and not args.config:
            raise ConfigError("give --preset and/or --config")
        cfg = load_config(args.config, args.preset, overrides_from_args(args))
        if args.command == "simulate":
            files = runner.simulate_experiment(cfg, args.out)
        elif args.command == "identify":
            files = runner.run_experiment(cfg, args.out)
        elif args.command == "compare":
            files = runner.compare(cfg, args.out)
        else:
            files = runner.montecarlo(cfg, args.out)
    except (ConfigError, io.OutputError, FileNotFoundError) as exc:
        print(f"bpfrls: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"command": args.command, "files": [str(f) for f in files]}, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
