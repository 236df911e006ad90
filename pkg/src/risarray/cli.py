"""Command-line entry point: ``risarray run|validate|rerun|oracle``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import oracles
from .config import PRESETS, load_scenario, preset
from .exceptions import ConfigError, RisArrayError
from .harness import EXPERIMENTS, METRICS, Campaign, load_manifest, run_campaign

SEED_ENV = "RISARRAY_SEED"

log = logging.getLogger("risarray")


def _scenario(arg: str):
    if arg in PRESETS and not Path(arg).exists():
        return preset(arg)
    return load_scenario(arg)


def _sweep(text: str | None):
    if text is None:
        return None
    out = []
    for item in text.split(","):
        item = item.strip()
        if item in ("continuous", "random", "optimized"):
            out.append(item)
        else:
            v = float(item)
            out.append(int(v) if v.is_integer() and "." not in item else v)
    return out


def _seed(args, fallback):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return fallback


def cmd_run(args) -> int:
    cfg = _scenario(args.scenario)
    if args.fading is not None:
        cfg = cfg.replace(n_fading=args.fading)
    cfg.validate()
    metrics = tuple(m.strip() for m in args.metrics.split(",")) if args.metrics else METRICS
    campaign = Campaign(cfg, args.experiment, args.drops, Path(args.out), _seed(args, cfg.rng_seed),
                        _sweep(args.sweep), metrics, args.workers)
    result = run_campaign(campaign)
    for path in result["files"]:
        print(path)
    print(result["manifest_path"])
    return 0


def cmd_rerun(args) -> int:
    data = load_manifest(args.manifest)
    out = Path(args.out) if args.out else Path(args.manifest).parent
    result = run_campaign(Campaign.from_manifest(data, out, args.workers))
    for path in result["files"]:
        print(path)
    print(result["manifest_path"])
    return 0


def cmd_validate(args) -> int:
    cfg = _scenario(args.scenario)
    cfg.validate()
    print(f"ok: N_A={cfg.n_active} N_R={cfg.n_ris} K={cfg.ue_count} mode={cfg.ris_mode} "
          f"architecture={cfg.architecture}")
    return 0


def cmd_oracle(args) -> int:
    fn = oracles.ORACLES.get(args.name)
    if fn is None:
        print(f"unknown oracle {args.name!r}; available: {', '.join(sorted(oracles.ORACLES))}",
              file=sys.stderr)
        return 2
    print(json.dumps(fn(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risarray", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment campaign")
    run.add_argument("--scenario", required=True, help="YAML scenario file or preset name")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--drops", type=int, required=True)
    run.add_argument("--seed", type=int, default=None,
                     help=f"campaign seed (default: ${SEED_ENV}, then the scenario seed)")
    run.add_argument("--out", required=True)
    run.add_argument("--sweep", default=None, help="comma-separated sweep values")
    run.add_argument("--metrics", default=None, help="comma-separated subset of pcsi,lb")
    run.add_argument("--fading", type=int, default=None, help="fading realizations per drop")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=cmd_run)

    rerun = sub.add_parser("rerun", help="re-run a campaign from its manifest")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--out", default=None)
    rerun.add_argument("--workers", type=int, default=1)
    rerun.set_defaults(func=cmd_rerun)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)

    orc = sub.add_parser("oracle", help="print reference values from the brute-force oracles")
    orc.add_argument("name")
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return 2
    except (RisArrayError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
