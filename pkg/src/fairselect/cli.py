"""Command-line entry point: ``fairselect {synth,run,sweep,ablate,report}``.

Exit codes: 0 success, 1 validation error, 2 runtime or numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .schema import ValidationError

log = logging.getLogger("fairselect")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def cmd_synth(spec_file, seed: int | None, out_dir) -> tuple[Path, Path]:
    from .dataset import generate_synthetic, write_csv

    raw = cfgmod.read_file(spec_file) if spec_file else {}
    bad = [k for k in raw if not k.startswith("synth.")]
    if bad:
        raise cfgmod.ConfigError(f"synthetic spec file may only hold synth.* keys, got {bad[0]!r}")
    spec = cfgmod.synthetic_spec(raw)
    if seed is None:
        seed = int(raw.get("synth.seed", "0"))
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out_dir}: {exc}") from None
    ds = generate_synthetic(spec, seed)
    paths = write_csv(ds, out_dir)
    doc = {
        "kind": "synth",
        "seed": seed,
        "n_papers": len(ds),
        "spec": {k: (dict(v) if hasattr(v, "items") else list(v) if isinstance(v, tuple) else v)
                 for k, v in spec.__dict__.items()},
        "config_hash": cfgmod.config_hash(raw),
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value experiment config")
    common.add_argument("--seed", type=int, default=None, help="override experiment.seed / synth.seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel grid cells")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fairselect", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic papers.csv/authors.csv pair")
    sub.add_parser("run", parents=[common], help="train, select and evaluate one fairness setting")
    sub.add_parser("sweep", parents=[common], help="lambda sweep for race-only and country-only modes")
    sub.add_parser("ablate", parents=[common], help="lambda x (w_race, w_country) grid in combined mode")
    rep = sub.add_parser("report", parents=[common], help="re-render tables/plots of a stored sweep/ablation")
    rep.add_argument("run_dir", type=Path, nargs="?", help="directory written by sweep/ablate (default --out)")
    return parser


def _experiment(args, require_fairness=False):
    if args.config is None:
        raise cfgmod.ConfigError("--config is required for this command")
    return cfgmod.build(cfgmod.read_file(args.config), require_fairness=require_fairness, seed=args.seed)


def dispatch(args) -> None:
    from . import experiment

    if args.command == "synth":
        papers, authors = cmd_synth(args.config, args.seed, args.out)
        print(f"wrote {papers} and {authors}")
    elif args.command == "run":
        report = experiment.cmd_run(_experiment(args, require_fairness=True), args.out)
        summary = report.summary()
        for key in sorted(summary):
            print(f"{key:>24s} {summary[key]: .4f}")
    elif args.command == "sweep":
        print(experiment.cmd_sweep(_experiment(args), args.out, args.jobs, args.format))
    elif args.command == "ablate":
        print(experiment.cmd_ablate(_experiment(args), args.out, args.jobs, args.format))
    elif args.command == "report":
        print(experiment.render(args.run_dir or args.out, args.format))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        dispatch(args)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure [{stage}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
