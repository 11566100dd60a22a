"""Command line entry point.

    dnlslab <experiment> --config FILE [--set key=value ...] --out DIR
    dnlslab sweep --config FILE --vary key=v1,v2 [--vary ...] --out DIR [--workers K]

Exit status: 0 when every criterion passes, 1 when a criterion fails,
2 for invalid configuration, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ._validation import HypothesisError
from .harness import (
    EXPERIMENTS,
    ConfigError,
    apply_overrides,
    emit_report,
    load_config,
    parse_value,
    run_experiment,
    validate,
)

EXIT_OK = 0
EXIT_CRITERIA = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3

logger = logging.getLogger("dnlslab")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnlslab", description="Damped NLS scattering laboratory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p)
    sw = sub.add_parser("sweep", help="run a parameter sweep in parallel")
    _common(sw)
    sw.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2",
                    help="sweep a dotted key over comma-separated values")
    sw.add_argument("--workers", type=int, default=None, help="worker processes")
    return parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted config key (repeatable)")
    p.add_argument("--out", required=True, help="output directory")


def run_one(experiment: str | None, config: str | None, overrides, out: str) -> int:
    """Validate, run and emit one experiment; returns the exit status."""
    try:
        cfg = load_config(config)
        if experiment is not None:
            cfg["experiment"] = experiment
        cfg = apply_overrides(cfg, overrides)
        cfg["output_dir"] = str(out)
        exp_cfg = validate(cfg)
    except (ConfigError, HypothesisError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        artifact = run_experiment(exp_cfg)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        logger.exception("experiment failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        emit_report(artifact, out)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    for c in artifact.criteria:
        print(c.line())
    if artifact.status != "ok":
        print(f"run status: {artifact.status}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if artifact.passed else EXIT_CRITERIA


def _parse_vary(items) -> list[tuple[str, list]]:
    out = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--vary {item!r} is not of the form key=v1,v2")
        key, vals = item.split("=", 1)
        values = [parse_value(v, item) for v in vals.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"--vary {item!r} lists no values")
        out.append((key.strip(), values))
    return out


def _sweep_job(args):
    config, overrides, out = args
    return run_one(None, config, overrides, out)


def run_sweep(config, overrides, vary, out, workers) -> int:
    try:
        axes = _parse_vary(vary)
        # validate every combination before launching anything
        combos = []
        for values in itertools.product(*[v for _, v in axes]):
            extra = [f"{k}={json.dumps(v)}" for (k, _), v in zip(axes, values)]
            cfg = apply_overrides(load_config(config), list(overrides) + extra)
            validate(cfg)
            combos.append(extra)
    except (ConfigError, HypothesisError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(config, list(overrides) + extra, str(root / f"run_{i:03d}")) for i, extra in enumerate(combos)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_sweep_job, jobs))
    manifest = [
        {"dir": Path(j[2]).name, "overrides": extra, "exit_code": c} for j, extra, c in zip(jobs, combos, codes)
    ]
    (root / "sweep.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for m in manifest:
        print(f"{m['dir']}: exit {m['exit_code']} {' '.join(m['overrides'])}")
    return max(codes) if codes else EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "sweep":
        return run_sweep(args.config, args.overrides, args.vary, args.out, args.workers)
    return run_one(args.command, args.config, args.overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
