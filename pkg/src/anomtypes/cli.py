"""Command line entry point.

Exit codes: 0 success, 2 input error, 3 reference error (an artifact points
at a series or channel that does not exist), 4 internal error.
"""

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from ._validation import SchemaError, SpacingError
from .config import PipelineConfig, load_config
from .features.base import MissingReferenceError
from . import pipeline

EXIT_OK, EXIT_INPUT, EXIT_REFERENCE, EXIT_INTERNAL = 0, 2, 3, 4

logger = logging.getLogger("anomtypes")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, help="worker processes for sweep tasks")
    common.add_argument("--out", type=Path, help="run directory (default from config)")
    common.add_argument("--input", action="append", type=Path, dest="inputs",
                        help="input CSV, repeatable; replaces the configured inputs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="anomtypes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("detect", parents=[common], help="run MDI and DAMP")
    ex = sub.add_parser("extract", parents=[common], help="build feature matrices")
    ex.add_argument("--anomalies", type=Path, help="detect output directory")
    cl = sub.add_parser("cluster", parents=[common], help="K sweep for every feature set")
    cl.add_argument("--features", type=Path, help="extract output directory")
    ev = sub.add_parser("evaluate", parents=[common], help="metrics and plot data")
    ev.add_argument("--clusters", type=Path, help="cluster output directory")
    sub.add_parser("pipeline", parents=[common], help="all stages plus manifest")
    fx = sub.add_parser("make-fixture", parents=[common],
                        help="write the synthetic three-subsystem fixture and its config")
    fx.add_argument("--length", type=int, default=20_000)
    sub.add_parser("default-config", parents=[common], help="print the default config")
    return p


def _config(args):
    config = load_config(args.config) if args.config else PipelineConfig()
    changes = {"seed": args.seed, "jobs": args.jobs}
    if args.out is not None:
        changes["out"] = str(args.out)
    if args.inputs:
        changes["inputs"] = [str(p) for p in args.inputs]
    return config.replace(**changes)


def _make_fixture(args):
    from .fixture import write_fixture

    out = args.out or Path("fixture")
    try:
        paths = write_fixture(out, n=args.length, seed=0 if args.seed is None else args.seed)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    cfg = PipelineConfig(inputs=[p.name for p in paths], groups="groups.json", out="run")
    (Path(out) / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    print(Path(out) / "config.json")


def run(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")
    if args.verb == "make-fixture":
        _make_fixture(args)
        return EXIT_OK
    config = _config(args)
    if args.verb == "default-config":
        print(config.to_json())
        return EXIT_OK
    if args.verb == "detect":
        pipeline.cmd_detect(config)
    elif args.verb == "extract":
        pipeline.cmd_extract(config, args.anomalies)
    elif args.verb == "cluster":
        pipeline.cmd_cluster(config, args.features)
    elif args.verb == "evaluate":
        print(pipeline.cmd_evaluate(config, args.clusters))
    elif args.verb == "pipeline":
        manifest = pipeline.cmd_pipeline(config)
        print(json.loads(Path(manifest).read_text())["run_id"])
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except MissingReferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFERENCE
    except (SchemaError, SpacingError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
