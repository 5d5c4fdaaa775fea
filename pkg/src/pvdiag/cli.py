"""Command-line entry point.

Every subcommand takes a JSON run-config file; --seed, --workers and
--out override the matching config fields.  Failures exit nonzero with
a one-line JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import PvDiagError
from .pipeline import (RunConfig, correct_cmd, export_images, generate,
                       load_manifest, regenerate_check, run_experiment,
                       run_grid, stratified_split)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run-config JSON file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None,
                        help="override the config output_dir")


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvdiag",
        description="Simulate PV-array fault curves, featurize and classify them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate, featurize and write a dataset")
    _add_common(p)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel simulation processes")
    p.add_argument("--verify", action="store_true",
                   help="regenerate in memory afterwards and compare checksums")

    p = sub.add_parser("split", help="print the deterministic split of a dataset")
    _add_common(p)

    p = sub.add_parser("train", help="train the configured model on a dataset")
    _add_common(p)

    p = sub.add_parser("evaluate", help="alias of train (train + test report)")
    _add_common(p)

    p = sub.add_parser("grid", help="sweep strategy x channels x architecture")
    _add_common(p)
    p.add_argument("--strategies", default=None,
                   help="comma-separated subset to sweep")
    p.add_argument("--channel-modes", default=None,
                   help="comma-separated subset to sweep")
    p.add_argument("--architectures", default=None,
                   help="comma-separated subset to sweep")

    p = sub.add_parser("correct", help="run a correction procedure demo")
    _add_common(p)

    p = sub.add_parser("export-images", help="render feature channels to PNGs")
    _add_common(p)
    p.add_argument("--limit", type=int, default=None,
                   help="only the first N samples")
    return parser


def _dispatch(args: argparse.Namespace) -> dict:
    config = _load_config(args)
    if args.command == "generate":
        manifest = generate(config, workers=args.workers)
        out = {"output_dir": config.output_dir,
               "n_samples": len(manifest["samples"]),
               "n_rejected_low_g": manifest["n_rejected_low_g"]}
        if args.verify:
            out["verify"] = regenerate_check(config.output_dir,
                                             workers=args.workers)
        return out
    if args.command == "split":
        manifest = load_manifest(config.output_dir)
        labels = [r["class_value"] for r in manifest["samples"]]
        splits = stratified_split(labels, config.seed,
                                  test_fraction=config.test_fraction,
                                  val_fraction_of_train=config.val_fraction_of_train)
        return {"matches_manifest": splits == {
                    k: list(v) for k, v in manifest["splits"].items()},
                "sizes": {k: len(v) for k, v in splits.items()},
                "splits": splits}
    if args.command in ("train", "evaluate"):
        return run_experiment(config)
    if args.command == "grid":
        kwargs = {}
        if args.strategies:
            kwargs["strategies"] = tuple(args.strategies.split(","))
        if args.channel_modes:
            kwargs["channel_modes"] = tuple(args.channel_modes.split(","))
        if args.architectures:
            kwargs["architectures"] = tuple(args.architectures.split(","))
        return {"rows": run_grid(config, **kwargs)}
    if args.command == "correct":
        return correct_cmd(config)
    if args.command == "export-images":
        n = export_images(config.output_dir, limit=args.limit)
        return {"n_images": n}
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = _dispatch(args)
    except PvDiagError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
