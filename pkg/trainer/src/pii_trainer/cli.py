"""trainer command line: ``trainer fit`` and ``trainer predict``."""

from __future__ import annotations

import argparse
import logging
import sys

from .training import TrainSpec, fit, predict_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainer",
        description="Fine-tune encoders for PII multilabel classification and span tagging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model from a JSON train spec")
    p.add_argument("--task", choices=["multilabel", "span"], help="overrides the spec's task")
    p.add_argument("--config", required=True, help="TrainSpec JSON file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="run a saved model over a dataset")
    p.add_argument("--model", required=True, help="artifact directory from fit")
    p.add_argument("--input", required=True, help="annotation-native JSONL")
    p.add_argument("--output", required=True, help="predictions JSONL path")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_predict)
    return parser


def cmd_fit(args) -> int:
    spec = TrainSpec.from_file(args.config, task=args.task)
    out = fit(spec)
    print(f"fit[{spec.task}]: artifacts in {out}, test predictions in {out / 'predictions.jsonl'}")
    return 0


def cmd_predict(args) -> int:
    count = predict_file(args.model, args.input, args.output, threshold=args.threshold)
    print(f"predict: wrote {count} rows to {args.output}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
