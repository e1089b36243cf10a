"""Trainer command line: train from a config JSON, emit parity fixtures."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fixtures, formats, train as train_mod


def cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    config = train_mod.TrainConfig(**raw)
    try:
        report = train_mod.train(config)
    except train_mod.DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2))
    final = report["final"]
    print(f"trained on {report['train_samples']} samples, "
          f"val accuracy {final['val_accuracy']:.4f}, val IoU {final['val_iou']:.4f} "
          f"-> {report['output']}")
    return 0


def cmd_evaluate(args) -> int:
    report = train_mod.evaluate(args.weights, args.dataset)
    print(json.dumps(report, indent=2))
    return 0


def cmd_fixture(args) -> int:
    tensors = None
    if args.weights:
        tensors = formats.load_weights(args.weights)
    info = fixtures.export_parity_fixture(args.out, seed=args.seed, tensors=tensors)
    print(f"fixture with {info['windows']} windows -> {info['fixture']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="safenet-train")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate exported weights on a dataset")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fixture", help="emit a cross-runtime parity fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", help="use these weights instead of random ones")
    p.set_defaults(func=cmd_fixture)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, formats.FormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
