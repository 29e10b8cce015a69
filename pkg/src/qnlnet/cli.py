"""Command line entry point: ``qnlnet train | eval | sweep``.

Every flag can also be set through an environment variable named
``QNLNET_`` plus the flag name in upper case with dashes turned into
underscores (``--reps-encoder`` -> ``QNLNET_REPS_ENCODER``). Flags given on
the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import QnlNetError
from .harness import RunConfig, evaluate_checkpoint, sweep, train

ENV_PREFIX = "QNLNET_"


def _classes(text):
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated class ids, got {text!r}") from None
    return a, b


def _encoder_mode(text):
    modes = {"data": "data_bound", "data_bound": "data_bound", "trainable": "trainable_scale",
             "trainable_scale": "trainable_scale"}
    if text not in modes:
        raise argparse.ArgumentTypeError(f"encoder mode must be data or trainable, got {text!r}")
    return modes[text]


def _add(parser, flag, **kw):
    env = ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper()
    if env in os.environ:
        kw["default"] = os.environ[env]
        kw["required"] = False
    parser.add_argument(flag, **kw)


def _add_run_flags(p, with_reps=True):
    _add(p, "--dataset", choices=("mnist", "cifar10"), default="mnist")
    _add(p, "--classes", type=_classes, default="0,1")
    _add(p, "--head", choices=("cnn", "pca"), default="pca")
    _add(p, "--ansatz", type=int, choices=(0, 1, 2), default=0)
    if with_reps:
        _add(p, "--reps-encoder", type=int, default=1)
        _add(p, "--reps-ansatz", type=int, default=1)
    _add(p, "--epochs", type=int, default=100)
    _add(p, "--lr", type=float, default=1.5e-4)
    _add(p, "--gamma", type=float, default=0.9)
    _add(p, "--seed", type=int, default=0)
    _add(p, "--train-limit", type=int, default=None)
    _add(p, "--test-limit", type=int, default=None)
    _add(p, "--encoder-mode", type=_encoder_mode, default="data")
    _add(p, "--readout-qubit", type=int, default=0)
    _add(p, "--data-dir", required=True)
    _add(p, "--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="qnlnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("train", help="train one configuration"))
    p = sub.add_parser("eval", help="evaluate a checkpoint on its test split")
    _add(p, "--checkpoint", required=True)
    _add(p, "--data-dir", required=True)
    _add(p, "--test-limit", type=int, default=None)
    _add_run_flags(sub.add_parser("sweep", help="train all nine (r, D) combinations"), with_reps=False)
    return parser


def _config(args, reps=True):
    # env-provided defaults arrive as strings and skip argparse's type conversion
    classes = args.classes if isinstance(args.classes, tuple) else _classes(args.classes)
    mode = _encoder_mode(args.encoder_mode)
    opt_int = lambda v: None if v in (None, "") else int(v)  # noqa: E731
    return RunConfig(
        dataset=args.dataset, classes=classes, head=args.head, ansatz=int(args.ansatz),
        reps_r=int(args.reps_encoder) if reps else 1, reps_D=int(args.reps_ansatz) if reps else 1,
        epochs=int(args.epochs), lr=float(args.lr), gamma=float(args.gamma), seed=int(args.seed),
        train_limit=opt_int(args.train_limit), test_limit=opt_int(args.test_limit), encoder_mode=mode,
        readout=int(args.readout_qubit), data_dir=args.data_dir, out_dir=args.out,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            state = train(_config(args))
            last = state.metrics[-1]
            result = {"epochs": state.epoch, "train_acc": last.train_accuracy, "test_acc": last.test_accuracy,
                      "best_test_acc": state.best_test_acc}
        elif args.command == "eval":
            limit = None if args.test_limit in (None, "") else int(args.test_limit)
            result = {"test_acc": evaluate_checkpoint(args.checkpoint, args.data_dir, limit)}
        else:
            result = sweep(_config(args, reps=False))["summary"]
    except QnlNetError as exc:
        print(f"error kind={exc.kind} message={json.dumps(str(exc))}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error kind=io message={json.dumps(str(exc))}", file=sys.stderr)
        return 2
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
