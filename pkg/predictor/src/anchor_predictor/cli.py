"""Command line: train the predictor on a positions dump, emit predictions.

Exit codes: 0 success, 2 configuration or data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .data import load_positions, to_segments
from .emit import emit_predictions
from .model import Hyperparams, InsufficientDataError, load_predictor, save_predictor, train_predictor

logger = logging.getLogger(__name__)


def _parse_slots(text: str):
    first, sep, last = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("expected FIRST..LAST")
    return int(first), int(last)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchor-predictor",
        description="Recurrent next-slot position predictor for the anchor-point simulator",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_train = sub.add_parser("train", help="train on a positions CSV and report held-out RMSE")
    p_train.add_argument("--positions", required=True, help="positions CSV (slot,vehicle_id,x,y)")
    p_train.add_argument("--model", required=True, help="output model path")
    p_train.add_argument("--window", type=int, default=5, help="past slots per sample (default 5)")
    p_train.add_argument("--hidden", type=int, default=50, help="hidden units per recurrent layer (default 50)")
    p_train.add_argument("--layers", type=int, default=2, help="stacked recurrent layers (default 2)")
    p_train.add_argument("--epochs", type=int, default=10, help="training epochs (default 10)")
    p_train.add_argument("--batch-size", type=int, default=1000, help="samples per batch (default 1000)")
    p_train.add_argument("--split", type=float, default=0.2, help="training fraction of sequences (default 0.2)")
    p_train.add_argument("--lr", type=float, default=1e-3, help="learning rate (default 0.001)")
    p_train.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")

    p_emit = sub.add_parser("emit", help="write a predictions CSV for the simulator")
    p_emit.add_argument("--positions", required=True, help="positions CSV (slot,vehicle_id,x,y)")
    p_emit.add_argument("--model", help="trained model path (not needed with --oracle)")
    p_emit.add_argument("--out", required=True, help="predictions CSV output path")
    p_emit.add_argument("--slots", type=_parse_slots, default=None, help="emit slot range FIRST..LAST (default: all)")
    p_emit.add_argument("--sidecar", default=None, help="optional fallback report path")
    p_emit.add_argument("--oracle", action="store_true", help="export true positions (perfect-prediction mode)")
    return parser


def cmd_train(args) -> int:
    hp = Hyperparams(
        window=args.window,
        hidden_units=args.hidden,
        layers=args.layers,
        epochs=args.epochs,
        batch_size=args.batch_size,
        train_fraction=args.split,
        learning_rate=args.lr,
    )
    segments = to_segments(load_positions(args.positions))
    trained = train_predictor(segments, hp, seed=args.seed)
    save_predictor(trained, args.model)
    logger.info(
        "trained on %d sequences (%d samples), held out %d sequences (%d samples)",
        trained.report.train_sequences,
        trained.report.train_samples,
        trained.report.held_out_sequences,
        trained.report.held_out_samples,
    )
    print(trained.report.as_text())
    return 0


def cmd_emit(args) -> int:
    segments = to_segments(load_positions(args.positions))
    if args.oracle:
        trained = None
    elif args.model:
        trained = load_predictor(args.model)
    else:
        raise ValueError("emit needs --model unless --oracle is set")
    slots = args.slots or (None, None)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        report = emit_predictions(
            trained, segments, fh, slot_first=slots[0], slot_last=slots[1], oracle=args.oracle
        )
    if args.sidecar:
        with open(args.sidecar, "w", encoding="utf-8") as fh:
            fh.write(report.as_text())
    logger.info(
        "emitted %d rows (%d model, %d fallback)",
        report.rows, report.model_rows, report.fallback_rows,
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return {"train": cmd_train, "emit": cmd_emit}[args.command](args)
    except InsufficientDataError as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("%s", exc)
        return 3
    except ValueError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
