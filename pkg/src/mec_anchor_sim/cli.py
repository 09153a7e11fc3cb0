"""Command-line surface: graph building, single runs, comparative sweeps, and
predictor evaluation. Data goes to standard output (or --out) as CSV;
diagnostics go to standard error.

Exit codes: 0 success, 2 configuration error, 3 I/O or coverage error,
4 constraint violation in strict mode.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from collections import deque

from . import mobility, prediction
from .simulator import (
    ConfigError,
    ConstraintViolationError,
    RunConfig,
    SlotResult,
    run_simulation,
    open_trace,
    sweep,
)
from .strategies import StrategyKind
from .topology import build_graph, export_edges_csv, export_sites_csv, load_sites

logger = logging.getLogger(__name__)

METRICS_HEADER = (
    "slot,strategy,n_anchor_points,alpha1,alpha2,alpha3,vehicles,"
    "f1_p90,f1_mean,f2,f3,scalarized,runtime_ms,handovers"
)

ALL_STRATEGIES = [k.value for k in StrategyKind if k is not StrategyKind.EXACT_ORACLE]


def _env_seed() -> int:
    return int(os.environ.get("MEC_ANCHOR_SIM_SEED", "0"))


def _parse_slots(text: str) -> tuple[int, int]:
    first, sep, last = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("expected FIRST..LAST")
    try:
        return int(first), int(last)
    except ValueError:
        raise argparse.ArgumentTypeError("expected integer slot bounds") from None


def _parse_int_list(text: str) -> list[int]:
    """Comma list of ints, each element optionally a range `a..b` or `a..b:step`."""
    out: list[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if ".." in piece:
            bounds, _, step = piece.partition(":")
            a, _, b = bounds.partition("..")
            out.extend(range(int(a), int(b) + 1, int(step) if step else 1))
        else:
            out.append(int(piece))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _add_radio_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--slot-duration", type=float, default=5.0, help="slot length in seconds (default 5)")
    p.add_argument("--threshold", type=float, default=500.0, help="neighborhood distance threshold in meters (default 500)")
    p.add_argument("--sigma", type=float, default=9.83, help="shadowing std-dev in dB (default 9.83)")
    p.add_argument("--hysteresis", type=float, default=2.0, help="handover hysteresis margin in dB (default 2)")
    p.add_argument("--core-attach", type=int, default=None, help="site id the core links to (default: graph center)")
    p.add_argument("--core-weight", type=float, default=1.0, help="core link latency weight (default 1)")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", help="vehicle trace file (t id x y speed; .gz/.bz2 ok)")
    p.add_argument("--stations", help="base station file (id x y)")
    p.add_argument("--alpha1", type=float, default=0.5, help="latency weight (default 0.5)")
    p.add_argument("--alpha2", type=float, default=0.25, help="deployment overhead weight (default 0.25)")
    p.add_argument("--alpha3", type=float, default=0.25, help="reassignment overhead weight (default 0.25)")
    p.add_argument("--predictor", default="naive", help="naive, cv, oracle, or file:PATH (default naive)")
    p.add_argument("--seed", type=int, default=_env_seed(), help="RNG seed; MEC_ANCHOR_SIM_SEED overrides the default (default 0)")
    p.add_argument("--slots", type=_parse_slots, default=None, help="simulate slot range FIRST..LAST (default: whole trace)")
    p.add_argument("--lenient", action="store_true", help="log constraint violations and malformed lines instead of aborting")
    p.add_argument("--no-runtime", action="store_true", help="write 0 in the runtime_ms column for byte-reproducible output")
    _add_radio_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mec-anchor-sim",
        description="Anchor-point deployment and vehicle assignment simulator",
    )
    parser.add_argument("--config", default=None, help="key=value file supplying defaults for any flag")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p_graph = sub.add_parser("build-graph", help="build the backhaul graph and export it as CSV")
    p_graph.add_argument("--stations", help="base station file (id x y)")
    p_graph.add_argument("--threshold", type=float, default=500.0, help="neighborhood distance threshold in meters (default 500)")
    p_graph.add_argument("--core-attach", type=int, default=None, help="site id the core links to (default: graph center)")
    p_graph.add_argument("--core-weight", type=float, default=1.0, help="core link latency weight (default 1)")
    p_graph.add_argument("--out", default=None, help="edge list CSV output path (default stdout)")
    p_graph.add_argument("--sites-out", default=None, help="optional site CSV output path")

    p_run = sub.add_parser("run", help="simulate one strategy over a trace")
    p_run.add_argument("--strategy", help="strategy name: " + ", ".join(k.value for k in StrategyKind))
    p_run.add_argument("--anchor-points", type=int, help="number of anchor points to deploy")
    p_run.add_argument("--out", default=None, help="metrics CSV output path (default stdout)")
    p_run.add_argument("--decision-log", default=None, help="optional deploy/remove/assign event CSV")
    p_run.add_argument("--dump-positions", default=None, help="optional per-slot position CSV (training data export)")
    _add_run_flags(p_run)

    p_cmp = sub.add_parser("compare", help="run a strategy/resource sweep and summarize")
    p_cmp.add_argument("--strategies", default="all", help="comma list of strategies, or 'all' (default all)")
    p_cmp.add_argument("--anchor-points", type=_parse_int_list, help="anchor point counts, e.g. 5,10 or 5..30:5")
    p_cmp.add_argument("--out", default=None, help="summary CSV output path (default stdout)")
    p_cmp.add_argument("--jobs", type=int, default=None, help="parallel runs (default: available cores)")
    _add_run_flags(p_cmp)

    p_pred = sub.add_parser("predict-eval", help="report predictor RMSE against a trace")
    p_pred.add_argument("--trace", help="vehicle trace file")
    p_pred.add_argument("--predictor", default="naive", help="naive, cv, oracle, or file:PATH (default naive)")
    p_pred.add_argument("--predictions", default=None, help="predictions CSV (shorthand for --predictor file:PATH)")
    p_pred.add_argument("--slot-duration", type=float, default=5.0, help="slot length in seconds (default 5)")
    p_pred.add_argument("--slots", type=_parse_slots, default=None, help="evaluate slot range FIRST..LAST (default: whole trace)")
    p_pred.add_argument("--lenient", action="store_true", help="skip malformed lines instead of aborting")
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Read --config key=value defaults; explicit command-line flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        parser.error("--config requires a path")
    path = argv[idx + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            pairs = [
                line.strip().split("=", 1)
                for line in fh
                if line.strip() and not line.strip().startswith("#")
            ]
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    overrides: dict[str, object] = {}
    for pair in pairs:
        if len(pair) != 2:
            parser.error(f"config file line is not key=value: {pair[0]!r}")
        key, value = pair[0].strip().replace("-", "_"), pair[1].strip()
        overrides[key] = value
    subparsers = [
        sub
        for sub_action in parser._subparsers._group_actions  # noqa: SLF001
        for sub in sub_action.choices.values()
    ]
    for key, value in overrides.items():
        matched = False
        for sub in subparsers:
            for action in sub._actions:  # noqa: SLF001
                if action.dest != key:
                    continue
                matched = True
                if isinstance(action.const, bool) or isinstance(action.default, bool):
                    parsed: object = str(value).lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    parsed = action.type(value)
                else:
                    parsed = value
                sub.set_defaults(**{key: parsed})
        if not matched:
            parser.error(f"unknown config key {key!r}")
    return argv[:idx] + argv[idx + 2 :]


def _out_stream(path: str | None):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _require(parser: argparse.ArgumentParser, args, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            parser.error(f"the following argument is required: --{name.replace('_', '-')}")


def _run_config_from_args(args) -> RunConfig:
    slots = args.slots or (None, None)
    return RunConfig(
        trace=args.trace,
        stations=args.stations,
        strategy=args.strategy,
        n_anchor_points=args.anchor_points,
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        alpha3=args.alpha3,
        slot_duration=args.slot_duration,
        d_threshold=args.threshold,
        sigma=args.sigma,
        hysteresis=args.hysteresis,
        predictor=args.predictor,
        seed=args.seed,
        slot_first=slots[0],
        slot_last=slots[1],
        core_attach=args.core_attach,
        core_weight=args.core_weight,
        lenient=args.lenient,
        measure_runtime=not args.no_runtime,
    )


def cmd_build_graph(parser, args) -> int:
    _require(parser, args, "stations")
    graph = build_graph(
        load_sites(args.stations),
        args.threshold,
        core_attach=args.core_attach,
        core_link_weight=args.core_weight,
    )
    out, close = _out_stream(args.out)
    try:
        export_edges_csv(graph, out)
    finally:
        if close:
            out.close()
    if args.sites_out:
        with open(args.sites_out, "w", encoding="utf-8", newline="") as fh:
            export_sites_csv(graph, fh)
    logger.info(
        "graph: %d sites, %d links, diameter %g", graph.n_sites, len(graph.links), graph.diameter
    )
    return 0


class _SlotWriters:
    """Optional per-slot CSV side outputs (metrics rows, decision log, positions)."""

    def __init__(self, metrics_fh, config: RunConfig, decision_log_fh=None, positions_fh=None):
        self.metrics = csv.writer(metrics_fh)
        self.metrics.writerow(METRICS_HEADER.split(","))
        self.config = config
        self.decision_log = csv.writer(decision_log_fh) if decision_log_fh else None
        if self.decision_log:
            self.decision_log.writerow(["slot", "kind", "subject", "from", "to"])
        self.positions = csv.writer(positions_fh) if positions_fh else None
        if self.positions:
            self.positions.writerow(["slot", "vehicle_id", "x", "y"])

    def __call__(self, res: SlotResult) -> None:
        m, c = res.metrics, self.config
        self.metrics.writerow(
            [
                m.slot_index,
                c.strategy,
                c.n_anchor_points,
                c.alpha1,
                c.alpha2,
                c.alpha3,
                m.vehicle_count,
                m.f1_p90,
                m.f1_mean,
                m.f2,
                m.f3,
                m.scalarized,
                m.strategy_runtime_ms,
                m.handover_count,
            ]
        )
        if self.decision_log:
            slot = res.frame.slot_index
            before, after = res.state_before, res.state_after
            for site in sorted(after.deployed - before.deployed):
                self.decision_log.writerow([slot, "deploy", site, "", ""])
            for site in sorted(before.deployed - after.deployed):
                self.decision_log.writerow([slot, "remove", site, "", ""])
            for vid in sorted(after.assignments):
                anchor = after.assignments[vid]
                prev = before.assignments.get(vid, anchor)
                if prev != anchor:
                    self.decision_log.writerow([slot, "assign", vid, prev, anchor])
        if self.positions:
            for vid in sorted(res.frame.positions):
                x, y = res.frame.positions[vid]
                self.positions.writerow([res.frame.slot_index, vid, x, y])


def cmd_run(parser, args) -> int:
    _require(parser, args, "trace", "stations", "strategy", "anchor_points")
    config = _run_config_from_args(args)
    out, close = _out_stream(args.out)
    dlog_fh = open(args.decision_log, "w", encoding="utf-8", newline="") if args.decision_log else None
    pos_fh = open(args.dump_positions, "w", encoding="utf-8", newline="") if args.dump_positions else None
    try:
        writers = _SlotWriters(out, config, dlog_fh, pos_fh)
        result = run_simulation(config, on_slot=writers)
    finally:
        if close:
            out.close()
        for fh in (dlog_fh, pos_fh):
            if fh:
                fh.close()
    if result.summary:
        for name, (mean, ci) in result.summary.items():
            logger.info("%s: mean %.6g (95%% CI +/- %.6g)", name, mean, ci)
    else:
        logger.warning("no slots simulated; summary undefined")
    return 0


COMPARE_HEADER = [
    "strategy",
    "n_anchor_points",
    "alpha1",
    "alpha2",
    "alpha3",
    "seed",
    "slots",
    "vehicles_mean",
    "f1_p90_mean",
    "f1_p90_ci95",
    "f1_mean_mean",
    "f1_mean_ci95",
    "f2_mean",
    "f2_ci95",
    "f3_mean",
    "f3_ci95",
    "scalarized_mean",
    "scalarized_ci95",
    "runtime_ms_mean",
    "runtime_ms_ci95",
    "handovers_mean",
]


def cmd_compare(parser, args) -> int:
    _require(parser, args, "trace", "stations", "anchor_points")
    names = ALL_STRATEGIES if args.strategies == "all" else [s.strip() for s in args.strategies.split(",")]
    configs = []
    base = _run_config_from_args(
        argparse.Namespace(**{**vars(args), "strategy": None, "anchor_points": 0})
    )
    for name in names:
        for k in args.anchor_points:
            cfg = RunConfig(**{**base.__dict__, "strategy": name, "n_anchor_points": k})
            cfg.validate()
            configs.append(cfg)
    rows, errors = sweep(configs, jobs=args.jobs)
    out, close = _out_stream(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(COMPARE_HEADER)
        for row in rows:
            s = row["summary"]
            record = [
                row["strategy"],
                row["n_anchor_points"],
                row["alpha1"],
                row["alpha2"],
                row["alpha3"],
                row["seed"],
                row["slots"],
            ]
            if s is None:
                record += [""] * (len(COMPARE_HEADER) - len(record))
            else:
                record += [
                    s["vehicle_count"][0],
                    s["f1_p90"][0],
                    s["f1_p90"][1],
                    s["f1_mean"][0],
                    s["f1_mean"][1],
                    s["f2"][0],
                    s["f2"][1],
                    s["f3"][0],
                    s["f3"][1],
                    s["scalarized"][0],
                    s["scalarized"][1],
                    s["strategy_runtime_ms"][0],
                    s["strategy_runtime_ms"][1],
                    s["handover_count"][0],
                ]
            writer.writerow(record)
    finally:
        if close:
            out.close()
    for index, message in errors:
        logger.error("config %d failed: %s", index, message)
    return 3 if errors else 0


def cmd_predict_eval(parser, args) -> int:
    _require(parser, args, "trace")
    spec = args.predictor
    if args.predictions:
        spec = f"file:{args.predictions}"
    predictor = prediction.make_predictor(spec)
    naive = prediction.Predictor(prediction.PredictorKind.NAIVE_LAST_VALUE)
    first, last = args.slots or (None, None)

    history: dict[str, deque] = {}
    predicted: dict[tuple[int, str], tuple[float, float]] = {}
    baseline: dict[tuple[int, str], tuple[float, float]] = {}
    actual: dict[tuple[int, str], tuple[float, float]] = {}
    with open_trace(args.trace) as stream:
        entries = mobility.parse_trace(stream, strict=not args.lenient)
        for slot, positions in mobility.slotify(entries, args.slot_duration):
            if last is not None and slot > last:
                break
            in_window = first is None or slot >= first
            if in_window:
                continuing = {vid: list(history[vid]) for vid in positions if vid in history}
                for key, value in prediction.predict_positions(
                    continuing, slot, predictor, actual_positions=positions
                ).items():
                    predicted[(slot, key)] = value
                for key, value in prediction.predict_positions(continuing, slot, naive).items():
                    baseline[(slot, key)] = value
                for vid in continuing:
                    actual[(slot, vid)] = positions[vid]
            for vid, pos in positions.items():
                history.setdefault(vid, deque(maxlen=2)).append(pos)
            for vid in [v for v in history if v not in positions]:
                del history[vid]
    if not actual:
        logger.error("no predictable (slot, vehicle) pairs in the trace window")
        return 3
    report = prediction.prediction_rmse(predicted, actual)
    naive_report = prediction.prediction_rmse(baseline, actual)
    if report.rmse > 0:
        ratio = naive_report.rmse / report.rmse
    else:
        ratio = 1.0 if naive_report.rmse == 0 else float("inf")
    print(
        f"predictor={args.predictor if not args.predictions else spec} "
        f"rmse={report.rmse:.6g} naive_rmse={naive_report.rmse:.6g} "
        f"ratio={ratio:.6g} matched={report.matched}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    sub = {
        "build-graph": cmd_build_graph,
        "run": cmd_run,
        "compare": cmd_compare,
        "predict-eval": cmd_predict_eval,
    }[args.command]
    try:
        return sub(parser, args)
    except prediction.PredictionGapError as exc:
        logger.error("%s", exc)
        return 3
    except ConstraintViolationError as exc:
        logger.error("%s", exc)
        return 4
    except (mobility.TraceFormatError, mobility.TraceOrderError, OSError) as exc:
        logger.error("%s", exc)
        return 3
    except (ConfigError, ValueError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
