"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `python -m pytest tests/test_acceptance.py -v -s`. Criterion 9 needs
the public Cologne datasets and is skipped unless MEC_ANCHOR_SIM_COLOGNE_DIR
points at a directory containing a station file and (optionally) a trace.
"""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from mec_anchor_sim import cli
from mec_anchor_sim.mobility import RadioParams, ShadowingField, slotify
from mec_anchor_sim.objective import (
    CostModel,
    NetworkState,
    deployment_overhead,
    latency_objective,
    reassignment_overhead,
    scalarize,
    validate_decision,
)
from mec_anchor_sim.prediction import make_predictor
from mec_anchor_sim.simulator import build_frames, simulate
from mec_anchor_sim.strategies import StrategyKind, make_strategy, mean_scalarized_objective
from mec_anchor_sim.topology import build_graph, load_sites

from helpers import (
    grid_sites,
    linear_motion_trace,
    naive_f1_p90,
    naive_f2,
    naive_f3,
    naive_scalarized,
    random_instance,
    random_sites,
    write_stations,
    write_trace,
)


@contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except Exception:
        print(f"criterion {number:02d} [{label}]: FAIL")
        raise
    print(f"criterion {number:02d} [{label}]: PASS")


def test_criterion_01_evaluator_oracle_equivalence():
    with criterion(1, "evaluators match naive loops bit-exactly"):
        rng = np.random.default_rng(1001)
        started = time.perf_counter()
        for _ in range(200):
            n_sites = int(rng.integers(2, 9))
            n_vehicles = int(rng.integers(1, 21))
            graph = build_graph(random_sites(rng, n_sites), d_threshold=800)
            k = int(rng.integers(1, n_sites + 1))
            cm = CostModel.build(graph, k, n_vehicles=n_vehicles)
            vids = [f"v{i}" for i in range(n_vehicles)]
            conn = {vid: int(rng.integers(n_sites)) for vid in vids}
            deployed = frozenset(int(s) for s in rng.choice(n_sites, size=k, replace=False))
            deployed_next = frozenset(int(s) for s in rng.choice(n_sites, size=k, replace=False))
            anchors = sorted(deployed) + [graph.core]
            anchors_next = sorted(deployed_next) + [graph.core]
            z_prev = {vid: int(anchors[rng.integers(len(anchors))]) for vid in vids}
            z_next = {vid: int(anchors_next[rng.integers(len(anchors_next))]) for vid in vids}

            f1 = latency_objective(conn, z_next, graph.latency)
            f2 = deployment_overhead(deployed, deployed_next, cm.a, cm.b)
            f3 = reassignment_overhead(z_prev, z_next, cm.o)
            s = scalarize(f1, f2, f3, cm)

            x_mat = np.zeros((n_vehicles, n_sites), dtype=int)
            z_mat = np.zeros((n_vehicles, n_sites + 1), dtype=int)
            zn_mat = np.zeros((n_vehicles, n_sites + 1), dtype=int)
            for i, vid in enumerate(sorted(vids)):
                x_mat[i, conn[vid]] = 1
                z_mat[i, z_prev[vid]] = 1
                zn_mat[i, z_next[vid]] = 1
            y = [1 if i in deployed else 0 for i in range(n_sites)]
            yn = [1 if i in deployed_next else 0 for i in range(n_sites)]

            assert f1 == naive_f1_p90(x_mat, zn_mat, graph.latency)
            assert f2 == naive_f2(y, yn, cm.a, cm.b)
            assert f3 == naive_f3(z_mat, zn_mat, cm.o)
            assert s == naive_scalarized(
                f1, f2, f3, cm.alpha1, cm.alpha2, cm.alpha3, cm.norm_f1, cm.norm_f2, cm.norm_f3
            )
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"200 instances took {elapsed:.2f}s"


def test_criterion_02_exact_optimum_sandwich():
    with criterion(2, "exact oracle never worse than overhead-aware greedy"):
        rng = np.random.default_rng(1002)
        ratios = []
        for i in range(100):
            n_sites = int(rng.integers(2, 8))
            k = int(rng.integers(1, min(3, n_sites) + 1))
            n_vehicles = int(rng.integers(1, 16))
            graph, cm, state, x_hat = random_instance(
                rng, n_sites, n_vehicles, k, cold_start=bool(i % 3 == 0)
            )
            oracle = make_strategy(StrategyKind.EXACT_ORACLE, graph, cm).decide(state, x_hat, 0)
            greedy = make_strategy(StrategyKind.OVERHEAD_AWARE, graph, cm).decide(state, x_hat, 0)
            obj_oracle = mean_scalarized_objective(graph, cm, state, x_hat, oracle)
            obj_greedy = mean_scalarized_objective(graph, cm, state, x_hat, greedy)
            assert obj_oracle <= obj_greedy + 1e-9, f"instance {i}: oracle above greedy"
            if obj_oracle > 0:
                ratios.append(obj_greedy / obj_oracle)
            else:
                ratios.append(1.0 if obj_greedy <= 1e-12 else math.inf)
        within = sum(1 for r in ratios if r <= 2.0) / len(ratios)
        print(
            f"  greedy/optimal ratio: max={max(ratios):.4f} "
            f"mean={np.mean([r for r in ratios if math.isfinite(r)]):.4f} "
            f"share<=2.0: {within:.0%}"
        )
        assert within >= 0.95


def test_criterion_03_constraint_suite():
    with criterion(3, "every strategy satisfies the constraints on random frames"):
        rng = np.random.default_rng(1003)
        for frame_idx in range(50):
            n_sites = int(rng.integers(3, 11))
            k = int(rng.integers(1, min(4, n_sites) + 1))
            graph, cm, state, x_hat = random_instance(
                rng, n_sites, int(rng.integers(0, 25)), k, cold_start=bool(frame_idx % 2)
            )
            for kind in StrategyKind:
                decision = make_strategy(kind, graph, cm, seed=frame_idx).decide(
                    state, x_hat, frame_idx
                )
                violations = validate_decision(
                    decision, x_hat.keys(), cm, graph.core,
                    exempt_cardinality=kind is StrategyKind.CENTRALIZED,
                )
                assert violations == [], f"{kind.value} frame {frame_idx}: {violations}"


def _grid_scenario():
    rng = np.random.default_rng(2)
    sites = grid_sites(5, 400.0)
    entries = linear_motion_trace(rng, n_vehicles=200, n_slots=20, area=1600)
    return sites, entries


def _run(sites, entries, kind, k, alphas=(0.5, 0.25, 0.25), seed=0, predictor="naive"):
    graph = build_graph(sites, d_threshold=500)
    cm = CostModel.build(graph, k, alphas=alphas)
    frames = build_frames(
        slotify(iter(entries), 5.0), graph, RadioParams(sigma_pl=0.0),
        ShadowingField(seed, 0.0), make_predictor(predictor),
    )
    strategy = make_strategy(kind, graph, cm, seed)
    return graph, list(simulate(frames, strategy, cm, measure_runtime=False))


def test_criterion_04_centralized_baseline():
    with criterion(4, "centralized: zero overheads, f1 equals recomputed p90 to core"):
        sites, entries = _grid_scenario()
        graph, results = _run(sites, entries, StrategyKind.CENTRALIZED, 1)
        assert results
        for res in results:
            assert res.metrics.f2 == 0.0
            assert res.metrics.f3 == 0.0
            hops = sorted(float(graph.latency[s, graph.core]) for s in res.frame.connections.values())
            rank = -(-9 * len(hops) // 10)  # independent integer ceil
            assert res.metrics.f1_p90 == hops[rank - 1]


def test_criterion_05_greedy_monotone_in_resources():
    with criterion(5, "greedy average f1 non-increasing in k, zero at full deployment"):
        rng = np.random.default_rng(1005)
        for _ in range(20):
            n_sites = int(rng.integers(3, 9))
            graph, _, state, x_hat = random_instance(rng, n_sites, int(rng.integers(1, 20)), 1)
            previous = None
            for k in range(1, n_sites + 1):
                cm = CostModel.build(graph, k, n_vehicles=len(x_hat))
                decision = make_strategy(StrategyKind.GREEDY_AVERAGE, graph, cm).decide(
                    state, x_hat, 0
                )
                # oracle predictor: the decision's input X-hat equals the real X
                f1 = latency_objective(x_hat, decision.assignments_next, graph.latency)
                if previous is not None:
                    assert f1 <= previous
                previous = f1
            assert previous == 0.0


def test_criterion_06_alpha_regime():
    with criterion(6, "overhead/latency trade-off moves monotonically with alpha1"):
        sites, entries = _grid_scenario()
        mean_f1 = {}
        cum_overhead = {}
        cum_f3_tail = {}
        for alpha1 in (0.1, 0.5, 0.9):
            alphas = (alpha1, (1 - alpha1) / 2, (1 - alpha1) / 2)
            _, results = _run(sites, entries, StrategyKind.OVERHEAD_AWARE, 5, alphas=alphas)
            metrics = [r.metrics for r in results]
            mean_f1[alpha1] = float(np.mean([m.f1_p90 for m in metrics]))
            cum_overhead[alpha1] = sum(m.f2 + m.f3 for m in metrics)
            cum_f3_tail[alpha1] = sum(m.f3 for m in metrics if m.slot_index >= 2)
        print(f"  mean f1 by alpha1: {mean_f1}")
        print(f"  cumulative f2+f3 by alpha1: {cum_overhead}")
        assert mean_f1[0.1] >= mean_f1[0.5] >= mean_f1[0.9]
        assert cum_overhead[0.1] <= cum_overhead[0.5] <= cum_overhead[0.9]
        assert cum_f3_tail[0.1] == 0.0


def test_criterion_07_overhead_ranking():
    with criterion(7, "deployment overhead ranking across strategies"):
        sites, entries = _grid_scenario()
        order = (
            StrategyKind.OVERHEAD_AWARE,
            StrategyKind.GREEDY_AVERAGE,
            StrategyKind.GREEDY_PERCENTILE,
            StrategyKind.KMEANS,
            StrategyKind.RANDOM,
        )
        mean_f2 = {}
        for kind in order:
            _, results = _run(sites, entries, kind, 5)
            mean_f2[kind.value] = float(np.mean([r.metrics.f2 for r in results]))
        print(f"  mean f2: {mean_f2}")
        values = [mean_f2[k.value] for k in order]
        for left, right in zip(values, values[1:]):
            assert left <= right + 1e-12


def test_criterion_08_runtime_envelope():
    with criterion(8, "overhead-aware decision under 2 s, insensitive to vehicle count"):
        rng = np.random.default_rng(1008)
        sites = random_sites(rng, 247, span=20000.0)
        graph = build_graph(sites, d_threshold=1500.0)
        k = 30
        cm = CostModel.build(graph, k)
        deployed = frozenset(int(s) for s in rng.choice(247, size=k, replace=False))
        # mid-simulation regime: vehicles concentrated on a few previous anchors
        prev_pool = sorted(int(s) for s in rng.choice(sorted(deployed), size=9, replace=False))
        prev_pool.append(graph.core)

        def one_decision(n_vehicles: int) -> float:
            x_hat = {f"v{i}": int(rng.integers(247)) for i in range(n_vehicles)}
            state = NetworkState(
                deployed,
                {vid: int(prev_pool[rng.integers(len(prev_pool))]) for vid in x_hat},
            )
            strategy = make_strategy(
                StrategyKind.OVERHEAD_AWARE, graph, cm.with_vehicle_count(n_vehicles)
            )
            best = math.inf
            for _ in range(3):
                t0 = time.perf_counter()
                decision = strategy.decide(state, x_hat, 0)
                best = min(best, time.perf_counter() - t0)
            assert len(decision.deployed_next) == k
            return best

        t_base = one_decision(10_000)
        t_double = one_decision(20_000)
        print(f"  decision time: V=10k {t_base * 1e3:.1f} ms, V=20k {t_double * 1e3:.1f} ms")
        assert t_base < 2.0
        assert abs(t_double - t_base) / t_base < 0.25


COLOGNE_DIR = os.environ.get("MEC_ANCHOR_SIM_COLOGNE_DIR")


@pytest.mark.skipif(
    COLOGNE_DIR is None,
    reason="set MEC_ANCHOR_SIM_COLOGNE_DIR to a directory with the Cologne datasets",
)
def test_criterion_09_cologne_datasets():
    with criterion(9, "Cologne graph statistics and naive predictor RMSE"):
        station_files = [
            f for f in os.listdir(COLOGNE_DIR) if "bs" in f or "deployment" in f
        ]
        assert station_files, "no station file found in MEC_ANCHOR_SIM_COLOGNE_DIR"
        sites = load_sites(os.path.join(COLOGNE_DIR, station_files[0]))
        graph = build_graph(sites, d_threshold=500.0)
        assert graph.n_sites == 247
        assert abs(len(graph.links) - 1 - 293) <= 2  # site links; one extra core link
        site_lat = graph.latency[: graph.n_sites, : graph.n_sites]
        pairs = site_lat[np.triu_indices(graph.n_sites, k=1)]
        mean_hops = float(pairs.mean())
        print(f"  sites=247 edges={len(graph.links) - 1} mean_hops={mean_hops:.2f}")
        assert abs(mean_hops - 18.0) <= 1.0
        traces = [f for f in os.listdir(COLOGNE_DIR) if f.endswith((".tr", ".tr.bz2"))]
        if traces:
            code = cli.main([
                "predict-eval", "--trace", os.path.join(COLOGNE_DIR, traces[0]),
                "--predictor", "naive", "--slots", "0..720",
            ])
            assert code == 0  # RMSE reported, not asserted


def test_criterion_10_determinism(tmp_path):
    with criterion(10, "same seed gives byte-identical metric CSVs"):
        sites, entries = _grid_scenario()
        trace = tmp_path / "trace.txt"
        stations = tmp_path / "bs.txt"
        write_trace(trace, entries)
        write_stations(stations, sites)
        base = [
            "run", "--trace", str(trace), "--stations", str(stations),
            "--strategy", "overhead_aware_greedy_average", "--anchor-points", "5",
            "--seed", "7", "--sigma", "9.83",
        ]
        # strongest form: full files identical with the runtime column zeroed
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(base + ["--no-runtime", "--out", str(out_a)]) == 0
        assert cli.main(base + ["--no-runtime", "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        # default runs agree on every simulation-derived column
        out_c, out_d = tmp_path / "c.csv", tmp_path / "d.csv"
        assert cli.main(base + ["--out", str(out_c)]) == 0
        assert cli.main(base + ["--out", str(out_d)]) == 0

        def drop_runtime(path):
            lines = path.read_text().splitlines()
            idx = lines[0].split(",").index("runtime_ms")
            return [",".join(v for i, v in enumerate(l.split(",")) if i != idx) for l in lines]

        assert drop_runtime(out_c) == drop_runtime(out_d)
