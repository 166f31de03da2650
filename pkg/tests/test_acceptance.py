"""End-to-end acceptance checks, one test per shipped guarantee.

Each test pins a headline behavior at its stated tolerance: exact edge
sets against naive oracles, scaling and acyclicity, linkage containment,
fixed penalty values, power-law recovery rates, hand-derived structural
stats, community quality, lag detection, attribution accuracy, published
ratio arithmetic, and byte-identical CLI reruns.
"""

import graphlib
import json
import math
import time
from datetime import datetime, timezone

import numpy as np
import pytest

from inspnet.cli import main as cli_main
from inspnet.collection_graph import LinkageCriterion, build_collection_graph, penalty_factor
from inspnet.market import INDICATORS, RoleStats, indicator_ratios
from inspnet.metrics import _scc_count, louvain_communities, structural_summary
from inspnet.model import TimeWindow
from inspnet.nft import build_nft_graph
from inspnet.powerlaw import fit_power_law
from inspnet.shapley import (
    FeatureGrid,
    ToyOracle,
    conjunction_toy,
    dummy_feature_toy,
    shapley_estimate,
)
from inspnet.timeseries import Sampling, SeriesKind, TimeSeries, tlcc

from helpers import (
    Graph,
    brute_force_edges,
    full_window,
    make_instance,
    reference_power_law_sample,
)
from test_cli import flags, read_manifest, write_dataset
from test_metrics import modularity_oracle, two_cliques_with_bridge, undirected_weights
from test_shapley import exact_shapley


def test_edge_sets_match_brute_force_oracle():
    """50 seeded catalogs (n <= 200, d = 16): exact edge-set equality
    against the naive three-rule O(n^2) oracle, under 5 s total."""
    started = time.perf_counter()
    mismatches = 0
    for trial in range(50):
        rng = np.random.default_rng(500 + trial)
        n = int(rng.integers(20, 201))
        catalog, store = make_instance(
            500 + trial, n_assets=n, d=16,
            n_collections=int(rng.integers(2, 9)))
        window = full_window(catalog)
        graph = build_nft_graph(catalog, store, window)
        got = {(s, t) for s, t, _ in graph.edges}
        expected = set(brute_force_edges(catalog, store, window, 0.5))
        if got != expected:
            mismatches += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0
    assert elapsed < 5.0, f"50 builds took {elapsed:.2f}s"


def test_large_build_is_fast_and_acyclic():
    """n = 5,000, d = 64 build finishes under 60 s on 4 workers, admits a
    topological order, and has as many SCCs as nodes."""
    catalog, store = make_instance(77, n_assets=5_000, d=64, n_collections=40)
    started = time.perf_counter()
    graph = build_nft_graph(catalog, store, full_window(catalog), workers=4)
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"build took {elapsed:.2f}s"
    assert graph.edge_count() > 0

    predecessors = {node: [] for node in graph.nodes}
    for source, target, _ in graph.edges:
        predecessors[source].append(target)
    order = graphlib.TopologicalSorter(predecessors).static_order()
    assert len(list(order)) == graph.node_count()

    index = {node: i for i, node in enumerate(graph.nodes)}
    out_adj = [[] for _ in graph.nodes]
    for source, target, _ in graph.edges:
        out_adj[index[source]].append(index[target])
    assert _scc_count(out_adj, graph.node_count()) == graph.node_count()


def test_linkage_containment_min_avg_max():
    """100 seeded multi-collection instances: Min edges within Avg edges
    within Max edges, zero violations."""
    violations = 0
    for trial in range(100):
        catalog, store = make_instance(
            2_000 + trial,
            n_assets=int(np.random.default_rng(trial).integers(30, 81)),
            n_collections=5)
        window = full_window(catalog)
        edge_sets = {}
        for criterion in (LinkageCriterion.MIN, LinkageCriterion.AVG,
                          LinkageCriterion.MAX):
            graph = build_collection_graph(
                catalog, store, window, criterion=criterion)
            edge_sets[criterion] = {(s, t) for s, t, _ in graph.edges}
        if not (edge_sets[LinkageCriterion.MIN]
                <= edge_sets[LinkageCriterion.AVG]
                <= edge_sets[LinkageCriterion.MAX]):
            violations += 1
    assert violations == 0


def test_penalty_factor_fixed_points():
    """penalty(0, k) = 0.5 exactly, penalty(k, k) = 0.7310586 +- 1e-6,
    penalty(k, 0) = 1.0 exactly."""
    for k in list(range(1, 21)) + [10_000]:
        assert penalty_factor(0, k) == 0.5
        assert penalty_factor(k, k) == pytest.approx(0.7310586, abs=1e-6)
        assert penalty_factor(k, 0) == 1.0


def test_power_law_recovery_rate():
    """20 seeded trials at alpha = 2.5, n = 10,000: alpha within +-0.15
    and p > 0.1 in at least 18 each; every 1000-bootstrap fit < 30 s."""
    alpha_ok = 0
    p_ok = 0
    slowest = 0.0
    for trial in range(20):
        rng = np.random.default_rng(1_000 + trial)
        xs = reference_power_law_sample(2.5, 1, 10_000, rng)
        started = time.perf_counter()
        fit = fit_power_law(xs, bootstraps=1_000, seed=trial)
        elapsed = time.perf_counter() - started
        slowest = max(slowest, elapsed)
        if abs(fit.alpha - 2.5) <= 0.15:
            alpha_ok += 1
        if fit.p_value > 0.1:
            p_ok += 1
    assert slowest < 30.0, f"slowest fit took {slowest:.2f}s"
    assert alpha_ok >= 18, f"alpha within tolerance in only {alpha_ok}/20 trials"
    assert p_ok >= 18, f"p-value above 0.1 in only {p_ok}/20 trials"


def test_structural_stats_match_hand_derived_values():
    """3-path, star, and two-clique fixtures: every field equals its
    hand-derived rational exactly or real within 1e-9; diameter >= APL
    holds on 1,000 random digraphs."""
    path = structural_summary(Graph("ABC", [("A", "B"), ("B", "C")]))
    assert path.node_count == 3 and path.edge_count == 2
    assert path.density == pytest.approx(2 / 6, abs=1e-9)
    assert path.avg_in_degree == pytest.approx(2 / 3, abs=1e-9)
    assert math.isnan(path.degree_assortativity)
    assert path.pct_sources == pytest.approx(100 / 3, abs=1e-9)
    assert path.pct_sinks == pytest.approx(100 / 3, abs=1e-9)
    assert path.diameter == 2
    assert path.avg_path_length == pytest.approx(4 / 3, abs=1e-9)
    assert path.transitivity_undirected == 0.0
    assert path.clustering_coeff_deg2plus == 0.0
    assert path.scc_count == 3 and path.wcc_count == 1
    assert path.reciprocated_edge_pct == 0.0

    star = structural_summary(
        Graph("CABDEF", [("C", leaf) for leaf in "ABDEF"]))
    assert star.node_count == 6 and star.edge_count == 5
    assert star.density == pytest.approx(5 / 30, abs=1e-9)
    assert star.avg_in_degree == pytest.approx(5 / 6, abs=1e-9)
    assert math.isnan(star.degree_assortativity)
    assert star.pct_sources == pytest.approx(100 / 6, abs=1e-9)
    assert star.pct_sinks == pytest.approx(500 / 6, abs=1e-9)
    assert star.diameter == 1
    assert star.avg_path_length == 1.0
    assert star.scc_count == 6 and star.wcc_count == 1

    cliques = structural_summary(Graph(
        "ABCDEF",
        [(a, b) for part in ("ABC", "DEF") for a in part for b in part if a != b]))
    assert cliques.node_count == 6 and cliques.edge_count == 12
    assert cliques.reciprocated_edge_pct == pytest.approx(100.0, abs=1e-9)
    assert cliques.reciprocated_pair_pct == pytest.approx(100.0, abs=1e-9)
    assert cliques.transitivity_undirected == pytest.approx(1.0, abs=1e-9)
    assert cliques.clustering_coeff_deg2plus == pytest.approx(1.0, abs=1e-9)
    assert cliques.scc_count == 2 and cliques.wcc_count == 2
    assert cliques.diameter == 1
    assert cliques.pct_sources == 0.0 and cliques.pct_sinks == 0.0

    for trial in range(1_000):
        rng = np.random.default_rng(9_000 + trial)
        n = int(rng.integers(3, 13))
        nodes = [f"n{i}" for i in range(n)]
        pairs = [(nodes[i], nodes[j])
                 for i in range(n) for j in range(n)
                 if i != j and rng.random() < 0.25]
        stats = structural_summary(Graph(nodes, pairs))
        assert stats.diameter >= stats.avg_path_length - 1e-12


def test_louvain_two_cliques_with_bridge_is_optimal():
    """Two bridged 5-cliques: exactly 2 communities, modularity equal to
    the best brute-force 2-partition within 1e-9."""
    graph = two_cliques_with_bridge()
    partition = louvain_communities(graph)
    assert partition.community_count() == 2

    nodes = sorted(graph.nodes)
    weights = undirected_weights(graph)
    best = -1.0
    for bits in range(2 ** (len(nodes) - 1)):
        assignment = {nodes[0]: 0}
        for i, node in enumerate(nodes[1:]):
            assignment[node] = (bits >> i) & 1
        best = max(best, modularity_oracle(nodes, weights, assignment))
    assert partition.modularity == pytest.approx(best, abs=1e-9)


def ramp_sinusoid(n: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.float64)
    return list(0.05 * t + np.sin(2 * np.pi * t / 12.0)
                + 0.01 * rng.normal(size=n))


def monthly_series(values) -> TimeSeries:
    return TimeSeries(
        kind=SeriesKind.BTC_CLOSE, sampling=Sampling.MONTHLY, origin=0,
        bucket_starts=tuple(range(len(values))), values=tuple(values))


def test_tlcc_finds_every_injected_shift():
    """Shifts k = 1..12 of a seeded ramp+sinusoid monthly series: peak
    lag exactly -k with r >= 0.99; antisymmetry within 1e-12."""
    base = ramp_sinusoid(72, seed=8)
    lead = monthly_series(base)
    for k in range(1, 13):
        follow = monthly_series([None] * k + base[: len(base) - k])
        result = tlcc(lead, follow, max_lag=12)
        assert result.peak_lag == -k, f"shift {k} peaked at {result.peak_lag}"
        assert result.peak_r >= 0.99

    follow = monthly_series([None] * 5 + base[: len(base) - 5])
    forward = tlcc(lead, follow, max_lag=12)
    backward = tlcc(follow, lead, max_lag=12)
    for lag, r in zip(forward.lags, forward.correlations):
        mirror = backward.correlations[backward.lags.index(-lag)]
        if r is None:
            assert mirror is None
        else:
            assert mirror == pytest.approx(r, abs=1e-12)


def test_shapley_matches_enumeration_within_tolerance():
    """Toy oracles with |F| <= 12 at K = 10,000: max |phi - exact| <=
    0.02, efficiency residual <= 3 stderr, dummy |phi| <= 0.01, and
    fixed seeds give bit-identical runs."""
    grid12 = FeatureGrid(image_width=3, image_height=2, cell=1)
    result = shapley_estimate(conjunction_toy(grid12), grid12,
                              samples=10_000, seed=0)
    exact = exact_shapley(lambda m: 1.0 if m.all() else 0.0, 12)
    assert float(np.max(np.abs(result.phi - exact))) <= 0.02
    assert result.efficiency_residual <= 3.0 * float(np.max(result.stderr)) + 1e-12

    # Distinct per-feature weights plus one pairwise interaction, so the
    # attributions are asymmetric and two features carry sampling noise.
    grid10 = FeatureGrid(image_width=5, image_height=1, cell=1)
    weights = np.random.default_rng(21).random(10)
    weights *= 0.7 / weights.sum()

    def interacting(mask: np.ndarray) -> float:
        return float(weights[mask].sum()) + 0.3 * bool(mask[0] and mask[1])

    result10 = shapley_estimate(ToyOracle(interacting, grid10), grid10,
                                samples=10_000, seed=1)
    exact10 = exact_shapley(interacting, 10)
    np.testing.assert_allclose(
        exact10[2:], weights[2:], atol=1e-12)
    np.testing.assert_allclose(
        exact10[:2], weights[:2] + 0.15, atol=1e-12)
    assert float(np.max(np.abs(result10.phi - exact10))) <= 0.02
    assert result10.efficiency_residual <= \
        3.0 * float(np.max(result10.stderr)) + 1e-12

    dummy = shapley_estimate(dummy_feature_toy(grid12, dummy=3), grid12,
                             samples=10_000, seed=2)
    assert abs(dummy.phi[3]) <= 0.01

    again = shapley_estimate(conjunction_toy(grid12), grid12,
                             samples=10_000, seed=0)
    assert np.array_equal(result.phi, again.phi)
    assert np.array_equal(result.stderr, again.stderr)


def test_published_role_aggregates_reproduce_ratios():
    """Feeding the published role aggregates through the ratio code
    reproduces every published ratio at 3 decimals."""
    def stats(volume, transactions, price, price_max, price_min, stdev):
        return RoleStats(
            average_volume=volume, average_transactions=transactions,
            average_price=price, maximum_price=price_max,
            minimum_price=price_min, stdev_price=stdev,
            max_price_overall=price_max, min_price_overall=price_min,
            asset_count=1)

    inspiring = stats(231531.69, 151.92, 692.91, 6661.95, 102.24, 977.22)
    inspired = stats(146192.15, 100.00, 899.09, 4605.24, 318.89, 725.69)
    ratios = indicator_ratios(inspiring, inspired)
    published = {
        "average_volume": 1.584,
        "average_transactions": 1.519,
        "average_price": 0.771,
        "maximum_price": 1.447,
        "minimum_price": 0.321,
        "stdev_price": 1.347,
    }
    assert set(published) == set(INDICATORS)
    for name, expected in published.items():
        assert round(ratios[name], 3) == expected, name


def test_cli_reruns_are_byte_identical(tmp_path):
    """Every subcommand, run twice with identical inputs and seed, writes
    byte-identical artifacts; only the manifest timestamp may differ."""
    t0 = int(datetime(2021, 1, 1, tzinfo=timezone.utc).timestamp())
    t1 = int(datetime(2021, 12, 31, tzinfo=timezone.utc).timestamp())
    catalog, store = make_instance(
        1, n_assets=150, noise=0.35, with_transactions=True,
        ts_low=t0, ts_high=t1)
    paths = write_dataset(tmp_path, catalog, store)

    invocations = [
        ("build-graph", []),
        ("build-graph", ["--format", "dot"]),
        ("build-collections", ["--criterion", "max"]),
        ("stats", []),
        ("powerlaw", ["--bootstraps", "50"]),
        ("communities", []),
        ("market", []),
        ("series", ["--kind", "first_sold_count"]),
        ("tlcc", ["--series-a", "first_sold_count",
                  "--series-b", "collections_with_first_sold_count"]),
    ]
    for i, (subcommand, extra) in enumerate(invocations):
        out = tmp_path / f"out{i}"
        argv = [subcommand, *flags(paths, out), *extra]
        assert cli_main(argv) == 0, subcommand
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        first_manifest = read_manifest(out)
        assert cli_main(argv) == 0, subcommand
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        second_manifest = read_manifest(out)
        assert set(first) == set(second), subcommand
        for name in first:
            if name != "manifest.json":
                assert first[name] == second[name], f"{subcommand}: {name}"
        first_manifest.pop("generated_at")
        second_manifest.pop("generated_at")
        assert first_manifest == second_manifest, subcommand

    out = tmp_path / "out-explain"
    argv = ["explain", "--output-dir", str(out), "--pair-id", "p1",
            "--toy", "and", "--samples", "2000"]
    assert cli_main(argv) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert cli_main(argv) == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    for name in first:
        if name != "manifest.json":
            assert first[name] == second[name], f"explain: {name}"
