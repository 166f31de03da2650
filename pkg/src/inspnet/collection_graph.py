"""Collection-level inspiration graph under min/avg/max linkage.

A collection edge c_i -> c_j aggregates, per asset of c_i, the best
similarity to any strictly earlier asset of c_j, then discounts the
aggregate by a sigmoid penalty on how few of c_i's assets actually match.
Unlike the asset graph, reciprocated collection edges are possible: each
direction applies its own temporal filter.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from inspnet.model import AssetCatalog, DataError, EmbeddingStore, TimeWindow
from inspnet.simkernel import cosine_block, normalize_rows


class LinkageCriterion(enum.Enum):
    """How per-asset best similarities aggregate into one edge weight.

    Min is the most tolerant reading (every asset must resemble), Max the
    most eager (one resemblance suffices), Avg the balance between them.
    """

    MIN = "min"
    AVG = "avg"
    MAX = "max"

    @classmethod
    def parse(cls, text: str) -> "LinkageCriterion":
        try:
            return cls(text.lower())
        except ValueError:
            raise DataError(
                f"unknown linkage criterion {text!r}; expected min, avg or max") from None


@dataclass
class CollectionGraph:
    """Directed collection graph; self-loops forbidden, reciprocation allowed."""

    window: TimeWindow
    criterion: LinkageCriterion
    nodes: list[str]
    edges: list[tuple[str, str, float]]
    threshold: float
    skipped_assets: list[str] = field(default_factory=list)

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)

    def build_report(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "skipped_assets": len(self.skipped_assets),
            "threshold": self.threshold,
            "criterion": self.criterion.value,
            "window": {"t_start": self.window.t_start, "t_end": self.window.t_end},
        }


def penalty_factor(p: int, np_count: int) -> float:
    """Sigmoid discount 1 / (1 + exp(-p / np)) on a collection edge.

    ``p`` counts the source collection's matching assets, ``np_count``
    the non-matching remainder. ``np_count`` = 0 returns 1.0 exactly,
    the limit of p/np as np tends to zero from above.
    """
    if p < 0 or np_count < 0:
        raise ValueError(f"counts must be nonnegative, got p={p}, np={np_count}")
    if np_count == 0:
        return 1.0
    return 1.0 / (1.0 + math.exp(-p / np_count))


def aggregate_collection_weight(
    scores, criterion: LinkageCriterion, p: int, np_count: int
) -> float:
    """Apply the linkage aggregate to ``scores`` and penalize the result.

    Raw cosines may be negative, so the penalized aggregate lands in
    [-1, 1]; the returned weight is clamped to [0, 1] (a negative
    aggregate can never clear any positive edge threshold anyway).
    """
    if len(scores) == 0:
        raise ValueError("empty score list: no edge exists for this collection pair")
    if criterion is LinkageCriterion.MIN:
        sigma = min(scores)
    elif criterion is LinkageCriterion.MAX:
        sigma = max(scores)
    else:
        sigma = float(np.mean(np.asarray(scores, dtype=np.float64)))
    weight = float(sigma) * penalty_factor(p, np_count)
    assert -1.0 - 1e-12 <= weight <= 1.0 + 1e-12, f"weight {weight} escaped [-1, 1]"
    return min(max(weight, 0.0), 1.0)


def _windowed_embedded_by_collection(
    catalog: AssetCatalog, store: EmbeddingStore, window: TimeWindow
) -> tuple[dict[str, list[str]], list[str]]:
    members: dict[str, list[str]] = {}
    skipped: list[str] = []
    for collection_id in sorted(catalog.collections):
        kept = []
        for asset_id in sorted(catalog.collections[collection_id]):
            if not window.contains(catalog.assets[asset_id].first_sale_ts):
                continue
            if store.index_of(asset_id) is None:
                skipped.append(asset_id)
            else:
                kept.append(asset_id)
        if kept:
            members[collection_id] = kept
    return members, skipped


def best_cross_similarities(
    c_i: str,
    c_j: str,
    catalog: AssetCatalog,
    store: EmbeddingStore,
    window: TimeWindow | None = None,
) -> list[float]:
    """Best strictly-earlier similarity from each asset of c_i into c_j.

    Returns one score per asset of c_i that has at least one strictly
    earlier counterpart in c_j, ordered by asset id. Assets without an
    earlier counterpart are omitted (they count toward the penalty's
    non-matching side, never toward the scores).
    """
    if window is None:
        all_ts = [r.first_sale_ts for r in catalog.assets.values()]
        window = TimeWindow(min(all_ts) - 1, max(all_ts) + 1)
    members, _ = _windowed_embedded_by_collection(catalog, store, window)
    if c_i not in members or c_j not in members:
        raise DataError(
            f"collection pair ({c_i!r}, {c_j!r}) is empty within the window")
    return _pair_scores(members[c_i], members[c_j], catalog, store)


def _pair_scores(
    ids_i: list[str], ids_j: list[str], catalog: AssetCatalog, store: EmbeddingStore
) -> list[float]:
    """Per-asset best admissible similarity for each scored row of ids_i."""
    norm_i = normalize_rows(store.data[[store.index_of(a) for a in ids_i]], ids=ids_i)
    norm_j = normalize_rows(store.data[[store.index_of(a) for a in ids_j]], ids=ids_j)
    ts_i = np.array([catalog.assets[a].first_sale_ts for a in ids_i], dtype=np.int64)
    ts_j = np.array([catalog.assets[a].first_sale_ts for a in ids_j], dtype=np.int64)
    sims = cosine_block(norm_i, norm_j)
    admissible = ts_i[:, None] > ts_j[None, :]
    sims = np.where(admissible, sims, -np.inf)
    best = sims.max(axis=1)
    return [float(b) for b in best[best > -np.inf]]


def build_collection_graph(
    catalog: AssetCatalog,
    store: EmbeddingStore,
    window: TimeWindow,
    criterion: LinkageCriterion = LinkageCriterion.AVG,
    threshold: float = 0.5,
    workers: int = 1,
) -> CollectionGraph:
    """Build the collection graph for ``window`` under ``criterion``.

    For each ordered pair (c_i, c_j) the per-asset best strictly-earlier
    similarities are aggregated with the criterion and multiplied by the
    penalty, where p counts c_i's assets whose best score clears
    ``threshold`` and np the rest of c_i's windowed embedded assets. The
    same (p, np) split applies under every criterion, which makes the
    Min/Avg/Max edge sets nested. Edges below ``threshold`` after the
    penalty are dropped.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    members, skipped = _windowed_embedded_by_collection(catalog, store, window)
    nodes = sorted(members)
    if not nodes:
        raise DataError(
            "no collection has a windowed embedded asset; check the window bounds")

    def evaluate(pair):
        c_i, c_j = pair
        scores = _pair_scores(members[c_i], members[c_j], catalog, store)
        if not scores:
            return None
        p = sum(1 for s in scores if s >= threshold)
        np_count = len(members[c_i]) - p
        weight = aggregate_collection_weight(scores, criterion, p, np_count)
        if weight >= threshold:
            return (c_i, c_j, weight)
        return None

    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, pairs))
    else:
        results = [evaluate(pair) for pair in pairs]

    edges = [r for r in results if r is not None]
    # pairs were generated in sorted order, so edges are already sorted
    return CollectionGraph(
        window=window, criterion=criterion, nodes=nodes, edges=edges,
        threshold=threshold, skipped_assets=skipped)
