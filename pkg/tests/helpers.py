"""Shared test utilities: synthetic instances and naive reference oracles."""

from __future__ import annotations

import numpy as np

from inspnet.model import (
    AssetCatalog,
    AssetRecord,
    Category,
    EmbeddingStore,
    TimeWindow,
    Transaction,
)

CATEGORIES = list(Category)


def make_instance(
    seed: int,
    n_assets: int = 60,
    d: int = 16,
    n_collections: int = 6,
    n_clusters: int = 4,
    noise: float = 0.6,
    with_transactions: bool = False,
    ts_low: int = 1_000_000,
    ts_high: int = 1_500_000,
):
    """Build a seeded (catalog, store) pair with clustered unit embeddings.

    Clustering is independent of collection assignment, so plenty of
    cross-collection pairs clear the 0.5 similarity threshold while others
    fall well below it.
    """
    rng = np.random.default_rng(seed)
    ids = [f"a{i:05d}" for i in range(n_assets)]
    coll = rng.integers(0, n_collections, size=n_assets)
    cats = rng.integers(0, len(CATEGORIES), size=n_assets)
    ts = rng.integers(ts_low, ts_high, size=n_assets)

    centers = rng.normal(size=(n_clusters, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    assign = rng.integers(0, n_clusters, size=n_assets)
    vecs = centers[assign] + noise * rng.normal(size=(n_assets, d))
    vecs = (vecs / np.linalg.norm(vecs, axis=1, keepdims=True)).astype(np.float32)

    assets = {}
    transactions = []
    for i, asset_id in enumerate(ids):
        assets[asset_id] = AssetRecord(
            asset_id=asset_id,
            collection_id=f"c{int(coll[i]):03d}",
            category=CATEGORIES[int(cats[i])],
            first_sale_ts=int(ts[i]),
            embedding_index=i,
        )
        if with_transactions:
            count = int(rng.integers(1, 4))
            for k in range(count):
                transactions.append(Transaction(
                    asset_id=asset_id,
                    ts=int(ts[i]) + k * int(rng.integers(1, 10_000)),
                    price_usd=float(np.round(rng.lognormal(3.0, 1.0), 2)),
                ))
    transactions.sort(key=lambda tx: (tx.ts, tx.asset_id))

    collections: dict[str, list[str]] = {}
    for asset_id in sorted(assets):
        collections.setdefault(assets[asset_id].collection_id, []).append(asset_id)

    catalog = AssetCatalog(assets=assets, collections=collections, transactions=transactions)
    store = EmbeddingStore(n=n_assets, d=d, data=vecs, ids=ids)
    return catalog, store


def full_window(catalog: AssetCatalog) -> TimeWindow:
    times = [r.first_sale_ts for r in catalog.assets.values()]
    return TimeWindow(min(times) - 1, max(times) + 1)


def brute_force_edges(catalog, store, window, threshold):
    """Naive three-rule edge oracle over all ordered pairs.

    Deliberately uses a different arithmetic path from the builder:
    one unnormalized float64 Gram matrix divided by norms, then plain
    Python loops applying the rules pair by pair.
    """
    nodes = [
        a for a in sorted(catalog.assets)
        if window.contains(catalog.assets[a].first_sale_ts)
        and store.index_of(a) is not None
    ]
    mat = store.data[[store.index_of(a) for a in nodes]].astype(np.float64)
    gram = mat @ mat.T
    norms = np.sqrt(np.diag(gram))
    edges = {}
    for i, a in enumerate(nodes):
        ra = catalog.assets[a]
        for j, b in enumerate(nodes):
            if i == j:
                continue
            rb = catalog.assets[b]
            if ra.first_sale_ts <= rb.first_sale_ts:
                continue
            if ra.collection_id == rb.collection_id:
                continue
            sim = gram[i, j] / (norms[i] * norms[j])
            if sim >= threshold:
                edges[(a, b)] = sim
    return edges


def hand_embeddings(rows: list[list[float]], ids: list[str]) -> EmbeddingStore:
    data = np.asarray(rows, dtype=np.float32)
    return EmbeddingStore(n=data.shape[0], d=data.shape[1], data=data, ids=ids)


class Graph:
    """Minimal duck-typed directed graph accepted by the metrics functions."""

    def __init__(self, nodes, pairs, weight: float = 1.0):
        self.nodes = list(nodes)
        self.edges = [
            (s, t, float(p[2]) if len(p) > 2 else weight)
            for p in pairs
            for s, t in [(p[0], p[1])]
        ]


def hand_catalog(specs: list[tuple[str, str, int]], transactions=None) -> AssetCatalog:
    """Catalog from (asset_id, collection_id, first_sale_ts) triples."""
    assets = {}
    for i, (asset_id, collection_id, ts) in enumerate(specs):
        assets[asset_id] = AssetRecord(
            asset_id=asset_id, collection_id=collection_id,
            category=Category.ART, first_sale_ts=ts, embedding_index=i)
    collections: dict[str, list[str]] = {}
    for asset_id in sorted(assets):
        collections.setdefault(assets[asset_id].collection_id, []).append(asset_id)
    return AssetCatalog(
        assets=assets, collections=collections,
        transactions=sorted(transactions or [], key=lambda tx: (tx.ts, tx.asset_id)))


def reference_power_law_sample(alpha, x_min, size, rng):
    """Independent inverse-CDF sampler used as the generation oracle."""
    from scipy.special import zeta

    cap = 3_000_000
    values = np.arange(x_min, cap, dtype=np.float64)
    pmf = values ** (-alpha)
    pmf /= zeta(alpha, x_min)
    cdf = np.cumsum(pmf)
    u = rng.random(size)
    return (x_min + np.searchsorted(cdf, u, side="left")).astype(np.int64)
