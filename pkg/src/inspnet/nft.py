"""Directed, weighted, time-respecting visual-inspiration graph over assets.

An edge i -> j means asset i (first sold strictly later) is visually close
to asset j from a different collection: the inspired node points at the
inspiring one. Strict timestamp inequality makes the graph acyclic by
construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from inspnet.model import AssetCatalog, DataError, EmbeddingStore, TimeWindow
from inspnet.simkernel import DEFAULT_BLOCK_ROWS, normalize_rows, scan_admissible_pairs

log = logging.getLogger(__name__)


@dataclass
class InspirationGraph:
    """Time-respecting inspiration graph for one observation window.

    ``nodes`` holds every windowed asset that has an embedding, sorted;
    ``edges`` holds (source, target, weight) triples sorted by
    (source, target). ``skipped_assets`` lists windowed assets excluded
    for lack of an embedding.
    """

    window: TimeWindow
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
            "window": {"t_start": self.window.t_start, "t_end": self.window.t_end},
        }


def build_nft_graph(
    catalog: AssetCatalog,
    store: EmbeddingStore,
    window: TimeWindow,
    threshold: float = 0.5,
    workers: int = 1,
    block: int = DEFAULT_BLOCK_ROWS,
) -> InspirationGraph:
    """Construct the inspiration graph for ``window``.

    An edge (i -> j) exists exactly when ts(i) > ts(j) strictly, the two
    assets sit in different collections, and cosine(h_i, h_j) >=
    ``threshold``. Assets inside the window without an embedding are
    skipped and reported, not fatal.

    Raises
    ------
    ValueError
        If ``threshold`` is outside (0, 1] or ``workers`` < 1.
    DataError
        If no windowed asset has an embedding (misconfigured window).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    node_ids: list[str] = []
    skipped: list[str] = []
    for asset_id in sorted(catalog.assets):
        record = catalog.assets[asset_id]
        if not window.contains(record.first_sale_ts):
            continue
        if store.index_of(asset_id) is None:
            skipped.append(asset_id)
        else:
            node_ids.append(asset_id)
    if skipped:
        log.info("skipping %d windowed assets without embeddings", len(skipped))
    if not node_ids:
        raise DataError(
            "no windowed asset has an embedding; check the window bounds and id alignment")

    rows = [store.index_of(a) for a in node_ids]
    norm = normalize_rows(store.data[rows], ids=node_ids)
    ts = np.array([catalog.assets[a].first_sale_ts for a in node_ids], dtype=np.int64)
    coll_names = [catalog.assets[a].collection_id for a in node_ids]
    _, coll = np.unique(coll_names, return_inverse=True)

    src_idx, tgt_idx, weights = scan_admissible_pairs(
        norm, ts, coll, threshold, workers=workers, block=block)

    edges = [
        (node_ids[int(i)], node_ids[int(j)], float(w))
        for i, j, w in zip(src_idx, tgt_idx, weights)
    ]
    # node ids are sorted, so row order equals id order and the scan output
    # is already sorted by (source, target)
    return InspirationGraph(
        window=window, nodes=node_ids, edges=edges, threshold=threshold,
        skipped_assets=skipped)


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_edge_list(graph, path: str, fmt: str = "tsv") -> int:
    """Write the edge list as TSV (default) or DOT; returns rows written.

    TSV carries a ``source  target  weight`` header with weights at six
    decimal places; DOT emits a ``digraph`` with weight attributes and
    every node declared, isolated ones included.
    """
    if fmt == "tsv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("source\ttarget\tweight\n")
            for src, tgt, w in graph.edges:
                fh.write(f"{src}\t{tgt}\t{w:.6f}\n")
        return len(graph.edges)
    if fmt == "dot":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("digraph inspiration {\n")
            for node in graph.nodes:
                fh.write(f"  {_dot_quote(node)};\n")
            for src, tgt, w in graph.edges:
                fh.write(f"  {_dot_quote(src)} -> {_dot_quote(tgt)} [weight={w:.6f}];\n")
            fh.write("}\n")
        return len(graph.edges)
    raise ValueError(f"unknown export format {fmt!r}; expected 'tsv' or 'dot'")
