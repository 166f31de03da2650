"""Structural graph statistics and Louvain community detection.

Operates on any graph object exposing ``nodes`` (list of ids) and
``edges`` (list of (source, target, weight)); both the asset-level and
collection-level graphs qualify. Distances are unweighted hop counts on
the directed graph; the starred coefficients discard edge orientation.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from inspnet.model import DataError

log = logging.getLogger(__name__)

EXACT_DISTANCE_LIMIT = 50_000
PIVOT_SAMPLE = 1_024


@dataclass(frozen=True)
class StructuralStats:
    """One row bundle of structural indicators for a directed graph.

    ``degree_assortativity`` is NaN when either endpoint-degree sequence
    has zero variance (the correlation is undefined). ``diameter`` and
    ``avg_path_length`` cover reachable ordered pairs only; both are 0
    when no pair is reachable.
    """

    node_count: int
    edge_count: int
    density: float
    avg_in_degree: float
    degree_assortativity: float
    pct_sources: float
    pct_sinks: float
    diameter: int
    avg_path_length: float
    transitivity_undirected: float
    clustering_coeff_deg2plus: float
    clustering_coeff_full_avg: float
    scc_count: int
    wcc_count: int
    reciprocated_edge_pct: float
    reciprocated_pair_pct: float

    def as_report(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": self.edge_count,
            "density": self.density,
            "avg_in_degree": self.avg_in_degree,
            "degree_assortativity": self.degree_assortativity,
            "pct_sources": self.pct_sources,
            "pct_sinks": self.pct_sinks,
            "diameter": self.diameter,
            "avg_path_length": self.avg_path_length,
            "transitivity_undirected": self.transitivity_undirected,
            "clustering_coeff_deg2plus": self.clustering_coeff_deg2plus,
            "clustering_coeff_full_avg": self.clustering_coeff_full_avg,
            "scc_count": self.scc_count,
            "wcc_count": self.wcc_count,
            "reciprocated_edge_pct": self.reciprocated_edge_pct,
            "reciprocated_pair_pct": self.reciprocated_pair_pct,
        }


@dataclass(frozen=True)
class CommunityPartition:
    """Node-to-community assignment with its modularity score."""

    assignment: dict
    modularity: float

    def community_count(self) -> int:
        return len(set(self.assignment.values()))


def _index_graph(graph):
    nodes = list(graph.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    edges = [(index[s], index[t]) for s, t, _ in graph.edges]
    return nodes, index, edges


def _bfs_distances(out_adj, source, n):
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in out_adj[u]:
            if dist[v] < 0:
                dist[v] = du + 1
                queue.append(v)
    return dist


def _scc_count(out_adj, n) -> int:
    """Number of strongly connected components, iterative Tarjan."""
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    stack: list[int] = []
    counter = 0
    sccs = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        while work:
            u, edge_pos = work.pop()
            if edge_pos == 0:
                index[u] = low[u] = counter
                counter += 1
                stack.append(u)
                on_stack[u] = True
            advanced = False
            neighbors = out_adj[u]
            while edge_pos < len(neighbors):
                v = neighbors[edge_pos]
                edge_pos += 1
                if index[v] < 0:
                    work.append((u, edge_pos))
                    work.append((v, 0))
                    advanced = True
                    break
                if on_stack[v]:
                    low[u] = min(low[u], index[v])
            if advanced:
                continue
            if low[u] == index[u]:
                sccs += 1
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    if w == u:
                        break
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[u])
    return sccs


def _wcc_count(n, edges) -> int:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            components -= 1
    return components


def structural_summary(
    graph,
    exact_distance_limit: int = EXACT_DISTANCE_LIMIT,
    pivot_sample: int = PIVOT_SAMPLE,
) -> StructuralStats:
    """Compute the full indicator set for a directed graph.

    Distances use breadth-first search from every node up to
    ``exact_distance_limit`` nodes; beyond that, sources are subsampled
    with an even stride over the sorted node order (``pivot_sample``
    pivots), making diameter and average path length documented
    estimates rather than exact values.
    """
    nodes, _, edges = _index_graph(graph)
    n = len(nodes)
    if n == 0:
        raise DataError("empty graph: no nodes to summarize")
    m = len(edges)

    in_deg = np.zeros(n, dtype=np.int64)
    out_deg = np.zeros(n, dtype=np.int64)
    out_adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        out_deg[u] += 1
        in_deg[v] += 1
        out_adj[u].append(v)

    density = m / (n * (n - 1)) if n >= 2 else 0.0
    avg_in_degree = m / n
    pct_sources = 100.0 * int((in_deg == 0).sum()) / n
    pct_sinks = 100.0 * int((out_deg == 0).sum()) / n

    if m >= 2:
        x = out_deg[[u for u, _ in edges]].astype(np.float64)
        y = in_deg[[v for _, v in edges]].astype(np.float64)
        if x.std() == 0.0 or y.std() == 0.0:
            assortativity = float("nan")
        else:
            assortativity = float(np.corrcoef(x, y)[0, 1])
    else:
        assortativity = float("nan")

    if n <= exact_distance_limit:
        sources = range(n)
    else:
        stride = max(1, n // pivot_sample)
        sources = range(0, n, stride)
        log.info("distance pass subsampled to %d pivot sources", len(sources))
    dist_sum = 0
    dist_count = 0
    diameter = 0
    for s in sources:
        dist = _bfs_distances(out_adj, s, n)
        reached = dist[dist > 0]
        if reached.size:
            dist_sum += int(reached.sum())
            dist_count += int(reached.size)
            diameter = max(diameter, int(reached.max()))
    avg_path_length = dist_sum / dist_count if dist_count else 0.0

    und_adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            und_adj[u].add(v)
            und_adj[v].add(u)
    closed_triples = 0
    triple_count = 0
    local_sum_deg2 = 0.0
    deg2_nodes = 0
    for u in range(n):
        neigh = und_adj[u]
        k = len(neigh)
        if k < 2:
            continue
        links = sum(1 for v in neigh for w in und_adj[v] if w in neigh and v < w)
        pairs = k * (k - 1) // 2
        triple_count += pairs
        closed_triples += links
        local_sum_deg2 += links / pairs
        deg2_nodes += 1
    transitivity = (closed_triples / triple_count) if triple_count else 0.0
    clustering_deg2 = (local_sum_deg2 / deg2_nodes) if deg2_nodes else 0.0
    clustering_full = local_sum_deg2 / n

    edge_set = set(edges)
    recip_edges = sum(1 for u, v in edges if (v, u) in edge_set)
    reciprocated_edge_pct = 100.0 * recip_edges / m if m else 0.0
    unordered = {(min(u, v), max(u, v)) for u, v in edges}
    recip_pairs = sum(1 for u, v in unordered if (u, v) in edge_set and (v, u) in edge_set)
    reciprocated_pair_pct = 100.0 * recip_pairs / len(unordered) if unordered else 0.0

    return StructuralStats(
        node_count=n,
        edge_count=m,
        density=density,
        avg_in_degree=avg_in_degree,
        degree_assortativity=assortativity,
        pct_sources=pct_sources,
        pct_sinks=pct_sinks,
        diameter=diameter,
        avg_path_length=avg_path_length,
        transitivity_undirected=transitivity,
        clustering_coeff_deg2plus=clustering_deg2,
        clustering_coeff_full_avg=clustering_full,
        scc_count=_scc_count(out_adj, n),
        wcc_count=_wcc_count(n, edges),
        reciprocated_edge_pct=reciprocated_edge_pct,
        reciprocated_pair_pct=reciprocated_pair_pct,
    )


def _undirected_projection(graph):
    """Symmetric weighted adjacency; antiparallel directed edges sum."""
    nodes = sorted(graph.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    weights: dict[tuple[int, int], float] = {}
    for s, t, w in graph.edges:
        u, v = index[s], index[t]
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        weights[key] = weights.get(key, 0.0) + float(w)
    return nodes, weights


def _partition_modularity(weights, degree, two_m, community, self_w=None):
    if two_m == 0.0:
        return 0.0
    m = two_m / 2.0
    internal = 0.0
    for (u, v), w in weights.items():
        if community[u] == community[v]:
            internal += w
    if self_w is not None:
        internal += sum(self_w)
    tot: dict[int, float] = {}
    for node, c in enumerate(community):
        tot[c] = tot.get(c, 0.0) + degree[node]
    return internal / m - sum((t / two_m) ** 2 for t in tot.values())


def louvain_communities(graph, seed: int = 0) -> CommunityPartition:
    """Louvain partition of the undirected weighted projection.

    Deterministic by construction: nodes are scanned in ascending id
    order and modularity-gain ties break toward the lowest community id,
    so ``seed`` is accepted for interface stability but never consulted.
    """
    del seed
    nodes, weights = _undirected_projection(graph)
    n = len(nodes)
    if n == 0:
        raise DataError("empty graph: nothing to partition")

    # current level state: adjacency among supernodes, self weights,
    # and the mapping from original nodes to supernodes
    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for (u, v), w in weights.items():
        adj[u][v] = adj[u].get(v, 0.0) + w
        adj[v][u] = adj[v].get(u, 0.0) + w
    self_w = [0.0] * n
    node_map = list(range(n))
    total_w = sum(weights.values())
    two_m = 2.0 * total_w

    if two_m == 0.0:
        assignment = {node: i for i, node in enumerate(nodes)}
        return CommunityPartition(assignment=assignment, modularity=0.0)

    while True:
        size = len(adj)
        degree = [sum(adj[u].values()) + 2.0 * self_w[u] for u in range(size)]
        community = list(range(size))
        com_tot = degree.copy()

        moved_any = False
        while True:
            moved = False
            for u in range(size):
                cu = community[u]
                # weights from u to each neighboring community
                to_com: dict[int, float] = {}
                for v, w in adj[u].items():
                    to_com[community[v]] = to_com.get(community[v], 0.0) + w
                com_tot[cu] -= degree[u]
                best_c = cu
                best_gain = to_com.get(cu, 0.0) - com_tot[cu] * degree[u] / two_m
                for c in sorted(to_com):
                    if c == cu:
                        continue
                    gain = to_com[c] - com_tot[c] * degree[u] / two_m
                    if gain > best_gain + 1e-12 or (
                            abs(gain - best_gain) <= 1e-12 and c < best_c):
                        best_gain = gain
                        best_c = c
                com_tot[best_c] += degree[u]
                community[u] = best_c
                if best_c != cu:
                    moved = True
                    moved_any = True
            if not moved:
                break

        if not moved_any:
            break

        # renumber communities by first appearance and aggregate
        relabel: dict[int, int] = {}
        for u in range(size):
            if community[u] not in relabel:
                relabel[community[u]] = len(relabel)
        community = [relabel[c] for c in community]
        new_size = len(relabel)
        new_adj: list[dict[int, float]] = [dict() for _ in range(new_size)]
        new_self = [0.0] * new_size
        for u in range(size):
            cu = community[u]
            new_self[cu] += self_w[u]
            for v, w in adj[u].items():
                cv = community[v]
                if cu == cv:
                    if u < v:
                        new_self[cu] += w
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
        adj = new_adj
        self_w = new_self
        node_map = [community[c] for c in node_map]
        if new_size == size:
            break

    final_pairs: dict[tuple[int, int], float] = {}
    for u in range(len(adj)):
        for v, w in adj[u].items():
            if u < v:
                final_pairs[(u, v)] = w
    degree = [sum(adj[u].values()) + 2.0 * self_w[u] for u in range(len(adj))]
    modularity = _partition_modularity(
        final_pairs, degree, two_m, list(range(len(adj))), self_w=self_w)

    assignment = {nodes[i]: node_map[i] for i in range(n)}
    return CommunityPartition(assignment=assignment, modularity=modularity)
