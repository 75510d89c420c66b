"""Knowledge transfer from source walks onto the target graph's edge weights.

The super graph accumulates, for every position pair inside every source
walk, the inverse within-walk distance between the two nodes' super nodes
(identical-node pairs are skipped; both-in-one-super pairs feed the super
node's self-loop). A candidate target pair then receives the weighted mean,
over its two endpoints' cross-domain links, of shortest-path scores through
the super graph; pairs that had no edge but gain positive weight are evolved
into new target edges.

Path length is unweighted hop count; the score averages the accumulated
co-occurrence weights along the path, so strongly co-visited super pairs
transfer more. Ties between equal-hop paths resolve to the lexicographically
smallest node sequence, which keeps transfer deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .balance import CrossLinks, SuperNodeSet
from .graph import Graph
from .walker import WalkSet

__all__ = [
    "SuperGraph",
    "PathScore",
    "TransferResult",
    "build_super_graph",
    "shortest_path",
    "candidate_pairs",
    "transfer_weights",
    "evolve_edges",
    "dump_super_graph",
    "dump_transfer",
]


@dataclass
class SuperGraph:
    super_ids: list[int]
    weights: np.ndarray  # (S, S) symmetric; diagonal holds self-loop mass
    node_to_super: dict[int, int]
    skipped_occurrences: int = 0

    def position(self, super_id: int) -> int:
        return self.super_ids.index(super_id)

    def weight(self, a: int, b: int) -> float:
        return float(self.weights[self.position(a), self.position(b)])


@dataclass
class PathScore:
    path: list[int]  # super ids, endpoints included
    length: int      # edge count; 0 for identical endpoints
    score: float     # mean accumulated weight along the path


@dataclass
class TransferResult:
    updated: dict[tuple[int, int], float]
    originals: dict[tuple[int, int], float]
    evolved: set[tuple[int, int]]
    normalizers: dict[tuple[int, int], float] = field(default_factory=dict)


def build_super_graph(
    walks_s: WalkSet,
    supers: SuperNodeSet,
    max_pair_distance: int | None = None,
) -> SuperGraph:
    """Accumulate inverse within-walk distances onto super-node pairs.

    Every position pair (i, j), i < j, of distinct nodes adds 1/(j-i) to the
    weight between their super nodes. ``max_pair_distance`` caps j-i (the
    full double sum is the default; capping at the training window is a
    cheaper approximation for long walks). Walk nodes that belong to no
    super node are skipped and counted.
    """
    super_ids = [s.id for s in supers.supers]
    pos_of = {sid: k for k, sid in enumerate(super_ids)}
    node_to_super: dict[int, int] = {}
    for s in supers.supers:
        for m in s.members:
            node_to_super[m] = s.id

    max_node = max((max(w) for w in walks_s.walks if w), default=-1)
    lookup = np.full(max_node + 1, -1, dtype=np.int64)
    for node, sid in node_to_super.items():
        if node <= max_node:
            lookup[node] = pos_of[sid]

    S = len(super_ids)
    acc = np.zeros((S, S), dtype=np.float64)
    skipped = 0

    by_length: dict[int, list[list[int]]] = {}
    for w in walks_s.walks:
        by_length.setdefault(len(w), []).append(w)

    for length, group in by_length.items():
        arr = np.asarray(group, dtype=np.int64)
        sup = lookup[arr]
        skipped += int((sup < 0).sum())
        if length < 2:
            continue
        max_d = length - 1 if max_pair_distance is None else min(max_pair_distance, length - 1)
        for d in range(1, max_d + 1):
            a, b = arr[:, :-d].ravel(), arr[:, d:].ravel()
            sa, sb = sup[:, :-d].ravel(), sup[:, d:].ravel()
            mask = (a != b) & (sa >= 0) & (sb >= 0)
            lo = np.minimum(sa[mask], sb[mask])
            hi = np.maximum(sa[mask], sb[mask])
            np.add.at(acc, (lo, hi), 1.0 / d)

    full = acc + np.triu(acc, k=1).T
    return SuperGraph(
        super_ids=super_ids,
        weights=full,
        node_to_super=node_to_super,
        skipped_occurrences=skipped,
    )


def shortest_path(sg: SuperGraph, a: int, b: int) -> PathScore | None:
    """Hop-count shortest path from super node ``a`` to ``b``.

    Equal endpoints give length 0 with the self-loop weight as score (0 when
    absent). Among equal-hop paths the lexicographically smallest node
    sequence wins. Returns None when unreachable.
    """
    pa, pb = sg.position(a), sg.position(b)
    if pa == pb:
        return PathScore(path=[a], length=0, score=float(sg.weights[pa, pa]))
    W = sg.weights
    S = len(sg.super_ids)
    dist = np.full(S, -1, dtype=np.int64)
    dist[pb] = 0
    queue = deque([pb])
    while queue:
        u = queue.popleft()
        for v in range(S):
            if v != u and W[u, v] > 0 and dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    if dist[pa] < 0:
        return None
    path = [pa]
    cur = pa
    total = 0.0
    while cur != pb:
        nxt = next(
            v for v in range(S)
            if v != cur and W[cur, v] > 0 and dist[v] == dist[cur] - 1
        )
        total += float(W[cur, nxt])
        path.append(nxt)
        cur = nxt
    hops = int(dist[pa])
    return PathScore(
        path=[sg.super_ids[p] for p in path],
        length=hops,
        score=total / hops,
    )


def candidate_pairs(g_t: Graph, hop_limit: int = 2) -> set[tuple[int, int]]:
    """All edges plus non-adjacent pairs within ``hop_limit`` hops (u < v)."""
    if hop_limit < 1:
        raise ValueError("hop_limit must be >= 1")
    pairs: set[tuple[int, int]] = {(u, v) for u, v, _ in g_t.edges()}
    if hop_limit == 1:
        return pairs
    for u in range(g_t.node_count):
        seen = {u: 0}
        frontier = [u]
        for depth in range(1, hop_limit + 1):
            nxt = []
            for x in frontier:
                for y in g_t.neighbors(x).tolist():
                    if y not in seen:
                        seen[y] = depth
                        nxt.append(y)
            frontier = nxt
        for y in seen:
            if y > u:
                pairs.add((u, y))
    return pairs


def transfer_weights(
    g_t: Graph,
    sg: SuperGraph,
    cross: CrossLinks,
    candidates: set[tuple[int, int]] | None = None,
) -> TransferResult:
    """Update target weights with the weighted mean of cross-domain path scores.

    For a pair (u, v) the increment sums w*_u(V'i) * w*_v(V'j) * score(V'i, V'j)
    over all linked super pairs and divides by Z, the sum of the same weight
    products, so the increment is a weighted mean bounded by the largest
    reachable path score. Endpoints without links, or with every super pair
    unreachable, keep their original weight.
    """
    if candidates is None:
        candidates = candidate_pairs(g_t, hop_limit=2)
    degs = g_t.degree_sequence()
    score_cache: dict[tuple[int, int], PathScore | None] = {}

    def pair_score(si: int, sj: int) -> PathScore | None:
        key = (si, sj) if si <= sj else (sj, si)
        if key not in score_cache:
            score_cache[key] = shortest_path(sg, key[0], key[1])
        return score_cache[key]

    updated: dict[tuple[int, int], float] = {}
    originals: dict[tuple[int, int], float] = {}
    normalizers: dict[tuple[int, int], float] = {}
    evolved: set[tuple[int, int]] = set()

    for u, v in sorted(candidates):
        w0 = g_t.edge_weight(u, v)
        links_u = cross.links_for_degree(int(degs[u]))
        links_v = cross.links_for_degree(int(degs[v]))
        z = 0.0
        num = 0.0
        for si, wi in links_u.items():
            for sj, wj in links_v.items():
                z += wi * wj
                ps = pair_score(si, sj)
                if ps is not None:
                    num += wi * wj * ps.score
        increment = num / z if z > 0 else 0.0
        w_new = w0 + increment
        key = (u, v)
        updated[key] = w_new
        originals[key] = w0
        normalizers[key] = z
        if w0 == 0.0 and w_new > 0.0:
            evolved.add(key)
    return TransferResult(
        updated=updated, originals=originals, evolved=evolved, normalizers=normalizers
    )


def evolve_edges(g_t: Graph, result: TransferResult) -> Graph:
    """Commit transferred weights: reweight original edges, insert evolved ones."""
    pair_weights = {(u, v): w for (u, v), w in result.updated.items() if w > 0}
    for u, v, w in g_t.edges():
        key = (min(u, v), max(u, v))
        if key not in pair_weights:
            pair_weights[key] = w
    return g_t.reweighted(pair_weights)


# -- serialization ----------------------------------------------------------------


def dump_super_graph(sg: SuperGraph) -> str:
    lines = []
    S = len(sg.super_ids)
    for i in range(S):
        for j in range(i, S):
            w = sg.weights[i, j]
            if w > 0:
                lines.append(f"{sg.super_ids[i]}\t{sg.super_ids[j]}\t{w!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def dump_transfer(result: TransferResult, g_t: Graph) -> str:
    lines = []
    for (u, v), w in sorted(result.updated.items()):
        w0 = result.originals[(u, v)]
        flag = 1 if (u, v) in result.evolved else 0
        lines.append(
            f"{g_t.to_external(u)}\t{g_t.to_external(v)}\t{w0!r}\t{w!r}\t{flag}"
        )
    return "\n".join(lines) + ("\n" if lines else "")
