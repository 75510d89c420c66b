"""Synthetic graph generators: scale-free growth, planted partitions, edge
degradation. These provide label-bearing desk-scale fixtures; all generators
are pure functions of their arguments including the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph

__all__ = ["LabeledGraph", "scale_free", "planted_partition", "degrade",
           "dump_labels", "load_labels"]


@dataclass
class LabeledGraph:
    graph: Graph
    labels: dict[int, set[int]]


def scale_free(n: int, m: int, seed: int) -> Graph:
    """Preferential-attachment graph: n nodes, each newcomer attaches m edges.

    Starts from a complete seed graph on m+1 nodes, so ``n = m + 1`` returns
    K_{m+1}. Attachment targets are drawn degree-proportionally (with the
    repeated-endpoints trick), without duplicate targets per newcomer.
    Asymptotic degree exponent is ~3.
    """
    if not (n > m >= 1):
        raise ValueError(f"need n > m >= 1, got n={n} m={m}")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int, float]] = []
    # endpoint multiset; sampling uniformly from it is degree-proportional
    endpoints: list[int] = []
    for u in range(m + 1):
        for v in range(u + 1, m + 1):
            edges.append((u, v, 1.0))
            endpoints.extend((u, v))
    for u in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(endpoints[rng.integers(0, len(endpoints))])
        for v in sorted(targets):
            edges.append((u, v, 1.0))
            endpoints.extend((u, v))
    return Graph.from_edges(n, edges, directed=False)


def planted_partition(
    n: int, communities: int, p_in: float, p_out: float, seed: int
) -> LabeledGraph:
    """Even-sized planted-partition graph; the community id is the label.

    Each intra-community pair is an edge with probability ``p_in``, each
    inter-community pair with ``p_out``; requires ``0 <= p_out < p_in <= 1``
    and ``communities >= 2`` dividing ``n``.
    """
    if communities < 2:
        raise ValueError("need communities >= 2")
    if n % communities != 0:
        raise ValueError(f"n={n} not divisible by communities={communities}")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in} p_out={p_out}")
    rng = np.random.default_rng(seed)
    size = n // communities
    community = np.arange(n) // size

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(community[iu] == community[ju], p_in, p_out)
    mask = rng.random(len(iu)) < prob
    edges = [(int(u), int(v), 1.0) for u, v in zip(iu[mask], ju[mask])]
    g = Graph.from_edges(n, edges, directed=False)
    labels = {i: {int(community[i])} for i in range(n)}
    return LabeledGraph(graph=g, labels=labels)


def degrade(g: Graph, keep_fraction: float, seed: int) -> Graph:
    """Uniformly keep ``round(keep_fraction * |E|)`` edges, all nodes retained.

    Sampling is without replacement so the retained count is exact; isolated
    nodes are allowed in the result. ``keep_fraction=1`` is the identity.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep_fraction must be in (0,1], got {keep_fraction}")
    edges = list(g.edges())
    if keep_fraction == 1.0:
        return Graph.from_edges(
            g.node_count, edges, directed=g.directed, external_ids=g.external_ids
        )
    rng = np.random.default_rng(seed)
    keep = int(round(keep_fraction * len(edges)))
    chosen = rng.choice(len(edges), size=keep, replace=False)
    kept = [edges[i] for i in sorted(chosen.tolist())]
    return Graph.from_edges(
        g.node_count, kept, directed=g.directed, external_ids=g.external_ids
    )


def dump_labels(lg: LabeledGraph) -> str:
    """One ``node_id label_id`` line per (node, label) pair."""
    lines = []
    for node in range(lg.graph.node_count):
        for lab in sorted(lg.labels.get(node, ())):
            lines.append(f"{lg.graph.to_external(node)} {lab}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_labels(text: str, g: Graph) -> dict[int, set[int]]:
    """Parse ``node_id label_id`` lines against a graph's id map."""
    labels: dict[int, set[int]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        node_tok, lab_tok = line.split()
        idx = g.to_index(node_tok)
        labels.setdefault(idx, set()).add(int(lab_tok))
    return labels
