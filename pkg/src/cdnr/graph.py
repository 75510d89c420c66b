"""Graph container, edge-list ingestion, degree statistics, power-law slope fit.

Everything downstream (walkers, node-scale balancing, knowledge transfer)
works on dense node indices in ``[0, node_count)``. External identifiers are
arbitrary strings and live only in the ``Graph`` id map; they are assigned a
dense index in order of first appearance and can be persisted/reloaded so
artifacts stay joinable across pipeline stages.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "Graph",
    "DegreeStats",
    "PowerLawFit",
    "GraphParseError",
    "PowerLawFitError",
    "load_edge_list",
    "dump_edge_list",
    "dump_id_map",
    "load_id_map",
    "degree_stats",
    "stats_from_values",
    "fit_power_law",
    "degree_histogram_csv",
    "distribution_csv",
]


class GraphParseError(ValueError):
    """Raised on a malformed edge-list line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class PowerLawFitError(ValueError):
    """Raised when a degree distribution has too few points to fit a slope."""


class Graph:
    """Immutable adjacency structure with optional positive edge weights.

    Undirected graphs store every edge symmetrically with equal weight.
    Directed graphs store out-arcs; in-degrees are tracked so that the
    degree of a node is the total number of incident stored arcs.

    Instances are meant to be read-only after construction; all per-node
    accessors are safe for unrestricted concurrent reads.
    """

    def __init__(
        self,
        node_count: int,
        neighbors: list[np.ndarray],
        weights: list[np.ndarray],
        directed: bool,
        external_ids: list[str],
        edge_count: int,
        in_degrees: np.ndarray | None = None,
    ):
        self.node_count = node_count
        self.directed = directed
        self.edge_count = edge_count
        self.external_ids = external_ids
        self._index = {ext: i for i, ext in enumerate(external_ids)}
        if len(self._index) != node_count:
            raise ValueError("id map is not a bijection over present nodes")
        self._nbrs = neighbors
        self._wts = weights
        self._nbr_sets = [frozenset(a.tolist()) for a in neighbors]
        self._in_degrees = in_degrees

    # -- construction -------------------------------------------------------

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int, float]],
        directed: bool = False,
        external_ids: Sequence[str] | None = None,
    ) -> "Graph":
        """Build a graph from dense-index edge triples.

        Duplicate edges collapse by summing their weights. Self loops are
        dropped (and counted in the log). Weights must be positive.
        """
        acc: dict[tuple[int, int], float] = {}
        dropped = 0
        for u, v, w in edges:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u},{v}) outside [0,{node_count})")
            if u == v:
                dropped += 1
                continue
            if w <= 0:
                raise ValueError(f"edge ({u},{v}) has non-positive weight {w}")
            key = (u, v) if directed else (min(u, v), max(u, v))
            acc[key] = acc.get(key, 0.0) + float(w)
        if dropped:
            log.info("dropped %d self-loop edge(s)", dropped)

        adj: list[list[tuple[int, float]]] = [[] for _ in range(node_count)]
        in_deg = np.zeros(node_count, dtype=np.int64) if directed else None
        for (u, v), w in acc.items():
            adj[u].append((v, w))
            if directed:
                in_deg[v] += 1
            else:
                adj[v].append((u, w))

        neighbors: list[np.ndarray] = []
        weights: list[np.ndarray] = []
        for lst in adj:
            lst.sort()
            neighbors.append(np.array([n for n, _ in lst], dtype=np.int64))
            weights.append(np.array([w for _, w in lst], dtype=np.float64))

        if external_ids is None:
            external_ids = [str(i) for i in range(node_count)]
        return cls(
            node_count,
            neighbors,
            weights,
            directed,
            list(external_ids),
            edge_count=len(acc),
            in_degrees=in_deg,
        )

    # -- adjacency ----------------------------------------------------------

    def neighbors(self, u: int) -> np.ndarray:
        return self._nbrs[u]

    def weights(self, u: int) -> np.ndarray:
        return self._wts[u]

    def neighbor_set(self, u: int) -> frozenset:
        return self._nbr_sets[u]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._nbr_sets[u]

    def edge_weight(self, u: int, v: int) -> float:
        """Weight of the stored edge u->v; 0.0 when absent."""
        idx = np.searchsorted(self._nbrs[u], v)
        if idx < len(self._nbrs[u]) and self._nbrs[u][idx] == v:
            return float(self._wts[u][idx])
        return 0.0

    def degree(self, u: int) -> int:
        d = len(self._nbrs[u])
        if self.directed:
            d += int(self._in_degrees[u])
        return d

    def degree_sequence(self) -> np.ndarray:
        out = np.array([len(a) for a in self._nbrs], dtype=np.int64)
        if self.directed:
            out = out + self._in_degrees
        return out

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield each stored edge once: (u, v, w) with u < v when undirected."""
        for u in range(self.node_count):
            nbrs, wts = self._nbrs[u], self._wts[u]
            for v, w in zip(nbrs.tolist(), wts.tolist()):
                if self.directed or u < v:
                    yield u, v, w

    # -- id map --------------------------------------------------------------

    def to_index(self, external_id: str) -> int:
        return self._index[external_id]

    def to_external(self, index: int) -> str:
        return self.external_ids[index]

    # -- derived graphs ------------------------------------------------------

    def symmetrized(self) -> "Graph":
        """Undirected view of a directed graph (arc weights sum per pair)."""
        if not self.directed:
            return self
        return Graph.from_edges(
            self.node_count,
            self.edges(),
            directed=False,
            external_ids=self.external_ids,
        )

    def reweighted(self, pair_weights: dict[tuple[int, int], float]) -> "Graph":
        """New graph over the same nodes with edges taken from ``pair_weights``.

        Keys are dense index pairs (canonical u < v for undirected graphs);
        pairs with non-positive weight are omitted.
        """
        triples = [(u, v, w) for (u, v), w in pair_weights.items() if w > 0]
        return Graph.from_edges(
            self.node_count, triples, directed=self.directed,
            external_ids=self.external_ids,
        )


# -- edge-list text format ----------------------------------------------------


def load_edge_list(
    source_text: str,
    directed: bool = False,
    default_weight: float = 1.0,
) -> Graph:
    """Parse whitespace-separated ``u v [w]`` lines into a :class:`Graph`.

    Lines starting with ``#`` and blank lines are skipped. Node identifiers
    are arbitrary tokens; dense indices follow first appearance. Duplicate
    edges collapse by summing weights; self-loop lines are dropped.

    Raises
    ------
    GraphParseError
        On a line with the wrong token count, a non-numeric weight, or a
        non-positive weight.
    """
    index: dict[str, int] = {}
    external_ids: list[str] = []
    edges: list[tuple[int, int, float]] = []

    def intern(token: str) -> int:
        i = index.get(token)
        if i is None:
            i = len(external_ids)
            index[token] = i
            external_ids.append(token)
        return i

    for lineno, raw in enumerate(source_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) == 2:
            w = default_weight
        elif len(tokens) == 3:
            try:
                w = float(tokens[2])
            except ValueError:
                raise GraphParseError(lineno, f"non-numeric weight {tokens[2]!r}")
            if math.isnan(w):
                raise GraphParseError(lineno, "weight is NaN")
        else:
            raise GraphParseError(lineno, f"expected 2 or 3 tokens, got {len(tokens)}")
        if w <= 0:
            raise GraphParseError(lineno, f"non-positive weight {w}")
        edges.append((intern(tokens[0]), intern(tokens[1]), w))

    return Graph.from_edges(
        len(external_ids), edges, directed=directed, external_ids=external_ids
    )


def dump_edge_list(g: Graph) -> str:
    """Serialize a graph as ``u v w`` lines (full-precision weights).

    Reloading the result reproduces the same adjacency structure, degrees
    and weights.
    """
    lines = [
        f"{g.to_external(u)} {g.to_external(v)} {w!r}" for u, v, w in g.edges()
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def dump_id_map(g: Graph) -> str:
    return "".join(f"{ext}\t{i}\n" for i, ext in enumerate(g.external_ids))


def load_id_map(text: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        ext, idx = line.rsplit("\t", 1)
        out[ext] = int(idx)
    return out


# -- degree statistics --------------------------------------------------------


@dataclass
class DegreeStats:
    """Degree bookkeeping for one graph (or any nonnegative integer values).

    ``distinct_degrees`` is sorted strictly decreasing; the alignment logic
    in node-scale balancing relies on that ranking.
    """

    degree_sequence: np.ndarray
    distinct_degrees: list[int]
    n_deg: int
    average_degree: float
    histogram: dict[int, int]
    node_count: int = field(default=0)

    def __post_init__(self):
        if self.node_count == 0:
            self.node_count = len(self.degree_sequence)


def stats_from_values(values: Sequence[int] | np.ndarray) -> DegreeStats:
    """DegreeStats over an arbitrary nonnegative integer sequence.

    Used for node degrees and also for walk visit counts, which are fitted
    against the same power-law machinery.
    """
    seq = np.asarray(values, dtype=np.int64)
    uniq, counts = np.unique(seq, return_counts=True)
    order = np.argsort(uniq)[::-1]
    distinct = uniq[order].tolist()
    histogram = {int(d): int(c) for d, c in zip(uniq.tolist(), counts.tolist())}
    avg = float(seq.mean()) if len(seq) else 0.0
    return DegreeStats(
        degree_sequence=seq,
        distinct_degrees=distinct,
        n_deg=len(distinct),
        average_degree=avg,
        histogram=histogram,
    )


def degree_stats(g: Graph) -> DegreeStats:
    """Per-node degrees, distinct degree ranking, mean degree, histogram.

    For undirected graphs ``average_degree`` equals ``2*|E| / |V|`` exactly.
    """
    return stats_from_values(g.degree_sequence())


def degree_histogram_csv(stats: DegreeStats) -> str:
    lines = ["degree,count"]
    for d in sorted(stats.histogram):
        lines.append(f"{d},{stats.histogram[d]}")
    return "\n".join(lines) + "\n"


def distribution_csv(values: Sequence[int] | np.ndarray) -> str:
    """Log-log plot data for a value distribution: ``x,log_x,p,log_p`` rows.

    Zero values are excluded (no log); p is the fraction of all values.
    """
    values = np.asarray(values)
    total = len(values)
    uniq, counts = np.unique(values[values > 0], return_counts=True)
    lines = ["x,log_x,p,log_p"]
    for x, c in zip(uniq.tolist(), counts.tolist()):
        p = c / total
        lines.append(f"{x},{np.log(x)!r},{p!r},{np.log(p)!r}")
    return "\n".join(lines) + "\n"


# -- power-law slope fit -------------------------------------------------------


@dataclass
class PowerLawFit:
    """Least-squares line through (log deg, log P(deg)); slope_a = -slope."""

    slope_a: float
    intercept: float
    r_squared: float
    points_used: int


def fit_power_law(stats: DegreeStats, min_degree: int = 1) -> PowerLawFit:
    """Fit ``log P(deg) = intercept - slope_a * log deg`` over the histogram.

    All degrees >= ``min_degree`` with nonzero count enter the fit, one
    point per distinct degree, P(deg) = count/node_count. No log-binning.

    Raises
    ------
    PowerLawFitError
        If fewer than two distinct degrees qualify (a regular graph has no
        slope to fit).
    """
    degs = [d for d in stats.histogram if d >= min_degree and d > 0]
    if len(degs) < 2:
        raise PowerLawFitError(
            f"need >= 2 distinct degrees >= {min_degree}, got {len(degs)}"
        )
    degs.sort()
    n = stats.node_count
    x = np.log(np.array(degs, dtype=np.float64))
    y = np.log(np.array([stats.histogram[d] / n for d in degs]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return PowerLawFit(
        slope_a=float(-slope),
        intercept=float(intercept),
        r_squared=r2,
        points_used=len(degs),
    )
