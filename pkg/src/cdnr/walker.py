"""Second-order biased random walks for both layers of the pipeline.

Transition scores follow the return/in-out search bias: for a step standing
at ``curr`` having arrived from ``prev``, a neighbor ``x`` scores ``1/p`` if
``x == prev``, ``1`` if ``x`` is adjacent to ``prev``, and ``1/q`` otherwise,
optionally multiplied by the edge weight (the target-layer variant). Scores
are computed on the fly per step; no second-order alias tables are built,
so memory stays linear in the graph.

Each (root, repeat) pair owns an RNG stream derived from the configured seed,
which makes the produced multiset of walks independent of worker scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

__all__ = [
    "WalkConfig",
    "WalkSet",
    "TransitionDistribution",
    "transition",
    "generate_walks",
    "visit_counts",
    "rescale_counts",
    "dump_walks",
    "load_walks",
]


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    return_parameter: float = 1.0
    inout_parameter: float = 1.0
    use_edge_weights: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ValueError("walks_per_node and walk_length must be >= 1")
        if self.return_parameter <= 0 or self.inout_parameter <= 0:
            raise ValueError("return and in-out parameters must be > 0")


@dataclass
class WalkSet:
    walks: list[list[int]]
    config: WalkConfig
    graph_tag: str = "source"


@dataclass
class TransitionDistribution:
    candidates: np.ndarray
    probabilities: np.ndarray

    def __len__(self) -> int:
        return len(self.candidates)


def _scores(g: Graph, prev: int | None, curr: int, cfg: WalkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized next-step scores over the neighbors of ``curr``."""
    nbrs = g.neighbors(curr)
    if len(nbrs) == 0:
        return nbrs, np.empty(0, dtype=np.float64)
    base = g.weights(curr) if cfg.use_edge_weights else np.ones(len(nbrs))
    if prev is None or (cfg.return_parameter == 1.0 and cfg.inout_parameter == 1.0):
        return nbrs, base
    prev_set = g.neighbor_set(prev)
    inv_p = 1.0 / cfg.return_parameter
    inv_q = 1.0 / cfg.inout_parameter
    alpha = np.empty(len(nbrs), dtype=np.float64)
    for i, x in enumerate(nbrs.tolist()):
        if x == prev:
            alpha[i] = inv_p
        elif x in prev_set:
            alpha[i] = 1.0
        else:
            alpha[i] = inv_q
    return nbrs, base * alpha


def transition(g: Graph, prev: int | None, curr: int, cfg: WalkConfig) -> TransitionDistribution:
    """Normalized next-step distribution from ``curr`` given ``prev``.

    ``prev=None`` marks the first step of a walk, where the search bias is
    identically 1. An isolated ``curr`` yields an empty distribution, the
    signal for the caller to truncate the walk.
    """
    nbrs, scores = _scores(g, prev, curr, cfg)
    if len(nbrs) == 0:
        return TransitionDistribution(nbrs, scores)
    total = scores.sum()
    return TransitionDistribution(nbrs, scores / total)


def _walk_rng(seed: int, node: int, repeat: int) -> np.random.Generator:
    # per-(root, repeat) stream: equal walks under any worker split
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, node, repeat)))


def _one_walk(g: Graph, cfg: WalkConfig, root: int, rng: np.random.Generator) -> list[int]:
    walk = [root]
    length = cfg.walk_length
    if length == 1:
        return walk
    uniform_case = (
        cfg.return_parameter == 1.0
        and cfg.inout_parameter == 1.0
        and not cfg.use_edge_weights
    )
    draws = rng.random(length - 1)
    prev: int | None = None
    curr = root
    for t in range(length - 1):
        nbrs = g.neighbors(curr)
        n = len(nbrs)
        if n == 0:
            break
        if uniform_case:
            nxt = int(nbrs[int(draws[t] * n)])
        else:
            _, scores = _scores(g, prev, curr, cfg)
            cum = np.cumsum(scores)
            idx = int(np.searchsorted(cum, draws[t] * cum[-1], side="right"))
            nxt = int(nbrs[min(idx, n - 1)])
        walk.append(nxt)
        prev, curr = curr, nxt
    return walk


def generate_walks(
    g: Graph, cfg: WalkConfig, graph_tag: str = "source", workers: int = 1
) -> WalkSet:
    """k walks of length <= l rooted at every node that has a neighbor.

    Isolated nodes contribute a single one-node walk so they still reach the
    embedding vocabulary. Output order is fixed to (node, repeat) regardless
    of ``workers``; worker parallelism only changes scheduling, never the
    walks themselves (each walk draws from its own derived RNG stream).
    """
    roots: list[tuple[int, int]] = []
    for node in range(g.node_count):
        if len(g.neighbors(node)) == 0:
            roots.append((node, 0))
        else:
            roots.extend((node, rep) for rep in range(cfg.walks_per_node))

    def run(pair: tuple[int, int]) -> list[int]:
        node, rep = pair
        if len(g.neighbors(node)) == 0:
            return [node]
        return _one_walk(g, cfg, node, _walk_rng(cfg.seed, node, rep))

    if workers <= 1:
        walks = [run(pair) for pair in roots]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            walks = list(pool.map(run, roots, chunksize=256))
    return WalkSet(walks=walks, config=cfg, graph_tag=graph_tag)


def visit_counts(ws: WalkSet, node_count: int) -> np.ndarray:
    """Number of times each node occurs across all walks."""
    counts = np.zeros(node_count, dtype=np.int64)
    for walk in ws.walks:
        np.add.at(counts, walk, 1)
    return counts


def rescale_counts(values: np.ndarray, target_mean: float) -> np.ndarray:
    """Rescale positive counts to a target mean and round to integers >= 1.

    A log-log slope is invariant under multiplicative rescaling of the
    x-axis, so fitting the rescaled values estimates the same exponent while
    restoring the bin multiplicities a histogram fit needs. Used to compare
    walk visit frequencies against a degree distribution on equal footing.
    """
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean()
    if mean <= 0:
        raise ValueError("values must have positive mean")
    return np.maximum(1, np.rint(values * (target_mean / mean)).astype(np.int64))


# -- walk file format ----------------------------------------------------------


def dump_walks(ws: WalkSet) -> str:
    cfg = ws.config
    header = (
        f"#walks k={cfg.walks_per_node} l={cfg.walk_length}"
        f" p={cfg.return_parameter} q={cfg.inout_parameter}"
    )
    lines = [header]
    lines.extend(" ".join(str(n) for n in walk) for walk in ws.walks)
    return "\n".join(lines) + "\n"


def load_walks(text: str, graph_tag: str = "source") -> WalkSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#walks"):
        raise ValueError("walk file must start with a '#walks' header")
    params = dict(tok.split("=") for tok in lines[0].split()[1:])
    cfg = WalkConfig(
        walks_per_node=int(params["k"]),
        walk_length=int(params["l"]),
        return_parameter=float(params["p"]),
        inout_parameter=float(params["q"]),
    )
    walks = [
        [int(tok) for tok in line.split()]
        for line in lines[1:]
        if line.strip()
    ]
    return WalkSet(walks=walks, config=cfg, graph_tag=graph_tag)


