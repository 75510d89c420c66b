"""Skip-gram embedding trainer with negative sampling over walk streams.

Positive pairs are every (center, context) within the training window along
a walk; each pair draws ``negatives_per_positive`` noise nodes from the
visit-count distribution raised to 0.75. Updates are plain per-pair SGD:
for one pair, all touched rows step by the exact gradient taken at the
current parameters (the center row accumulates its update across the
positive and negative terms and applies it once). The learning rate decays
linearly over the total pair count down to a floor.

The inner loop is jit-compiled; the deterministic mode runs it sequentially
over the walk stream and reproduces bit-identical matrices for identical
(walks, config, seed). The parallel mode shards walks across threads that
update the shared matrices without locks; concurrent lost updates are
tolerated by contract and only quality-level guarantees apply there.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sampling import AliasSampler
from .walker import WalkSet

__all__ = [
    "TrainConfig",
    "Embedding",
    "train",
    "loss_and_gradient",
    "PairGradients",
    "export_embedding",
    "import_embedding",
    "save_binary",
    "load_binary",
]

_BINARY_MAGIC = b"CDNREMB1"
_STAGE_PAIRS = 1 << 19  # pairs staged per kernel call; fixed so runs reproduce


@dataclass
class TrainConfig:
    dimension: int = 128
    window: int = 10
    negatives_per_positive: int = 5
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    epochs: int = 5
    seed: int = 0
    deterministic_mode: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives_per_positive < 1:
            raise ValueError("dimension, window and negatives must be >= 1")
        if self.initial_learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class Embedding:
    vectors: np.ndarray           # input vectors, one row per vocabulary node
    context_vectors: np.ndarray
    vocabulary: dict[int, int]    # node index -> row
    nodes: list[int]              # row -> node index
    visit_counts: np.ndarray
    config: TrainConfig | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def vector(self, node: int) -> np.ndarray:
        return self.vectors[self.vocabulary[node]]


def _build_vocab(walks: list[list[int]]) -> tuple[dict[int, int], list[int], np.ndarray]:
    counts: dict[int, int] = {}
    for walk in walks:
        for node in walk:
            counts[node] = counts.get(node, 0) + 1
    nodes = sorted(counts)
    vocab = {node: row for row, node in enumerate(nodes)}
    visits = np.array([counts[n] for n in nodes], dtype=np.int64)
    return vocab, nodes, visits


def _walk_pairs(rows: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) row pairs for every offset within +-window, both
    directions, in walk order."""
    length = len(rows)
    centers, contexts = [], []
    for off in range(1, min(window, length - 1) + 1):
        a, b = rows[:-off], rows[off:]
        centers.append(a)
        contexts.append(b)
        centers.append(b)
        contexts.append(a)
    if not centers:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(centers), np.concatenate(contexts)


@njit(cache=True, nogil=True)
def _sgd_pairs(
    vectors, contexts_m, centers, ctxs, negs,
    lr0, lr_min, total_pairs, consumed,
):  # pragma: no cover - compiled
    d = vectors.shape[1]
    n_neg = negs.shape[1]
    loss = 0.0
    accum = np.zeros(d)
    for i in range(len(centers)):
        t = consumed + i
        frac = t / total_pairs
        lr = lr0 - (lr0 - lr_min) * frac
        if lr < lr_min:
            lr = lr_min
        u = centers[i]
        for j in range(d):
            accum[j] = 0.0
        for k in range(n_neg + 1):
            row = ctxs[i] if k == 0 else negs[i, k - 1]
            label = 1.0 if k == 0 else 0.0
            s = 0.0
            for j in range(d):
                s += vectors[u, j] * contexts_m[row, j]
            if s >= 0.0:
                sig = 1.0 / (1.0 + math.exp(-s))
                log_sig = -math.log1p(math.exp(-s))
            else:
                e = math.exp(s)
                sig = e / (1.0 + e)
                log_sig = s - math.log1p(e)
            # loss: -log sig(s) for the positive, -log sig(-s) for noise
            if k == 0:
                loss -= log_sig
            else:
                loss -= log_sig - s  # log sig(-s) = log sig(s) - s
            g = (label - sig) * lr
            for j in range(d):
                accum[j] += g * contexts_m[row, j]
                contexts_m[row, j] += g * vectors[u, j]
        for j in range(d):
            vectors[u, j] += accum[j]
    return loss


def train(walks: WalkSet, cfg: TrainConfig) -> Embedding:
    """Train input/context vectors on the walk stream.

    With ``epochs=0`` the returned embedding is exactly the random
    initialization (input vectors uniform in (-0.5/d, +0.5/d), context
    vectors zero). All entries are checked finite before returning.
    """
    if not walks.walks:
        raise ValueError("walk set is empty")
    vocab, nodes, visits = _build_vocab(walks.walks)
    n, d = len(nodes), cfg.dimension
    rng = np.random.default_rng(cfg.seed)
    vectors = (rng.random((n, d)) - 0.5) / d
    contexts_m = np.zeros((n, d), dtype=np.float64)
    emb = Embedding(
        vectors=vectors,
        context_vectors=contexts_m,
        vocabulary=vocab,
        nodes=nodes,
        visit_counts=visits,
        config=cfg,
    )
    if cfg.epochs == 0:
        return emb

    noise = AliasSampler(visits.astype(np.float64) ** 0.75)
    walk_rows = [
        np.array([vocab[nd] for nd in walk], dtype=np.int64)
        for walk in walks.walks
        if len(walk) >= 2
    ]
    pairs_per_epoch = sum(
        2 * sum(len(w) - off for off in range(1, min(cfg.window, len(w) - 1) + 1))
        for w in walk_rows
    )
    if pairs_per_epoch == 0:
        return emb
    total_pairs = pairs_per_epoch * cfg.epochs

    def stages(order: list[np.ndarray]):
        buf_c: list[np.ndarray] = []
        buf_x: list[np.ndarray] = []
        size = 0
        for rows in order:
            c, x = _walk_pairs(rows, cfg.window)
            if len(c) == 0:
                continue
            buf_c.append(c)
            buf_x.append(x)
            size += len(c)
            if size >= _STAGE_PAIRS:
                yield np.concatenate(buf_c), np.concatenate(buf_x)
                buf_c, buf_x, size = [], [], 0
        if buf_c:
            yield np.concatenate(buf_c), np.concatenate(buf_x)

    if cfg.deterministic_mode or cfg.workers <= 1:
        consumed = 0
        for _ in range(cfg.epochs):
            epoch_loss = 0.0
            for centers, ctxs in stages(walk_rows):
                negs = noise.draw(rng, (len(centers), cfg.negatives_per_positive))
                epoch_loss += _sgd_pairs(
                    vectors, contexts_m, centers, ctxs, negs,
                    cfg.initial_learning_rate, cfg.min_learning_rate,
                    total_pairs, consumed,
                )
                consumed += len(centers)
            emb.epoch_losses.append(epoch_loss / pairs_per_epoch)
    else:
        shards = [walk_rows[i :: cfg.workers] for i in range(cfg.workers)]
        shard_pairs = [
            sum(
                2 * sum(len(w) - off for off in range(1, min(cfg.window, len(w) - 1) + 1))
                for w in shard
            )
            for shard in shards
        ]
        offsets = np.concatenate(([0], np.cumsum(shard_pairs)))

        def run_shard(idx: int, epoch: int) -> float:
            shard_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=(cfg.seed, epoch, idx))
            )
            consumed = epoch * pairs_per_epoch + int(offsets[idx])
            loss = 0.0
            for centers, ctxs in stages(shards[idx]):
                negs = noise.draw(shard_rng, (len(centers), cfg.negatives_per_positive))
                loss += _sgd_pairs(
                    vectors, contexts_m, centers, ctxs, negs,
                    cfg.initial_learning_rate, cfg.min_learning_rate,
                    total_pairs, consumed,
                )
                consumed += len(centers)
            return loss

        for epoch in range(cfg.epochs):
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                losses = list(
                    pool.map(lambda i: run_shard(i, epoch), range(cfg.workers))
                )
            emb.epoch_losses.append(sum(losses) / pairs_per_epoch)

    if not np.all(np.isfinite(vectors)) or not np.all(np.isfinite(contexts_m)):
        raise FloatingPointError("non-finite entries after training")
    return emb


@dataclass
class PairGradients:
    input_grads: dict[int, np.ndarray]
    context_grads: dict[int, np.ndarray]


def loss_and_gradient(
    pair: tuple[int, int, list[int]], emb: Embedding
) -> tuple[float, PairGradients]:
    """Negative-sampling loss and exact gradients for one positive pair.

    ``pair`` is (center, context, negatives) in node indices. All gradients
    are taken at the current parameters; repeated negatives accumulate.
    Gradients are of the loss, so SGD steps subtract ``lr * grad``.
    """
    center, context, negatives = pair
    u = emb.vocabulary[center]
    x = emb.vocabulary[context]
    f = emb.vectors[u]

    def sig(v: float) -> float:
        return 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))

    def log_sig(v: float) -> float:
        return -math.log1p(math.exp(-v)) if v >= 0 else v - math.log1p(math.exp(v))

    s_pos = float(f @ emb.context_vectors[x])
    loss = -log_sig(s_pos)
    g_pos = sig(s_pos) - 1.0
    input_grad = g_pos * emb.context_vectors[x]
    context_grads: dict[int, np.ndarray] = {x: g_pos * f.copy()}
    for node in negatives:
        row = emb.vocabulary[node]
        cn = emb.context_vectors[row]
        s_n = float(f @ cn)
        loss -= log_sig(-s_n)
        g_n = sig(s_n)
        input_grad = input_grad + g_n * cn
        if row in context_grads:
            context_grads[row] = context_grads[row] + g_n * f
        else:
            context_grads[row] = g_n * f.copy()
    return loss, PairGradients(
        input_grads={u: input_grad}, context_grads=context_grads
    )


# -- persistence -----------------------------------------------------------------


def export_embedding(emb: Embedding, external_ids: list[str] | None = None) -> str:
    """Text format: header ``<rows> <dim>`` then ``<id> <v1> ... <vd>`` lines.

    Values are written with full round-trip precision, so export/import is
    lossless.
    """
    n, d = emb.vectors.shape
    lines = [f"{n} {d}"]
    for row, node in enumerate(emb.nodes):
        ext = external_ids[node] if external_ids is not None else str(node)
        vals = " ".join(repr(float(v)) for v in emb.vectors[row])
        lines.append(f"{ext} {vals}")
    return "\n".join(lines) + "\n"


def import_embedding(text: str) -> tuple[list[str], np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n, d = (int(tok) for tok in lines[0].split())
    ids: list[str] = []
    mat = np.zeros((n, d), dtype=np.float64)
    for i, line in enumerate(lines[1 : n + 1]):
        toks = line.split()
        ids.append(toks[0])
        mat[i] = [float(t) for t in toks[1 : d + 1]]
    return ids, mat


def save_binary(emb: Embedding, path: str) -> None:
    n, d = emb.vectors.shape
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<qq", n, d))
        fh.write(np.asarray(emb.nodes, dtype="<i8").tobytes())
        fh.write(emb.vectors.astype("<f8").tobytes())


def load_binary(path: str) -> tuple[list[int], np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_BINARY_MAGIC))
        if magic != _BINARY_MAGIC:
            raise ValueError("not an embedding cache file")
        n, d = struct.unpack("<qq", fh.read(16))
        nodes = np.frombuffer(fh.read(8 * n), dtype="<i8").tolist()
        mat = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
    return nodes, mat
