"""Classification-based evaluation of embeddings.

Replicates the standard protocol: repeated random train/test partitions over
labeled nodes at several training fractions, one-vs-rest linear separators
trained on L2-regularized hinge loss, micro/macro F1, and paired t-tests
between competing runs. Single-label prediction is argmax; multi-label
prediction takes the top-k scores where k is the node's true label count.

Each run is a pure function of (embedding, seed), so runs can execute in any
order or in parallel; the report aggregation is a deterministic fold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sstats

from .embed import Embedding

__all__ = [
    "LabelSet",
    "OvrModel",
    "EvalReport",
    "split",
    "train_linear_ovr",
    "predict",
    "confusion_counts",
    "micro_macro_f1",
    "paired_t_test",
    "evaluate_embedding",
    "report_csv",
    "t_test_csv",
]


@dataclass
class LabelSet:
    labels: dict[int, set[int]]
    label_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.label_ids:
            ids: set[int] = set()
            for labs in self.labels.values():
                ids |= labs
            self.label_ids = sorted(ids)
        if any(not labs for labs in self.labels.values()):
            raise ValueError("every labeled node needs at least one label")

    @property
    def m(self) -> int:
        return len(self.label_ids)

    def single_label(self) -> bool:
        return all(len(labs) == 1 for labs in self.labels.values())


def split(labelset: LabelSet, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Random disjoint (train, test) partition of the labeled nodes."""
    if not (0.0 < fraction < 1.0):
        raise ValueError("fraction must be in (0,1)")
    nodes = sorted(labelset.labels)
    n_train = int(round(fraction * len(nodes)))
    if n_train == 0 or n_train == len(nodes):
        raise ValueError(f"fraction {fraction} leaves an empty train or test set")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(nodes))
    train = sorted(nodes[i] for i in order[:n_train])
    test = sorted(nodes[i] for i in order[n_train:])
    return train, test


@dataclass
class OvrModel:
    weights: np.ndarray   # (m, d)
    biases: np.ndarray    # (m,)
    label_ids: list[int]
    flags: list[str] = field(default_factory=list)


def _rows(emb: Embedding, nodes: list[int]) -> np.ndarray:
    try:
        idx = [emb.vocabulary[n] for n in nodes]
    except KeyError as exc:
        raise ValueError(f"node {exc.args[0]} is not embedded") from exc
    return emb.vectors[idx]


def train_linear_ovr(
    emb: Embedding,
    train_nodes: list[int],
    labelset: LabelSet,
    reg: float = 1e-4,
    epochs: int = 100,
) -> OvrModel:
    """One-vs-rest linear separators via subgradient descent on hinge loss.

    Full-batch subgradient steps with rate 0.1/sqrt(epoch); deterministic.
    Labels with no positive training example stay all-negative separators and
    are flagged.
    """
    if not train_nodes:
        raise ValueError("empty training set")
    X = _rows(emb, train_nodes)
    n, d = X.shape
    m = labelset.m
    col = {lab: j for j, lab in enumerate(labelset.label_ids)}
    Y = -np.ones((n, m))
    for i, node in enumerate(train_nodes):
        for lab in labelset.labels[node]:
            Y[i, col[lab]] = 1.0

    flags = []
    for lab in labelset.label_ids:
        if not np.any(Y[:, col[lab]] > 0):
            flags.append(f"label {lab}: no positive training examples")
    if n > 1 and np.allclose(X, X[0]):
        flags.append("degenerate embedding: all training vectors identical")

    W = np.zeros((m, d))
    b = np.zeros(m)
    for epoch in range(1, epochs + 1):
        lr = 0.1 / math.sqrt(epoch)
        margins = Y * (X @ W.T + b)
        active = (margins < 1.0) * Y          # (n, m)
        W -= lr * (-(active.T @ X) / n + 2.0 * reg * W)
        b -= lr * (-active.mean(axis=0))
    return OvrModel(weights=W, biases=b, label_ids=list(labelset.label_ids), flags=flags)


def predict(
    model: OvrModel,
    emb: Embedding,
    nodes: list[int],
    labelset: LabelSet,
    mode: str = "single",
) -> dict[int, set[int]]:
    """Label sets per node: argmax (ties to the smallest label id) or top-k
    by score with k = the node's true label count."""
    X = _rows(emb, nodes)
    scores = X @ model.weights.T + model.biases
    out: dict[int, set[int]] = {}
    if mode == "single":
        picks = np.argmax(scores, axis=1)  # first occurrence = smallest label id
        for node, j in zip(nodes, picks.tolist()):
            out[node] = {model.label_ids[j]}
    elif mode == "multi":
        m = len(model.label_ids)
        for i, node in enumerate(nodes):
            k = len(labelset.labels[node])
            order = np.lexsort((np.arange(m), -scores[i]))
            out[node] = {model.label_ids[j] for j in order[:k]}
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out


def confusion_counts(
    predictions: dict[int, set[int]],
    truth: dict[int, set[int]],
    label_ids: list[int],
) -> dict[int, tuple[int, int, int]]:
    """Per-label (tp, fp, fn) over the predicted node set."""
    counts = {lab: [0, 0, 0] for lab in label_ids}
    for node, pred in predictions.items():
        true = truth[node]
        for lab in pred & true:
            counts[lab][0] += 1
        for lab in pred - true:
            counts[lab][1] += 1
        for lab in true - pred:
            counts[lab][2] += 1
    return {lab: tuple(v) for lab, v in counts.items()}


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def micro_macro_f1(
    predictions: dict[int, set[int]],
    truth: dict[int, set[int]],
    label_ids: list[int],
) -> tuple[float, float]:
    """Micro-F1 pools binary decisions globally; macro-F1 averages per-label
    recall and precision across labels first and takes F1 of the averages.
    0/0 ratios count as 0.
    """
    counts = confusion_counts(predictions, truth, label_ids)
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    micro_r = _safe_div(tp, tp + fn)
    micro_p = _safe_div(tp, tp + fp)
    micro = _safe_div(2 * micro_r * micro_p, micro_r + micro_p)

    m = len(label_ids)
    macro_r = sum(_safe_div(c[0], c[0] + c[2]) for c in counts.values()) / m
    macro_p = sum(_safe_div(c[0], c[0] + c[1]) for c in counts.values()) / m
    macro = _safe_div(2 * macro_r * macro_p, macro_r + macro_p)
    return micro, macro


def paired_t_test(scores_a: list[float], scores_b: list[float]) -> float:
    """Two-sided paired t-test p-value on per-run score differences.

    Zero-variance differences degenerate: p=1 when the means also agree,
    p=0 otherwise.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two equal-length score lists with >= 2 entries")
    diffs = a - b
    sd = float(diffs.std(ddof=1))
    mean = float(diffs.mean())
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(len(diffs)))
    return float(2.0 * _sstats.t.sf(abs(t), df=len(diffs) - 1))


@dataclass
class EvalReport:
    fractions: list[float]
    repetitions: int
    mode: str
    micro: dict[float, list[float]] = field(default_factory=dict)
    macro: dict[float, list[float]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def summary(self) -> dict[float, tuple[float, float, float, float]]:
        """fraction -> (micro mean, micro variance, macro mean, macro variance),
        variances unbiased across runs."""
        out = {}
        for f in self.fractions:
            mi = np.asarray(self.micro[f])
            ma = np.asarray(self.macro[f])
            out[f] = (
                float(mi.mean()),
                float(mi.var(ddof=1)) if len(mi) > 1 else 0.0,
                float(ma.mean()),
                float(ma.var(ddof=1)) if len(ma) > 1 else 0.0,
            )
        return out


def evaluate_embedding(
    emb: Embedding,
    labelset: LabelSet,
    fractions: list[float] | None = None,
    repetitions: int = 10,
    seed: int = 0,
    mode: str = "auto",
) -> EvalReport:
    """Run the full split/train/predict/score protocol."""
    if fractions is None:
        fractions = [round(0.1 * k, 1) for k in range(1, 10)]
    if mode == "auto":
        mode = "single" if labelset.single_label() else "multi"
    report = EvalReport(fractions=list(fractions), repetitions=repetitions, mode=mode)
    for fi, fraction in enumerate(fractions):
        report.micro[fraction] = []
        report.macro[fraction] = []
        for run in range(repetitions):
            run_seed = int(
                np.random.SeedSequence(entropy=(seed, fi, run)).generate_state(1)[0]
            )
            train_nodes, test_nodes = split(labelset, fraction, run_seed)
            model = train_linear_ovr(emb, train_nodes, labelset)
            for flag in model.flags:
                note = f"fraction {fraction} run {run}: {flag}"
                if note not in report.flags:
                    report.flags.append(note)
            preds = predict(model, emb, test_nodes, labelset, mode=mode)
            truth = {n: labelset.labels[n] for n in test_nodes}
            micro, macro = micro_macro_f1(preds, truth, labelset.label_ids)
            report.micro[fraction].append(micro)
            report.macro[fraction].append(macro)
    return report


def report_csv(report: EvalReport) -> str:
    lines = ["fraction,run,micro_f1,macro_f1"]
    for f in report.fractions:
        for run, (mi, ma) in enumerate(zip(report.micro[f], report.macro[f])):
            lines.append(f"{f},{run},{mi!r},{ma!r}")
    lines.append("# summary: fraction,micro_mean,micro_var,macro_mean,macro_var")
    for f, (mim, miv, mam, mav) in report.summary().items():
        lines.append(f"{f},{mim!r},{miv!r},{mam!r},{mav!r}")
    return "\n".join(lines) + "\n"


def t_test_csv(
    pair_name: str, report_a: EvalReport, report_b: EvalReport, metric: str = "micro"
) -> str:
    """Per-fraction paired t-test p-values plus their mean (the reporting
    convention for one aggregate significance number per pair)."""
    lines = ["pair,fraction,p_value"]
    side_a = report_a.micro if metric == "micro" else report_a.macro
    side_b = report_b.micro if metric == "micro" else report_b.macro
    ps = []
    for f in report_a.fractions:
        p = paired_t_test(side_a[f], side_b[f])
        ps.append(p)
        lines.append(f"{pair_name},{f},{p!r}")
    lines.append(f"{pair_name},mean,{float(np.mean(ps))!r}")
    return "\n".join(lines) + "\n"
