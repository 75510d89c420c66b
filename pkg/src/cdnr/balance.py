"""Cross-domain node-scale balancing.

Source nodes are clustered into super nodes by degree, ranked against the
target graph's distinct degrees, and linked class-by-class with weights
given by the degree-similarity ratio min/max. The loop then reshapes the
super-node partition until the two degree scales agree:

* more super classes than target classes: the globally weakest link is
  deleted and its super node merged into the weakest remaining neighbour
  of the same target class;
* fewer super classes: empty super nodes are inserted at evenly spaced
  ranks and filled with the upper half (by degree) of the adjacent larger
  super node.

Links are kept class-level: every target node of a given degree shares its
class's links, which is also how the worked examples and serialized link
tables count them. A link exists iff its weight is positive, and the
multiset of clustered source nodes is conserved by every merge and split.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, DegreeStats, degree_stats, fit_power_law, PowerLawFitError

log = logging.getLogger(__name__)

__all__ = [
    "SuperNode",
    "SuperNodeSet",
    "CrossLinks",
    "BalanceParams",
    "init_super_nodes",
    "supers_from_degrees",
    "align_by_rank",
    "init_weights",
    "objective",
    "merge_step",
    "split_step",
    "balance",
    "balance_degrees",
    "dump_super_nodes",
    "dump_cross_links",
]

_LOG_FLOOR = 1e-12


@dataclass
class SuperNode:
    id: int
    members: list[int]
    member_degrees: list[int]
    representative_degree: float

    @staticmethod
    def of(id: int, members: list[int], member_degrees: list[int]) -> "SuperNode":
        rep = sum(member_degrees) / len(member_degrees)
        return SuperNode(id, members, member_degrees, rep)


class SuperNodeSet:
    """Super nodes kept sorted by representative degree, decreasing.

    ``n_deg_prime`` counts distinct representative degrees; merged or split
    super nodes may legitimately share one.
    """

    def __init__(self, supers: list[SuperNode]):
        self.supers = supers
        self._next_id = max((s.id for s in supers), default=-1) + 1
        self.sort()

    def sort(self) -> None:
        self.supers.sort(key=lambda s: (-s.representative_degree, s.id))

    @property
    def n_deg_prime(self) -> int:
        return len({s.representative_degree for s in self.supers})

    def by_id(self, super_id: int) -> SuperNode:
        for s in self.supers:
            if s.id == super_id:
                return s
        raise KeyError(super_id)

    def new_id(self) -> int:
        self._next_id += 1
        return self._next_id - 1

    def member_multiset(self) -> list[int]:
        out: list[int] = []
        for s in self.supers:
            out.extend(s.members)
        return sorted(out)


@dataclass
class CrossLinks:
    """Predicted links between target degree classes and super nodes.

    ``links[z]`` maps super id -> weight for the target class of rank ``z``
    (classes ranked by degree, decreasing). Weights are in (0, 1]; entries
    with weight 0 are never stored, so links and positive weights stay in
    bijection.
    """

    target_degrees: list[int]
    class_sizes: list[int]
    links: list[dict[int, float]]
    n_link: int
    case: int
    status: str = "aligned"

    def class_rank_of_degree(self, degree: int) -> int | None:
        try:
            return self.target_degrees.index(degree)
        except ValueError:
            return None

    def links_for_degree(self, degree: int) -> dict[int, float]:
        z = self.class_rank_of_degree(degree)
        return {} if z is None else self.links[z]

    def delta_matrix(self, supers: SuperNodeSet) -> np.ndarray:
        """0/1 indicator of matched (target class, super rank) slots."""
        rank = {s.id: j for j, s in enumerate(supers.supers)}
        n_link = max(len(supers.supers), len(self.target_degrees))
        out = np.zeros((len(self.target_degrees), n_link), dtype=np.int8)
        for z, lk in enumerate(self.links):
            for sid in lk:
                out[z, rank[sid]] = 1
        return out

    def validate(self) -> None:
        for z, lk in enumerate(self.links):
            for sid, w in lk.items():
                if not (0.0 < w <= 1.0):
                    raise AssertionError(f"class {z} link {sid} weight {w} outside (0,1]")


@dataclass
class BalanceParams:
    gamma: float = 100.0
    lambda_: float = 100.0
    a_plus: float | None = None  # min of the two power-law slopes; fitted when None
    c_constant: float = 1.0
    epsilon: float = 1e-9
    max_iterations: int | None = None  # default: 10 x initial super count

    def __post_init__(self):
        if self.gamma <= 0 or self.lambda_ <= 0:
            raise ValueError("gamma and lambda must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


# -- initialization -------------------------------------------------------------


def supers_from_degrees(degrees: np.ndarray | list[int]) -> SuperNodeSet:
    degrees = np.asarray(degrees, dtype=np.int64)
    groups: dict[int, list[int]] = {}
    for node, d in enumerate(degrees.tolist()):
        groups.setdefault(d, []).append(node)
    supers = [
        SuperNode.of(i, members, [d] * len(members))
        for i, (d, members) in enumerate(sorted(groups.items(), reverse=True))
    ]
    return SuperNodeSet(supers)


def init_super_nodes(g_s: Graph) -> SuperNodeSet:
    """One super node per distinct source degree, holding all its nodes."""
    if g_s.node_count == 0:
        raise ValueError("source graph is empty")
    return supers_from_degrees(g_s.degree_sequence())


# -- alignment and weights -------------------------------------------------------


def align_by_rank(stats_t: DegreeStats, supers: SuperNodeSet) -> CrossLinks:
    """Match target degree classes to super nodes at the same rank position.

    With more supers than target classes (case 2) super rank j serves target
    rank ceil(j * n_t / n_s), so low-ranked classes collect several links.
    With fewer supers (case 3, reached only when splitting could not raise
    the scale) every class z falls back to the super at rank ceil(z*n_s/n_t),
    which keeps the link map total. Weights are left at 0 until
    :func:`init_weights` applies the degree-similarity ratio.
    """
    target_degrees = stats_t.distinct_degrees
    if not target_degrees or not supers.supers:
        raise ValueError("alignment needs nonempty degree lists on both sides")
    n_t = len(target_degrees)
    n_s = len(supers.supers)
    nd_prime = supers.n_deg_prime
    if nd_prime == stats_t.n_deg and n_s == n_t:
        case = 1
    elif nd_prime > stats_t.n_deg or n_s > n_t:
        case = 2
    else:
        case = 3

    links: list[dict[int, float]] = [{} for _ in range(n_t)]
    if n_s >= n_t:
        for j, s in enumerate(supers.supers, start=1):
            z = math.ceil(j * n_t / n_s)
            links[z - 1][s.id] = 0.0
    else:
        for z in range(1, n_t + 1):
            j = math.ceil(z * n_s / n_t)
            links[z - 1][supers.supers[j - 1].id] = 0.0

    sizes = [stats_t.histogram[d] for d in target_degrees]
    return CrossLinks(
        target_degrees=list(target_degrees),
        class_sizes=sizes,
        links=links,
        n_link=max(n_s, n_t),
        case=case,
    )


def _eq3_weight(deg_t: float, deg_super: float) -> float:
    if deg_t == 0 and deg_super == 0:
        return 1.0  # identical emptiness
    lo, hi = min(deg_t, deg_super), max(deg_t, deg_super)
    return lo / hi if hi > 0 else 0.0


def init_weights(cross: CrossLinks, stats_t: DegreeStats, supers: SuperNodeSet) -> CrossLinks:
    """Set every link weight to min(deg, rep)/max(deg, rep); drop zeros."""
    for z, deg_t in enumerate(cross.target_degrees):
        fresh: dict[int, float] = {}
        for sid in cross.links[z]:
            w = _eq3_weight(deg_t, supers.by_id(sid).representative_degree)
            if w > 0:
                fresh[sid] = w
        cross.links[z] = fresh
    return cross


# -- likelihood objective --------------------------------------------------------


def _objective_parts(
    cross: CrossLinks, params: BalanceParams, supers: SuperNodeSet
) -> tuple[float, float]:
    """(sign, log-magnitude) of the likelihood; computed in log space.

    The scale factor eta couples 1/n_t, exp((1 - n'^2)/n') and gamma*exp(lambda);
    for the default lambda=100 the plain product can leave float range, so the
    sign and log magnitude are tracked separately.
    """
    n_t = len(cross.target_degrees)
    nd = supers.n_deg_prime
    a_plus = params.a_plus if params.a_plus is not None else 1.0
    log_eta = (
        -math.log(n_t)
        + (1.0 - nd * nd) / nd
        + math.log(params.gamma)
        + params.lambda_
    )
    total = 0.0
    log_c = math.log(params.c_constant)
    for z, size in enumerate(cross.class_sizes):
        norm_sq = sum(w * w for w in cross.links[z].values())
        bracket = log_c - a_plus * math.log(max(norm_sq, _LOG_FLOOR))
        total += size * cross.n_link * bracket
    if total == 0.0:
        return 0.0, float("-inf")
    return math.copysign(1.0, total), log_eta + math.log(abs(total))


def objective(
    cross: CrossLinks,
    params: BalanceParams,
    stats_t: DegreeStats,
    supers: SuperNodeSet,
) -> float:
    """Likelihood value over all target nodes (sum over nodes and link slots)."""
    sign, logmag = _objective_parts(cross, params, supers)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(logmag)


# -- reshaping steps -------------------------------------------------------------


def merge_step(
    cross: CrossLinks, supers: SuperNodeSet, target_rank: int
) -> tuple[CrossLinks, SuperNodeSet]:
    """Delete the weakest link of one target class and merge its super node.

    The deleted link's super node is absorbed by the remaining linked super
    node of smallest weight (ties: smaller representative degree). The merged
    representative degree is the mean member degree, and every link touching
    the merged super node is re-weighted by the degree-similarity ratio.
    """
    links = cross.links[target_rank]
    if len(links) < 2:
        raise ValueError(f"target class {target_rank} has {len(links)} link(s); need >= 2")

    def key(sid: int) -> tuple[float, float, int]:
        s = supers.by_id(sid)
        return (links[sid], s.representative_degree, sid)

    victim_id = min(links, key=key)
    del links[victim_id]
    recipient_id = min(links, key=key)

    victim = supers.by_id(victim_id)
    recipient = supers.by_id(recipient_id)
    recipient.members.extend(victim.members)
    recipient.member_degrees.extend(victim.member_degrees)
    recipient.representative_degree = sum(recipient.member_degrees) / len(
        recipient.member_degrees
    )
    supers.supers.remove(victim)
    supers.sort()

    for z, lk in enumerate(cross.links):
        if victim_id in lk:  # defensive: repoint stray links onto the survivor
            del lk[victim_id]
            lk.setdefault(recipient_id, 0.0)
        if recipient_id in lk:
            w = _eq3_weight(cross.target_degrees[z], recipient.representative_degree)
            if w > 0:
                lk[recipient_id] = w
            else:
                del lk[recipient_id]
    return cross, supers


def split_step(supers: SuperNodeSet, n_deg_t: int) -> SuperNodeSet:
    """Insert empty super nodes at evenly spaced ranks and fill each from the
    adjacent larger donor by moving the donor's upper half (degree median split).

    Single-member donors cannot split and are skipped; if any insertions were
    skipped or produced a duplicate representative degree the residual scale
    imbalance is left for the caller's convergence guard to pick up.
    """
    need = n_deg_t - supers.n_deg_prime
    if need <= 0:
        raise ValueError("split_step requires n_deg_prime < n_deg_t")
    snapshot = list(supers.supers)
    n = len(snapshot)
    donors = [snapshot[(i * n) // need % n] for i in range(need)]
    skipped = 0
    for donor in donors:
        if len(donor.members) < 2:
            skipped += 1
            continue
        order = sorted(
            range(len(donor.members)),
            key=lambda i: (-donor.member_degrees[i], donor.members[i]),
        )
        take = order[: len(order) // 2]
        taken = set(take)
        moved_m = [donor.members[i] for i in take]
        moved_d = [donor.member_degrees[i] for i in take]
        donor.members = [m for i, m in enumerate(donor.members) if i not in taken]
        donor.member_degrees = [
            d for i, d in enumerate(donor.member_degrees) if i not in taken
        ]
        donor.representative_degree = sum(donor.member_degrees) / len(donor.member_degrees)
        supers.supers.append(SuperNode.of(supers.new_id(), moved_m, moved_d))
    supers.sort()
    if skipped or supers.n_deg_prime < n_deg_t:
        log.info(
            "split left a residual scale imbalance: n_deg'=%d target=%d (skipped %d)",
            supers.n_deg_prime, n_deg_t, skipped,
        )
    return supers


# -- the full balance loop -------------------------------------------------------


def balance_degrees(
    source_degrees: np.ndarray | list[int],
    stats_t: DegreeStats,
    params: BalanceParams,
) -> tuple[SuperNodeSet, CrossLinks]:
    """Run the balance loop on raw degree data (the graph-free core)."""
    supers = supers_from_degrees(source_degrees)
    n_t = stats_t.n_deg
    max_iter = params.max_iterations or 10 * len(supers.supers)

    cross = init_weights(align_by_rank(stats_t, supers), stats_t, supers)
    status = "balanced"
    prev: tuple[float, float] | None = None
    iterations = 0
    while supers.n_deg_prime != n_t:
        if iterations >= max_iter:
            status = "max_iterations"
            log.warning("balance stopped after %d iterations (partial result)", iterations)
            break
        iterations += 1
        if supers.n_deg_prime < n_t:
            shape_before = [(s.id, len(s.members)) for s in supers.supers]
            split_step(supers, n_t)
            cross = init_weights(align_by_rank(stats_t, supers), stats_t, supers)
            if [(s.id, len(s.members)) for s in supers.supers] == shape_before:
                status = "residual"  # nothing splittable; scales cannot meet
                break
        else:
            candidates = [z for z, lk in enumerate(cross.links) if len(lk) >= 2]
            if not candidates:
                status = "residual"
                break
            z = min(candidates, key=lambda z: min(cross.links[z].values()))
            merge_step(cross, supers, z)
        cur = _objective_parts(cross, params, supers)
        if (
            prev is not None
            and prev[0] == cur[0]
            and abs(cur[1] - prev[1]) < params.epsilon
            and supers.n_deg_prime != n_t
        ):
            status = "epsilon"
            break
        prev = cur
    cross.status = status
    return supers, cross


def _min_slope(g_s: Graph, g_t: Graph) -> float:
    slopes = []
    for g in (g_s, g_t):
        try:
            slopes.append(fit_power_law(degree_stats(g)).slope_a)
        except PowerLawFitError:
            pass
    return min(slopes) if slopes else 1.0


def balance(
    g_s: Graph, g_t: Graph, params: BalanceParams | None = None
) -> tuple[SuperNodeSet, CrossLinks]:
    """Balance the source super-node scale against the target degree scale.

    Returns the final partition and the class-level cross-domain links.
    ``cross.status`` records how the loop ended: "balanced", "epsilon",
    "residual", or "max_iterations" (a warning outcome; the invariants on
    the returned structures hold either way).
    """
    if g_s.node_count == 0 or g_t.node_count == 0:
        raise ValueError("both graphs must be nonempty")
    params = params or BalanceParams()
    if params.a_plus is None:
        params = BalanceParams(
            gamma=params.gamma,
            lambda_=params.lambda_,
            a_plus=_min_slope(g_s, g_t),
            c_constant=params.c_constant,
            epsilon=params.epsilon,
            max_iterations=params.max_iterations,
        )
    return balance_degrees(g_s.degree_sequence(), degree_stats(g_t), params)


# -- serialization ----------------------------------------------------------------


def dump_super_nodes(supers: SuperNodeSet) -> str:
    lines = [
        f"{s.id}\t{s.representative_degree!r}\t{','.join(str(m) for m in sorted(s.members))}"
        for s in supers.supers
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def dump_cross_links(cross: CrossLinks, g_t: Graph) -> str:
    """Per-node link rows: ``target_node<TAB>super_id<TAB>weight``."""
    degs = g_t.degree_sequence()
    lines = []
    for node in range(g_t.node_count):
        for sid, w in sorted(cross.links_for_degree(int(degs[node])).items()):
            lines.append(f"{g_t.to_external(node)}\t{sid}\t{w!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_super_nodes(text: str) -> SuperNodeSet:
    supers = []
    for line in text.splitlines():
        if not line.strip():
            continue
        sid, rep, members = line.split("\t")
        member_list = [int(m) for m in members.split(",") if m]
        s = SuperNode(
            id=int(sid),
            members=member_list,
            member_degrees=[],
            representative_degree=float(rep),
        )
        supers.append(s)
    return SuperNodeSet(supers)


def load_cross_links(text: str, g_t: Graph) -> CrossLinks:
    """Rebuild class-level links from per-node rows against the target graph."""
    stats_t = degree_stats(g_t)
    degs = g_t.degree_sequence()
    target_degrees = stats_t.distinct_degrees
    rank = {d: z for z, d in enumerate(target_degrees)}
    links: list[dict[int, float]] = [{} for _ in target_degrees]
    for line in text.splitlines():
        if not line.strip():
            continue
        node_tok, sid, w = line.split("\t")
        z = rank[int(degs[g_t.to_index(node_tok)])]
        links[z][int(sid)] = float(w)
    return CrossLinks(
        target_degrees=target_degrees,
        class_sizes=[stats_t.histogram[d] for d in target_degrees],
        links=links,
        n_link=len(target_degrees),
        case=0,
        status="loaded",
    )
