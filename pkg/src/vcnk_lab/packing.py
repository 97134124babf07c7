"""Covers of a class in total loss, the binary-entropy cover bound, and the
adversarial-measure audit tying covers to shattered sets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .dimensions import _levels, _split, partite_slice, slice
from .errors import DomainError, NotACover, NoCover
from .hypotheses import HypothesisClass
from .losses import LossTable, disagreement_matrix, loss_matrix
from .report import VACUOUS, VERIFIED, VIOLATED, AuditReport
from .universe import (
    PartiteProbTemplate,
    PartiteUniverse,
    ProbTemplate,
    Universe,
    guard,
    partite_grid,
    standard_grid,
    standard_index,
)

DEFAULT_OPTIMAL_CAP = 24
SLACK = 1e-9


def binary_entropy(t) -> float:
    """``h2(t)`` in bits, with ``h2(0) = h2(1) = 0``."""
    if not 0 <= t <= 1:
        raise DomainError(f"binary entropy is defined on [0, 1], got {t}")
    if t == 0 or t == 1:
        return 0.0
    t = float(t)
    return -t * math.log2(t) - (1 - t) * math.log2(1 - t)


@dataclass
class CenterSet:
    centers: tuple
    epsilon: Fraction
    measure: object
    method: str
    loss: LossTable | None = None

    def __len__(self):
        return len(self.centers)


def _cover_masks(L, eps, targets: Sequence[int] | None = None) -> list[int]:
    """Bit ``t`` of ``masks[j]`` is set when member ``j`` covers ``targets[t]``."""
    n = len(L)
    targets = range(n) if targets is None else targets
    return [sum(1 << t for t, i in enumerate(targets) if L[i][j] <= eps) for j in range(n)]


def _greedy_cover(L, eps, targets: Sequence[int]) -> list[int]:
    chosen: list[int] = []
    for i in targets:
        if any(L[i][j] <= eps for j in chosen):
            continue
        if L[i][i] <= eps:
            chosen.append(i)
            continue
        # non-separated losses can leave a member uncovered by itself
        j = next((j for j in range(len(L)) if L[i][j] <= eps), None)
        if j is None:
            raise NoCover(f"member {i} is not within {eps} of any member")
        chosen.append(j)
    return chosen


def _min_cover(masks: list[int], n_targets: int, start: list[int]) -> list[int]:
    """Exact minimum set cover by depth-first branch and bound."""
    full = (1 << n_targets) - 1
    best = list(start)

    def rec(covered: int, chosen: list[int]):
        nonlocal best
        if covered == full:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        if len(chosen) + 1 >= len(best):
            return
        left = full & ~covered
        gains = [bin(m & left).count("1") for m in masks]
        top = max(gains)
        if top == 0 or len(chosen) + -(-bin(left).count("1") // top) >= len(best):
            return
        low = left & -left
        options = sorted((j for j, m in enumerate(masks) if m & low), key=lambda j: (-gains[j], j))
        for j in options:
            chosen.append(j)
            rec(covered | masks[j], chosen)
            chosen.pop()

    rec(0, [])
    return sorted(best)


def greedy_centers(cls: HypothesisClass, mu, loss: LossTable, epsilon, L=None) -> CenterSet:
    """Repeatedly add the first member not yet covered at precision ``epsilon``."""
    eps = Fraction(epsilon)
    if not len(cls):
        return CenterSet((), eps, mu, "greedy", loss)
    L = loss_matrix(cls, mu, loss) if L is None else L
    chosen = _greedy_cover(L, eps, range(len(cls)))
    return CenterSet(tuple(chosen), eps, mu, "greedy", loss)


def optimal_centers(
    cls: HypothesisClass, mu, loss: LossTable, epsilon, L=None, cap: int = DEFAULT_OPTIMAL_CAP
) -> CenterSet:
    eps = Fraction(epsilon)
    if len(cls) > cap:
        guard(len(cls), "exact cover search over class members", cap)
    if not len(cls):
        return CenterSet((), eps, mu, "optimal", loss)
    L = loss_matrix(cls, mu, loss) if L is None else L
    targets = list(range(len(cls)))
    start = _greedy_cover(L, eps, targets)
    best = _min_cover(_cover_masks(L, eps), len(targets), start)
    return CenterSet(tuple(best), eps, mu, "optimal", loss)


def optimal_cover_size(cls, mu, loss, epsilon, L=None, cap: int = DEFAULT_OPTIMAL_CAP) -> int:
    return len(optimal_centers(cls, mu, loss, epsilon, L, cap))


def restricted_cover(L, eps, targets: Sequence[int]) -> list[int]:
    """Fewest members covering just ``targets``."""
    targets = list(targets)
    if not targets:
        return []
    start = _greedy_cover(L, eps, targets)
    return _min_cover(_cover_masks(L, eps, targets), len(targets), start)


def is_cover(L, eps, centers: Iterable[int], targets: Iterable[int] | None = None) -> bool:
    centers = list(centers)
    targets = range(len(L)) if targets is None else targets
    return all(any(L[i][j] <= eps for j in centers) for i in targets)


def packing_members(cls: HypothesisClass, mu, loss: LossTable, epsilon, L=None) -> list[int]:
    """A maximal set, chosen greedily in member order, with all pairwise losses above ``epsilon``."""
    eps = Fraction(epsilon)
    L = loss_matrix(cls, mu, loss) if L is None else L
    chosen: list[int] = []
    for i in range(len(cls)):
        if all(L[i][j] > eps and L[j][i] > eps for j in chosen):
            chosen.append(i)
    return chosen


def packing_lower_bound(cls: HypothesisClass, mu, loss: LossTable, epsilon, L=None) -> int:
    """Size of a maximal greedy ``epsilon``-separated subset.

    For a metric loss this bounds the cover number at precision ``epsilon / 2``
    from below and the one at ``epsilon`` from above.
    """
    return len(packing_members(cls, mu, loss, epsilon, L))


# ---------------------------------------------------------------------------
# covers of the cube


def hamming_ball_volume(n: int, radius: int) -> int:
    return sum(math.comb(n, i) for i in range(0, min(radius, n) + 1))


def hamming_volume_ok(n: int, c) -> tuple[bool, int, float]:
    """``sum_{i <= floor(cn)} C(n, i) <= 2^(h2(c) n)``, compared in log space with slack."""
    vol = hamming_ball_volume(n, math.floor(Fraction(c) * n))
    rhs = binary_entropy(c) * n
    return math.log2(vol) <= rhs + SLACK, vol, rhs


def _as_mask(U) -> int:
    if isinstance(U, int):
        return U
    return sum(1 << (i - 1) for i in set(U))


def cube_distances(masks: Sequence[int], n: int) -> list[int]:
    """Distance from every subset of ``[n]`` to the nearest member of ``masks``."""
    guard(2**n, f"subsets of [{n}]")
    INF = n + 1
    dist = [INF] * (1 << n)
    frontier = []
    for m in masks:
        if dist[m]:
            dist[m] = 0
            frontier.append(m)
    d = 0
    while frontier:
        d += 1
        nxt = []
        for m in frontier:
            for b in range(n):
                v = m ^ (1 << b)
                if dist[v] > d:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


def _cover_verdict(n: int, size: int, c) -> tuple[bool, float]:
    if size <= 0:
        return False, -math.inf
    bound = math.log2(size) / (1 - binary_entropy(c))
    return n <= bound + SLACK, bound


def cover_bound_check(C: Iterable, n: int, c) -> AuditReport:
    """Check the entropy bound for a collection ``C`` of subsets of ``[n]``.

    ``C`` must cover every subset within Hamming distance ``c*n``; otherwise
    :class:`NotACover` is raised with the farthest subset.
    """
    c = Fraction(c)
    if not 0 < c < Fraction(1, 2):
        raise DomainError(f"cover radius fraction must lie in (0, 1/2), got {c}")
    masks = sorted({_as_mask(U) for U in C})
    if any(m >> n for m in masks):
        raise DomainError(f"a member of C is not a subset of [{n}]")
    radius = math.floor(c * n)
    if not masks:
        raise NotACover("the empty collection covers nothing")
    dist = cube_distances(masks, n)
    far = max(range(len(dist)), key=lambda v: (dist[v], -v))
    if dist[far] > radius:
        members = [i + 1 for i in range(n) if far >> i & 1]
        raise NotACover(
            f"subset {members} is at distance {dist[far]} > {radius} from every member"
        )
    holds, bound = _cover_verdict(n, len(masks), c)
    vol_ok, vol, log_rhs = hamming_volume_ok(n, c)
    witnesses = []
    if not holds:
        witnesses.append({"kind": "cover_bound", "n": n, "size": len(masks), "bound": bound})
    if not vol_ok:
        witnesses.append({"kind": "hamming_volume", "n": n, "volume": vol, "log2_rhs": log_rhs})
    return AuditReport(
        name="coverbound",
        claim="a radius-cn cover C of 2^[n] has n <= log2|C| / (1 - h2(c)); ball volume <= 2^(h2(c) n)",
        inputs={"n": n, "c": c, "C": masks},
        quantities={
            "n": n,
            "size": len(masks),
            "c": c,
            "radius": radius,
            "bound": bound,
            "ball_volume": vol,
            "log2_volume_bound": log_rhs,
        },
        verdict=VIOLATED if witnesses else VERIFIED,
        witnesses=witnesses,
    )


# ---------------------------------------------------------------------------
# adversarial measures


def adversarial_measure(anchor: Sequence, V: Iterable, universe: Universe) -> ProbTemplate:
    """``mu_1 = (uniform(V) + sum_j delta(anchor_{j})) / k``, ``mu_i`` uniform for ``i >= 2``.

    ``anchor`` lists values for the subsets of ``[k-1]`` in canonical order.
    """
    k = universe.k
    V = sorted(set(map(str, V)), key=universe.ground_set(1).index)
    if not V:
        raise ValueError("V must be non-empty")
    anchor = tuple(getattr(anchor, "values", anchor))
    idx = standard_index(k - 1, k)
    mu1 = {e: Fraction(0) for e in universe.ground_set(1)}
    for v in V:
        mu1[v] += Fraction(1, k * len(V))
    for j in range(1, k):
        mu1[anchor[idx.position[(j,)]]] += Fraction(1, k)
    dists = [mu1] + [
        {e: Fraction(1, len(X)) for e in X} for X in universe.ground_sets[1:]
    ]
    return ProbTemplate.from_mappings(universe, dists)


def partite_adversarial_measure(
    universe: PartiteUniverse, side: int, fixed: dict, V: Iterable
) -> PartiteProbTemplate:
    """Dirac masses at ``fixed[A]`` for every ``A != {side}``; uniform on ``V`` at ``{side}``."""
    V = set(map(str, V))
    dists = []
    for A, X in zip(universe.coordinates, universe.sets):
        if A == (side,):
            dists.append({e: Fraction(1, len(V)) for e in X if e in V})
        else:
            dists.append({fixed[A]: Fraction(1)})
    return PartiteProbTemplate.from_mappings(universe, dists)


# ---------------------------------------------------------------------------
# shattered sets -> covers


@dataclass
class _Instance:
    anchor: tuple
    side: int | None
    V: tuple
    mu: object
    positions: tuple  # loss-grid position of (anchor, fixed rest, v) for each v in V
    f1: tuple
    selectors: dict  # frozenset of indices into V -> class member index


def _shattered_instances(cls, sides):
    """Every Natarajan-shattered set (size >= 1) of every slice, deduplicated.

    ``sides`` yields ``(side, grid, anchor_idx, rest_idx, anchor, family)``.
    """
    seen = set()
    for side, grid, anchor_idx, rest_idx, anchor, family in sides:
        levels = _levels(family)
        for size in sorted(levels):
            if size == 0:
                continue
            for cols, w in levels[size]:
                points = tuple(family.domain[c] for c in cols)
                V = tuple(p[0] for p in points)
                key = (side, anchor, V)
                if key in seen:
                    continue
                seen.add(key)
                positions = []
                values = [None] * len(grid.coords)
                for j, a in zip(anchor_idx, anchor):
                    values[j] = a
                for p in points:
                    for j, v in zip(rest_idx, p):
                        values[j] = v
                    positions.append(grid.position(values))
                selectors = {U: family.members[r] for U, r in w.selectors.items()}
                yield anchor, side, V, tuple(positions), w.f1, selectors


def _nonpartite_sides(cls):
    universe = cls.universe
    k = universe.k
    grid = standard_grid(universe, k)
    anchor_idx, rest_idx = _split(grid, lambda A: k not in A)
    domains = [
        grid.domains[j] if len(grid.coords[j]) <= 1 else grid.domains[j][:1] for j in anchor_idx
    ]
    for anchor in itertools.product(*domains):
        sl = slice(cls, anchor, reduce=True)
        yield None, grid, anchor_idx, rest_idx, anchor, sl.family


def _partite_sides(pcls):
    pu = pcls.universe
    k = pu.k
    grid = partite_grid(pu, 1)
    for side in range(k, 0, -1):
        anchor_idx, rest_idx = _split(grid, lambda c, s=side: s not in c[0])
        domains = [
            grid.domains[j] if len(grid.coords[j][0]) <= 1 else grid.domains[j][:1]
            for j in anchor_idx
        ]
        for anchor in itertools.product(*domains):
            sl = partite_slice(pcls, side, anchor, reduce=True)
            yield side, grid, anchor_idx, rest_idx, anchor, sl.family


def _audit_instance(cls, loss, eps, c, scale, inst: _Instance, s) -> tuple[list, dict]:
    """All checks for one shattered set; returns (witnesses, quantities)."""
    n = len(inst.V)
    L = loss_matrix(cls, inst.mu, loss)
    N = optimal_cover_size(cls, inst.mu, loss, eps, L)
    targets = sorted(set(inst.selectors.values()))
    restricted = restricted_cover(L, eps, targets)
    holds, bound = _cover_verdict(n, N, c)
    holds_r, bound_r = _cover_verdict(n, len(restricted), c)
    where = {"anchor": inst.anchor, "side": inst.side, "V": inst.V}
    witnesses = []
    if not holds:
        witnesses.append({"kind": "cover_size", **where, "N": N, "bound": bound})
    if not holds_r:
        witnesses.append({"kind": "restricted_cover", **where, "N": len(restricted)})
    # sets U_H read off the restricted centers must cover the cube at radius c*n
    members = list(cls)
    f1 = inst.f1
    u_sets = set()
    for h in restricted:
        outs = members[h].outcomes
        u_sets.add(sum(1 << t for t, p in enumerate(inst.positions) if outs[p] == f1[t]))
    dist = cube_distances(sorted(u_sets), n)
    radius = math.floor(c * n)
    if max(dist) > radius:
        witnesses.append({"kind": "u_sets_cover", **where, "distance": max(dist)})
    # disagreement lower bounds for all member pairs
    M = disagreement_matrix(cls, inst.mu)
    unit = Fraction(1, n)
    for i, j in itertools.product(range(len(members)), repeat=2):
        oi, oj = members[i].outcomes, members[j].outcomes
        d = sum(1 for p in inst.positions if oi[p] != oj[p])
        if M[i][j] < scale / s * unit * d or L[i][j] < scale * unit * d:
            witnesses.append({"kind": "disagreement", **where, "F": i, "H": j, "D'": d})
            break
    return witnesses, {"n": n, "N": N, "restricted": len(restricted), "bound": bound}


def _hp_report(name, claim, cls, loss, eps, instances, c, scale, s, reason=None):
    inputs = {"class": [h.table for h in cls], "loss": loss.describe(), "epsilon": eps}
    if reason:
        return AuditReport(name, claim, inputs, {"reason": reason, "epsilon": eps}, VACUOUS)
    witnesses, rows = [], []
    for inst in instances:
        w, q = _audit_instance(cls, loss, eps, c, scale, inst, s)
        witnesses.extend(w)
        rows.append(q)
    verdict = VIOLATED if witnesses else (VERIFIED if rows else VACUOUS)
    return AuditReport(
        name,
        claim,
        inputs,
        {
            "epsilon": eps,
            "threshold": c,
            "shattered_sets": len(rows),
            "max_n": max((q["n"] for q in rows), default=0),
            "min_slack": min((q["bound"] - q["n"] for q in rows), default=None),
            "instances": rows,
        },
        verdict,
        witnesses[:5],
    )


def _preconditions(cls, loss, eps, limit) -> str | None:
    s, _, flags = loss.constants
    if not len(cls):
        return "empty class: dimension is -inf"
    if not flags.separated or not s:
        return "loss is not separated"
    if cls.rank > 1:
        return f"class rank {cls.rank} exceeds 1"
    if not 0 < eps < min(limit, 1):
        return f"epsilon {eps} outside (0, {min(limit, 1)})"
    return None


def audit_hp_to_vcnk(cls: HypothesisClass, loss: LossTable, epsilon) -> AuditReport:
    """For every shattered set of every slice, build the adversarial measure and
    check that its exact cover number forces ``n <= log2 N / (1 - h2(c))``
    with ``c = epsilon k^k / (s k!)``."""
    eps = Fraction(epsilon)
    claim = "n <= log2 N / (1 - h2(eps k^k / (s k!))) for every shattered slice set"
    k = cls.universe.k
    s = loss.s
    if not len(cls) or not s:
        reason = _preconditions(cls, loss, eps, 1)
        return _hp_report("hp-to-vcnk", claim, cls, loss, eps, [], 0, 0, s, reason)
    limit = s * math.factorial(k) / (2 * k**k)
    reason = _preconditions(cls, loss, eps, limit)
    c = eps * k**k / (s * math.factorial(k))
    scale = s * Fraction(math.factorial(k), k**k)

    def instances():
        for anchor, side, V, positions, f1, selectors in _shattered_instances(
            cls, _nonpartite_sides(cls)
        ):
            mu = adversarial_measure(anchor, V, cls.universe)
            yield _Instance(anchor, side, V, mu, positions, f1, selectors)

    return _hp_report("hp-to-vcnk", claim, cls, loss, eps, instances(), c, scale, s, reason)


def audit_hp_to_vcnk_partite(pcls: HypothesisClass, loss: LossTable, epsilon) -> AuditReport:
    """Partite counterpart with Dirac anchors and threshold ``epsilon / s``."""
    eps = Fraction(epsilon)
    claim = "n <= log2 N / (1 - h2(eps / s)) for every shattered partite slice set"
    s = loss.s
    if not len(pcls) or not s:
        reason = _preconditions(pcls, loss, eps, 1)
        return _hp_report("hp-to-vcnk-partite", claim, pcls, loss, eps, [], 0, 0, s, reason)
    reason = _preconditions(pcls, loss, eps, s / 2)
    c = eps / s
    pu = pcls.universe
    grid = partite_grid(pu, 1)

    def instances():
        for anchor, side, V, positions, f1, selectors in _shattered_instances(
            pcls, _partite_sides(pcls)
        ):
            anchor_idx, _ = _split(grid, lambda cc: side not in cc[0])
            fixed = {}
            for j, a in zip(anchor_idx, anchor):
                fixed[grid.coords[j][0]] = a
            for j, coord in enumerate(grid.coords):
                if coord[0] not in fixed and coord[0] != (side,):
                    fixed[coord[0]] = grid.domains[j][0]
            mu = partite_adversarial_measure(pu, side, fixed, V)
            yield _Instance(anchor, side, V, mu, positions, f1, selectors)

    return _hp_report(
        "hp-to-vcnk-partite", claim, pcls, loss, eps, instances(), c, s, s, reason
    )


__all__ = [
    "binary_entropy",
    "CenterSet",
    "greedy_centers",
    "optimal_centers",
    "optimal_cover_size",
    "restricted_cover",
    "is_cover",
    "packing_members",
    "packing_lower_bound",
    "hamming_ball_volume",
    "hamming_volume_ok",
    "cube_distances",
    "cover_bound_check",
    "adversarial_measure",
    "partite_adversarial_measure",
    "audit_hp_to_vcnk",
    "audit_hp_to_vcnk_partite",
]
