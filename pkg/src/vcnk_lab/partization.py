"""Partization: re-encoding k-ary objects over a k-partite template.

Each coordinate ``A`` of ``r(k)`` gets its own copy of ``X_{|A|}``; the
partite ``E_1`` grid and the ``E_k`` grid list their coordinates in the same
canonical order, so ``iota`` is the identity on value tuples.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from .errors import IndexCollision, InvalidCenters, NotInImage
from .hypotheses import (
    Hypothesis,
    HypothesisClass,
    PartiteHypothesis,
    Pattern,
    partite_star,
    star,
)
from .losses import LossTable, label_outcomes, loss_matrix, total_loss
from .packing import CenterSet, greedy_centers, is_cover, optimal_centers
from .report import VACUOUS, VERIFIED, VIOLATED, AuditReport
from .universe import (
    ConfigPoint,
    PartiteProbTemplate,
    PartiteUniverse,
    ProbTemplate,
    Universe,
    partite_grid,
    partite_index,
    product_weight,
    standard_grid,
    standard_index,
    symmetric_group,
    unit_coord,
)


def partize_universe(universe: Universe) -> PartiteUniverse:
    k = universe.k
    sets = [universe.ground_set(len(A)) for A in standard_index(k, k).subsets]
    return PartiteUniverse(k, sets, label_outcomes(universe))


def partize_measure(mu: ProbTemplate) -> PartiteProbTemplate:
    pu = partize_universe(mu.universe)
    return PartiteProbTemplate(pu, tuple(mu.per_arity[len(A) - 1] for A in pu.coordinates))


def departize_measure(pmu: PartiteProbTemplate, universe: Universe) -> ProbTemplate:
    """Inverse of :func:`partize_measure`; needs ``mu_A`` to depend only on ``|A|``."""
    per = {}
    for A, ws in zip(pmu.universe.coordinates, pmu.per_coordinate):
        if per.setdefault(len(A), ws) != ws:
            raise NotInImage(f"coordinate {A} disagrees with another of size {len(A)}")
    mu = ProbTemplate(universe, tuple(per[i] for i in range(1, universe.k + 1)))
    if partize_measure(mu) != pmu:
        raise NotInImage("measure does not come from this universe")
    return mu


def iota_kpart(z: ConfigPoint) -> ConfigPoint:
    """``iota(z)_A = z_{1^A}``."""
    k = z.index.k
    idx = standard_index(k, k)
    return ConfigPoint(idx, tuple(z[unit_coord(A)] for A in idx.subsets))


def block_subset(f, q: int) -> tuple:
    dom, img = f
    subset = tuple(sorted((i - 1) * q + v for i, v in zip(dom, img)))
    if len(set(subset)) != len(subset):
        raise IndexCollision(f"{f} maps two points to one index")
    return subset


def phi_m(x: ConfigPoint, k: int) -> ConfigPoint:
    """``phi_m(x)_f = x_{{(i-1) floor(m/k) + f(i) : i in dom f}}`` on ``r_k(floor(m/k))``."""
    m = len(x.index.base)
    if m < k:
        raise ValueError(f"phi_m needs m >= k, got m={m}, k={k}")
    q = m // k
    idx = partite_index(k, q)
    return ConfigPoint(idx, tuple(x[block_subset(f, q)] for f in idx.coords))


def beta_alpha(alpha, m: int, k: int) -> tuple:
    q = m // k
    return tuple((i - 1) * q + a for i, a in enumerate(alpha, start=1))


def Phi_m(y: Pattern, m: int, k: int) -> Pattern:
    """``(Phi_m(y)_alpha)_tau = y_{beta_alpha . tau}``."""
    q = m // k
    table = y.as_dict()
    alphas = tuple(itertools.product(range(1, q + 1), repeat=k))
    labels = []
    for alpha in alphas:
        b = beta_alpha(alpha, m, k)
        labels.append(tuple(table[tuple(b[t - 1] for t in tau)] for tau in symmetric_group(k)))
    return Pattern(alphas, tuple(labels))


def partize_hypothesis(F: Hypothesis, pu: PartiteUniverse | None = None) -> PartiteHypothesis:
    """``F^kpart(z) = F*_k(iota(z))``."""
    pu = partize_universe(F.universe) if pu is None else pu
    grid_k = standard_grid(F.universe, F.universe.k)
    pgrid = partite_grid(pu, 1)
    table = []
    for values in pgrid:
        x = iota_kpart(ConfigPoint(pgrid.index, values))
        table.append(F.sym_table[grid_k.position(x.values)])
    name = None if F.name is None else f"{F.name}^kpart"
    return PartiteHypothesis(pu, table, name=name)


def partize_class(cls: HypothesisClass) -> HypothesisClass:
    pu = partize_universe(cls.universe)
    return HypothesisClass(
        [partize_hypothesis(h, pu) for h in cls], name=f"{cls.name}^kpart", universe=pu
    )


def departize(G: PartiteHypothesis, universe: Universe) -> Hypothesis:
    """The hypothesis whose partization is ``G``; :class:`NotInImage` if there is none."""
    k = universe.k
    grid_k = standard_grid(universe, k)
    pgrid = G.grid
    table = []
    for values in grid_k:
        z = phi_m(ConfigPoint(grid_k.index, values), k)
        table.append(G.table[pgrid.position(z.values)][0])
    name = None if G.name is None else G.name.removesuffix("^kpart")
    try:
        F = Hypothesis(universe, table, name=name)
    except ValueError as exc:
        raise NotInImage(str(exc)) from None
    if partize_hypothesis(F, G.universe) != G:
        raise NotInImage("table is not the partization of any hypothesis")
    return F


def departize_class(pcls: HypothesisClass, universe: Universe) -> HypothesisClass:
    return HypothesisClass(
        [departize(g, universe) for g in pcls],
        name=pcls.name.removesuffix("^kpart"),
        universe=universe,
    )


def partize_loss(loss: LossTable, universe: Universe) -> LossTable:
    """``loss^kpart(z, y, y2) = loss(iota(z), y, y2)``."""
    pu = partize_universe(universe)
    grid_k = standard_grid(universe, universe.k)
    pgrid = partite_grid(pu, 1)
    overrides = {}
    if loss.overrides:
        for values in pgrid:
            x = iota_kpart(ConfigPoint(pgrid.index, values))
            pos = grid_k.position(x.values)
            if pos in loss.overrides:
                overrides[pgrid.position(values)] = loss.overrides[pos]
    return LossTable(
        loss.outcomes,
        values=loss.values,
        diagonal=loss.diagonal,
        off_diagonal=loss.off_diagonal,
        overrides=overrides,
        n_points=pgrid.size,
        kind=loss.kind,
    )


# ---------------------------------------------------------------------------
# audits


def _report(name, claim, inputs, quantities, witnesses, checked=True):
    verdict = VIOLATED if witnesses else (VERIFIED if checked else VACUOUS)
    return AuditReport(name, claim, inputs, quantities, verdict, witnesses[:5])


def pushforward_check(mu: ProbTemplate, m: int) -> dict:
    """Push ``mu^m`` through ``phi_m`` and compare with ``(mu^kpart)^{floor(m/k)}`` atom by atom.

    Also reports whether ``phi_m`` is a bijection between the two grids.
    """
    universe = mu.universe
    k = universe.k
    q = m // k
    grid = standard_grid(universe, m).check(f"E_{m}")
    pmu = partize_measure(mu)
    pgrid = partite_grid(pmu.universe, q).check(f"partite E_{q}")
    pushed: dict = {}
    fibre = [0] * pgrid.size
    for values in grid:
        x = ConfigPoint(grid.index, values)
        z = phi_m(x, k)
        pos = pgrid.position(z.values)
        fibre[pos] += 1
        w = product_weight(mu, x)
        if w:
            pushed[pos] = pushed.get(pos, Fraction(0)) + w
    mismatch = None
    for pos, values in enumerate(pgrid):
        expected = product_weight(pmu, ConfigPoint(pgrid.index, values))
        if pushed.get(pos, Fraction(0)) != expected:
            mismatch = {"atom": values, "pushed": pushed.get(pos, Fraction(0)), "expected": expected}
            break
    return {
        "m": m,
        "source_atoms": grid.size,
        "target_atoms": pgrid.size,
        "measure_preserving": mismatch is None,
        "bijective": all(c == 1 for c in fibre),
        "max_fibre": max(fibre),
        "mismatch": mismatch,
    }


def commuting_check(F: Hypothesis, m: int) -> dict | None:
    """First ``x`` with ``Phi_m(F*_m(x)) != (F^kpart)*_q(phi_m(x))``, or None."""
    k = F.universe.k
    q = m // k
    G = partize_hypothesis(F)
    grid = standard_grid(F.universe, m).check(f"E_{m}")
    for values in grid:
        x = ConfigPoint(grid.index, values)
        left = Phi_m(star(F, m, x), m, k)
        right = partite_star(G, q, phi_m(x, k))
        if left != right:
            return {"x": values, "hypothesis": F.name}
    return None


def audit_kpart_basics(
    universe: Universe, mu: ProbTemplate, cls: HypothesisClass | None = None, m: int | None = None
) -> AuditReport:
    """``phi_k`` inverts ``iota``; ``phi_m`` pushes ``mu^m`` to the partite product
    measure and is a bijection when k divides m; the pattern diagram commutes."""
    k = universe.k
    m = 2 * k if m is None else m
    witnesses = []
    pu = partize_universe(universe)
    pgrid = partite_grid(pu, 1).check("partite E_1")
    grid_k = standard_grid(universe, k)
    inverse_ok = True
    for values in pgrid:
        z = ConfigPoint(pgrid.index, values)
        if phi_m(iota_kpart(z), k) != z:
            inverse_ok = False
            witnesses.append({"kind": "phi_k_iota", "z": values})
            break
    for values in grid_k:
        x = ConfigPoint(grid_k.index, values)
        if iota_kpart(phi_m(x, k)) != x:
            inverse_ok = False
            witnesses.append({"kind": "iota_phi_k", "x": values})
            break
    push = pushforward_check(mu, m)
    if not push["measure_preserving"]:
        witnesses.append({"kind": "pushforward", **push["mismatch"]})
    if m % k == 0 and not push["bijective"]:
        witnesses.append(
            {"kind": "phi_m_not_bijective", "m": m, "source_atoms": push["source_atoms"],
             "target_atoms": push["target_atoms"], "max_fibre": push["max_fibre"]}
        )
    diagram_failures = 0
    for ms in sorted({k, m}):
        for F in cls or ():
            w = commuting_check(F, ms)
            if w:
                diagram_failures += 1
                witnesses.append({"kind": "diagram", "m": ms, **w})
    quantities = {
        "k": k,
        "m": m,
        "phi_k_inverts_iota": inverse_ok,
        "pushforward": {key: v for key, v in push.items() if key != "mismatch"},
        "diagram_hypotheses": len(cls) if cls is not None else 0,
        "diagram_failures": diagram_failures,
    }
    return _report(
        "kpart-basics",
        "phi_k = iota^-1; phi_m is measure preserving (a bijection when k | m); "
        "Phi_m . F*_m = (F^kpart)*_q . phi_m",
        {"k": k, "ground_sets": universe.ground_sets, "m": m,
         "class": [h.table for h in cls] if cls is not None else []},
        quantities,
        witnesses,
    )


def audit_kpart_loss(mu: ProbTemplate, cls: HypothesisClass, loss: LossTable) -> AuditReport:
    """Total loss is unchanged by partizing measure, hypotheses and loss."""
    pmu = partize_measure(mu)
    pcls = partize_class(cls)
    ploss = partize_loss(loss, cls.universe)
    L = loss_matrix(cls, mu, loss)
    P = loss_matrix(pcls, pmu, ploss)
    witnesses = [
        {"F": i, "H": j, "loss": L[i][j], "partite_loss": P[i][j]}
        for i in range(len(cls))
        for j in range(len(cls))
        if L[i][j] != P[i][j]
    ]
    return _report(
        "kpart-loss",
        "L_{mu,F,loss}(H) = L_{mu^kpart,F^kpart,loss^kpart}(H^kpart)",
        {"class": [h.table for h in cls], "loss": loss.describe()},
        {"pairs": len(cls) ** 2, "mismatches": len(witnesses)},
        witnesses,
        checked=bool(len(cls)),
    )


def transfer_centers(
    partite_centers: CenterSet,
    pcls: HypothesisClass,
    cls: HypothesisClass,
    mu: ProbTemplate,
    loss: LossTable,
) -> CenterSet:
    """Departize a partite cover into a cover of ``cls`` at the same precision."""
    eps = partite_centers.epsilon
    P = loss_matrix(pcls, partite_centers.measure, partite_centers.loss)
    if not is_cover(P, eps, partite_centers.centers):
        raise InvalidCenters("partite centers do not cover the partite class")
    chosen = []
    for j in partite_centers.centers:
        F = departize(pcls[j], cls.universe)
        try:
            chosen.append(cls.index(F))
        except ValueError:
            raise InvalidCenters(f"center {j} departizes outside the class") from None
    L = loss_matrix(cls, mu, loss)
    if not is_cover(L, eps, chosen):
        raise InvalidCenters("departized centers do not cover the class")
    return CenterSet(tuple(chosen), eps, mu, f"transfer-{partite_centers.method}", loss)


def audit_hp_transfer(
    cls: HypothesisClass, mu: ProbTemplate, loss: LossTable, epsilon, method: str = "optimal"
) -> AuditReport:
    """Covers of the partized class transfer to covers of the class, same size and precision."""
    eps = Fraction(epsilon)
    inputs = {"class": [h.table for h in cls], "loss": loss.describe(), "epsilon": eps}
    claim = "a partite cover at eps departizes to a cover at eps of equal size"
    if not len(cls):
        return AuditReport("hp-transfer", claim, inputs, {"reason": "empty class"}, VACUOUS)
    pmu = partize_measure(mu)
    pcls = partize_class(cls)
    ploss = partize_loss(loss, cls.universe)
    finder = optimal_centers if method == "optimal" else greedy_centers
    pcenters = finder(pcls, pmu, ploss, eps)
    witnesses = []
    try:
        centers = transfer_centers(pcenters, pcls, cls, mu, loss)
        if len(centers) != len(pcenters) or centers.epsilon != eps:
            witnesses.append({"kind": "size", "partite": len(pcenters), "transferred": len(centers)})
        size = len(centers)
    except InvalidCenters as exc:
        witnesses.append({"kind": "invalid", "error": str(exc)})
        size = None
    return _report(
        "hp-transfer",
        claim,
        inputs,
        {"method": method, "partite_centers": list(pcenters.centers), "partite_size": len(pcenters),
         "transferred_size": size},
        witnesses,
    )


def loss_equality(mu: ProbTemplate, F: Hypothesis, H: Hypothesis, loss: LossTable) -> tuple:
    """Both sides of the partized loss identity for one pair."""
    pu = partize_universe(F.universe)
    return (
        total_loss(mu, F, loss, H),
        total_loss(
            partize_measure(mu),
            partize_hypothesis(F, pu),
            partize_loss(loss, F.universe),
            partize_hypothesis(H, pu),
        ),
    )


def check_kpart_loss_equality(mu: ProbTemplate, F: Hypothesis, H: Hypothesis, loss: LossTable) -> AuditReport:
    left, right = loss_equality(mu, F, H, loss)
    witnesses = [] if left == right else [{"loss": left, "partite_loss": right}]
    return _report(
        "kpart-loss",
        "L_{mu,F,loss}(H) = L_{mu^kpart,F^kpart,loss^kpart}(H^kpart)",
        {"F": F.table, "H": H.table, "loss": loss.describe()},
        {"loss": left, "partite_loss": right},
        witnesses,
    )


__all__ = [
    "partize_universe",
    "partize_measure",
    "departize_measure",
    "iota_kpart",
    "phi_m",
    "beta_alpha",
    "Phi_m",
    "partize_hypothesis",
    "partize_class",
    "departize",
    "departize_class",
    "partize_loss",
    "pushforward_check",
    "commuting_check",
    "audit_kpart_basics",
    "audit_kpart_loss",
    "transfer_centers",
    "audit_hp_transfer",
    "loss_equality",
    "check_kpart_loss_equality",
]
