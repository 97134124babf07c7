"""ERM on k-ary samples, exact and Monte Carlo sample complexity, and the
pattern-counting audit that turns a PAC learner into small covers."""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import BudgetExhausted, EmptyClass, NotRealizable
from .hypotheses import (
    HypothesisClass,
    Pattern,
    _encode,
    _pattern_positions,
    gamma,
    partite_gamma,
)
from .losses import LossTable, loss_matrix, total_loss
from .packing import greedy_centers
from .report import VACUOUS, VERIFIED, VIOLATED, AuditReport
from .universe import (
    ConfigPoint,
    enumerate_injections,
    falling_factorial,
    guard,
    sample_config,
    standard_grid,
    support_atoms,
    symmetric_group,
)

DEFAULT_DELTA_GRID = tuple(Fraction(i, 8) for i in range(1, 8))
DEFAULT_EXACT_CAP = 6
DEFAULT_MC_CAP = 64
DEFAULT_Z = 2.0


@dataclass(frozen=True)
class Sample:
    x: ConfigPoint
    labels: Pattern


@dataclass
class PacEstimate:
    epsilon: Fraction
    delta: Fraction
    m_hat: int
    trials: int
    observed_failure_rate: Fraction
    confidence_note: str
    mode: str = "montecarlo"
    curve: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# the learner


def _erm_index(outcome_tables, loss: LossTable, positions, target_outs) -> int:
    best, best_j = None, 0
    for j, outs in enumerate(outcome_tables):
        total = Fraction(0)
        for p, y in zip(positions, target_outs):
            v = loss(p, outs[p], y)
            if v:
                total += v
                if best is not None and total > best:
                    break
        if best is None or total < best:
            best, best_j = total, j
    return best_j


def _target_outcomes(labels: Pattern, m: int, k: int) -> list[tuple]:
    """``(y_{alpha . sigma})_sigma`` for every injection ``alpha``."""
    table = labels.as_dict()
    out = []
    for alpha in enumerate_injections(m, k):
        out.append(tuple(table[tuple(alpha[s - 1] for s in sigma)] for sigma in symmetric_group(k)))
    return out


def erm_learner(sample: Sample, cls: HypothesisClass, loss: LossTable):
    """First member (in class order) with the least empirical loss on the sample."""
    if not len(cls):
        raise EmptyClass("ERM needs a non-empty class")
    universe = cls.universe
    m = len(sample.x.index.base)
    grid = standard_grid(universe, m)
    positions = _pattern_positions(universe, m, _encode(universe, grid, sample.x.values))
    targets = _target_outcomes(sample.labels, m, universe.k)
    return cls[_erm_index([h.outcomes for h in cls], loss, positions, targets)]


def make_sample(F, x: ConfigPoint) -> Sample:
    from .hypotheses import star

    return Sample(x, star(F, len(x.index.base), x))


@functools.lru_cache(maxsize=1024)
def _realizable(mu, F, cls, loss) -> bool:
    return any(total_loss(mu, F, loss, H) == 0 for H in cls)


def pac_trial(mu, F, cls: HypothesisClass, loss: LossTable, m: int, seed) -> Fraction:
    """Draw ``x ~ mu^m``, run ERM on ``(x, F*_m(x))`` and return the exact loss."""
    if not _realizable(mu, F, cls, loss):
        raise NotRealizable(f"{F!r} is not realizable in {cls!r}")
    x = sample_config(mu, range(1, m + 1), seed)
    H = erm_learner(make_sample(F, x), cls, loss)
    return total_loss(mu, F, loss, H)


# ---------------------------------------------------------------------------
# exact failure probabilities


def _max_arity(cls, loss, targets):
    if loss.depends_on_point:
        return None
    return max([cls.rank] + [t.rank for t in targets])


def failure_probabilities(
    cls: HypothesisClass, loss: LossTable, mu, m: int, epsilon, targets=None
) -> list[Fraction]:
    """``P[L(target, ERM(x, target*_m(x))) > epsilon]`` for each target, exactly."""
    targets = list(cls) if targets is None else list(targets)
    eps = Fraction(epsilon)
    universe = cls.universe
    members = [h.outcomes for h in cls]
    # bad[t][j]: ERM output j fails for target t
    bad = [[total_loss(mu, F, loss, H) > eps for H in cls] for F in targets]
    grid = standard_grid(universe, m)
    arity = _max_arity(cls, loss, targets)
    work = standard_grid(universe, m, arity).size * len(targets) * len(cls)
    guard(work, f"exact failure enumeration at m={m}")
    memo: dict = {}
    fail = [Fraction(0)] * len(targets)
    for values, w in support_atoms(mu, m, arity):
        positions = _pattern_positions(universe, m, _encode(universe, grid, values))
        hit = memo.get(positions)
        if hit is None:
            hit = tuple(
                bad[t][_erm_index(members, loss, positions, [F.outcomes[p] for p in positions])]
                for t, F in enumerate(targets)
            )
            memo[positions] = hit
        for t, b in enumerate(hit):
            if b:
                fail[t] += w
    return fail


def failure_curve(cls, loss, mu, epsilon, m_cap: int, targets=None) -> list[Fraction]:
    """Worst-target failure probability for ``m = 0..m_cap``."""
    return [max(failure_probabilities(cls, loss, mu, m, epsilon, targets), default=Fraction(0))
            for m in range(m_cap + 1)]


def m_pac_from_curve(curve: Sequence[Fraction], delta) -> int:
    """Smallest ``m0`` with failure at most ``delta`` for every ``m`` in ``[m0, cap]``."""
    delta = Fraction(delta)
    m0 = None
    for m in range(len(curve) - 1, -1, -1):
        if curve[m] <= delta:
            m0 = m
        else:
            break
    if m0 is None:
        raise BudgetExhausted(f"failure stays above {delta} up to m = {len(curve) - 1}")
    return m0


def exact_m_pac(cls, loss, mu, epsilon, delta, targets=None, m_cap: int = DEFAULT_EXACT_CAP) -> int:
    for F in targets or ():
        if not _realizable(mu, F, cls, loss):
            raise NotRealizable(f"{F!r} is not realizable in {cls!r}")
    return m_pac_from_curve(failure_curve(cls, loss, mu, epsilon, m_cap, targets), delta)


# ---------------------------------------------------------------------------
# estimation


def _trial_seed(seed, *parts) -> random.Random:
    return random.Random(":".join(map(str, (seed,) + parts)))


def estimate_m_pac(
    cls: HypothesisClass,
    loss: LossTable,
    epsilon,
    delta,
    measures: Sequence,
    targets: Sequence | None = None,
    trials: int = 200,
    seed: int = 0,
    mode: str = "montecarlo",
    m_cap: int | None = None,
    z: float = DEFAULT_Z,
) -> PacEstimate:
    """Smallest ``m`` meeting the failure criterion at ``m`` and ``m + 1``.

    ``exact`` mode enumerates every atom of ``mu^m``; ``montecarlo`` counts
    failures over seeded trials and requires the observed rate to clear
    ``delta`` by ``z`` standard errors.
    """
    eps, delta = Fraction(epsilon), Fraction(delta)
    if not len(cls):
        raise EmptyClass("cannot learn an empty class")
    targets = list(cls) if targets is None else list(targets)
    for mu in measures:
        for F in targets:
            if not _realizable(mu, F, cls, loss):
                raise NotRealizable(f"{F!r} is not realizable in {cls!r}")
    if mode == "exact":
        cap = DEFAULT_EXACT_CAP if m_cap is None else m_cap
        curves = [failure_curve(cls, loss, mu, eps, cap, targets) for mu in measures]
        worst = [max(c[m] for c in curves) for m in range(cap + 1)]
        m_hat = m_pac_from_curve(worst, delta)
        return PacEstimate(
            eps, delta, m_hat, 0, worst[m_hat],
            f"exact enumeration of mu^m atoms for m <= {cap}", "exact",
            {m: worst[m] for m in range(cap + 1)},
        )
    if mode != "montecarlo":
        raise ValueError(f"unknown mode {mode!r}")
    cap = DEFAULT_MC_CAP if m_cap is None else m_cap
    margin = z * math.sqrt(float(delta * (1 - delta)) / trials)
    rates: dict[int, Fraction] = {}

    def rate(m: int) -> Fraction:
        if m not in rates:
            worst = Fraction(0)
            for a, mu in enumerate(measures):
                for b, F in enumerate(targets):
                    fails = sum(
                        pac_trial(mu, F, cls, loss, m, _trial_seed(seed, a, b, m, t)) > eps
                        for t in range(trials)
                    )
                    worst = max(worst, Fraction(fails, trials))
            rates[m] = worst
        return rates[m]

    def ok(m: int) -> bool:
        return float(rate(m)) <= float(delta) - margin and float(rate(m + 1)) <= float(delta) - margin

    if ok(0):
        hi = 0
    else:
        lo, hi = 0, 1
        while not ok(hi):
            lo, hi = hi, hi * 2
            if hi > cap:
                raise BudgetExhausted(f"no m <= {cap} meets the failure criterion")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
    note = (
        f"Monte Carlo evidence: {trials} trials per (measure, target), "
        f"rate <= delta - {z} standard errors ({margin:.4f}) at m and m+1"
    )
    return PacEstimate(eps, delta, hi, trials, rate(hi), note, "montecarlo", dict(sorted(rates.items())))


# ---------------------------------------------------------------------------
# the PAC -> packing bound


@dataclass
class MhpBound:
    value: int | None
    budget: int | None
    floored: bool
    delta: Fraction | None
    m_tilde: int | None
    gamma: int | None
    trivial: int | None
    corrected: int | None
    variant: str
    threshold: Fraction
    rows: list = field(default_factory=list)


def pac_threshold(loss: LossTable, epsilon) -> tuple[str, Fraction]:
    """Precision handed to the learner: ``eps/2`` (metric) or ``s eps / (2 sup)``."""
    eps = Fraction(epsilon)
    s, sup, flags = loss.constants
    if flags.metric:
        return "metric", eps / 2
    if flags.separated and flags.bounded and s:
        return "separated-bounded", s * eps / (2 * sup)
    raise ValueError("the bound needs a metric or a separated and bounded loss")


def compute_mhp_bound(
    cls: HypothesisClass,
    loss: LossTable,
    epsilon,
    m_pac_fn: Callable | Mapping,
    delta_grid: Sequence | None = None,
    partite: bool = False,
) -> MhpBound:
    """Minimise ``ceil(gamma(ceil m_pac(t, delta)) / (1 - delta)) - 2`` over a delta grid.

    Also returns the label-count fallback and ``floor(gamma / (1 - delta))``, the
    largest separated family the counting argument actually rules in.
    """
    variant, thr = pac_threshold(loss, epsilon)
    grid = sorted({Fraction(d) for d in (delta_grid or DEFAULT_DELTA_GRID)})
    n_labels = len(cls.universe.labels)
    k = cls.universe.k
    rows = []
    for delta in grid:
        if not 0 < delta < 1:
            raise ValueError(f"delta {delta} outside (0, 1)")
        try:
            if isinstance(m_pac_fn, Mapping):
                raw = m_pac_fn[delta]
            else:
                raw = m_pac_fn(thr, delta)
        except (BudgetExhausted, KeyError):
            continue
        m_t = math.ceil(raw)
        g = (partite_gamma(cls, m_t) if partite else gamma(cls, m_t)).value
        exponent = m_t**k if partite else falling_factorial(m_t, k)
        scale = 1 / (1 - delta)
        rows.append(
            {
                "delta": delta,
                "m_tilde": m_t,
                "gamma": g,
                "value": math.ceil(g * scale) - 2,
                "trivial": math.ceil(n_labels**exponent * scale) - 2,
                "corrected": math.floor(g * scale),
            }
        )
    if not rows:
        return MhpBound(None, None, False, None, None, None, None, None, variant, thr, rows)
    best = min(rows, key=lambda r: (r["value"], r["delta"]))
    value = best["value"]
    return MhpBound(
        value,
        max(value, 1),
        value < 1,
        best["delta"],
        best["m_tilde"],
        best["gamma"],
        min(r["trivial"] for r in rows),
        min(r["corrected"] for r in rows),
        variant,
        thr,
        rows,
    )


def counting_replay(
    cls: HypothesisClass, loss: LossTable, mu, threshold, delta, m_tilde: int, family: Sequence[int]
) -> dict:
    """Recount the sets ``C_i`` and ``G(x)`` for a separated ``family`` of member indices.

    Checks at every point of the (rank-reduced) grid that each revealed pattern
    lets the learner land within ``threshold`` of at most one family member and
    that ``G(x) >= |family| - |Y(x)|``; integrates ``G`` exactly against ``mu^m``.
    """
    thr = Fraction(threshold)
    universe = cls.universe
    members = [h.outcomes for h in cls]
    L = loss_matrix(cls, mu, loss)
    close = [[L[i][j] <= thr for j in range(len(cls))] for i in family]
    grid = standard_grid(universe, m_tilde)
    max_arity = None if loss.depends_on_point else cls.rank
    reduced = standard_grid(universe, m_tilde, max_arity).check(f"E_{m_tilde}")
    weights = {v: w for v, w in support_atoms(mu, m_tilde, max_arity)}
    at_most_one = True
    g_bound = True
    integral = Fraction(0)
    worst = None
    for values in reduced:
        positions = _pattern_positions(universe, m_tilde, _encode(universe, grid, values))
        patterns: dict = {}
        for j, outs in enumerate(members):
            patterns.setdefault(tuple(outs[p] for p in positions), j)
        outputs = [
            _erm_index(members, loss, positions, list(y)) for y in patterns
        ]
        for a in outputs:
            if sum(row[a] for row in close) > 1:
                at_most_one = False
                worst = worst or {"x": values, "output": a}
        G = sum(1 for row in close if not any(row[a] for a in outputs))
        if G < len(family) - len(patterns):
            g_bound = False
            worst = worst or {"x": values, "G": G, "Y": len(patterns)}
        w = weights.get(values)
        if w:
            integral += w * G
    return {
        "family": list(family),
        "m_tilde": m_tilde,
        "delta": Fraction(delta),
        "at_most_one": at_most_one,
        "g_lower_bound": g_bound,
        "integral": integral,
        "integral_bound": len(family) * Fraction(delta),
        "integral_ok": integral <= len(family) * Fraction(delta),
        "witness": worst,
    }


def audit_pac_to_hp(
    cls: HypothesisClass,
    loss: LossTable,
    epsilon,
    measures: Mapping,
    delta_grid: Sequence | None = None,
    m_cap: int = DEFAULT_EXACT_CAP,
    replay: bool = True,
) -> AuditReport:
    """Greedy cover size against the PAC-derived budget, per measure, with exact m^PAC.

    The learner is ERM over the class and m^PAC is computed at each measure
    over all members as targets.
    """
    eps = Fraction(epsilon)
    claim = "greedy cover at eps <= min_delta ceil(gamma(ceil m_pac) / (1 - delta)) - 2"
    inputs = {"class": [h.table for h in cls], "loss": loss.describe(), "epsilon": eps}
    try:
        variant, thr = pac_threshold(loss, eps)
    except ValueError as exc:
        return AuditReport("pac-to-hp", claim, inputs, {"reason": str(exc)}, VACUOUS)
    if not len(cls):
        return AuditReport("pac-to-hp", claim, inputs, {"reason": "empty class"}, VACUOUS)
    per_measure = {}
    witnesses = []
    for name, mu in measures.items():
        curve = failure_curve(cls, loss, mu, thr, m_cap)
        bound = compute_mhp_bound(
            cls, loss, eps, lambda t, d: m_pac_from_curve(curve, d), delta_grid
        )
        L = loss_matrix(cls, mu, loss)
        greedy = greedy_centers(cls, mu, loss, eps, L)
        row = {
            "variant": variant,
            "threshold": thr,
            "failure_curve": curve,
            "greedy": len(greedy),
            "bound": bound.value,
            "budget": bound.budget,
            "floored": bound.floored,
            "delta": bound.delta,
            "m_tilde": bound.m_tilde,
            "gamma": bound.gamma,
            "trivial": bound.trivial,
            "corrected": bound.corrected,
        }
        if bound.budget is None:
            row["status"] = "no delta in the grid has m_pac within the cap"
            per_measure[name] = row
            continue
        row["holds"] = len(greedy) <= bound.budget
        row["corrected_holds"] = len(greedy) <= bound.corrected
        if not row["holds"]:
            witnesses.append(
                {"kind": "cover_exceeds_budget", "measure": name, "greedy": len(greedy),
                 "budget": bound.budget, "delta": bound.delta, "gamma": bound.gamma,
                 "m_tilde": bound.m_tilde, "centers": list(greedy.centers)}
            )
        if replay:
            replays = []
            for r in bound.rows:
                rep = counting_replay(cls, loss, mu, thr, r["delta"], r["m_tilde"], greedy.centers)
                replays.append(rep)
                if not (rep["at_most_one"] and rep["g_lower_bound"] and rep["integral_ok"]):
                    witnesses.append({"kind": "counting_replay", "measure": name, **rep})
            row["replay"] = [
                {k: rep[k] for k in ("delta", "m_tilde", "at_most_one", "g_lower_bound",
                                     "integral", "integral_bound")}
                for rep in replays
            ]
        per_measure[name] = row
    checked = [r for r in per_measure.values() if "holds" in r]
    verdict = VIOLATED if witnesses else (VERIFIED if checked else VACUOUS)
    return AuditReport(
        "pac-to-hp",
        claim,
        {**inputs, "measures": sorted(measures)},
        {"measures": per_measure},
        verdict,
        witnesses[:5],
    )
