"""Loss tables, their constants, exact total loss and the almost-metric checks.

A loss is evaluated as ``loss(pos, y, y2)`` where ``pos`` is a grid position
of the measured configuration space (``E_k``, or ``E_1`` of a partite
universe), ``y`` is the hypothesis outcome and ``y2`` the target outcome.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import NormalizationError
from .hypotheses import HypothesisClass
from .report import VACUOUS, VERIFIED, VIOLATED, AuditReport
from .universe import (
    PartiteProbTemplate,
    PartiteUniverse,
    ProbTemplate,
    Universe,
    partite_grid,
    standard_grid,
    support_atoms,
)


def _rational(v, where: str = "loss value") -> Fraction:
    if isinstance(v, float):
        raise NormalizationError(f"{where} {v!r} is a float; use an exact rational")
    try:
        out = Fraction(v)
    except (TypeError, ValueError):
        raise NormalizationError(f"{where} {v!r} is not rational") from None
    if out < 0:
        raise NormalizationError(f"{where} {v} is negative")
    return out


@dataclass(frozen=True)
class LossFlags:
    bounded: bool
    separated: bool
    metric: bool


class LossTable:
    """A finite loss over a fixed list of outcomes.

    Values default to ``diagonal`` on ``y == y2`` and ``off_diagonal``
    elsewhere, then ``values`` overrides pairs for every point and
    ``overrides[pos]`` overrides pairs at one point only.
    """

    def __init__(
        self,
        outcomes: Sequence,
        *,
        values: Mapping | None = None,
        diagonal=0,
        off_diagonal=1,
        overrides: Mapping | None = None,
        n_points: int = 1,
        kind: str = "table",
    ):
        self.outcomes = tuple(outcomes)
        if not self.outcomes:
            raise ValueError("a loss needs at least one outcome")
        self.kind = kind
        self.n_points = n_points
        self.diagonal = _rational(diagonal)
        self.off_diagonal = _rational(off_diagonal)
        known = set(self.outcomes)
        self.values: dict = {}
        for (y, y2), v in (values or {}).items():
            if y not in known or y2 not in known:
                raise ValueError(f"loss entry for unknown outcome pair {(y, y2)!r}")
            self.values[(y, y2)] = _rational(v)
        self.overrides: dict = {}
        for pos, table in (overrides or {}).items():
            if not 0 <= pos < n_points:
                raise ValueError(f"override at position {pos} outside {n_points} points")
            entry = {}
            for (y, y2), v in table.items():
                if y not in known or y2 not in known:
                    raise ValueError(f"loss entry for unknown outcome pair {(y, y2)!r}")
                entry[(y, y2)] = _rational(v)
            self.overrides[pos] = entry

    @classmethod
    def zero_one(cls, outcomes: Sequence, n_points: int = 1) -> "LossTable":
        return cls(outcomes, n_points=n_points, kind="zero_one")

    @property
    def depends_on_point(self) -> bool:
        return bool(self.overrides)

    def base(self, y, y2) -> Fraction:
        v = self.values.get((y, y2))
        if v is not None:
            return v
        return self.diagonal if y == y2 else self.off_diagonal

    def __call__(self, pos: int, y, y2) -> Fraction:
        if self.overrides:
            entry = self.overrides.get(pos)
            if entry is not None and (y, y2) in entry:
                return entry[(y, y2)]
        return self.base(y, y2)

    def _strata(self):
        """Each distinct point behaviour: ``None`` for the shared base table, else a position."""
        strata = list(self.overrides)
        if len(self.overrides) < self.n_points:
            strata.append(None)
        return strata

    def _at(self, stratum, y, y2) -> Fraction:
        return self.base(y, y2) if stratum is None else self(stratum, y, y2)

    @functools.cached_property
    def constants(self) -> tuple[Fraction | None, Fraction, LossFlags]:
        return loss_constants(self)

    @property
    def s(self) -> Fraction | None:
        return self.constants[0]

    @property
    def sup(self) -> Fraction:
        return self.constants[1]

    @property
    def flags(self) -> LossFlags:
        return self.constants[2]

    def describe(self) -> dict:
        s, sup, flags = self.constants
        return {
            "kind": self.kind,
            "s": s,
            "sup": sup,
            "bounded": flags.bounded,
            "separated": flags.separated,
            "metric": flags.metric,
        }


def label_outcomes(universe: Universe) -> tuple:
    """``Lambda^{S_k}`` in lexicographic order of label tuples."""
    return tuple(itertools.product(universe.labels, repeat=math.factorial(universe.k)))


def zero_one_for(universe) -> LossTable:
    """0/1 loss on the outcomes a hypothesis over ``universe`` can produce."""
    if isinstance(universe, PartiteUniverse):
        return LossTable.zero_one(universe.labels, partite_grid(universe, 1).size)
    return LossTable.zero_one(label_outcomes(universe), standard_grid(universe, universe.k).size)


def loss_constants(loss: LossTable) -> tuple[Fraction | None, Fraction, LossFlags]:
    """``(s, sup, flags)`` recomputed from the table.

    ``s`` is ``None`` when there is only one outcome (an infimum over nothing).
    """
    outs = loss.outcomes
    strata = loss._strata()
    s = None
    sup = Fraction(0)
    diag_zero = True
    for st in strata:
        for y in outs:
            for y2 in outs:
                v = loss._at(st, y, y2)
                sup = max(sup, v)
                if y == y2:
                    diag_zero = diag_zero and v == 0
                elif s is None or v < s:
                    s = v
    separated = diag_zero and (s is None or s > 0)
    metric = separated and all(_is_metric(loss, st) for st in strata)
    return s, sup, LossFlags(bounded=True, separated=separated, metric=metric)


def _is_metric(loss: LossTable, stratum) -> bool:
    outs = loss.outcomes
    d = {(a, b): loss._at(stratum, a, b) for a in outs for b in outs}
    for a, b in d:
        if d[a, b] != d[b, a]:
            return False
    for a, b, c in itertools.product(outs, repeat=3):
        if d[a, c] > d[a, b] + d[b, c]:
            return False
    return True


# ---------------------------------------------------------------------------
# exact expectations


def _grid_of(mu):
    if isinstance(mu, ProbTemplate):
        return standard_grid(mu.universe, mu.universe.k)
    return partite_grid(mu.universe, 1)


@functools.lru_cache(maxsize=256)
def weighted_positions(mu, max_arity: int | None = None) -> tuple:
    """``(grid position, weight)`` for the support of ``mu`` on the loss grid."""
    m = mu.universe.k if isinstance(mu, ProbTemplate) else 1
    grid = _grid_of(mu)
    return tuple((grid.position(v), w) for v, w in support_atoms(mu, m, max_arity))


def _positions_for(mu, loss: LossTable | None, *hyps) -> tuple:
    if loss is not None and loss.depends_on_point:
        return weighted_positions(mu, None)
    return weighted_positions(mu, max((h.rank for h in hyps), default=0))


def _check_universe(mu, *hyps):
    for h in hyps:
        if h.universe != mu.universe:
            raise ValueError(f"{h!r} lives on a different universe than the measure")


def total_loss(mu, F, loss: LossTable, H) -> Fraction:
    """``E_x loss(x, H-outcome, F-outcome)`` by exact enumeration of the support."""
    _check_universe(mu, F, H)
    fo, ho = F.outcomes, H.outcomes
    total = Fraction(0)
    for pos, w in _positions_for(mu, loss, F, H):
        v = loss(pos, ho[pos], fo[pos])
        if v:
            total += w * v
    return total


def disagreement(mu, F, H) -> Fraction:
    """Mass of the configurations where the outcomes of ``F`` and ``H`` differ."""
    _check_universe(mu, F, H)
    fo, ho = F.outcomes, H.outcomes
    return sum(
        (w for pos, w in _positions_for(mu, None, F, H) if fo[pos] != ho[pos]), Fraction(0)
    )


def _grouped(mu, loss: LossTable | None, members) -> list[tuple[int, tuple, Fraction]]:
    """Merge support positions that look identical to every member (and to the loss)."""
    positions = _positions_for(mu, loss, *members)
    point_dependent = loss is not None and loss.depends_on_point
    groups: dict = {}
    for pos, w in positions:
        outs = tuple(h.outcomes[pos] for h in members)
        key = (pos if point_dependent and pos in loss.overrides else None, outs)
        groups[key] = groups.get(key, Fraction(0)) + w
    return [(key[0] if key[0] is not None else -1, key[1], w) for key, w in groups.items()]


def loss_matrix(cls: HypothesisClass, mu, loss: LossTable) -> list[list[Fraction]]:
    """``M[i][j] = L(target=member i, hypothesis=member j)``."""
    members = list(cls)
    _check_universe(mu, *members)
    n = len(members)
    M = [[Fraction(0)] * n for _ in range(n)]
    for pos, outs, w in _grouped(mu, loss, members):
        for i in range(n):
            row = M[i]
            fi = outs[i]
            for j in range(n):
                v = loss(pos, outs[j], fi)
                if v:
                    row[j] += w * v
    return M


def disagreement_matrix(cls: HypothesisClass, mu) -> list[list[Fraction]]:
    members = list(cls)
    _check_universe(mu, *members)
    n = len(members)
    M = [[Fraction(0)] * n for _ in range(n)]
    for _, outs, w in _grouped(mu, None, members):
        for i in range(n):
            for j in range(n):
                if outs[i] != outs[j]:
                    M[i][j] += w
    return M


def is_realizable(F, cls: HypothesisClass, loss: LossTable, mu) -> bool:
    """Whether some member has total loss exactly zero against ``F``."""
    return any(total_loss(mu, F, loss, H) == 0 for H in cls)


def check_almost_metric(mu, loss: LossTable, cls: HypothesisClass) -> AuditReport:
    """Sandwich ``s*M <= L <= sup*M`` on pairs and the scaled triangle on triples.

    The upper half of the sandwich needs zero self-loss and the triangle needs a
    separated loss; checks whose hypotheses fail are counted as skipped.
    """
    s, sup, flags = loss.constants
    s_eff = s if s is not None else Fraction(0)
    zero_diag = all(loss._at(st, y, y) == 0 for st in loss._strata() for y in loss.outcomes)
    L = loss_matrix(cls, mu, loss)
    M = disagreement_matrix(cls, mu)
    n = len(cls)
    witnesses = []
    checked = skipped = 0
    for i in range(n):
        for j in range(n):
            checked += 1
            if s_eff * M[i][j] > L[i][j]:
                witnesses.append({"kind": "lower", "F": i, "H": j, "L": L[i][j], "M": M[i][j]})
            if zero_diag:
                checked += 1
                if L[i][j] > sup * M[i][j]:
                    witnesses.append({"kind": "upper", "F": i, "H": j, "L": L[i][j], "M": M[i][j]})
            else:
                skipped += 1
    if flags.separated and s:
        for i, j, h in itertools.product(range(n), repeat=3):
            checked += 1
            if s * L[i][j] > sup * (L[i][h] + L[j][h]):
                witnesses.append({"kind": "triangle", "F": i, "F2": j, "H": h})
    else:
        skipped += n**3
    verdict = VIOLATED if witnesses else (VERIFIED if checked else VACUOUS)
    return AuditReport(
        name="almostmetric",
        claim="s*M(F,H) <= L_F(H) <= sup*M(F,H); L_F(F2) <= (sup/s)(L_F(H) + L_F2(H))",
        inputs={"class": [h.table for h in cls], "mu": _measure_key(mu), "loss": loss.describe()},
        quantities={
            "members": n,
            "s": s,
            "sup": sup,
            "separated": flags.separated,
            "checks": checked,
            "skipped": skipped,
        },
        verdict=verdict,
        witnesses=witnesses[:5],
    )


def _measure_key(mu) -> list:
    if isinstance(mu, ProbTemplate):
        return [list(ws) for ws in mu.per_arity]
    if isinstance(mu, PartiteProbTemplate):
        return [list(ws) for ws in mu.per_coordinate]
    return [repr(mu)]
