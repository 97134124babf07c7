"""Natarajan shattering and dimension, slices at anchors, and VCN_k.

Shattered sets are closed under taking subsets, so the dimension search
grows candidate sets level by level and only tests a set once all of its
one-smaller subsets have been found shattered.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .hypotheses import HypothesisClass, gamma, growth_bound_ok
from .report import VACUOUS, VERIFIED, VIOLATED, AuditReport
from .universe import (
    PartiteUniverse,
    guard,
    partite_grid,
    standard_grid,
)

NEG_INFINITY = -math.inf
DEFAULT_MAX_SHATTER = 20


@dataclass
class FunctionFamily:
    """Finitely many functions on a finite domain, stored as rows of values.

    ``members[r]`` is the index of the first source function with row ``r``.
    """

    domain: tuple
    rows: tuple
    members: tuple = ()

    @classmethod
    def from_rows(cls, domain: Sequence, rows: Sequence[Sequence]) -> "FunctionFamily":
        seen: dict = {}
        for i, row in enumerate(rows):
            row = tuple(row)
            if len(row) != len(domain):
                raise ValueError("every row must assign a value to every domain point")
            seen.setdefault(row, i)
        return cls(tuple(domain), tuple(seen), tuple(seen.values()))

    @classmethod
    def from_callables(cls, domain: Sequence, functions) -> "FunctionFamily":
        domain = tuple(domain)
        return cls.from_rows(domain, [[f(a) for a in domain] for f in functions])

    def __len__(self):
        return len(self.rows)


@dataclass
class ShatteringWitness:
    points: tuple
    f0: tuple
    f1: tuple
    # subset of points (as a frozenset of indices into ``points``) -> family row
    selectors: dict = field(default_factory=dict)

    def check(self, family: FunctionFamily, columns: Sequence[int]) -> bool:
        if any(a == b for a, b in zip(self.f0, self.f1)):
            return False
        for U, r in self.selectors.items():
            row = family.rows[r]
            for t, c in enumerate(columns):
                if row[c] != (self.f1[t] if t in U else self.f0[t]):
                    return False
        return len(self.selectors) == 2 ** len(columns)


def natarajan_shatters(
    family: FunctionFamily, columns: Sequence[int], max_size: int = DEFAULT_MAX_SHATTER
) -> ShatteringWitness | None:
    """A witness that the domain points at ``columns`` are Natarajan-shattered, or None.

    ``f0`` and ``f1`` must themselves be realised on the set (the empty and the
    full selection), so candidates are pairs of projected rows that differ at
    every point.
    """
    columns = tuple(columns)
    n = len(columns)
    if n > max_size:
        guard(2**n, f"shattering a set of size {n}", 2**max_size)
    points = tuple(family.domain[c] for c in columns)
    proj: dict = {}
    for r, row in enumerate(family.rows):
        proj.setdefault(tuple(row[c] for c in columns), r)
    if len(proj) < 2**n:
        return None
    if n == 0:
        return ShatteringWitness(points, (), (), {frozenset(): next(iter(proj.values()))})
    keys = list(proj)
    masks = range(2**n)
    for i, r0 in enumerate(keys):
        for r1 in keys[i + 1 :]:
            if any(a == b for a, b in zip(r0, r1)):
                continue
            selectors = {}
            for mask in masks:
                pattern = tuple(r1[t] if mask >> t & 1 else r0[t] for t in range(n))
                r = proj.get(pattern)
                if r is None:
                    break
                selectors[frozenset(t for t in range(n) if mask >> t & 1)] = r
            else:
                return ShatteringWitness(points, r0, r1, selectors)
    return None


def _distinct_columns(family: FunctionFamily) -> list[int]:
    """Columns with at least two values, one representative per identical column."""
    seen = set()
    out = []
    for c in range(len(family.domain)):
        col = tuple(row[c] for row in family.rows)
        if len(set(col)) < 2 or col in seen:
            continue
        seen.add(col)
        out.append(c)
    return out


@dataclass
class DimensionResult:
    value: float | int
    columns: tuple = ()
    witness: ShatteringWitness | None = None


def shattered_sets(family: FunctionFamily, size: int) -> list[tuple[int, ...]]:
    """All shattered column sets of the given size (duplicate columns collapsed)."""
    return [c for c, _ in _levels(family, stop=size).get(size, [])]


def _levels(family: FunctionFamily, stop: int | None = None) -> dict:
    levels: dict = {}
    if not family.rows:
        return levels
    levels[0] = [((), natarajan_shatters(family, ()))]
    cols = _distinct_columns(family)
    current = [((c,), w) for c in cols if (w := natarajan_shatters(family, (c,)))]
    d = 1
    while current and (stop is None or d <= stop):
        levels[d] = current
        if stop is not None and d == stop:
            break
        if 2 ** (d + 1) > len(family.rows):
            break
        found = {c for c, _ in current}
        nxt = []
        for S, _ in current:
            for b in cols:
                if b <= S[-1]:
                    continue
                cand = S + (b,)
                if all(cand[:i] + cand[i + 1 :] in found for i in range(len(cand) - 1)):
                    w = natarajan_shatters(family, cand)
                    if w:
                        nxt.append((cand, w))
        current = nxt
        d += 1
    return levels


def natarajan_dimension(family: FunctionFamily) -> DimensionResult:
    """Largest shattered set size; ``NEG_INFINITY`` for an empty family."""
    if not family.rows:
        return DimensionResult(NEG_INFINITY)
    levels = _levels(family)
    d = max(levels)
    cols, w = levels[d][0]
    return DimensionResult(d, cols, w)


# ---------------------------------------------------------------------------
# slices and VCN_k


@dataclass
class Slice:
    """The family ``w -> H*_k(anchor, w)`` over residual points ``w``."""

    anchor: tuple
    residual_coords: tuple
    family: FunctionFamily


def _split(grid, is_anchor) -> tuple[list[int], list[int]]:
    anchor = [j for j, c in enumerate(grid.coords) if is_anchor(c)]
    rest = [j for j, c in enumerate(grid.coords) if not is_anchor(c)]
    return anchor, rest


def _slice_from(grid, cls, anchor_idx, rest_idx, anchor_values, rest_domains, outcome):
    rest_points = list(itertools.product(*rest_domains))
    guard(len(rest_points) * max(len(cls), 1), "slice table")
    values = [None] * len(grid.coords)
    for j, v in zip(anchor_idx, anchor_values):
        values[j] = v
    positions = []
    for w in rest_points:
        for j, v in zip(rest_idx, w):
            values[j] = v
        positions.append(grid.position(values))
    rows = [[outcome(h)[p] for p in positions] for h in cls]
    family = FunctionFamily.from_rows(rest_points, rows)
    return Slice(tuple(anchor_values), tuple(grid.coords[j] for j in rest_idx), family)


def _domains(grid, idx, cap, arity):
    return [
        grid.domains[j] if cap is None or arity(grid.coords[j]) <= cap else grid.domains[j][:1]
        for j in idx
    ]


def slice(cls: HypothesisClass, anchor: Sequence, reduce: bool = True) -> Slice:
    """Slice of a k-ary class at an anchor over ``E_{k-1}``.

    ``anchor`` lists values for the subsets of ``[k-1]`` in canonical order.
    With ``reduce`` the residual coordinates above the class rank are pinned;
    this only duplicates domain points, which never changes a Natarajan dimension.
    """
    universe = cls.universe
    k = universe.k
    grid = standard_grid(universe, k)
    anchor_idx, rest_idx = _split(grid, lambda A: k not in A)
    anchor = tuple(getattr(anchor, "values", anchor))
    if len(anchor) != len(anchor_idx):
        raise ValueError(f"anchor needs {len(anchor_idx)} values")
    cap = cls.rank if reduce else None
    return _slice_from(
        grid, cls, anchor_idx, rest_idx, anchor, _domains(grid, rest_idx, cap, len),
        lambda h: h.outcomes,
    )


@dataclass
class VcnResult:
    value: float | int
    anchor: tuple | None = None
    side: int | None = None
    columns: tuple = ()
    points: tuple = ()
    witness: ShatteringWitness | None = None


def _best(results):
    best = VcnResult(NEG_INFINITY)
    for res in results:
        if res.value > best.value:
            best = res
    return best


def vcn_k(cls: HypothesisClass, anchors=None, reduce: bool = True) -> VcnResult:
    """Max over anchors of the Natarajan dimension of the slice.

    ``anchors`` defaults to the whole anchor grid (arity above the class rank
    pinned when ``reduce`` is set).
    """
    if not len(cls):
        return VcnResult(NEG_INFINITY)
    universe = cls.universe
    k = universe.k
    if anchors is None:
        grid = standard_grid(universe, k)
        anchor_idx, _ = _split(grid, lambda A: k not in A)
        cap = cls.rank if reduce else None
        anchors = itertools.product(*_domains(grid, anchor_idx, cap, len))

    def results():
        for x in anchors:
            sl = slice(cls, x, reduce)
            d = natarajan_dimension(sl.family)
            pts = tuple(sl.family.domain[c] for c in d.columns)
            yield VcnResult(d.value, tuple(x), None, d.columns, pts, d.witness)

    return _best(results())


def partite_slice(pcls: HypothesisClass, side: int, anchor: Sequence, reduce: bool = True) -> Slice:
    """Slice of a partite class for ``A = [k] minus {side}`` at an anchor over ``r_{k,A}``."""
    pu: PartiteUniverse = pcls.universe
    grid = partite_grid(pu, 1)
    anchor_idx, rest_idx = _split(grid, lambda c: side not in c[0])
    anchor = tuple(anchor)
    if len(anchor) != len(anchor_idx):
        raise ValueError(f"anchor needs {len(anchor_idx)} values")
    cap = pcls.rank if reduce else None
    return _slice_from(
        grid, pcls, anchor_idx, rest_idx, anchor,
        _domains(grid, rest_idx, cap, lambda c: len(c[0])), lambda h: h.table,
    )


def vcn_k_partite(pcls: HypothesisClass, reduce: bool = True) -> VcnResult:
    """Max over the k sides ``A`` of size k-1 and anchors over ``r_{k,A}``."""
    if not len(pcls):
        return VcnResult(NEG_INFINITY)
    pu = pcls.universe
    k = pu.k
    grid = partite_grid(pu, 1)
    cap = pcls.rank if reduce else None

    def results():
        # sides in the canonical order of the (k-1)-subsets A they leave
        for A in _co_sides(k):
            side = next(a for a in range(1, k + 1) if a not in A)
            anchor_idx, _ = _split(grid, lambda c: side not in c[0])
            for x in itertools.product(*_domains(grid, anchor_idx, cap, lambda c: len(c[0]))):
                sl = partite_slice(pcls, side, x, reduce)
                d = natarajan_dimension(sl.family)
                pts = tuple(sl.family.domain[c] for c in d.columns)
                yield VcnResult(d.value, tuple(x), side, d.columns, pts, d.witness)

    return _best(results())


def _co_sides(k: int) -> list[tuple]:
    return list(itertools.combinations(range(1, k + 1), k - 1))


def audit_gamma_growth(cls: HypothesisClass, ms: Sequence[int] | None = None):
    """``gamma(m) <= ((|labels|^2 (m+1)) / 2)^(VCN_k * m^(k-1))`` for rank-one classes."""
    universe = cls.universe
    k = universe.k
    ms = tuple(ms) if ms is not None else (k, k + 1, k + 2)
    inputs = {"class": [h.table for h in cls], "k": k, "labels": list(universe.labels), "ms": list(ms)}
    claim = "gamma_H(m) <= ((|Lambda|^2 (m+1))/2)^(VCN_k m^(k-1))"
    if not len(cls) or cls.rank > 1:
        reason = "empty class" if not len(cls) else f"rank {cls.rank} > 1"
        return AuditReport("gamma-growth", claim, inputs, {"reason": reason}, VACUOUS)
    d = vcn_k(cls).value
    if d < 1:
        return AuditReport("gamma-growth", claim, inputs, {"vcn_k": d, "reason": "VCN_k < 1"}, VACUOUS)
    rows = []
    witnesses = []
    for m in ms:
        g = gamma(cls, m)
        ok = growth_bound_ok(g.value, len(universe.labels), m, d, k)
        rows.append({"m": m, "gamma": g.value, "exponent": d * m ** (k - 1), "ok": ok})
        if not ok:
            witnesses.append({"m": m, "gamma": g.value, "witness": g.witness.values if g.witness else None})
    verdict = VIOLATED if witnesses else VERIFIED
    return AuditReport("gamma-growth", claim, inputs, {"vcn_k": d, "rows": rows}, verdict, witnesses)
