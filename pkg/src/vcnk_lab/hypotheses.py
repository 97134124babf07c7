"""k-ary hypotheses as extensional tables, their patterns, pattern counts and rank."""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import MissingPoint
from .universe import (
    ConfigPoint,
    Grid,
    PartiteUniverse,
    Universe,
    enumerate_injections,
    guard,
    partite_grid,
    partite_pullback_positions,
    pullback_positions,
    standard_grid,
    symmetric_group,
)


@functools.lru_cache(maxsize=None)
def _element_codes(universe: Universe) -> tuple[dict, ...]:
    return tuple({e: i for i, e in enumerate(X)} for X in universe.ground_sets)


@functools.lru_cache(maxsize=None)
def _injection_readers(universe: Universe, m: int) -> tuple:
    """For every injection ``[k] -> [m]``: pairs ``(position in E_m, stride in E_k)``."""
    k = universe.k
    grid_k = standard_grid(universe, k)
    base = tuple(range(1, m + 1))
    readers = []
    for alpha in enumerate_injections(m, k):
        readers.append(tuple(zip(pullback_positions(alpha, base, k), grid_k.strides)))
    return tuple(readers)


def _encode(universe: Universe, grid: Grid, values: Sequence) -> tuple[int, ...]:
    codes = _element_codes(universe)
    return tuple(codes[len(A) - 1][v] for A, v in zip(grid.coords, values))


def _pattern_positions(universe: Universe, m: int, code: Sequence[int]) -> tuple[int, ...]:
    """E_k grid position read by each injection, given an encoded E_m point."""
    return tuple(
        sum(code[p] * s for p, s in reader) for reader in _injection_readers(universe, m)
    )


@functools.lru_cache(maxsize=None)
def _symmetric_position_maps(universe: Universe) -> tuple[tuple[int, ...], ...]:
    """``maps[s][pos]``: grid position of ``sigma_s*(x)`` for ``x`` at ``pos``."""
    k = universe.k
    grid = standard_grid(universe, k)
    maps = []
    for sigma in symmetric_group(k):
        positions = pullback_positions(sigma, tuple(range(1, k + 1)), k)
        maps.append(
            tuple(grid.position(tuple(v[p] for p in positions)) for v in grid)
        )
    return tuple(maps)


class Hypothesis:
    """A total map ``E_k -> labels`` stored as a tuple in canonical grid order."""

    def __init__(
        self,
        universe: Universe,
        table: Sequence,
        name: str | None = None,
        declared_rank: int | None = None,
    ):
        grid = standard_grid(universe, universe.k).check("E_k")
        table = tuple(table)
        if len(table) != grid.size:
            raise MissingPoint(f"table has {len(table)} entries, E_k has {grid.size}")
        allowed = set(universe.labels)
        bad = [y for y in table if y not in allowed]
        if bad:
            raise ValueError(f"label {bad[0]!r} is not in the label set")
        self.universe = universe
        self.table = table
        self.name = name
        self.declared_rank = declared_rank
        if declared_rank is not None and self.rank > declared_rank:
            raise ValueError(
                f"hypothesis {name!r} has rank {self.rank} > declared rank {declared_rank}"
            )

    @classmethod
    def from_function(cls, universe: Universe, fn: Callable[[ConfigPoint], object], **kw):
        grid = standard_grid(universe, universe.k).check("E_k")
        return cls(universe, [fn(ConfigPoint(grid.index, v)) for v in grid], **kw)

    @classmethod
    def from_mapping(cls, universe: Universe, mapping: Mapping, default=MissingPoint, **kw):
        """Build from ``{values tuple: label}``; unlisted points take ``default``."""
        grid = standard_grid(universe, universe.k).check("E_k")
        table = []
        for v in grid:
            if v in mapping:
                table.append(mapping[v])
            elif default is MissingPoint:
                raise MissingPoint(f"no label for configuration {v}")
            else:
                table.append(default)
        return cls(universe, table, **kw)

    @property
    def grid(self) -> Grid:
        return standard_grid(self.universe, self.universe.k)

    def __eq__(self, other):
        if not isinstance(other, Hypothesis):
            return NotImplemented
        return self.universe == other.universe and self.table == other.table

    def __hash__(self):
        return hash((self.universe, self.table))

    def __repr__(self):
        return f"Hypothesis({self.name or '?'})"

    def __call__(self, x: ConfigPoint):
        return evaluate(self, x)

    def at(self, values: Sequence):
        return self.table[self.grid.position(values)]

    @functools.cached_property
    def sym_table(self) -> tuple[tuple, ...]:
        """The ``S_k``-indexed pattern ``F*_k(x)`` at every grid position."""
        maps = _symmetric_position_maps(self.universe)
        t = self.table
        return tuple(tuple(t[mp[pos]] for mp in maps) for pos in range(len(t)))

    @property
    def outcomes(self) -> tuple:
        """What a loss sees at each grid position."""
        return self.sym_table

    @functools.cached_property
    def rank(self) -> int:
        return rank(self)


class PartiteHypothesis:
    """A total map on ``E_1`` of a partite universe, stored in canonical grid order."""

    def __init__(self, universe: PartiteUniverse, table: Sequence, name: str | None = None):
        grid = partite_grid(universe, 1).check("partite E_1")
        table = tuple(table)
        if len(table) != grid.size:
            raise MissingPoint(f"table has {len(table)} entries, E_1 has {grid.size}")
        allowed = set(universe.labels)
        for y in table:
            if y not in allowed:
                raise ValueError(f"label {y!r} is not in the label set")
        self.universe = universe
        self.table = table
        self.name = name

    @property
    def grid(self) -> Grid:
        return partite_grid(self.universe, 1)

    @property
    def outcomes(self) -> tuple:
        return self.table

    def __eq__(self, other):
        if not isinstance(other, PartiteHypothesis):
            return NotImplemented
        return self.universe == other.universe and self.table == other.table

    def __hash__(self):
        return hash((self.universe, self.table))

    def __repr__(self):
        return f"PartiteHypothesis({self.name or '?'})"

    def __call__(self, z: ConfigPoint):
        return self.table[self.grid.position(z.values)]

    @functools.cached_property
    def rank(self) -> int:
        return rank(self)


def partite_star(G: PartiteHypothesis, m: int, z: ConfigPoint) -> Pattern:
    """``G*_m(z)_alpha = G(alpha*(z))`` for every ``alpha`` in ``[m]^k``."""
    k = G.universe.k
    grid = G.grid
    alphas = tuple(itertools.product(range(1, m + 1), repeat=k))
    labels = []
    for alpha in alphas:
        positions = partite_pullback_positions(alpha, k, m)
        labels.append(G.table[grid.position(tuple(z.values[p] for p in positions))])
    return Pattern(alphas, tuple(labels))


def evaluate(H: Hypothesis, x: ConfigPoint):
    """Table lookup of ``H`` at a point of ``E_k``."""
    if x.index.base != tuple(range(1, H.universe.k + 1)):
        raise MissingPoint("evaluation needs a point of E_k")
    return H.table[H.grid.position(x.values)]


@dataclass(frozen=True)
class Pattern:
    """Labels indexed by injections ``[k] -> [m]`` (lexicographic order)."""

    injections: tuple
    labels: tuple

    def __getitem__(self, alpha):
        return self.labels[self.injections.index(tuple(alpha))]

    def as_dict(self) -> dict:
        return dict(zip(self.injections, self.labels))


def star(F: Hypothesis, m: int, x: ConfigPoint) -> Pattern:
    """``F*_m(x)_alpha = F(alpha*(x))`` for every injection ``alpha``."""
    universe = F.universe
    grid_m = standard_grid(universe, m)
    if x.index.base != grid_m.index.base:
        raise MissingPoint(f"star needs a point over [{m}]")
    positions = _pattern_positions(universe, m, _encode(universe, grid_m, x.values))
    return Pattern(
        tuple(enumerate_injections(m, universe.k)), tuple(F.table[p] for p in positions)
    )


class HypothesisClass:
    """An ordered finite family of distinct hypotheses over one universe.

    Member order is the tie-break key for every search in the library.
    """

    def __init__(self, members: Iterable[Hypothesis], name: str = "H", universe=None):
        members = tuple(members)
        if universe is None:
            if not members:
                raise ValueError("an empty class needs an explicit universe")
            universe = members[0].universe
        seen = {}
        for i, h in enumerate(members):
            if h.universe != universe:
                raise ValueError(f"member {i} lives on a different universe")
            if h.table in seen:
                raise ValueError(
                    f"members {seen[h.table]} and {i} have identical tables"
                )
            seen[h.table] = i
        self.members = members
        self.name = name
        self.universe = universe

    def __len__(self):
        return len(self.members)

    def __iter__(self) -> Iterator[Hypothesis]:
        return iter(self.members)

    def __getitem__(self, i) -> Hypothesis:
        return self.members[i]

    def __repr__(self):
        return f"HypothesisClass({self.name!r}, {len(self)} members)"

    def index(self, h: Hypothesis) -> int:
        return self.members.index(h)

    @functools.cached_property
    def rank(self) -> int:
        return max((h.rank for h in self.members), default=0)


def pattern_set(cls: HypothesisClass, m: int, x: ConfigPoint) -> set[Pattern]:
    return {star(h, m, x) for h in cls}


@dataclass(frozen=True)
class GammaResult:
    value: int
    witness: ConfigPoint | None


def gamma(cls: HypothesisClass, m: int) -> GammaResult:
    """Largest number of distinct m-patterns the class shows at a single point.

    Coordinates above the class rank are pinned, which leaves every pattern
    unchanged; ties keep the first maximiser in canonical order.
    """
    universe = cls.universe
    if not len(cls):
        return GammaResult(0, None)
    reduced = standard_grid(universe, m, cls.rank).check(f"E_{m}")
    full = standard_grid(universe, m)
    tables = [h.table for h in cls]
    best, witness = -1, None
    for values in reduced:
        positions = _pattern_positions(universe, m, _encode(universe, full, values))
        count = len({tuple(t[p] for p in positions) for t in tables})
        if count > best:
            best, witness = count, values
            if best == len(tables):
                break
    return GammaResult(best, ConfigPoint(full.index, witness))


def _arity(coord) -> int:
    # partite coordinates are (dom, img) pairs of tuples
    if len(coord) == 2 and isinstance(coord[0], tuple):
        return len(coord[0])
    return len(coord)


def partite_gamma(pcls: HypothesisClass, m: int) -> GammaResult:
    """Largest number of distinct ``[m]^k``-patterns of a partite class at one point."""
    pu = pcls.universe
    if not len(pcls):
        return GammaResult(0, None)
    k = pu.k
    reduced = partite_grid(pu, m, pcls.rank).check(f"partite E_{m}")
    full = partite_grid(pu, m)
    e1 = partite_grid(pu, 1)
    readers = [
        tuple(zip(partite_pullback_positions(alpha, k, m), e1.strides, e1.elem_index))
        for alpha in itertools.product(range(1, m + 1), repeat=k)
    ]
    tables = [h.table for h in pcls]
    best, witness = -1, None
    for values in reduced:
        positions = [sum(ix[values[p]] * st for p, st, ix in r) for r in readers]
        count = len({tuple(t[p] for p in positions) for t in tables})
        if count > best:
            best, witness = count, values
            if best == len(tables):
                break
    return GammaResult(best, ConfigPoint(full.index, witness))


def rank(F) -> int:
    """Least ``r`` such that ``F`` only reads coordinates of arity at most ``r``."""
    grid = F.grid
    arities = [_arity(c) for c in grid.coords]
    for r in range(F.universe.k + 1):
        keep = [j for j, a in enumerate(arities) if a <= r]
        seen: dict = {}
        for values, y in zip(grid, F.table):
            key = tuple(values[j] for j in keep)
            if seen.setdefault(key, y) != y:
                break
        else:
            return r
    return F.universe.k


def class_rank(cls: HypothesisClass) -> int:
    return cls.rank


# ---------------------------------------------------------------------------
# generators


def _lift(universe: Universe, r: int, assignment: Mapping) -> tuple:
    """Table of the hypothesis reading only arity-<=r coordinates through ``assignment``."""
    grid = standard_grid(universe, universe.k)
    keep = [j for j, A in enumerate(grid.coords) if len(A) <= r]
    return tuple(assignment[tuple(v[j] for j in keep)] for v in grid)


def _reduced_points(universe: Universe, r: int) -> list[tuple]:
    grid = standard_grid(universe, universe.k)
    domains = [d for A, d in zip(grid.coords, grid.domains) if len(A) <= r]
    return list(itertools.product(*domains))


def constants(universe: Universe) -> HypothesisClass:
    grid = standard_grid(universe, universe.k)
    return HypothesisClass(
        [Hypothesis(universe, (y,) * grid.size, name=f"const_{y}") for y in universe.labels],
        name="constants",
    )


def all_functions(universe: Universe, rank: int | None = None) -> HypothesisClass:
    """Every hypothesis of rank at most ``rank`` (default ``k``)."""
    r = universe.k if rank is None else rank
    points = _reduced_points(universe, r)
    count = len(universe.labels) ** len(points)
    guard(count, "all-functions class")
    members = []
    for i, labels in enumerate(itertools.product(universe.labels, repeat=len(points))):
        members.append(
            Hypothesis(universe, _lift(universe, r, dict(zip(points, labels))), name=f"f{i}")
        )
    return HypothesisClass(members, name=f"all_functions_rank{r}")


def indicators(universe: Universe, positive=None, negative=None) -> HypothesisClass:
    """``x -> positive if x_{1} == a else negative`` for every ``a`` in ``X_1``."""
    labels = universe.labels
    if len(labels) < 2 and (positive is None or negative is None):
        raise ValueError("indicators need two labels")
    pos = labels[1] if positive is None else positive
    neg = labels[0] if negative is None else negative
    grid = standard_grid(universe, universe.k)
    j = grid.index.position[(1,)]
    members = [
        Hypothesis(universe, [pos if v[j] == a else neg for v in grid], name=f"ind_{a}")
        for a in universe.ground_set(1)
    ]
    return HypothesisClass(members, name="indicators")


def random_class(
    universe: Universe, size: int, rank: int | None = None, seed=0, name: str = "random"
) -> HypothesisClass:
    """Up to ``size`` distinct random hypotheses of rank at most ``rank``.

    Stops early if the space of such hypotheses is smaller than ``size``.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    r = universe.k if rank is None else rank
    points = _reduced_points(universe, r)
    total = len(universe.labels) ** len(points)
    tables: dict[tuple, None] = {}
    attempts = 0
    while len(tables) < min(size, total) and attempts < 50 * size + 100:
        attempts += 1
        assignment = {p: rng.choice(universe.labels) for p in points}
        tables.setdefault(_lift(universe, r, assignment), None)
    return HypothesisClass(
        [Hypothesis(universe, t, name=f"{name}{i}") for i, t in enumerate(tables)],
        name=name,
        universe=universe,
    )


def growth_bound_ok(gamma_value: int, n_labels: int, m: int, vcn: int, k: int) -> bool:
    """Exact check of ``gamma <= ((|L|^2 (m+1)) / 2) ** (vcn * m**(k-1))``."""
    e = vcn * m ** (k - 1)
    return gamma_value * 2**e <= (n_labels**2 * (m + 1)) ** e


__all__ = [
    "Hypothesis",
    "PartiteHypothesis",
    "HypothesisClass",
    "partite_star",
    "Pattern",
    "GammaResult",
    "evaluate",
    "star",
    "pattern_set",
    "gamma",
    "partite_gamma",
    "rank",
    "class_rank",
    "constants",
    "all_functions",
    "indicators",
    "random_class",
    "growth_bound_ok",
]
