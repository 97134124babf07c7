"""Finite ground sets, configuration spaces, pullbacks and exact product measures.

A configuration over an index set ``V`` assigns to every non-empty subset
``A`` of ``V`` with ``|A| <= k`` an element of the ground set ``X_{|A|}``.
Coordinates of arity above ``k`` are never read by a k-ary hypothesis, so
they are not materialised.

Partite counterparts index coordinates by functions ``f: A -> [m]`` with
``A`` a non-empty subset of ``[k]``; such an ``f`` is stored as the pair
``(dom, img)`` of equal-length tuples.
"""

from __future__ import annotations

import contextlib
import contextvars
import functools
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ExplosionGuard, MissingPoint, NormalizationError, NotInjective

DEFAULT_EXPLOSION_CAP = 10**7

_explosion_cap = contextvars.ContextVar("explosion_cap", default=DEFAULT_EXPLOSION_CAP)


@contextlib.contextmanager
def explosion_limit(cap: int):
    """Temporarily change the enumeration cap for the current context."""
    token = _explosion_cap.set(int(cap))
    try:
        yield
    finally:
        _explosion_cap.reset(token)


def current_cap() -> int:
    return _explosion_cap.get()


def guard(count: int, what: str, cap: int | None = None) -> None:
    cap = current_cap() if cap is None else cap
    if count > cap:
        raise ExplosionGuard(f"{what}: {count} points exceeds the cap of {cap}")


# ---------------------------------------------------------------------------
# index combinatorics


def enumerate_subsets(V: Iterable, k: int) -> list[tuple]:
    """Non-empty subsets of ``V`` of size at most ``k``, by size then lexicographic."""
    V = tuple(V)
    out: list[tuple] = []
    for size in range(1, min(k, len(V)) + 1):
        out.extend(itertools.combinations(V, size))
    return out


def enumerate_injections(m: int, k: int) -> list[tuple[int, ...]]:
    """Injections ``[k] -> [m]`` as image tuples, in lexicographic order."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return list(itertools.permutations(range(1, m + 1), k))


def falling_factorial(m: int, k: int) -> int:
    return math.perm(m, k) if m >= k else 0


def symmetric_group(k: int) -> list[tuple[int, ...]]:
    return enumerate_injections(k, k)


def _norm_subset(A) -> tuple:
    if isinstance(A, int):
        return (A,)
    return tuple(sorted(A))


@dataclass(frozen=True)
class IndexSet:
    """Canonically ordered subsets of ``base`` of size at most ``arity_cap``."""

    base: tuple
    arity_cap: int
    subsets: tuple = field(init=False)
    position: dict = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self):
        base = tuple(self.base)
        object.__setattr__(self, "base", base)
        subsets = tuple(enumerate_subsets(base, self.arity_cap))
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "position", {A: i for i, A in enumerate(subsets)})

    @property
    def coords(self) -> tuple:
        return self.subsets

    def __len__(self):
        return len(self.subsets)


@functools.lru_cache(maxsize=None)
def index_set(base: tuple, k: int) -> IndexSet:
    return IndexSet(tuple(base), k)


def standard_index(m: int, k: int) -> IndexSet:
    return index_set(tuple(range(1, m + 1)), k)


@dataclass(frozen=True)
class PartiteIndex:
    """Coordinates ``f in r_k(m)`` ordered by (domain size, domain, image)."""

    k: int
    m: int
    coords: tuple = field(init=False)
    position: dict = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self):
        coords = []
        for dom in enumerate_subsets(range(1, self.k + 1), self.k):
            for img in itertools.product(range(1, self.m + 1), repeat=len(dom)):
                coords.append((dom, img))
        coords = tuple(coords)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "position", {c: i for i, c in enumerate(coords)})

    def __len__(self):
        return len(self.coords)


@functools.lru_cache(maxsize=None)
def partite_index(k: int, m: int) -> PartiteIndex:
    return PartiteIndex(k, m)


def unit_coord(A) -> tuple:
    """The coordinate ``1^A`` of ``r_k(1)``: the unique map ``A -> [1]``."""
    A = _norm_subset(A)
    return (A, (1,) * len(A))


# ---------------------------------------------------------------------------
# universes and configuration points


def _as_label(value):
    if isinstance(value, list):
        return tuple(_as_label(v) for v in value)
    return value


@dataclass(frozen=True)
class Universe:
    """Arity ``k``, ground sets ``X_1..X_k`` and a finite label set."""

    k: int
    ground_sets: tuple
    labels: tuple

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError("arity k must be a positive integer")
        sets = tuple(tuple(str(e) for e in X) for X in self.ground_sets)
        if len(sets) != self.k:
            raise ValueError(f"expected {self.k} ground sets, got {len(sets)}")
        for i, X in enumerate(sets, start=1):
            if not X:
                raise ValueError(f"ground set X_{i} is empty")
            if len(set(X)) != len(X):
                raise ValueError(f"ground set X_{i} has repeated elements")
        labels = tuple(_as_label(y) for y in self.labels)
        if not labels:
            raise ValueError("label set is empty")
        if len(set(labels)) != len(labels):
            raise ValueError("label set has repeated labels")
        object.__setattr__(self, "ground_sets", sets)
        object.__setattr__(self, "labels", labels)

    def ground_set(self, arity: int) -> tuple:
        return self.ground_sets[arity - 1]

    def domain(self, coord) -> tuple:
        return self.ground_sets[len(coord) - 1]


@dataclass(frozen=True)
class PartiteUniverse:
    """k-partite ground sets ``X_A`` for ``A`` in ``r(k)`` (canonical order)."""

    k: int
    sets: tuple
    labels: tuple

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError("arity k must be a positive integer")
        sets = tuple(tuple(str(e) for e in X) for X in self.sets)
        coords = enumerate_subsets(range(1, self.k + 1), self.k)
        if len(sets) != len(coords):
            raise ValueError(f"expected {len(coords)} coordinate sets, got {len(sets)}")
        for A, X in zip(coords, sets):
            if not X or len(set(X)) != len(X):
                raise ValueError(f"coordinate set X_{set(A)} is empty or has repeats")
        labels = tuple(_as_label(y) for y in self.labels)
        if not labels or len(set(labels)) != len(labels):
            raise ValueError("label set is empty or has repeats")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "labels", labels)

    @property
    def coordinates(self) -> tuple:
        return standard_index(self.k, self.k).subsets

    def ground_set(self, A) -> tuple:
        return self.sets[standard_index(self.k, self.k).position[_norm_subset(A)]]

    def domain(self, coord) -> tuple:
        dom, _ = coord
        return self.ground_set(dom)


@dataclass(frozen=True)
class ConfigPoint:
    """A total assignment of elements to the coordinates of ``index``."""

    index: IndexSet | PartiteIndex
    values: tuple

    def __post_init__(self):
        if len(self.values) != len(self.index.coords):
            raise MissingPoint("configuration is not total on its index set")

    def __getitem__(self, coord):
        if isinstance(self.index, IndexSet):
            coord = _norm_subset(coord)
        return self.values[self.index.position[coord]]

    def as_dict(self) -> dict:
        return dict(zip(self.index.coords, self.values))


class Grid:
    """Cartesian product of per-coordinate domains, with mixed-radix positions.

    The last coordinate varies fastest, matching :func:`itertools.product`.
    """

    def __init__(self, index, domains: Sequence[Sequence]):
        self.index = index
        self.coords = index.coords
        self.domains = tuple(tuple(d) for d in domains)
        self.sizes = tuple(len(d) for d in self.domains)
        self.elem_index = tuple({e: i for i, e in enumerate(d)} for d in self.domains)
        strides = [1] * len(self.sizes)
        for j in range(len(self.sizes) - 2, -1, -1):
            strides[j] = strides[j + 1] * self.sizes[j + 1]
        self.strides = tuple(strides)
        self.size = math.prod(self.sizes)

    def __len__(self):
        return self.size

    def __iter__(self) -> Iterator[tuple]:
        return itertools.product(*self.domains)

    def check(self, what: str = "configuration grid", cap: int | None = None) -> "Grid":
        guard(self.size, what, cap)
        return self

    def position(self, values: Sequence) -> int:
        try:
            return sum(ix[v] * s for ix, v, s in zip(self.elem_index, values, self.strides))
        except KeyError as exc:
            raise MissingPoint(f"element {exc.args[0]!r} is outside the grid") from None

    def values_at(self, pos: int) -> tuple:
        out = []
        for d, s, n in zip(self.domains, self.strides, self.sizes):
            out.append(d[(pos // s) % n])
        return tuple(out)

    def point(self, values: Sequence) -> ConfigPoint:
        return ConfigPoint(self.index, tuple(values))


@functools.lru_cache(maxsize=None)
def config_grid(universe: Universe, V: tuple, max_arity: int | None = None) -> Grid:
    """Grid of ``E_V`` restricted to arity <= k.

    With ``max_arity`` set, coordinates of larger arity are pinned to the first
    element of their ground set (exact for hypotheses of rank <= max_arity).
    """
    idx = index_set(tuple(V), universe.k)
    domains = []
    for A in idx.subsets:
        X = universe.ground_set(len(A))
        domains.append(X if max_arity is None or len(A) <= max_arity else X[:1])
    return Grid(idx, domains)


def standard_grid(universe: Universe, m: int, max_arity: int | None = None) -> Grid:
    return config_grid(universe, tuple(range(1, m + 1)), max_arity)


@functools.lru_cache(maxsize=None)
def partite_grid(universe: PartiteUniverse, m: int, max_arity: int | None = None) -> Grid:
    idx = partite_index(universe.k, m)
    domains = []
    for coord in idx.coords:
        X = universe.domain(coord)
        domains.append(X if max_arity is None or len(coord[0]) <= max_arity else X[:1])
    return Grid(idx, domains)


# ---------------------------------------------------------------------------
# pullbacks


@functools.lru_cache(maxsize=None)
def pullback_positions(alpha: tuple, base: tuple, k: int) -> tuple[int, ...]:
    """Positions in ``index_set(base, k)`` read by ``alpha*`` for each target coordinate."""
    if len(set(alpha)) != len(alpha):
        raise NotInjective(f"{alpha} is not injective")
    src = index_set(base, k)
    order = {v: i for i, v in enumerate(base)}
    dom = index_set(tuple(range(1, len(alpha) + 1)), k)
    out = []
    for A in dom.subsets:
        image = tuple(sorted((alpha[a - 1] for a in A), key=order.__getitem__))
        try:
            out.append(src.position[image])
        except KeyError:
            raise NotInjective(f"{alpha} maps outside {base}") from None
    return tuple(out)


def pullback(alpha, x: ConfigPoint) -> ConfigPoint:
    """``alpha*(x)_A = x_{alpha(A)}`` for every ``A`` in the domain index set.

    ``alpha`` is either an image tuple (domain ``[len(alpha)]``) or a mapping
    from a finite ordered domain ``U`` into ``x``'s base.
    """
    k = x.index.arity_cap
    if isinstance(alpha, Mapping):
        U = tuple(sorted(alpha))
        images = tuple(alpha[u] for u in U)
        if len(set(images)) != len(images):
            raise NotInjective(f"{dict(alpha)} is not injective")
        positions = pullback_positions(images, x.index.base, k)
        return ConfigPoint(index_set(U, k), tuple(x.values[p] for p in positions))
    alpha = tuple(alpha)
    positions = pullback_positions(alpha, x.index.base, k)
    return ConfigPoint(
        standard_index(len(alpha), k), tuple(x.values[p] for p in positions)
    )


@functools.lru_cache(maxsize=None)
def partite_pullback_positions(alpha: tuple, k: int, m: int) -> tuple[int, ...]:
    """Positions in ``E_m`` read by the partite ``alpha*`` (``alpha`` in ``[m]^k``)."""
    src = partite_index(k, m)
    out = []
    for dom, _ in partite_index(k, 1).coords:
        out.append(src.position[(dom, tuple(alpha[a - 1] for a in dom))])
    return tuple(out)


def partite_pullback(alpha: Sequence[int], z: ConfigPoint) -> ConfigPoint:
    idx = z.index
    positions = partite_pullback_positions(tuple(alpha), idx.k, idx.m)
    return ConfigPoint(partite_index(idx.k, 1), tuple(z.values[p] for p in positions))


# ---------------------------------------------------------------------------
# measures


def _as_fraction(w) -> Fraction:
    if isinstance(w, float):
        raise NormalizationError(f"weight {w!r} is a float; use an exact rational")
    try:
        return Fraction(w)
    except (TypeError, ValueError):
        raise NormalizationError(f"weight {w!r} is not a rational number") from None


def _normalized(weights: Sequence, what: str) -> tuple[Fraction, ...]:
    ws = tuple(_as_fraction(w) for w in weights)
    if any(w < 0 for w in ws):
        raise NormalizationError(f"{what} has a negative weight")
    if sum(ws) != 1:
        raise NormalizationError(f"{what} sums to {sum(ws)}, not 1")
    return ws


@dataclass(frozen=True)
class ProbTemplate:
    """Exact distributions ``mu_1..mu_k``, aligned with the universe's ground sets."""

    universe: Universe
    per_arity: tuple

    def __post_init__(self):
        if len(self.per_arity) != self.universe.k:
            raise NormalizationError("need one distribution per arity")
        per = []
        for i, (X, ws) in enumerate(zip(self.universe.ground_sets, self.per_arity), 1):
            if len(ws) != len(X):
                raise NormalizationError(f"mu_{i} must weight all {len(X)} elements")
            per.append(_normalized(ws, f"mu_{i}"))
        object.__setattr__(self, "per_arity", tuple(per))

    @classmethod
    def from_mappings(cls, universe: Universe, dists: Sequence[Mapping]) -> "ProbTemplate":
        per = []
        for i, (X, dist) in enumerate(zip(universe.ground_sets, dists), 1):
            unknown = set(map(str, dist)) - set(X)
            if unknown:
                raise NormalizationError(f"mu_{i} weights unknown elements {sorted(unknown)}")
            d = {str(e): w for e, w in dist.items()}
            per.append(tuple(d.get(e, 0) for e in X))
        return cls(universe, tuple(per))

    @classmethod
    def uniform(cls, universe: Universe) -> "ProbTemplate":
        return cls(
            universe, tuple(tuple(Fraction(1, len(X)) for _ in X) for X in universe.ground_sets)
        )

    @classmethod
    def point_mass(cls, universe: Universe, elements: Sequence) -> "ProbTemplate":
        per = []
        for X, e in zip(universe.ground_sets, elements):
            per.append(tuple(Fraction(int(x == str(e))) for x in X))
        return cls(universe, tuple(per))

    def weight(self, arity: int, element) -> Fraction:
        X = self.universe.ground_set(arity)
        return self.per_arity[arity - 1][X.index(str(element))]

    def distribution(self, arity: int) -> dict:
        return dict(zip(self.universe.ground_set(arity), self.per_arity[arity - 1]))


@dataclass(frozen=True)
class PartiteProbTemplate:
    """Exact distributions ``mu_A`` for ``A`` in ``r(k)``."""

    universe: PartiteUniverse
    per_coordinate: tuple

    def __post_init__(self):
        coords = self.universe.coordinates
        if len(self.per_coordinate) != len(coords):
            raise NormalizationError("need one distribution per coordinate set")
        per = []
        for A, X, ws in zip(coords, self.universe.sets, self.per_coordinate):
            if len(ws) != len(X):
                raise NormalizationError(f"mu_{set(A)} must weight all {len(X)} elements")
            per.append(_normalized(ws, f"mu_{set(A)}"))
        object.__setattr__(self, "per_coordinate", tuple(per))

    @classmethod
    def uniform(cls, universe: PartiteUniverse) -> "PartiteProbTemplate":
        return cls(universe, tuple(tuple(Fraction(1, len(X)) for _ in X) for X in universe.sets))

    @classmethod
    def from_mappings(cls, universe: PartiteUniverse, dists: Sequence[Mapping]):
        per = []
        for X, dist in zip(universe.sets, dists):
            d = {str(e): w for e, w in dist.items()}
            if set(d) - set(X):
                raise NormalizationError(f"weights for unknown elements {sorted(set(d) - set(X))}")
            per.append(tuple(d.get(e, 0) for e in X))
        return cls(universe, tuple(per))

    def weight(self, A, element) -> Fraction:
        pos = standard_index(self.universe.k, self.universe.k).position[_norm_subset(A)]
        return self.per_coordinate[pos][self.universe.sets[pos].index(str(element))]

    def coordinate_weights(self, A) -> tuple:
        pos = standard_index(self.universe.k, self.universe.k).position[_norm_subset(A)]
        return self.per_coordinate[pos]


def _coord_weights(mu, coord) -> tuple:
    if isinstance(mu, ProbTemplate):
        return mu.per_arity[len(coord) - 1]
    dom = coord[0]
    return mu.coordinate_weights(dom)


def product_weight(mu: ProbTemplate | PartiteProbTemplate, x: ConfigPoint) -> Fraction:
    """Exact product of per-coordinate weights of ``x``."""
    w = Fraction(1)
    for coord, v in zip(x.index.coords, x.values):
        if isinstance(mu, ProbTemplate):
            w *= mu.weight(len(coord), v)
        else:
            w *= mu.weight(coord[0], v)
        if not w:
            return w
    return w


def _grid_for(mu, m: int, max_arity: int | None):
    if isinstance(mu, ProbTemplate):
        return standard_grid(mu.universe, m, max_arity)
    return partite_grid(mu.universe, m, max_arity)


@functools.lru_cache(maxsize=256)
def support_atoms(mu, m: int, max_arity: int | None = None) -> tuple:
    """``(values, weight)`` for every positive-weight atom of ``mu^m``.

    Coordinates of arity above ``max_arity`` are marginalised (pinned to their
    first element with weight 1), which is exact for anything that ignores them.
    """
    grid = _grid_for(mu, m, max_arity)
    per_coord = []
    count = 1
    for coord, dom in zip(grid.coords, grid.domains):
        arity = len(coord) if isinstance(mu, ProbTemplate) else len(coord[0])
        if max_arity is not None and arity > max_arity:
            per_coord.append(((dom[0], Fraction(1)),))
            continue
        pairs = tuple((e, w) for e, w in zip(dom, _coord_weights(mu, coord)) if w)
        per_coord.append(pairs)
        count *= len(pairs)
    guard(count, f"support of mu^{m}")
    atoms = []
    for combo in itertools.product(*per_coord):
        w = Fraction(1)
        for _, cw in combo:
            w *= cw
        atoms.append((tuple(e for e, _ in combo), w))
    return tuple(atoms)


def enumerate_configs(
    universe: Universe,
    V: Iterable,
    mu: ProbTemplate | None = None,
    *,
    support_only: bool = False,
    cap: int | None = None,
) -> Iterator:
    """Every configuration over ``V`` in canonical order.

    Yields :class:`ConfigPoint` objects, or ``(point, weight)`` pairs when a
    measure is given. ``support_only`` skips zero-weight points.
    """
    grid = config_grid(universe, tuple(V)).check(f"E_{tuple(V)}", cap)
    if mu is None:
        for values in grid:
            yield ConfigPoint(grid.index, values)
        return
    for values in grid:
        x = ConfigPoint(grid.index, values)
        w = product_weight(mu, x)
        if w or not support_only:
            yield x, w


def sample_config(mu: ProbTemplate | PartiteProbTemplate, V, seed) -> ConfigPoint:
    """Draw each coordinate independently from its distribution, exactly.

    For a ``PartiteProbTemplate`` pass ``V`` as the integer ``m``. ``seed`` may
    be an int or a :class:`random.Random`.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if isinstance(mu, ProbTemplate):
        grid = config_grid(mu.universe, tuple(V))
    else:
        grid = partite_grid(mu.universe, int(V))
    values = []
    for coord, dom in zip(grid.coords, grid.domains):
        values.append(_draw(dom, _coord_weights(mu, coord), rng))
    return ConfigPoint(grid.index, tuple(values))


def _draw(domain: Sequence, weights: Sequence[Fraction], rng: random.Random):
    denom = math.lcm(*(w.denominator for w in weights))
    r = rng.randrange(denom)
    acc = 0
    for e, w in zip(domain, weights):
        acc += w.numerator * (denom // w.denominator)
        if r < acc:
            return e
    raise AssertionError("weights do not sum to 1")
