"""JSON instance files: parsing, generator expansion and re-emission.

Every semantic error is raised as a :class:`ParseError` carrying the JSON path
of the offending value; syntax errors carry line and column instead.
Rationals are written as integers or ``"p/q"`` strings, never as floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import ExplosionGuard, NormalizationError, ParseError, VcnkError
from .hypotheses import (
    Hypothesis,
    HypothesisClass,
    PartiteHypothesis,
    all_functions,
    constants,
    indicators,
    random_class,
)
from .losses import LossTable, label_outcomes
from .universe import (
    PartiteProbTemplate,
    PartiteUniverse,
    ProbTemplate,
    Universe,
    partite_grid,
    standard_grid,
)

GENERATORS = ("explicit", "all-functions", "constants", "indicators", "random")


class InvalidWeights(ParseError, NormalizationError):
    """A measure or loss weight is not an exact non-negative rational, or a measure is not normalized."""


@dataclass
class Settings:
    epsilons: tuple = (Fraction(1, 4),)
    delta_grid: tuple | None = None
    m_cap: int = 6
    kpart_m: int | None = None
    trials: int = 200
    mode: str = "exact"


@dataclass
class CoverCheck:
    n: int
    c: Fraction
    sets: tuple


@dataclass
class Instance:
    universe: Universe | PartiteUniverse
    cls: HypothesisClass
    loss: LossTable
    measures: dict
    settings: Settings = field(default_factory=Settings)
    cover_checks: tuple = ()
    source: str | None = None

    @property
    def partite(self) -> bool:
        return isinstance(self.universe, PartiteUniverse)


class _Reader:
    def __init__(self, doc):
        self.doc = doc

    @staticmethod
    def obj(value, path, what="an object") -> dict:
        if not isinstance(value, dict):
            raise ParseError(f"expected {what}", path)
        return value

    @staticmethod
    def seq(value, path, what="a list") -> list:
        if not isinstance(value, list):
            raise ParseError(f"expected {what}", path)
        return value

    @staticmethod
    def integer(value, path, minimum=None) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError("expected an integer", path)
        if minimum is not None and value < minimum:
            raise ParseError(f"expected an integer >= {minimum}", path)
        return value

    @staticmethod
    def rational(value, path) -> Fraction:
        if isinstance(value, bool) or isinstance(value, float):
            raise InvalidWeights(f"{value!r} is not an exact rational (write it as \"p/q\")", path)
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, str):
            try:
                return Fraction(value.strip())
            except (ValueError, ZeroDivisionError):
                pass
        raise InvalidWeights(f"{value!r} is not a rational", path)


def _label(value):
    return tuple(_label(v) for v in value) if isinstance(value, list) else value


def _unknown_keys(block: dict, allowed: set, path: str):
    for key in block:
        if key not in allowed:
            raise ParseError(f"unknown key {key!r}", f"{path}.{key}")


def _universe(r: _Reader, block, path="$.universe"):
    block = r.obj(block, path)
    _unknown_keys(block, {"k", "ground_sets", "sets", "labels", "partite"}, path)
    if "k" not in block:
        raise ParseError("missing key 'k'", path)
    k = r.integer(block["k"], f"{path}.k", minimum=1)
    labels = r.seq(block.get("labels"), f"{path}.labels", "a list of labels")
    labels = [_label(y) for y in labels]
    partite = block.get("partite", False)
    if not isinstance(partite, bool):
        raise ParseError("expected true or false", f"{path}.partite")
    key = "sets" if partite else "ground_sets"
    sets = r.seq(block.get(key), f"{path}.{key}", "a list of element lists")
    for i, X in enumerate(sets):
        r.seq(X, f"{path}.{key}[{i}]", "a list of elements")
    try:
        if partite:
            return PartiteUniverse(k, tuple(map(tuple, sets)), tuple(labels))
        return Universe(k, tuple(map(tuple, sets)), tuple(labels))
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


def _grid(universe):
    if isinstance(universe, PartiteUniverse):
        return partite_grid(universe, 1)
    return standard_grid(universe, universe.k)


def _point_key(values) -> tuple:
    return tuple(str(v) for v in values)


def _member(r: _Reader, universe, block, path, index):
    block = r.obj(block, path)
    _unknown_keys(block, {"name", "table", "values", "default"}, path)
    name = block.get("name", f"h{index}")
    if not isinstance(name, str):
        raise ParseError("expected a string", f"{path}.name")
    allowed = set(universe.labels)
    grid = _grid(universe).check("hypothesis table")
    if "table" in block:
        table = [_label(y) for y in r.seq(block["table"], f"{path}.table")]
        if len(table) != grid.size:
            raise ParseError(f"table has {len(table)} entries, the grid has {grid.size}", f"{path}.table")
    elif "values" in block:
        default = _label(block["default"]) if "default" in block else None
        mapping = {}
        for j, entry in enumerate(r.seq(block["values"], f"{path}.values")):
            epath = f"{path}.values[{j}]"
            entry = r.obj(entry, epath)
            point = _point_key(r.seq(entry.get("point"), f"{epath}.point", "a list of elements"))
            if len(point) != len(grid.coords):
                raise ParseError(f"a point needs {len(grid.coords)} values", f"{epath}.point")
            try:
                grid.position(point)
            except (KeyError, ValueError):
                raise ParseError(f"{list(point)} is not a configuration", f"{epath}.point") from None
            if "label" not in entry:
                raise ParseError("missing key 'label'", epath)
            mapping[point] = (_label(entry["label"]), f"{epath}.label")
        table = []
        for v in grid:
            if v in mapping:
                table.append(mapping[v][0])
            elif default is None:
                raise ParseError(f"no label for configuration {list(v)} and no default", path)
            else:
                table.append(default)
        for y, ypath in mapping.values():
            if y not in allowed:
                raise ParseError(f"unknown label {y!r}", ypath)
    else:
        raise ParseError("a member needs 'table' or 'values'", path)
    for j, y in enumerate(table):
        if y not in allowed:
            where = f"{path}.table[{j}]" if "table" in block else f"{path}.default"
            raise ParseError(f"unknown label {y!r}", where)
    if isinstance(universe, PartiteUniverse):
        return PartiteHypothesis(universe, table, name=name)
    return Hypothesis(universe, table, name=name)


def _class(r: _Reader, universe, block, path="$.class") -> HypothesisClass:
    block = r.obj(block, path)
    _unknown_keys(block, {"name", "generator", "members", "rank", "size", "seed", "positive", "negative"}, path)
    gen = block.get("generator", "explicit")
    if gen not in GENERATORS:
        raise ParseError(f"unknown generator {gen!r}; expected one of {', '.join(GENERATORS)}", f"{path}.generator")
    name = block.get("name")
    partite = isinstance(universe, PartiteUniverse)
    if partite and gen != "explicit":
        raise ParseError("partite classes must list their members explicitly", f"{path}.generator")
    rank = block.get("rank")
    if rank is not None:
        rank = r.integer(rank, f"{path}.rank", minimum=0)
    try:
        if gen == "explicit":
            members = [
                _member(r, universe, m, f"{path}.members[{i}]", i)
                for i, m in enumerate(r.seq(block.get("members"), f"{path}.members"))
            ]
            if rank is not None:
                for i, h in enumerate(members):
                    if h.rank > rank:
                        raise ParseError(f"member has rank {h.rank} > {rank}", f"{path}.members[{i}]")
            return HypothesisClass(members, name=name or "H", universe=universe)
        if gen == "all-functions":
            cls = all_functions(universe, rank)
        elif gen == "constants":
            cls = constants(universe)
        elif gen == "indicators":
            pos = _label(block["positive"]) if "positive" in block else None
            neg = _label(block["negative"]) if "negative" in block else None
            for key, y in (("positive", pos), ("negative", neg)):
                if y is not None and y not in universe.labels:
                    raise ParseError(f"unknown label {y!r}", f"{path}.{key}")
            cls = indicators(universe, pos, neg)
        else:
            size = r.integer(block.get("size"), f"{path}.size", minimum=0)
            seed = r.integer(block.get("seed", 0), f"{path}.seed")
            cls = random_class(universe, size, rank=rank, seed=seed)
    except ExplosionGuard:
        raise
    except ParseError:
        raise
    except (VcnkError, ValueError) as exc:
        raise ParseError(str(exc), path) from None
    if name:
        cls.name = name
    return cls


def _outcomes(universe):
    if isinstance(universe, PartiteUniverse):
        return universe.labels
    return label_outcomes(universe)


def _outcome(universe, value, path):
    y = _label(value)
    if not isinstance(universe, PartiteUniverse) and universe.k == 1 and not isinstance(y, tuple):
        y = (y,)
    if y not in set(_outcomes(universe)):
        raise ParseError(f"unknown outcome {value!r}", path)
    return y


def _entries(r: _Reader, universe, items, path) -> dict:
    out = {}
    for j, e in enumerate(r.seq(items, path)):
        epath = f"{path}[{j}]"
        e = r.obj(e, epath)
        for key in ("y", "y2", "value"):
            if key not in e:
                raise ParseError(f"missing key {key!r}", epath)
        y = _outcome(universe, e["y"], f"{epath}.y")
        y2 = _outcome(universe, e["y2"], f"{epath}.y2")
        out[(y, y2)] = r.rational(e["value"], f"{epath}.value")
    return out


def _loss(r: _Reader, universe, block, path="$.loss") -> LossTable:
    grid = _grid(universe)
    outs = _outcomes(universe)
    if block is None:
        return LossTable.zero_one(outs, grid.size)
    block = r.obj(block, path)
    _unknown_keys(block, {"kind", "diagonal", "off_diagonal", "entries", "overrides"}, path)
    kind = block.get("kind", "zero_one")
    if kind == "zero_one":
        return LossTable.zero_one(outs, grid.size)
    if kind != "table":
        raise ParseError(f"unknown loss kind {kind!r}; expected zero_one or table", f"{path}.kind")
    diagonal = r.rational(block.get("diagonal", 0), f"{path}.diagonal")
    off = r.rational(block.get("off_diagonal", 1), f"{path}.off_diagonal")
    values = _entries(r, universe, block.get("entries", []), f"{path}.entries")
    overrides = {}
    for j, o in enumerate(r.seq(block.get("overrides", []), f"{path}.overrides")):
        opath = f"{path}.overrides[{j}]"
        o = r.obj(o, opath)
        point = _point_key(r.seq(o.get("point"), f"{opath}.point"))
        if len(point) != len(grid.coords):
            raise ParseError(f"a point needs {len(grid.coords)} values", f"{opath}.point")
        try:
            pos = grid.position(point)
        except (KeyError, ValueError):
            raise ParseError(f"{list(point)} is not a configuration", f"{opath}.point") from None
        overrides[pos] = _entries(r, universe, o.get("entries", []), f"{opath}.entries")
    for key, v in (("diagonal", diagonal), ("off_diagonal", off)):
        if v < 0:
            raise InvalidWeights("loss values must be non-negative", f"{path}.{key}")
    return LossTable(
        outs, values=values, diagonal=diagonal, off_diagonal=off,
        overrides=overrides, n_points=grid.size, kind="table",
    )


def _measure(r: _Reader, universe, block, path):
    partite = isinstance(universe, PartiteUniverse)
    if block == "uniform":
        return PartiteProbTemplate.uniform(universe) if partite else ProbTemplate.uniform(universe)
    sets = universe.sets if partite else universe.ground_sets
    dists = r.seq(block, path, '"uniform" or a list with one weight map per ground set')
    if len(dists) != len(sets):
        raise ParseError(f"expected {len(sets)} weight maps, got {len(dists)}", path)
    per = []
    for i, (X, d) in enumerate(zip(sets, dists)):
        dpath = f"{path}[{i}]"
        if d == "uniform":
            per.append(tuple(Fraction(1, len(X)) for _ in X))
            continue
        d = r.obj(d, dpath, "a map from elements to weights")
        for e in d:
            if e not in X:
                raise ParseError(f"unknown element {e!r}", f"{dpath}.{e}")
        weights = {e: r.rational(w, f"{dpath}.{e}") for e, w in d.items()}
        total = sum(weights.values(), Fraction(0))
        if total != 1:
            raise InvalidWeights(f"weights sum to {total}, not 1", dpath)
        per.append(tuple(weights.get(e, Fraction(0)) for e in X))
    try:
        if partite:
            return PartiteProbTemplate(universe, tuple(per))
        return ProbTemplate(universe, tuple(per))
    except NormalizationError as exc:
        raise InvalidWeights(str(exc), path) from None


def _measures(r: _Reader, universe, block, path="$.measures") -> dict:
    if block is None:
        return {"uniform": _measure(r, universe, "uniform", path)}
    block = r.obj(block, path)
    if not block:
        raise ParseError("at least one measure is required", path)
    return {name: _measure(r, universe, m, f"{path}.{name}") for name, m in block.items()}


def _settings(r: _Reader, block, path="$.settings") -> Settings:
    if block is None:
        return Settings()
    block = r.obj(block, path)
    _unknown_keys(block, {"epsilons", "delta_grid", "m_cap", "kpart_m", "trials", "mode"}, path)
    out = Settings()
    if "epsilons" in block:
        eps = r.seq(block["epsilons"], f"{path}.epsilons")
        out.epsilons = tuple(r.rational(e, f"{path}.epsilons[{i}]") for i, e in enumerate(eps))
        for i, e in enumerate(out.epsilons):
            if e <= 0:
                raise ParseError("epsilon must be positive", f"{path}.epsilons[{i}]")
    if "delta_grid" in block:
        ds = r.seq(block["delta_grid"], f"{path}.delta_grid")
        out.delta_grid = tuple(r.rational(d, f"{path}.delta_grid[{i}]") for i, d in enumerate(ds))
        for i, d in enumerate(out.delta_grid):
            if not 0 < d < 1:
                raise ParseError("delta must lie in (0, 1)", f"{path}.delta_grid[{i}]")
    if "m_cap" in block:
        out.m_cap = r.integer(block["m_cap"], f"{path}.m_cap", minimum=1)
    if "kpart_m" in block:
        out.kpart_m = r.integer(block["kpart_m"], f"{path}.kpart_m", minimum=1)
    if "trials" in block:
        out.trials = r.integer(block["trials"], f"{path}.trials", minimum=1)
    if "mode" in block:
        if block["mode"] not in ("exact", "montecarlo"):
            raise ParseError("mode must be exact or montecarlo", f"{path}.mode")
        out.mode = block["mode"]
    return out


def _cover_checks(r: _Reader, block, path="$.cover_checks") -> tuple:
    if block is None:
        return ()
    out = []
    for i, c in enumerate(r.seq(block, path)):
        cpath = f"{path}[{i}]"
        c = r.obj(c, cpath)
        n = r.integer(c.get("n"), f"{cpath}.n", minimum=0)
        radius = r.rational(c.get("c"), f"{cpath}.c")
        sets = []
        for j, U in enumerate(r.seq(c.get("sets"), f"{cpath}.sets")):
            U = r.seq(U, f"{cpath}.sets[{j}]", "a list of indices")
            for t, e in enumerate(U):
                e = r.integer(e, f"{cpath}.sets[{j}][{t}]", minimum=1)
                if e > n:
                    raise ParseError(f"index {e} outside [1, {n}]", f"{cpath}.sets[{j}][{t}]")
            sets.append(tuple(sorted(set(U))))
        out.append(CoverCheck(n, radius, tuple(sets)))
    return tuple(out)


def parse_document(doc: Any, source: str | None = None) -> Instance:
    r = _Reader(doc)
    doc = r.obj(doc, "$", "a top-level object")
    _unknown_keys(doc, {"universe", "class", "loss", "measures", "settings", "cover_checks", "description"}, "$")
    if "universe" not in doc:
        raise ParseError("missing key 'universe'", "$")
    if "class" not in doc:
        raise ParseError("missing key 'class'", "$")
    universe = _universe(r, doc["universe"])
    return Instance(
        universe=universe,
        cls=_class(r, universe, doc["class"]),
        loss=_loss(r, universe, doc.get("loss")),
        measures=_measures(r, universe, doc.get("measures")),
        settings=_settings(r, doc.get("settings")),
        cover_checks=_cover_checks(r, doc.get("cover_checks")),
        source=source,
    )


def parse_text(text: str, source: str | None = None) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, "$", exc.lineno, exc.colno) from None
    return parse_document(doc, source)


def parse_instance(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}", "$") from None
    return parse_text(text, str(path))


# ---------------------------------------------------------------------------
# emission


def _json_label(y):
    return [_json_label(v) for v in y] if isinstance(y, tuple) else y


def _json_rational(q: Fraction):
    return q.numerator if q.denominator == 1 else str(q)


def dump_universe(universe) -> dict:
    if isinstance(universe, PartiteUniverse):
        return {
            "k": universe.k,
            "partite": True,
            "sets": [list(X) for X in universe.sets],
            "labels": [_json_label(y) for y in universe.labels],
        }
    return {
        "k": universe.k,
        "ground_sets": [list(X) for X in universe.ground_sets],
        "labels": [_json_label(y) for y in universe.labels],
    }


def dump_loss(loss: LossTable, universe) -> dict:
    if loss.kind == "zero_one":
        return {"kind": "zero_one"}
    grid = _grid(universe)

    def entries(table):
        return [
            {"y": _json_label(y), "y2": _json_label(y2), "value": _json_rational(v)}
            for (y, y2), v in table.items()
        ]

    return {
        "kind": "table",
        "diagonal": _json_rational(loss.diagonal),
        "off_diagonal": _json_rational(loss.off_diagonal),
        "entries": entries(loss.values),
        "overrides": [
            {"point": list(grid.values_at(pos)), "entries": entries(t)}
            for pos, t in sorted(loss.overrides.items())
        ],
    }


def dump_measure(mu) -> list:
    if isinstance(mu, PartiteProbTemplate):
        pairs = zip(mu.universe.sets, mu.per_coordinate)
    else:
        pairs = zip(mu.universe.ground_sets, mu.per_arity)
    return [{e: _json_rational(w) for e, w in zip(X, ws) if w} for X, ws in pairs]


def dump_settings(settings: Settings) -> dict:
    """Every field that differs from the default, in the input format."""
    default = Settings()
    out: dict = {"epsilons": [_json_rational(e) for e in settings.epsilons]}
    if settings.delta_grid is not None:
        out["delta_grid"] = [_json_rational(d) for d in settings.delta_grid]
    for key in ("m_cap", "kpart_m", "trials", "mode"):
        value = getattr(settings, key)
        if value != getattr(default, key):
            out[key] = value
    return out


def dump_cover_checks(checks) -> list:
    return [{"n": c.n, "c": _json_rational(c.c), "sets": [list(U) for U in c.sets]} for c in checks]


def dump_instance(
    universe, cls, loss, measures: dict, settings: Settings | None = None, cover_checks=()
) -> dict:
    doc = {
        "universe": dump_universe(universe),
        "class": {
            "name": cls.name,
            "members": [{"name": h.name, "table": [_json_label(y) for y in h.table]} for h in cls],
        },
        "loss": dump_loss(loss, universe),
        "measures": {name: dump_measure(mu) for name, mu in measures.items()},
    }
    if settings is not None:
        doc["settings"] = dump_settings(settings)
    if cover_checks:
        doc["cover_checks"] = dump_cover_checks(cover_checks)
    return doc


__all__ = [
    "GENERATORS",
    "InvalidWeights",
    "Settings",
    "CoverCheck",
    "Instance",
    "parse_document",
    "parse_text",
    "parse_instance",
    "dump_universe",
    "dump_loss",
    "dump_measure",
    "dump_settings",
    "dump_cover_checks",
    "dump_instance",
]
