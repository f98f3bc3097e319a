"""Space-spec documents: declarative YAML describing spaces, a domain and a task.

Example::

    task: expect
    spaces:
      E: {ExpSpan: {frequencies: [0, 1]}}
      P: {Weyl: {degree: 3}}
      F: {Product: [E, P]}
    equations: [F]
    domain: {disk: {radius: 1}}
    options: {tol: 1.0e-9}

Spaces are referenced by name or written inline. Constructors::

    Weyl: {degree: d, nvars: n}          (nvars defaults to 1)
    ExpSpan: {frequencies: [b, ...]}     (b a number, "1+2j", or a list)
    SparseLaurent: {weights: [[a, c], ...]}
    HyperbolicGAF: {}
    GEF: {}
    Product: [space, space, ...]
    Power: {base: space, exponent: k}
    Tensor: [space, space, ...]          (alias CoordinateTensor)

Domains::

    disk: {radius: r, center: c}
    annulus: {r_in: a, r_out: b, center: c}
    rectangle: {re: [a, b], im: [c, d]}
    polydisk: {radius: r, n: k}
    plane: {n: k}
    torus: {n: k}
    product: [{disk: ...}, {annulus: ...}, ...]

Every error reports the line and column of the offending node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from . import quad
from .errors import FewspaceError, SpecError
from .polytope import LatticeSupport
from .spaces import (
    GEF,
    CoordinateTensor,
    ExpSpan,
    HyperbolicGAF,
    Power,
    SparseLaurent,
    SupportWeights,
    Weyl,
    product,
)

TASKS = ("expect", "mc", "mixed", "bkk", "grid", "weights")
OPTION_KEYS = ("tol", "samples", "seed", "radius", "threads", "budget", "truncation")
TOP_KEYS = ("task", "spaces", "equations", "space", "domain", "options", "grid",
            "supports", "kushnirenko")


@dataclass
class SpecDocument:
    task: str | None = None
    spaces: dict = field(default_factory=dict)
    equations: list = field(default_factory=list)
    space: object = None
    domain: object = None
    options: dict = field(default_factory=dict)
    grid: dict | None = None
    supports: list | None = None
    kushnirenko: dict | None = None


# ---------------------------------------------------------------------------
# node helpers
# ---------------------------------------------------------------------------


def _fail(node, message):
    if node is None:
        raise SpecError(message)
    mark = node.start_mark
    raise SpecError(message, mark.line + 1, mark.column + 1)


def _value(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _mapping(node, allowed, what, required=()):
    if not isinstance(node, yaml.MappingNode):
        _fail(node, f"{what} must be a mapping")
    out = {}
    for k, v in node.value:
        key = _value(k)
        if key not in allowed:
            _fail(k, f"unknown key {key!r} in {what}; allowed: {', '.join(allowed)}")
        if key in out:
            _fail(k, f"duplicate key {key!r} in {what}")
        out[key] = v
    for key in required:
        if key not in out:
            _fail(node, f"{what} requires key {key!r}")
    return out


def _single(node, allowed, what):
    """A mapping with exactly one key (a constructor)."""
    if not isinstance(node, yaml.MappingNode) or len(node.value) != 1:
        _fail(node, f"{what} must be a mapping with exactly one constructor key")
    k, v = node.value[0]
    name = _value(k)
    if name not in allowed:
        _fail(k, f"unknown {what} {name!r}; expected one of {', '.join(allowed)}")
    return name, v


def _sequence(node, what):
    if not isinstance(node, yaml.SequenceNode):
        _fail(node, f"{what} must be a list")
    return node.value


def _number(node, what, kind=float):
    v = _value(node) if isinstance(node, yaml.ScalarNode) else None
    if isinstance(v, bool) or v is None:
        _fail(node, f"{what} must be a number")
    try:
        if kind is int:
            f = float(v)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if kind is complex:
            return complex(str(v).replace(" ", "")) if isinstance(v, str) else complex(v)
        return float(v)
    except (TypeError, ValueError):
        _fail(node, f"{what} must be {'an integer' if kind is int else 'a number'}, got {v!r}")


def _vector(node, what, kind=float):
    if isinstance(node, yaml.ScalarNode):
        return (_number(node, what, kind),)
    return tuple(_number(n, what, kind) for n in _sequence(node, what))


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

SPACE_CONSTRUCTORS = ("Weyl", "ExpSpan", "SparseLaurent", "HyperbolicGAF", "GEF",
                      "Product", "Power", "Tensor", "CoordinateTensor")


def _space(node, named):
    if isinstance(node, yaml.ScalarNode):
        name = _value(node)
        if isinstance(name, str) and name in named:
            return named[name]
        # argument-free atoms may be written bare
        if name == "HyperbolicGAF":
            return HyperbolicGAF()
        if name == "GEF":
            return GEF()
        _fail(node, f"unknown space name {name!r}")
    ctor, body = _single(node, SPACE_CONSTRUCTORS, "space constructor")
    try:
        if ctor == "Weyl":
            m = _mapping(body, ("degree", "nvars"), "Weyl", required=("degree",))
            nvars = _number(m["nvars"], "nvars", int) if "nvars" in m else 1
            return Weyl(_number(m["degree"], "degree", int), nvars)
        if ctor == "ExpSpan":
            m = _mapping(body, ("frequencies",), "ExpSpan", required=("frequencies",))
            freqs = [_vector(f, "frequency", complex) for f in _sequence(m["frequencies"], "frequencies")]
            return ExpSpan(freqs)
        if ctor == "SparseLaurent":
            m = _mapping(body, ("weights",), "SparseLaurent", required=("weights",))
            entries = {}
            for pair in _sequence(m["weights"], "weights"):
                items = _sequence(pair, "weight entry")
                if len(items) != 2:
                    _fail(pair, "weight entry must be [exponent, weight]")
                key = _vector(items[0], "exponent", int)
                if key in entries:
                    _fail(items[0], f"duplicate exponent {list(key)}")
                entries[key] = _number(items[1], "weight")
            return SparseLaurent(SupportWeights(entries))
        if ctor in ("HyperbolicGAF", "GEF"):
            if not (isinstance(body, yaml.ScalarNode) and _value(body) is None):
                _mapping(body, (), ctor)
            return HyperbolicGAF() if ctor == "HyperbolicGAF" else GEF()
        if ctor == "Product":
            parts = [_space(n, named) for n in _sequence(body, "Product")]
            if not parts:
                _fail(body, "Product needs at least one factor")
            return product(*parts)
        if ctor == "Power":
            m = _mapping(body, ("base", "exponent"), "Power", required=("base", "exponent"))
            return Power(_space(m["base"], named), _number(m["exponent"], "exponent", int))
        parts = [_space(n, named) for n in _sequence(body, ctor)]
        return CoordinateTensor(parts)
    except SpecError:
        raise
    except (FewspaceError, ValueError) as exc:
        _fail(node, str(exc))


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

REGIONS = ("disk", "annulus", "rectangle", "plane", "torus")
DOMAINS = REGIONS + ("polydisk", "product")


def _radius(m, key="radius"):
    if key not in m:
        return 1.0
    r = _number(m[key], key)
    if not r > 0:
        _fail(m[key], f"{key} must be positive, got {r}")
    return r


def _region(name, body):
    if name == "disk":
        m = _mapping(body, ("radius", "center"), "disk")
        return quad.Disk(_radius(m),
                         _number(m["center"], "center", complex) if "center" in m else 0j)
    if name == "annulus":
        m = _mapping(body, ("r_in", "r_out", "center"), "annulus", required=("r_in", "r_out"))
        return quad.Annulus(_number(m["r_in"], "r_in"), _number(m["r_out"], "r_out"),
                            _number(m["center"], "center", complex) if "center" in m else 0j)
    if name == "rectangle":
        m = _mapping(body, ("re", "im"), "rectangle", required=("re", "im"))
        re_, im_ = _vector(m["re"], "re"), _vector(m["im"], "im")
        if len(re_) != 2 or len(im_) != 2:
            _fail(body, "rectangle intervals need two endpoints")
        return quad.Rectangle(re_, im_)
    return quad.Plane() if name == "plane" else quad.Torus()


def _empty_or_mapping(body, allowed, what):
    if isinstance(body, yaml.ScalarNode) and _value(body) is None:
        return {}
    return _mapping(body, allowed, what)


def _domain(node):
    name, body = _single(node, DOMAINS, "domain")
    try:
        if name == "polydisk":
            m = _mapping(body, ("radius", "n", "center"), "polydisk")
            return quad.polydisk(
                _radius(m),
                _number(m["n"], "n", int) if "n" in m else 2,
                _number(m["center"], "center", complex) if "center" in m else 0j,
            )
        if name in ("plane", "torus"):
            m = _empty_or_mapping(body, ("n",), name)
            n = _number(m["n"], "n", int) if "n" in m else 1
            return quad.plane(n) if name == "plane" else quad.torus(n)
        if name == "product":
            regions = []
            for item in _sequence(body, "product"):
                rname, rbody = _single(item, REGIONS, "region")
                if rname in ("plane", "torus"):
                    _empty_or_mapping(rbody, (), rname)
                regions.append(_region(rname, rbody))
            return quad.Domain(regions)
        if name in ("disk", "annulus", "rectangle"):
            return quad.Domain([_region(name, body)])
    except SpecError:
        raise
    except (FewspaceError, ValueError) as exc:
        _fail(node, str(exc))


# ---------------------------------------------------------------------------
# document
# ---------------------------------------------------------------------------


def _compose(text, what):
    try:
        node = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise SpecError(f"{what}: {exc.problem}", mark.line + 1 if mark else None,
                        mark.column + 1 if mark else None) from None
    return node


def parse_space(text: str, named: dict | None = None):
    """Parse one inline space, e.g. ``"{Weyl: {degree: 4}}"``."""
    node = _compose(text, "space")
    if node is None:
        raise SpecError("empty space description")
    return _space(node, named or {})


def parse_domain(text: str):
    node = _compose(text, "domain")
    if node is None:
        raise SpecError("empty domain description")
    return _domain(node)


def parse_document(text: str) -> SpecDocument:
    node = _compose(text, "spec")
    doc = SpecDocument()
    if node is None:
        return doc
    top = _mapping(node, TOP_KEYS, "document")
    if "task" in top:
        task = _value(top["task"])
        if task not in TASKS:
            _fail(top["task"], f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
        doc.task = task
    if "spaces" in top:
        spaces_node = top["spaces"]
        if not isinstance(spaces_node, yaml.MappingNode):
            _fail(spaces_node, "spaces must be a mapping of names to constructors")
        for k, v in spaces_node.value:
            name = _value(k)
            if not isinstance(name, str):
                _fail(k, "space names must be strings")
            if name in doc.spaces:
                _fail(k, f"duplicate space name {name!r}")
            doc.spaces[name] = _space(v, doc.spaces)
    if "equations" in top:
        nodes = _sequence(top["equations"], "equations")
        doc.equations = [_space(n, doc.spaces) for n in nodes]
        for n, eq in zip(nodes, doc.equations):
            if eq.nvars != len(nodes):
                _fail(n, f"{len(nodes)} equations need spaces in {len(nodes)} variables, "
                         f"this one has {eq.nvars}")
    if "space" in top:
        doc.space = _space(top["space"], doc.spaces)
    if "domain" in top:
        doc.domain = _domain(top["domain"])
    if "options" in top:
        m = _mapping(top["options"], OPTION_KEYS, "options")
        for key, v in m.items():
            kind = int if key in ("samples", "seed", "threads", "budget", "truncation") else float
            doc.options[key] = _number(v, key, kind)
    if "grid" in top:
        m = _mapping(top["grid"], ("re", "im", "fixed"), "grid", required=("re", "im"))
        g = {}
        for axis in ("re", "im"):
            vals = _sequence(m[axis], axis)
            if len(vals) != 3:
                _fail(m[axis], f"grid {axis} must be [start, stop, count]")
            g[axis] = (_number(vals[0], axis), _number(vals[1], axis), _number(vals[2], "count", int))
        g["fixed"] = _vector(m["fixed"], "fixed", complex) if "fixed" in m else ()
        doc.grid = g
    if "supports" in top:
        doc.supports = []
        for s in _sequence(top["supports"], "supports"):
            pts = [_vector(p, "lattice point", int) for p in _sequence(s, "support")]
            try:
                doc.supports.append(LatticeSupport(pts))
            except (FewspaceError, ValueError) as exc:
                _fail(s, str(exc))
    if "kushnirenko" in top:
        m = _mapping(top["kushnirenko"], ("weights", "tol"), "kushnirenko", required=("weights",))
        entries = {}
        for pair in _sequence(m["weights"], "weights"):
            items = _sequence(pair, "weight entry")
            if len(items) != 2:
                _fail(pair, "weight entry must be [exponent, weight]")
            entries[_vector(items[0], "exponent", int)] = _number(items[1], "weight")
        try:
            doc.kushnirenko = {"weights": SupportWeights(entries)}
        except (FewspaceError, ValueError) as exc:
            _fail(m["weights"], str(exc))
        if "tol" in m:
            doc.kushnirenko["tol"] = _number(m["tol"], "tol")
    return doc
