"""Command line front-end.

    fewspace expect  --spec doc.yaml
    fewspace mc      --space "{Weyl: {degree: 4}}" --radius 1 --samples 20000 --seed 42
    fewspace mixed   --spec doc.yaml
    fewspace bkk     --spec doc.yaml
    fewspace grid    --spec doc.yaml
    fewspace weights --space "{Power: {base: {SparseLaurent: {weights: [[0, 1], [1, 1]]}}, exponent: 2}}"

Records are JSON objects with sorted keys; grids and weight tables are
comma-separated rows after ``#`` comment headers. Flags override document
fields, which override defaults. Exit status: 0 on success (including a
flagged evaluation budget), 2 for spec or usage errors, 1 for other errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import quad
from .density import MixedDensityQuery, density, theorem_main_check
from .errors import FewspaceError, SpecError
from .montecarlo import DEFAULT_TRUNCATION, mc_expected_count
from .polytope import LatticeSupport, bernstein_count, kushnirenko_check
from .specfile import TASKS, SpecDocument, parse_document, parse_domain, parse_space
from .spaces import diagonal_basis

DEFAULTS = {
    "tol": quad.DEFAULT_TOL,
    "samples": 20000,
    "seed": 0,
    "radius": 1.0,
    "threads": 1,
    "budget": quad.DEFAULT_BUDGET,
    "truncation": DEFAULT_TRUNCATION,
}


def _options(args, doc: SpecDocument) -> dict:
    opts = dict(DEFAULTS)
    opts.update(doc.options)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def _equations(doc: SpecDocument) -> list:
    if not doc.equations:
        raise SpecError("no equations given (use 'equations' in the spec or --space)")
    return doc.equations


def _domain(doc: SpecDocument, n: int, opts: dict) -> quad.Domain:
    if doc.domain is not None:
        return doc.domain
    return quad.disk(opts["radius"]) if n == 1 else quad.polydisk(opts["radius"], n)


def _inputs(doc, opts, keys, **extra):
    echo = {k: opts[k] for k in keys}
    if doc.equations:
        echo["equations"] = [repr(s) for s in doc.equations]
    echo.update(extra)
    return echo


def _estimate(est: quad.CountEstimate) -> dict:
    rec = est.as_record()
    rec["converged"] = bool(est.diagnostics.get("converged", True))
    return rec


def task_expect(doc, opts):
    eqs = _equations(doc)
    domain = _domain(doc, len(eqs), opts)
    est = quad.integrate_density(eqs, domain, tol=opts["tol"], budget=opts["budget"],
                                 threads=opts["threads"])
    rec = {
        "task": "expect",
        "inputs": _inputs(doc, opts, ("tol", "budget"), domain=repr(domain)),
        "diagnostics": {k: v for k, v in est.diagnostics.items()},
    }
    rec.update(est.as_record())
    return rec


def task_mixed(doc, opts):
    eqs = _equations(doc)
    domain = _domain(doc, len(eqs), opts)
    mixed, extracted = theorem_main_check(eqs, domain, tol=opts["tol"], budget=opts["budget"],
                                          threads=opts["threads"])
    discrepancy = abs(mixed.value - extracted.value)
    combined = mixed.error + extracted.error
    return {
        "task": "mixed",
        "inputs": _inputs(doc, opts, ("tol", "budget"), domain=repr(domain)),
        "mixed": _estimate(mixed),
        "extracted": _estimate(extracted),
        "value": mixed.value,
        "error": combined,
        "discrepancy": discrepancy,
        "diagnostics": {"agree": discrepancy <= combined,
                        "subset_values": extracted.diagnostics.get("subset_values", {})},
    }


def _mc_radius(doc, opts, args):
    if getattr(args, "radius", None) is not None or "radius" in doc.options:
        return opts["radius"]
    if doc.domain is not None:
        (region,) = doc.domain.regions
        if isinstance(region, quad.Disk) and region.center == 0:
            return region.radius
        raise SpecError("mc counts zeros in a disk centred at 0; give a disk domain or --radius")
    return opts["radius"]


def task_mc(doc, opts, args):
    space = doc.space if doc.space is not None else _equations(doc)[0]
    if doc.space is None and len(doc.equations) != 1:
        raise SpecError("mc needs exactly one one-variable space")
    radius = _mc_radius(doc, opts, args)
    rep = mc_expected_count(space, radius, opts["samples"], opts["seed"],
                            truncation=opts["truncation"], threads=opts["threads"])
    rec = {
        "task": "mc",
        "inputs": _inputs(doc, opts, ("samples", "seed", "truncation"), radius=radius,
                          space=repr(space)),
        "value": rep.mean,
        "error": rep.stderr,
        "diagnostics": rep.diagnostics,
    }
    rec.update(rep.as_record())
    return rec


def task_bkk(doc, opts):
    rec = {"task": "bkk", "inputs": {}}
    if doc.supports:
        rec["inputs"]["supports"] = [sorted(map(list, s.points)) for s in doc.supports]
        value = bernstein_count(doc.supports)
        rec["bernstein"] = {"value": value, "error": 0.0}
        rec["value"], rec["error"] = value, 0.0
    if doc.kushnirenko:
        weights = doc.kushnirenko["weights"]
        tol = doc.kushnirenko.get("tol", opts["tol"])
        support = LatticeSupport(weights)
        comb, integral = kushnirenko_check(support, weights, tol=tol, budget=opts["budget"],
                                           threads=opts["threads"])
        rec["inputs"]["kushnirenko_weights"] = [[list(a), c] for a, c in weights.items()]
        rec["kushnirenko"] = {
            "combinatorial": {"value": comb, "error": 0.0},
            "integral": _estimate(integral),
            "discrepancy": abs(comb - integral.value),
        }
        if "value" not in rec:
            rec["value"], rec["error"] = integral.value, integral.error
    if "value" not in rec:
        raise SpecError("bkk needs 'supports' and/or 'kushnirenko' in the spec")
    rec["diagnostics"] = {}
    return rec


def _fmt(x) -> str:
    return repr(float(x))


def task_grid(doc, opts) -> str:
    eqs = _equations(doc)
    if doc.grid is None:
        raise SpecError("grid task needs a 'grid' section")
    query = MixedDensityQuery(eqs)
    re0, re1, nre = doc.grid["re"]
    im0, im1, nim = doc.grid["im"]
    fixed = doc.grid["fixed"]
    if len(fixed) != query.n - 1:
        raise SpecError(f"grid over the first coordinate needs {query.n - 1} fixed coordinates")
    xs, ys = np.linspace(re0, re1, nre), np.linspace(im0, im1, nim)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    z = (X + 1j * Y).ravel()
    pts = np.column_stack([z] + [np.full(z.shape, c) for c in fixed])
    for s in set(query.spaces):
        s.validate(pts)
    dens = density(query, pts)
    lines = [
        "# task: grid",
        "# equations: " + "; ".join(repr(s) for s in eqs),
        "# fixed: " + ", ".join(repr(complex(c)) for c in fixed),
        "re,im,density",
    ]
    lines += [f"{_fmt(p.real)},{_fmt(p.imag)},{_fmt(d)}" for p, d in zip(z, dens)]
    return "\n".join(lines) + "\n"


def task_weights(doc, opts) -> str:
    if doc.space is not None:
        space = doc.space
    else:
        eqs = _equations(doc)
        if len(eqs) != 1:
            raise SpecError("weights expands a single space")
        space = eqs[0]
    basis = diagonal_basis(space, opts["truncation"])
    n = space.nvars
    has_freq = any(any(v != 0 for v in b) for _, b in basis)
    header = [f"a{j + 1}" for j in range(n)] if n > 1 else ["exponent"]
    if has_freq:
        header += [f"b{j + 1}" for j in range(n)] if n > 1 else ["frequency"]
    header.append("weight")
    lines = ["# task: weights", "# space: " + repr(space), ",".join(header)]
    for (a, b), c in basis.items():
        row = [str(v) for v in a]
        if has_freq:
            row += [_fmt_complex(v) for v in b]
        row.append(_fmt_weight(c))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _fmt_weight(c):
    return str(int(c)) if float(c).is_integer() and abs(c) < 2**53 else repr(float(c))


def _fmt_complex(v):
    v = complex(v)
    if v.imag == 0:
        return _fmt_weight(v.real)
    return repr(v)


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewspace",
                                     description="Expected zero counts of random fewspace systems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=Path, help="space-spec YAML document")
    common.add_argument("--space", action="append",
                        help="inline space (YAML), repeatable; replaces the document equations")
    common.add_argument("--domain", help="inline domain (YAML), e.g. '{disk: {radius: 0.5}}'")
    common.add_argument("--tol", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--radius", type=float)
    common.add_argument("--threads", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--truncation", type=int)
    common.add_argument("-o", "--output", type=Path, help="write the result here instead of stdout")
    sub = parser.add_subparsers(dest="task", required=True)
    helps = {
        "expect": "integrate the expected-zero density over the domain",
        "mc": "Monte Carlo zero count in a disk (one variable)",
        "mixed": "mixed count directly and by coefficient extraction",
        "bkk": "Bernstein count and Kushnirenko check",
        "grid": "density sampled on a grid (re, im, density rows)",
        "weights": "diagonal basis weights of a space (exponent, weight rows)",
    }
    for task in TASKS:
        sub.add_parser(task, parents=[common], help=helps[task])
    return parser


def run(argv=None) -> tuple[int, str]:
    """Run one task; returns ``(exit status, output text)``."""
    args = build_parser().parse_args(argv)
    try:
        doc = parse_document(args.spec.read_text()) if args.spec else SpecDocument()
        if args.space:
            doc.equations = [parse_space(s, doc.spaces) for s in args.space]
            doc.space = None
        if args.domain:
            doc.domain = parse_domain(args.domain)
        if doc.task is not None and doc.task != args.task:
            print(f"note: document task {doc.task!r} overridden by {args.task!r}", file=sys.stderr)
        opts = _options(args, doc)
        if args.task == "grid":
            return 0, task_grid(doc, opts)
        if args.task == "weights":
            return 0, task_weights(doc, opts)
        if args.task == "expect":
            rec = task_expect(doc, opts)
        elif args.task == "mixed":
            rec = task_mixed(doc, opts)
        elif args.task == "mc":
            rec = task_mc(doc, opts, args)
        else:
            rec = task_bkk(doc, opts)
    except SpecError as exc:
        return 2, json.dumps({"task": args.task, "error": str(exc), "kind": "spec"}, indent=2) + "\n"
    except OSError as exc:
        return 2, json.dumps({"task": args.task, "error": str(exc), "kind": "io"}, indent=2) + "\n"
    except FewspaceError as exc:
        return 1, json.dumps({"task": args.task, "error": str(exc), "kind": type(exc).__name__},
                             indent=2) + "\n"
    for key in ("value", "error"):
        if not math.isfinite(rec[key]):
            return 1, json.dumps({"task": args.task, "error": f"non-finite {key}"}, indent=2) + "\n"
    return 0, json.dumps(rec, indent=2, sort_keys=True, default=_json_default) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    status, text = run(argv)
    if status != 0:
        sys.stderr.write(text)
    elif args.output:
        args.output.write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
