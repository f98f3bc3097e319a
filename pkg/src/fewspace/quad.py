"""Adaptive Gauss-Legendre integration of expected-zero densities.

A domain is a product of per-coordinate regions of the complex plane. Each
region is parametrized by a rectangle in two real variables:

    Disk       (r, theta) in [0, rho] x [0, 2pi],             jac = r
    Annulus    (r, theta) in [r_in, r_out] x [0, 2pi],        jac = r
    Rectangle  (Re z, Im z),                                  jac = 1
    Plane      (t, theta), r = t / (1 - t), t in [0, 1),      jac = r / (1 - t)^2
    Torus      (u, theta), r = exp(tan u), u in (-pi/2, pi/2), jac = r^2 sec^2 u

Gauss nodes are interior, so the compactifying substitutions are never
evaluated at their singular endpoints.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .density import MixedDensityQuery, density
from .errors import DimensionError
from .spaces import SpaceExpr, product

DEFAULT_TOL = 1e-7
DEFAULT_BUDGET = 10**7

# beyond |log r| = TORUS_LOG_CUTOFF torus integrands are treated as zero; the
# cutoff keeps r^2 jacobians finite for up to three coordinates
TORUS_LOG_CUTOFF = 100.0

_CHUNK = 1 << 17


# ---------------------------------------------------------------------------
# regions and domains
# ---------------------------------------------------------------------------


class Region:
    """One complex coordinate of a domain."""

    def box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        raise NotImplementedError

    def map(self, u: np.ndarray, v: np.ndarray):
        """Return ``(z, jac, mask)`` for parameter arrays; ``mask`` marks points
        that contribute (all True except in torus tails)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(Region):
    radius: float = 1.0
    center: complex = 0j

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def box(self):
        return (0.0, float(self.radius)), (0.0, 2 * math.pi)

    def map(self, r, theta):
        return self.center + r * np.exp(1j * theta), r, None


@dataclass(frozen=True)
class Annulus(Region):
    r_in: float
    r_out: float
    center: complex = 0j

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise ValueError("annulus needs 0 <= r_in < r_out")

    def box(self):
        return (float(self.r_in), float(self.r_out)), (0.0, 2 * math.pi)

    def map(self, r, theta):
        return self.center + r * np.exp(1j * theta), r, None


@dataclass(frozen=True)
class Rectangle(Region):
    re: tuple[float, float]
    im: tuple[float, float]

    def __post_init__(self):
        if not (self.re[0] < self.re[1] and self.im[0] < self.im[1]):
            raise ValueError("rectangle intervals must be nonempty")

    def box(self):
        return tuple(map(float, self.re)), tuple(map(float, self.im))

    def map(self, x, y):
        return x + 1j * y, np.ones_like(x), None


@dataclass(frozen=True)
class Plane(Region):
    """All of C via r = t / (1 - t)."""

    def box(self):
        return (0.0, 1.0), (0.0, 2 * math.pi)

    def map(self, t, theta):
        r = t / (1.0 - t)
        return r * np.exp(1j * theta), r / (1.0 - t) ** 2, None


@dataclass(frozen=True)
class Torus(Region):
    """C minus the origin via log r = tan u."""

    def box(self):
        return (-math.pi / 2, math.pi / 2), (0.0, 2 * math.pi)

    def map(self, u, theta):
        s = np.tan(u)
        mask = np.abs(s) <= TORUS_LOG_CUTOFF
        s = np.where(mask, s, 0.0)
        r = np.exp(s)
        jac = np.where(mask, r * r * (1.0 + s * s), 0.0)
        return r * np.exp(1j * theta), jac, mask


@dataclass(frozen=True)
class Domain:
    """Product of per-coordinate regions; ``nvars`` is the number of regions."""

    regions: tuple

    def __init__(self, regions: Sequence[Region]):
        regions = tuple(regions)
        if not regions:
            raise ValueError("a domain needs at least one region")
        object.__setattr__(self, "regions", regions)

    @property
    def nvars(self) -> int:
        return len(self.regions)

    def box(self) -> np.ndarray:
        return np.array([iv for reg in self.regions for iv in reg.box()], dtype=float)

    def map(self, params: np.ndarray):
        """Parameters of shape ``(N, 2n)`` to points ``(N, n)``, jacobians, mask."""
        zs, jac, mask = [], np.ones(params.shape[0]), np.ones(params.shape[0], dtype=bool)
        for k, reg in enumerate(self.regions):
            z, j, m = reg.map(params[:, 2 * k], params[:, 2 * k + 1])
            zs.append(z)
            jac = jac * j
            if m is not None:
                mask &= m
        return np.stack(zs, axis=-1), jac, mask


def disk(radius=1.0, center=0j) -> Domain:
    return Domain([Disk(radius, center)])


def polydisk(radius=1.0, n=2, center=0j) -> Domain:
    radii = np.broadcast_to(np.asarray(radius, dtype=float), (n,))
    centers = np.broadcast_to(np.asarray(center, dtype=complex), (n,))
    return Domain([Disk(float(r), complex(c)) for r, c in zip(radii, centers)])


def annulus(r_in, r_out, center=0j) -> Domain:
    return Domain([Annulus(r_in, r_out, center)])


def rectangle(re, im) -> Domain:
    return Domain([Rectangle(tuple(re), tuple(im))])


def plane(n=1) -> Domain:
    return Domain([Plane()] * n)


def torus(n=1) -> Domain:
    return Domain([Torus()] * n)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class CountEstimate:
    """Expected zero count with an absolute error estimate."""

    value: float
    error: float
    evaluations: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "evaluations": self.evaluations,
            "method": self.method,
        }


# ---------------------------------------------------------------------------
# adaptive cubature
# ---------------------------------------------------------------------------


def default_order(dim: int) -> int:
    return {1: 12, 2: 10, 3: 7, 4: 6}.get(dim, 4)


@dataclass(frozen=True)
class _Rule:
    nodes: np.ndarray  # (m^D, D) on [0, 1]^D
    weights: np.ndarray  # (m^D,), summing to 1

    @classmethod
    def make(cls, dim, order):
        x, w = np.polynomial.legendre.leggauss(order)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*([w] * dim), indexing="ij")
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
        return cls(nodes, weights)


def _apply_rule(func, lo, hi, rule, pool):
    """GL rule on each cell ``[lo_i, hi_i]``; returns integrals of shape ``(C,)``."""
    width = hi - lo
    vol = np.prod(width, axis=-1)
    pts = lo[:, None, :] + rule.nodes[None, :, :] * width[:, None, :]
    flat = pts.reshape(-1, pts.shape[-1])
    vals = np.empty(flat.shape[0])
    chunks = [slice(i, min(i + _CHUNK, flat.shape[0])) for i in range(0, flat.shape[0], _CHUNK)]

    def run(s):
        vals[s] = func(flat[s])

    if pool is None or len(chunks) == 1:
        for s in chunks:
            run(s)
    else:
        list(pool.map(run, chunks))
    vals = vals.reshape(pts.shape[:2])
    return vol * (vals @ rule.weights), flat.shape[0]


def _halves(lo, hi):
    """The two halves of each cell along each axis: arrays ``(C, D, 2, D)``."""
    c, d = lo.shape
    mid = 0.5 * (lo + hi)
    hlo = np.broadcast_to(lo[:, None, None, :], (c, d, 2, d)).copy()
    hhi = np.broadcast_to(hi[:, None, None, :], (c, d, 2, d)).copy()
    axes = np.arange(d)
    hhi[:, axes, 0, axes] = mid
    hlo[:, axes, 1, axes] = mid
    return hlo, hhi


class _Cell:
    __slots__ = ("lo", "hi", "coarse", "halves", "value", "error", "axis")

    def __init__(self, lo, hi, coarse, halves):
        self.lo, self.hi, self.coarse, self.halves = lo, hi, coarse, halves
        diffs = halves.sum(axis=-1) - coarse
        # tensor GL error is additive over axes to leading order
        self.value = coarse + math.fsum(diffs)
        self.error = math.fsum(np.abs(diffs))
        self.axis = int(np.argmax(np.abs(diffs)))


def _make_cells(func, lo, hi, coarse, rule, pool):
    c, d = lo.shape
    hlo, hhi = _halves(lo, hi)
    vals, n = _apply_rule(func, hlo.reshape(-1, d), hhi.reshape(-1, d), rule, pool)
    vals = vals.reshape(c, d, 2)
    return [_Cell(lo[i], hi[i], coarse[i], vals[i]) for i in range(c)], n


def cubature(
    func: Callable[[np.ndarray], np.ndarray],
    box: np.ndarray,
    tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
    order: int | None = None,
    threads: int = 1,
):
    """Globally adaptive tensor Gauss-Legendre cubature over a box.

    Every cell is integrated by the m-point tensor rule and, for each axis,
    by the same rule on the two halves of the cell along that axis. The
    differences between the two levels estimate the per-axis errors; the cell
    value adds them as a correction and the cell error is their absolute sum.
    Cells with the largest errors are halved along their worst axis until the
    total error is at most ``tol`` or the evaluation budget would be exceeded.
    Returns ``(value, error, evaluations, converged, cells)``.
    """
    box = np.asarray(box, dtype=float)
    dim = box.shape[0]
    rule = _Rule.make(dim, order or default_order(dim))
    pool = ThreadPoolExecutor(threads) if threads and threads > 1 else None
    try:
        lo, hi = box[None, :, 0], box[None, :, 1]
        coarse, evals = _apply_rule(func, lo, hi, rule, pool)
        leaves, n = _make_cells(func, lo, hi, coarse, rule, pool)
        evals += n
        per_split = 2 * 2 * dim * rule.weights.size
        while True:
            err = math.fsum(leaf.error for leaf in leaves)
            if err <= tol:
                converged = True
                break
            if evals + per_split > budget:
                converged = False
                break
            # split the largest-error leaves that together carry half the excess
            ranked = sorted(range(len(leaves)), key=lambda i: (-leaves[i].error, i))
            max_batch = min(256, max(1, (budget - evals) // per_split))
            chosen, acc = [], 0.0
            for i in ranked:
                chosen.append(i)
                acc += leaves[i].error
                if acc >= 0.5 * (err - tol) or len(chosen) >= max_batch:
                    break
            parents = [leaves[i] for i in chosen]
            clo, chi, ccoarse = [], [], []
            for p in parents:
                mid = 0.5 * (p.lo[p.axis] + p.hi[p.axis])
                left_hi, right_lo = p.hi.copy(), p.lo.copy()
                left_hi[p.axis] = mid
                right_lo[p.axis] = mid
                clo += [p.lo, right_lo]
                chi += [left_hi, p.hi]
                ccoarse += [p.halves[p.axis, 0], p.halves[p.axis, 1]]
            kids, n = _make_cells(func, np.array(clo), np.array(chi), np.array(ccoarse), rule, pool)
            evals += n
            chosen_set = set(chosen)
            leaves = [leaf for i, leaf in enumerate(leaves) if i not in chosen_set] + kids
        value = math.fsum(leaf.value for leaf in leaves)
        return value, err, evals, converged, len(leaves)
    finally:
        if pool is not None:
            pool.shutdown()


def _density_integrand(query: MixedDensityQuery, domain: Domain):
    def f(params):
        z, jac, mask = domain.map(params)
        out = np.zeros(params.shape[0])
        if np.all(mask):
            idx = slice(None)
        else:
            idx = np.flatnonzero(mask)
        zi = z[idx]
        for s in set(query.spaces):
            s.validate(zi)
        out[idx] = density(query, zi) * jac[idx]
        return out

    return f


def integrate_density(
    query: MixedDensityQuery | Sequence[SpaceExpr],
    domain: Domain,
    tol: float = DEFAULT_TOL,
    budget: int = DEFAULT_BUDGET,
    order: int | None = None,
    threads: int = 1,
) -> CountEstimate:
    """Expected number of zeros in ``domain`` for the equations of ``query``."""
    if not isinstance(query, MixedDensityQuery):
        query = MixedDensityQuery(query)
    if domain.nvars != query.n:
        raise DimensionError(f"domain has {domain.nvars} coordinates, query has {query.n}")
    if not tol >= 1e-12:
        raise ValueError("tol must be at least 1e-12")
    value, err, evals, converged, cells = cubature(
        _density_integrand(query, domain), domain.box(), tol=tol, budget=budget,
        order=order, threads=threads,
    )
    diag = {"converged": converged, "cells": cells, "tol": tol}
    if not converged:
        diag["flag"] = "budget exhausted"
    return CountEstimate(value, err, evals, "quadrature", diag)


def unmixed_power_count(
    bases: Sequence[SpaceExpr],
    powers: Sequence[int],
    domain: Domain,
    tol: float = DEFAULT_TOL,
    **kwargs,
) -> CountEstimate:
    """Expected count for n equations all drawn from ``prod_i bases[i] ** powers[i]``."""
    if len(bases) != len(powers):
        raise ValueError("need one power per base")
    g = product(*(b if p == 1 else b**p for b, p in zip(bases, powers)))
    return integrate_density(MixedDensityQuery.unmixed(g), domain, tol=tol, **kwargs)
