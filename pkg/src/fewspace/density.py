"""Expected-zero densities of systems drawn from fewspaces.

For equations f_i drawn from spaces F_i with Hessian fields H_i, the expected
number of common zeros in a set K is the integral over K of

    pi^-n * Mdet(H_1(x), ..., H_n(x))

against Lebesgue measure on C^n, where Mdet is the coefficient of
l_1 l_2 ... l_n in det(l_1 H_1 + ... + l_n H_n). For one repeated matrix,
Mdet(H, ..., H) = n! det H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, NegativeDensity, SingularEvaluation
from .spaces import SpaceExpr, _points

# densities in [-CLAMP, 0) (relative to the scale of the
# inclusion-exclusion terms, floored at 1) are round-off
CLAMP = 1e-12


def _subsets(n):
    for k in range(n + 1):
        for s in combinations(range(n), k):
            yield s


def _mixed_det_terms(matrices) -> tuple[np.ndarray, np.ndarray]:
    n = len(matrices)
    total = np.zeros(np.broadcast_shapes(*(m.shape[:-2] for m in matrices)))
    scale = np.zeros_like(total)
    for s in _subsets(n):
        if not s:
            continue
        acc = matrices[s[0]]
        for i in s[1:]:
            acc = acc + matrices[i]
        d = np.linalg.det(acc).real
        total = total + (-1) ** (n - len(s)) * d
        scale = scale + np.abs(d)
    return total, scale


def mixed_determinant(matrices: Sequence) -> float | np.ndarray:
    """Coefficient of l_1...l_n in ``det(sum l_i H_i)`` by inclusion-exclusion.

    ``matrices`` holds n arrays of shape ``(..., n, n)``; leading axes broadcast
    and the result has the broadcast shape.
    """
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    n = len(mats)
    if n == 0:
        raise DimensionError("need at least one matrix")
    for m in mats:
        if m.shape[-2:] != (n, n):
            raise DimensionError(f"expected {n} matrices of shape ({n}, {n}), got {m.shape[-2:]}")
    total, _ = _mixed_det_terms(mats)
    return float(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class MixedDensityQuery:
    """One space per equation; n equations in n variables."""

    spaces: tuple

    def __init__(self, spaces: Sequence[SpaceExpr]):
        spaces = tuple(spaces)
        if not spaces:
            raise DimensionError("a query needs at least one equation")
        n = len(spaces)
        for s in spaces:
            if s.nvars != n:
                raise DimensionError(
                    f"{n} equations need spaces in {n} variables, got one in {s.nvars}"
                )
        object.__setattr__(self, "spaces", spaces)

    @property
    def n(self) -> int:
        return len(self.spaces)

    @classmethod
    def unmixed(cls, space: SpaceExpr) -> "MixedDensityQuery":
        return cls([space] * space.nvars)


def density(query: MixedDensityQuery, x: np.ndarray) -> np.ndarray:
    """Vectorized expected-zero density at points of shape ``(..., n)``."""
    x = np.asarray(x, dtype=complex)
    cache = {}
    mats = []
    with np.errstate(all="ignore"):
        for s in query.spaces:
            if s not in cache:
                cache[s] = s.hessian(x)
            mats.append(cache[s])
        total, scale = _mixed_det_terms(mats)
    if not np.all(np.isfinite(total)):
        raise SingularEvaluation("mixed density is not finite at some points")
    total = total / np.pi**query.n
    scale = np.maximum(scale / np.pi**query.n, 1.0)
    bad = total < -CLAMP * scale
    if np.any(bad):
        raise NegativeDensity(f"mixed density {np.min(total)} is below the round-off threshold")
    return np.where(total < 0, 0.0, total)


def density_at(query: MixedDensityQuery, x) -> float:
    """Expected-zero density with respect to Lebesgue measure on C^n at x."""
    from .spaces import log_hessian

    x = _points(x, query.n)
    mats = [log_hessian(s, x).matrix for s in query.spaces]
    total, scale = _mixed_det_terms(mats)
    value = float(total) / np.pi**query.n
    if value < -CLAMP * max(1.0, float(scale) / np.pi**query.n):
        raise NegativeDensity(f"mixed density {value} is below the round-off threshold")
    return max(value, 0.0)


def _subset_key(s) -> frozenset:
    return frozenset(int(i) for i in s)


def multilinear_coefficient(values: Mapping, n: int | None = None) -> float:
    """Coefficient of l_1...l_n of a homogeneous degree-n polynomial p.

    ``values`` maps subsets S of {0, ..., n-1} (any iterable of indices) to
    p evaluated at the indicator vector of S. The empty subset may be omitted
    since p(0) = 0.
    """
    vals = {_subset_key(k): float(v) for k, v in values.items()}
    if n is None:
        n = max((max(k) + 1 for k in vals if k), default=0)
    if n < 1:
        raise ValueError("need n >= 1")
    total = []
    for s in _subsets(n):
        key = frozenset(s)
        if key not in vals:
            if not s:
                continue
            raise KeyError(f"missing value for subset {sorted(key)}")
        total.append((-1) ** (n - len(s)) * vals[key])
    return math.fsum(total)


def theorem_main_check(spaces: Sequence[SpaceExpr], domain, tol: float = 1e-7, **kwargs):
    """Mixed expected count two ways.

    (a) integrate the mixed density directly;
    (b) for each nonempty subset S, integrate the unmixed count of the product
        of the spaces in S, divide by n!, and extract the coefficient of
        l_1...l_n from those 2^n values.

    Returns ``(mixed, extracted)`` CountEstimates.
    """
    from .quad import CountEstimate, integrate_density
    from .spaces import product

    query = MixedDensityQuery(spaces)
    n = query.n
    sub_tol = tol / 2**n
    mixed = integrate_density(query, domain, tol=tol, **kwargs)
    if n == 1:
        same = CountEstimate(mixed.value, mixed.error, mixed.evaluations,
                             "quadrature-extracted", dict(mixed.diagnostics))
        return mixed, same

    values = {}
    error = 0.0
    evals = 0
    converged = True
    for s in _subsets(n):
        if not s:
            continue
        g = product(*(query.spaces[i] for i in s))
        est = integrate_density(MixedDensityQuery.unmixed(g), domain, tol=sub_tol, **kwargs)
        values[s] = est.value / math.factorial(n)
        error += est.error / math.factorial(n)
        evals += est.evaluations
        converged = converged and est.diagnostics.get("converged", True)
    value = multilinear_coefficient(values, n)
    diag = {"converged": converged,
            "subset_values": {str(list(k)): v for k, v in values.items()}}
    extracted = CountEstimate(value, error, evals, "quadrature-extracted", diag)
    return mixed, extracted
