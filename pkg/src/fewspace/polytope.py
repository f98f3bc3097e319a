"""Newton polytope root counts (Kushnirenko, Bernstein) in dimensions 1 and 2.

Hull volumes are exact rationals computed from integer points and converted
to float at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .errors import DimensionError, UnsupportedDimension
from .spaces import SparseLaurent, SupportWeights


@dataclass(frozen=True)
class LatticeSupport:
    points: frozenset

    def __init__(self, points: Iterable):
        pts = set()
        for p in points:
            p = (p,) if isinstance(p, int) else tuple(p)
            if not all(isinstance(v, int) or float(v).is_integer() for v in p):
                raise ValueError(f"lattice points need integer coordinates, got {p}")
            pts.add(tuple(int(v) for v in p))
        if not pts:
            raise ValueError("support must be nonempty")
        if len({len(p) for p in pts}) != 1:
            raise DimensionError("all points must have the same dimension")
        object.__setattr__(self, "points", frozenset(pts))

    @property
    def nvars(self) -> int:
        return len(next(iter(self.points)))

    def translate(self, v) -> "LatticeSupport":
        return LatticeSupport(tuple(a + b for a, b in zip(p, v)) for p in self.points)

    def __add__(self, other: "LatticeSupport") -> "LatticeSupport":
        """Minkowski sum."""
        if other.nvars != self.nvars:
            raise DimensionError("Minkowski sum of supports of different dimension")
        return LatticeSupport(
            tuple(a + b for a, b in zip(p, q)) for p in self.points for q in other.points
        )

    def sorted_points(self) -> list:
        return sorted(self.points)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list:
    """Vertices of the 2-D convex hull, counter-clockwise (monotone chain)."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _exact_volume(support: LatticeSupport) -> Fraction:
    n = support.nvars
    if n == 1:
        xs = [p[0] for p in support.points]
        return Fraction(max(xs) - min(xs))
    if n == 2:
        hull = convex_hull(support.points)
        if len(hull) < 3:
            return Fraction(0)
        twice = sum(
            hull[i][0] * hull[i - 1][1] - hull[i - 1][0] * hull[i][1] for i in range(len(hull))
        )
        return Fraction(abs(twice), 2)
    raise UnsupportedDimension(f"hull volumes are implemented for n <= 2, got n = {n}")


def hull_volume(support: LatticeSupport) -> float:
    """Euclidean volume of the convex hull of the support (n = 1 or 2)."""
    return float(_exact_volume(support))


def bernstein_count(supports: Sequence[LatticeSupport]) -> float:
    """Generic number of roots in the torus: n! times the mixed volume.

    Computed as ``sum_S (-1)^(n-|S|) Vol(sum_{i in S} A_i)``.
    """
    supports = list(supports)
    n = len(supports)
    if n == 0:
        raise ValueError("need at least one support")
    for s in supports:
        if s.nvars != n:
            raise DimensionError(f"{n} supports must live in Z^{n}, got one in Z^{s.nvars}")
    if n > 2:
        raise UnsupportedDimension(f"mixed volumes are implemented for n <= 2, got n = {n}")
    total = Fraction(0)
    for k in range(1, n + 1):
        for idx in combinations(range(n), k):
            acc = supports[idx[0]]
            for i in idx[1:]:
                acc = acc + supports[i]
            total += (-1) ** (n - k) * _exact_volume(acc)
    return float(total)


def kushnirenko_check(support: LatticeSupport, weights: SupportWeights | None = None,
                      tol: float = 1e-6, **quad_kwargs):
    """Kushnirenko count ``n! Vol`` next to the integrated expected count.

    The integral is the unmixed density of ``SparseLaurent(weights)`` over the
    compactified torus ``(C \\ 0)^n``. ``weights`` must cover exactly the
    support; unit weights are used when omitted.
    """
    from .density import MixedDensityQuery
    from .quad import integrate_density, torus

    n = support.nvars
    if n > 2:
        raise UnsupportedDimension(f"n <= 2 supported, got {n}")
    if weights is None:
        weights = SupportWeights.uniform(support.points)
    if set(weights) != set(support.points):
        raise ValueError("weights must be given for exactly the support points")
    combinatorial = math.factorial(n) * hull_volume(support)
    query = MixedDensityQuery.unmixed(SparseLaurent(weights))
    integral = integrate_density(query, torus(n), tol=tol, **quad_kwargs)
    return combinatorial, integral
