"""Monte Carlo zero counting for one-variable fewspaces.

A standard Gaussian function of a diagonal space is ``f = sum_i g_i phi_i``
with orthonormal basis ``phi_i = sqrt(c_i) z^a_i exp(b_i z)`` and iid
coefficients ``g_i`` with independent real and imaginary parts of variance
1/2 (so E|g_i|^2 = 1). Zeros in the disk |z| < rho are counted by the
argument principle.

Sample k of a run with seed s draws from its own Philox stream keyed by s
with counter k << 192, so results do not depend on chunking or threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MonteCarloError, NonDiagonalSpace
from .spaces import SpaceExpr, check_diagonal_condition, diagonal_basis

DEFAULT_TRUNCATION = 64
DEFAULT_ARCS = 256
NEAR_ZERO = 1e-12
MAX_RETRIES = 5
MAX_DISCARD_RATE = 1e-3


class ContourFailure(MonteCarloError):
    """A zero stayed too close to the contour after all radius retries."""


class _NearZero(Exception):
    pass


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of the run keyed by ``seed``."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 192))


@dataclass(frozen=True)
class _Basis:
    exponents: np.ndarray
    frequencies: np.ndarray
    scales: np.ndarray

    @classmethod
    def of(cls, space: SpaceExpr, truncation: int | None) -> "_Basis":
        if space.nvars != 1:
            raise DimensionError("Monte Carlo sampling supports one-variable spaces only")
        if not check_diagonal_condition(space):
            raise NonDiagonalSpace(f"{space!r} has no diagonal orthonormal basis")
        basis = diagonal_basis(space, truncation)
        exps = np.array([a[0] for a, _ in basis], dtype=float)
        freqs = np.array([b[0] for _, b in basis], dtype=complex)
        scales = np.sqrt(np.array(list(basis.values()), dtype=float))
        return cls(exps, freqs, scales)

    def __len__(self):
        return self.exponents.size

    def matrix(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)[..., None]
        with np.errstate(all="ignore"):
            return self.scales * z**self.exponents * np.exp(self.frequencies * z)

    def derivative_matrix(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)[..., None]
        a, b = self.exponents, self.frequencies
        with np.errstate(all="ignore"):
            zpow = np.where(a > 0, a * z ** np.maximum(a - 1, 0), 0.0)
            return self.scales * (zpow + b * z**a) * np.exp(b * z)


def _draw(gen: np.random.Generator, size: int) -> np.ndarray:
    g = gen.standard_normal(2 * size)
    return (g[0::2] + 1j * g[1::2]) * math.sqrt(0.5)


@dataclass(frozen=True)
class SampledFunction:
    """A drawn function ``f(z) = sum_i coefficients[i] * phi_i(z)``."""

    space: SpaceExpr
    basis: _Basis = field(repr=False)
    coefficients: np.ndarray

    def __call__(self, z):
        return self.basis.matrix(z) @ self.coefficients

    def derivative(self, z):
        return self.basis.derivative_matrix(z) @ self.coefficients

    def scaled(self, c: complex) -> "SampledFunction":
        return SampledFunction(self.space, self.basis, c * self.coefficients)


def sample_function(space: SpaceExpr, rng: np.random.Generator,
                    truncation: int = DEFAULT_TRUNCATION) -> SampledFunction:
    """Draw a standard Gaussian function of a one-variable diagonal space.

    Infinite atoms (HyperbolicGAF, GEF) are cut at degree ``truncation``.
    """
    basis = _Basis.of(space, truncation)
    return SampledFunction(space, basis, _draw(rng, len(basis)))


def function_from_coefficients(space: SpaceExpr, coefficients,
                               truncation: int = DEFAULT_TRUNCATION) -> SampledFunction:
    basis = _Basis.of(space, truncation)
    coefficients = np.asarray(coefficients, dtype=complex)
    if coefficients.shape != (len(basis),):
        raise DimensionError(f"expected {len(basis)} coefficients, got {coefficients.shape}")
    return SampledFunction(space, basis, coefficients)


# ---------------------------------------------------------------------------
# argument principle
# ---------------------------------------------------------------------------


def _winding(evalf, radius, arcs, max_depth=50):
    theta = np.linspace(0.0, 2 * math.pi, arcs + 1)
    w = evalf(radius * np.exp(1j * theta[:-1]))
    w = np.append(w, w[0])
    wmax = np.max(np.abs(w))
    if not np.isfinite(wmax) or np.min(np.abs(w)) <= NEAR_ZERO * wmax:
        raise _NearZero
    t0, t1, w0, w1 = theta[:-1], theta[1:], w[:-1], w[1:]
    total = []
    for _ in range(max_depth):
        inc = np.angle(w1 * np.conj(w0))
        bad = np.abs(inc) >= math.pi / 2
        total.append(inc[~bad])
        if not bad.any():
            break
        t0, t1, w0, w1 = t0[bad], t1[bad], w0[bad], w1[bad]
        tm = 0.5 * (t0 + t1)
        wm = evalf(radius * np.exp(1j * tm))
        if np.min(np.abs(wm)) <= NEAR_ZERO * wmax:
            raise _NearZero
        t0, t1 = np.concatenate([t0, tm]), np.concatenate([tm, t1])
        w0, w1 = np.concatenate([w0, wm]), np.concatenate([wm, w1])
    else:
        raise _NearZero
    winding = math.fsum(np.concatenate(total)) / (2 * math.pi)
    return winding


def _count(evalf, radius, arcs):
    for _ in range(4):
        winding = _winding(evalf, radius, arcs)
        k = round(winding)
        if abs(winding - k) < 0.25:
            return k
        arcs *= 2
    raise _NearZero


def count_zeros_disk(f, radius: float = 1.0, *, initial_arcs: int = DEFAULT_ARCS,
                     rng: np.random.Generator | None = None,
                     max_retries: int = MAX_RETRIES) -> int:
    """Number of zeros of ``f`` in the open disk ``|z| < radius``.

    ``f`` is any vectorized callable analytic on a neighbourhood of the closed
    disk. The phase of f is tracked around the circle starting from
    ``initial_arcs`` equal arcs; an arc is bisected while its principal phase
    increment is at least pi/2. When ``|f|`` on the contour drops below
    1e-12 times its maximum, the radius is perturbed to ``radius * (1 +- u)``
    with u uniform in [1e-7, 1e-6], at most ``max_retries`` times.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    r = radius
    for attempt in range(max_retries + 1):
        try:
            k = _count(f, r, initial_arcs)
        except _NearZero:
            if rng is None:
                rng = np.random.default_rng(0)
            u = rng.uniform(1e-7, 1e-6)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            r = radius * (1.0 + sign * u)
            continue
        if k < 0:
            raise MonteCarloError(f"negative winding number {k}: f is not analytic in the disk")
        return k
    raise ContourFailure(f"f vanishes near |z| = {radius} after {max_retries} retries")


# ---------------------------------------------------------------------------
# expected counts
# ---------------------------------------------------------------------------


@dataclass
class MCReport:
    mean: float
    stderr: float
    samples: int
    seed: int
    histogram: dict
    discarded: int = 0
    diagnostics: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "discarded": self.discarded,
        }


def _count_range(basis, radius, seed, start, stop, arcs):
    """Counts for samples ``start..stop-1``; -1 marks a discarded sample."""
    size = len(basis)
    gens = [rng_stream(seed, i) for i in range(start, stop)]
    coefs = np.array([_draw(g, size) for g in gens])
    theta = np.linspace(0.0, 2 * math.pi, arcs + 1)[:-1]
    values = coefs @ basis.matrix(radius * np.exp(1j * theta)).T
    closed = np.concatenate([values, values[:, :1]], axis=1)
    inc = np.angle(closed[:, 1:] * np.conj(closed[:, :-1]))
    mags = np.abs(values)
    easy = (np.all(np.abs(inc) < math.pi / 2, axis=1)
            & (np.min(mags, axis=1) > NEAR_ZERO * np.max(mags, axis=1))
            & np.all(np.isfinite(values), axis=1))
    counts = np.rint(inc.sum(axis=1) / (2 * math.pi)).astype(np.int64)
    for j in np.flatnonzero(~easy):
        f = SampledFunction(None, basis, coefs[j])
        try:
            counts[j] = count_zeros_disk(f, radius, initial_arcs=arcs, rng=gens[j])
        except ContourFailure:
            counts[j] = -1
    return counts


def _run_counts(basis, radius, seed, samples, arcs, threads, chunk=1000):
    ranges = [(i, min(i + chunk, samples)) for i in range(0, samples, chunk)]
    counts = np.empty(samples, dtype=np.int64)

    def job(rg):
        counts[rg[0]:rg[1]] = _count_range(basis, radius, seed, rg[0], rg[1], arcs)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(job, ranges))
    else:
        for rg in ranges:
            job(rg)
    return counts


def _is_finite_dimensional(space: SpaceExpr) -> bool:
    try:
        space.basis(None)
    except NonDiagonalSpace:
        return False
    return True


def mc_expected_count(
    space: SpaceExpr,
    radius: float,
    samples: int,
    seed: int,
    *,
    truncation: int = DEFAULT_TRUNCATION,
    initial_arcs: int = DEFAULT_ARCS,
    threads: int = 1,
    pilot_samples: int = 2000,
) -> MCReport:
    """Mean zero count in ``|z| < radius`` over ``samples`` seeded draws.

    For spaces with an infinite atom, a pilot of ``pilot_samples`` draws is
    repeated at truncation ``2 * truncation`` with the same streams. The mean
    paired difference is reported as ``truncation_bias``; a run whose bias is
    not below stderr / 3 raises MonteCarloError.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    basis = _Basis.of(space, truncation)
    counts = _run_counts(basis, radius, seed, samples, initial_arcs, threads)
    kept = counts[counts >= 0]
    discarded = samples - kept.size
    if discarded > MAX_DISCARD_RATE * samples:
        raise MonteCarloError(
            f"{discarded} of {samples} samples discarded (zeros on the contour); "
            f"limit is {MAX_DISCARD_RATE:.1%}"
        )
    mean = float(np.mean(kept))
    stderr = float(np.std(kept, ddof=1) / math.sqrt(kept.size))
    values, freq = np.unique(kept, return_counts=True)
    diagnostics = {"radius": radius, "initial_arcs": initial_arcs, "basis_size": len(basis)}
    if not _is_finite_dimensional(space):
        n_pilot = min(pilot_samples, samples)
        wide = _Basis.of(space, 2 * truncation)
        c2 = _run_counts(wide, radius, seed, n_pilot, initial_arcs, threads)
        c1 = counts[:n_pilot]
        ok = (c1 >= 0) & (c2 >= 0)
        bias = float(np.mean(c2[ok] - c1[ok]))
        if not abs(bias) < stderr / 3:
            raise MonteCarloError(
                f"truncation at {truncation} biases the mean by {bias:.3g} "
                f"(stderr {stderr:.3g}); raise the truncation order"
            )
        diagnostics.update(truncation=truncation, truncation_bias=bias)
    return MCReport(
        mean=mean,
        stderr=stderr,
        samples=int(kept.size),
        seed=seed,
        histogram={int(v): int(c) for v, c in zip(values, freq)},
        discarded=int(discarded),
        diagnostics=diagnostics,
    )
