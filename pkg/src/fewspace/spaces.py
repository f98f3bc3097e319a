"""Fewspace expressions: reproducing kernels and Hessians of log K(x, x).

A space is an immutable expression tree built from five atoms

    Weyl(d, n)            K = (1 + <x, y>)^d
    ExpSpan(freqs)        K = sum_b exp(b.x + conj(b.y))
    SparseLaurent(w)      K = sum_a c_a x^a conj(y)^a
    HyperbolicGAF()       K = 1 / (1 - x conj(y))
    GEF()                 K = exp(x conj(y))

closed under ``Product`` (pointwise kernel product), ``Power`` and
``CoordinateTensor`` (kernels on disjoint blocks of coordinates).

Every node evaluates three things on arrays of points with shape ``(..., n)``:
the kernel, ``log K(x, x)`` and the Hermitian matrix ``d/dx_j d/dxbar_k log K``.
The combinators act on Hessians by sum, scaling and block-diagonal assembly.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import product as iproduct
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    KernelOverflow,
    NonDiagonalSpace,
    SingularEvaluation,
)

# the largest argument for which exp() is finite
_EXP_MAX = 709.0


# ---------------------------------------------------------------------------
# support weights
# ---------------------------------------------------------------------------


class SupportWeights:
    """Finite map from integer exponent vectors to positive weights.

    The space ``SparseLaurent(w)`` has orthonormal basis ``sqrt(c_a) x^a``.
    Scalar exponents are accepted for one variable.
    """

    __slots__ = ("_entries", "_nvars")

    def __init__(self, entries: Mapping):
        if not entries:
            raise ValueError("support must be nonempty")
        clean = {}
        nvars = None
        for key, weight in entries.items():
            key = _as_exponent(key)
            if nvars is None:
                nvars = len(key)
            elif len(key) != nvars:
                raise DimensionError(f"exponent {key} has {len(key)} coordinates, expected {nvars}")
            weight = float(weight)
            if not (weight > 0 and math.isfinite(weight)):
                raise ValueError(f"weight for exponent {key} must be positive and finite, got {weight}")
            if key in clean:
                raise ValueError(f"duplicate exponent {key}")
            clean[key] = weight
        self._entries = dict(sorted(clean.items()))
        self._nvars = nvars

    @classmethod
    def uniform(cls, exponents, weight=1.0):
        return cls({a: weight for a in exponents})

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def entries(self) -> dict:
        return dict(self._entries)

    def exponents(self) -> np.ndarray:
        return np.array(list(self._entries), dtype=np.int64).reshape(len(self), self._nvars)

    def weights(self) -> np.ndarray:
        return np.array(list(self._entries.values()), dtype=float)

    def items(self):
        return self._entries.items()

    def __getitem__(self, key):
        return self._entries[_as_exponent(key)]

    def __contains__(self, key):
        return _as_exponent(key) in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __eq__(self, other):
        if not isinstance(other, SupportWeights):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(tuple(self._entries.items()))

    def __repr__(self):
        body = ", ".join(f"{_fmt_key(k)}: {v:g}" for k, v in self._entries.items())
        return f"SupportWeights({{{body}}})"


def _as_exponent(key) -> tuple:
    if isinstance(key, (int, np.integer)):
        return (int(key),)
    key = tuple(key)
    for a in key:
        if isinstance(a, (bool, np.bool_)) or not float(a).is_integer():
            raise ValueError(f"exponent entries must be integers, got {key!r}")
    return tuple(int(a) for a in key)


def _fmt_key(key):
    return str(key[0]) if len(key) == 1 else str(key)


def _convolve(a: Mapping, b: Mapping, add) -> dict:
    out = defaultdict(float)
    for ka, ca in a.items():
        for kb, cb in b.items():
            out[add(ka, kb)] += ca * cb
    return dict(out)


def _add_int(ka, kb):
    return tuple(x + y for x, y in zip(ka, kb))


def product_weights(a: SupportWeights, b: SupportWeights) -> SupportWeights:
    """Weights of the product of two diagonal monomial spaces.

    Products of basis monomials with the same exponent are colinear and
    merge into one basis element whose weight is the sum of the products of
    the weights: ``c_s = sum_{a1 + a2 = s} c_a1 c_a2``. Classes are decided by
    exact integer equality of exponents.
    """
    if a.nvars != b.nvars:
        raise DimensionError(f"cannot multiply supports in {a.nvars} and {b.nvars} variables")
    return SupportWeights(_convolve(a._entries, b._entries, _add_int))


# ---------------------------------------------------------------------------
# Hermitian field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermitianField:
    """The matrix ``H_jk = d/dx_j d/dxbar_k log K(x, x)`` at ``point``."""

    point: np.ndarray
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        sym = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigvalsh(sym)

    def is_hermitian(self, atol=1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        return bool(np.all(np.abs(self.matrix - self.matrix.conj().T) <= atol * scale))

    def is_psd(self, atol=1e-10) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        return bool(np.all(self.eigenvalues() >= -atol * scale))


# ---------------------------------------------------------------------------
# expression tree
# ---------------------------------------------------------------------------


def _points(x, nvars) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != nvars:
        raise DimensionError(f"point has {x.shape[-1]} coordinates, space has {nvars} variables")
    if not np.all(np.isfinite(x)):
        raise DomainError("point coordinates must be finite")
    return x


class SpaceExpr:
    """Base class of the expression tree. Nodes are immutable and hashable."""

    nvars: int

    # --- vectorized evaluation, arrays of shape (..., nvars) ---------------
    def kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_kernel_diag(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def validate(self, x: np.ndarray, margin: float = 0.0) -> None:
        """Raise DomainError unless every point (with a closed neighbourhood of
        radius ``margin`` per coordinate) lies in the domain of the space."""

    def atoms(self) -> Iterator["Atom"]:
        raise NotImplementedError

    def basis(self, truncation: int | None = None) -> dict:
        """Diagonal orthonormal basis as ``{(a, b): c}`` meaning ``sqrt(c) x^a exp(b.x)``.

        ``a`` is an integer tuple and ``b`` a complex tuple. Infinite atoms
        are cut at ``truncation`` (degrees ``0..N``).
        """
        raise NotImplementedError

    # --- combinators -------------------------------------------------------
    def __mul__(self, other):
        if not isinstance(other, SpaceExpr):
            return NotImplemented
        return Product(self, other)

    def __pow__(self, exponent):
        return Power(self, exponent)


class Atom(SpaceExpr):
    #: True when the atom has an orthonormal basis of monomials or pure
    #: exponentials, so products of basis elements are orthogonal or colinear.
    diagonal = True

    def atoms(self):
        yield self


@dataclass(frozen=True)
class Weyl(Atom):
    """Polynomials of degree <= d in n variables with the Weyl inner product."""

    degree: int
    nvars: int = 1

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a nonnegative integer, got {self.degree}")
        if int(self.nvars) != self.nvars or self.nvars < 1:
            raise ValueError(f"nvars must be a positive integer, got {self.nvars}")

    def kernel(self, x, y):
        return (1.0 + np.sum(x * np.conj(y), axis=-1)) ** self.degree

    def log_kernel_diag(self, x):
        return self.degree * np.log1p(np.sum(np.abs(x) ** 2, axis=-1))

    def hessian(self, x):
        s = 1.0 + np.sum(np.abs(x) ** 2, axis=-1)[..., None, None]
        eye = np.eye(self.nvars)
        outer = np.conj(x)[..., :, None] * x[..., None, :]
        return self.degree * (eye / s - outer / s**2)

    def basis(self, truncation=None):
        out = {}
        zero = (0j,) * self.nvars
        fd = math.factorial(self.degree)
        for a in iproduct(range(self.degree + 1), repeat=self.nvars):
            a0 = self.degree - sum(a)
            if a0 < 0:
                continue
            c = fd // math.prod(math.factorial(k) for k in (a0, *a))
            out[(a, zero)] = float(c)
        return out


@dataclass(frozen=True)
class ExpSpan(Atom):
    """Span of ``exp(b.x)`` for distinct frequency vectors b, declared orthonormal."""

    frequencies: tuple

    def __init__(self, frequencies):
        freqs = []
        for b in frequencies:
            b = np.atleast_1d(np.asarray(b, dtype=complex))
            if b.ndim != 1:
                raise ValueError("each frequency must be a scalar or a vector")
            freqs.append(tuple(complex(v) for v in b))
        if not freqs:
            raise ValueError("ExpSpan needs at least one frequency")
        n = len(freqs[0])
        if any(len(b) != n for b in freqs):
            raise DimensionError("all frequencies must have the same length")
        if len(set(freqs)) != len(freqs):
            raise ValueError("frequencies must be pairwise distinct")
        object.__setattr__(self, "frequencies", tuple(freqs))

    @property
    def nvars(self):
        return len(self.frequencies[0])

    def _b(self):
        return np.array(self.frequencies, dtype=complex)

    def kernel(self, x, y):
        b = self._b()
        t = x @ b.T + np.conj(y @ b.T)
        return _sum_exp(t)

    def log_kernel_diag(self, x):
        return _logsumexp(2.0 * (x @ self._b().T).real)

    def hessian(self, x):
        b = self._b()
        return _covariance(2.0 * (x @ b.T).real, b)

    def basis(self, truncation=None):
        a = (0,) * self.nvars
        return {(a, b): 1.0 for b in self.frequencies}


@dataclass(frozen=True)
class SparseLaurent(Atom):
    """Laurent polynomials with support A and orthonormal basis ``sqrt(c_a) x^a``.

    Defined on the torus: all coordinates must be nonzero.
    """

    weights: SupportWeights

    def __post_init__(self):
        if not isinstance(self.weights, SupportWeights):
            object.__setattr__(self, "weights", SupportWeights(self.weights))

    @property
    def nvars(self):
        return self.weights.nvars

    def validate(self, x, margin=0.0):
        if np.any(np.abs(x) <= np.sqrt(2.0) * margin):
            raise DomainError("SparseLaurent requires nonzero coordinates")

    def kernel(self, x, y):
        a = self.weights.exponents().astype(float)
        logc = np.log(self.weights.weights())
        t = np.log(x * np.conj(y)) @ a.T + logc
        return _sum_exp(t)

    def log_kernel_diag(self, x):
        a = self.weights.exponents().astype(float)
        logc = np.log(self.weights.weights())
        return _logsumexp(2.0 * np.log(np.abs(x)) @ a.T + logc)

    def hessian(self, x):
        a = self.weights.exponents().astype(float)
        logc = np.log(self.weights.weights())
        cov = _covariance(2.0 * np.log(np.abs(x)) @ a.T + logc, a)
        return cov / (x[..., :, None] * np.conj(x)[..., None, :])

    def basis(self, truncation=None):
        zero = (0j,) * self.nvars
        return {(a, zero): c for a, c in self.weights.items()}


@dataclass(frozen=True)
class HyperbolicGAF(Atom):
    """``sum a_n z^n`` on the unit disk; kernel ``1/(1 - x conj(y))``."""

    nvars = 1

    def validate(self, x, margin=0.0):
        if np.any(np.abs(x) + np.sqrt(2.0) * margin >= 1.0):
            raise DomainError("HyperbolicGAF is defined on the open unit disk")

    def kernel(self, x, y):
        return 1.0 / (1.0 - x[..., 0] * np.conj(y[..., 0]))

    def log_kernel_diag(self, x):
        return -np.log1p(-np.abs(x[..., 0]) ** 2)

    def hessian(self, x):
        return (1.0 / (1.0 - np.abs(x) ** 2) ** 2)[..., None].astype(complex)

    def basis(self, truncation=None):
        if truncation is None:
            raise NonDiagonalSpace("HyperbolicGAF is infinite dimensional; give a truncation order")
        return {((k,), (0j,)): 1.0 for k in range(truncation + 1)}


@dataclass(frozen=True)
class GEF(Atom):
    """``sum b_n z^n / sqrt(n!)`` on the plane; kernel ``exp(x conj(y))``."""

    nvars = 1

    def kernel(self, x, y):
        return _sum_exp((x * np.conj(y))[..., :1])

    def log_kernel_diag(self, x):
        return np.abs(x[..., 0]) ** 2

    def hessian(self, x):
        return np.ones(x.shape[:-1] + (1, 1), dtype=complex)

    def basis(self, truncation=None):
        if truncation is None:
            raise NonDiagonalSpace("GEF is infinite dimensional; give a truncation order")
        # 1/k! underflows gracefully through lgamma past the float range of k!
        inv = [1.0 / math.factorial(k) if k <= 170 else math.exp(-math.lgamma(k + 1))
               for k in range(truncation + 1)]
        return {((k,), (0j,)): c for k, c in enumerate(inv)}


@dataclass(frozen=True)
class Product(SpaceExpr):
    """Aronszajn product: kernel ``K_left * K_right``, Hessians add."""

    left: SpaceExpr
    right: SpaceExpr

    def __post_init__(self):
        if self.left.nvars != self.right.nvars:
            raise DimensionError(
                f"Product operands have {self.left.nvars} and {self.right.nvars} variables"
            )

    @property
    def nvars(self):
        return self.left.nvars

    def validate(self, x, margin=0.0):
        self.left.validate(x, margin)
        self.right.validate(x, margin)

    def kernel(self, x, y):
        return self.left.kernel(x, y) * self.right.kernel(x, y)

    def log_kernel_diag(self, x):
        return self.left.log_kernel_diag(x) + self.right.log_kernel_diag(x)

    def hessian(self, x):
        return self.left.hessian(x) + self.right.hessian(x)

    def atoms(self):
        yield from self.left.atoms()
        yield from self.right.atoms()

    def basis(self, truncation=None):
        return _basis_product(self.left.basis(truncation), self.right.basis(truncation))


@dataclass(frozen=True)
class Power(SpaceExpr):
    base: SpaceExpr
    exponent: int

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ValueError(f"Power exponent must be a positive integer, got {self.exponent}")

    @property
    def nvars(self):
        return self.base.nvars

    def validate(self, x, margin=0.0):
        self.base.validate(x, margin)

    def kernel(self, x, y):
        return self.base.kernel(x, y) ** self.exponent

    def log_kernel_diag(self, x):
        return self.exponent * self.base.log_kernel_diag(x)

    def hessian(self, x):
        return self.exponent * self.base.hessian(x)

    def atoms(self):
        return self.base.atoms()

    def basis(self, truncation=None):
        base = self.base.basis(truncation)
        out = base
        for _ in range(self.exponent - 1):
            out = _basis_product(out, base)
        return out


@dataclass(frozen=True)
class CoordinateTensor(SpaceExpr):
    """Tensor product over disjoint coordinate blocks, in order."""

    factors: tuple

    def __init__(self, factors: Sequence[SpaceExpr]):
        factors = tuple(factors)
        if not factors:
            raise ValueError("CoordinateTensor needs at least one factor")
        object.__setattr__(self, "factors", factors)

    @property
    def nvars(self):
        return sum(f.nvars for f in self.factors)

    def _blocks(self):
        start = 0
        for f in self.factors:
            yield f, slice(start, start + f.nvars)
            start += f.nvars

    def validate(self, x, margin=0.0):
        for f, s in self._blocks():
            f.validate(x[..., s], margin)

    def kernel(self, x, y):
        out = 1.0
        for f, s in self._blocks():
            out = out * f.kernel(x[..., s], y[..., s])
        return out

    def log_kernel_diag(self, x):
        return sum(f.log_kernel_diag(x[..., s]) for f, s in self._blocks())

    def hessian(self, x):
        h = np.zeros(x.shape[:-1] + (self.nvars, self.nvars), dtype=complex)
        for f, s in self._blocks():
            h[..., s, s] = f.hessian(x[..., s])
        return h

    def atoms(self):
        for f in self.factors:
            yield from f.atoms()

    def basis(self, truncation=None):
        out = {((), ()): 1.0}
        for f in self.factors:
            fb = f.basis(truncation)
            out = {
                (ka[0] + kb[0], ka[1] + kb[1]): ca * cb
                for ka, ca in out.items()
                for kb, cb in fb.items()
            }
        return out


def product(*spaces: SpaceExpr) -> SpaceExpr:
    """Left-folded ``Product`` of one or more spaces."""
    if not spaces:
        raise ValueError("product of no spaces")
    out = spaces[0]
    for s in spaces[1:]:
        out = Product(out, s)
    return out


def _basis_product(a: dict, b: dict) -> dict:
    def add(ka, kb):
        return (_add_int(ka[0], kb[0]), tuple(x + y for x, y in zip(ka[1], kb[1])))

    return _convolve(a, b, add)


# ---------------------------------------------------------------------------
# numerics shared by the exponential-sum atoms
# ---------------------------------------------------------------------------


def _logsumexp(t: np.ndarray) -> np.ndarray:
    m = np.max(t, axis=-1)
    return m + np.log(np.sum(np.exp(t - m[..., None]), axis=-1))


def _sum_exp(t: np.ndarray) -> np.ndarray:
    """``sum exp(t)`` over the last axis for complex t, shifted by max Re t."""
    m = np.max(t.real, axis=-1)
    if np.any(m > _EXP_MAX):
        raise KernelOverflow("kernel value exceeds double precision range")
    return np.exp(m) * np.sum(np.exp(t - m[..., None]), axis=-1)


def _covariance(logw: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Hermitian covariance ``E[v_j conj(v_k)] - E[v_j] E[conj(v_k)]`` of the rows of
    ``values`` under the probabilities ``softmax(logw)``.

    Values are centred at the most probable row first, so tiny covariances far
    out on the torus keep their relative accuracy.
    """
    idx = np.argmax(logw, axis=-1)
    m = np.take_along_axis(logw, idx[..., None], axis=-1)
    p = np.exp(logw - m)
    p /= np.sum(p, axis=-1, keepdims=True)
    d = values[None, ...] - values[idx.reshape(-1)][:, None, :]
    d = d.reshape(idx.shape + values.shape)
    mean = np.einsum("...t,...tj->...j", p, d)
    second = np.einsum("...t,...tj,...tk->...jk", p, d, np.conj(d))
    return (second - mean[..., :, None] * np.conj(mean)[..., None, :]).astype(complex)


# ---------------------------------------------------------------------------
# public point-wise operations
# ---------------------------------------------------------------------------


def kernel_eval(space: SpaceExpr, x, y) -> complex:
    """Reproducing kernel ``K(x, y)`` of ``space`` at two points."""
    x = _points(x, space.nvars)
    y = _points(y, space.nvars)
    space.validate(x)
    space.validate(y)
    with np.errstate(over="ignore", invalid="ignore"):
        value = complex(space.kernel(x, y))
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise KernelOverflow(f"kernel of {space!r} is not finite at the given points")
    return value


def log_hessian(space: SpaceExpr, x) -> HermitianField:
    """Closed-form ``d d-bar log K(x, x)`` at one point."""
    x = _points(x, space.nvars)
    space.validate(x)
    with np.errstate(all="ignore"):
        logk = space.log_kernel_diag(x)
        h = space.hessian(x)
    if not np.isfinite(logk):
        raise SingularEvaluation(f"log K(x, x) is not finite for {space!r} at {x}")
    if not np.all(np.isfinite(h)):
        raise SingularEvaluation(f"Hessian of log K is not finite for {space!r} at {x}")
    return HermitianField(point=x, matrix=np.asarray(h, dtype=complex))


def log_hessian_fd(space: SpaceExpr, x, h: float = 1e-4) -> HermitianField:
    """Central-difference approximation of ``d d-bar log K(x, x)``.

    Each real second derivative uses the four-point stencil
    ``[phi(+u+v) - phi(+u-v) - phi(-u+v) + phi(-u-v)] / 4h^2``
    along real directions u, v in {Re x_j, Im x_j}.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    x = _points(x, space.nvars)
    n = space.nvars
    space.validate(x, margin=2 * h)

    # real directions: 0..n-1 real parts, n..2n-1 imaginary parts
    dirs = np.concatenate([np.eye(n), 1j * np.eye(n)]).astype(complex) * h
    signs = np.array([(1, 1), (1, -1), (-1, 1), (-1, -1)])
    stencil = (
        x[None, None, None, :]
        + signs[None, None, :, 0, None] * dirs[:, None, None, :]
        + signs[None, None, :, 1, None] * dirs[None, :, None, :]
    )
    with np.errstate(all="ignore"):
        phi = space.log_kernel_diag(stencil)
    if not np.all(np.isfinite(phi)):
        raise SingularEvaluation("log K(x, x) is not finite on the difference stencil")
    d2 = (phi[..., 0] - phi[..., 1] - phi[..., 2] + phi[..., 3]) / (4 * h * h)
    xx, yy = d2[:n, :n], d2[n:, n:]
    xy, yx = d2[:n, n:], d2[n:, :n]
    mat = 0.25 * (xx + yy + 1j * (xy - yx))
    return HermitianField(point=x, matrix=mat)


def check_diagonal_condition(space: SpaceExpr) -> bool:
    """True when every atom of the tree has a diagonal orthonormal basis.

    Then products of basis elements are orthogonal or colinear and the product
    basis weights follow by convolution. False only means the explicit basis is
    unavailable; kernels and Hessians stay valid.
    """
    return all(getattr(atom, "diagonal", False) for atom in space.atoms())


def diagonal_basis(space: SpaceExpr, truncation: int | None = None) -> dict:
    """``{(a, b): c}`` for the orthonormal basis ``sqrt(c) x^a exp(b.x)``, sorted."""
    if not check_diagonal_condition(space):
        raise NonDiagonalSpace(f"{space!r} has an atom without a diagonal basis")
    basis = space.basis(truncation)
    return dict(sorted(basis.items(), key=lambda kv: (kv[0][0], [(v.real, v.imag) for v in kv[0][1]])))


def support_weights(space: SpaceExpr) -> SupportWeights:
    """The monomial weights of a polynomial-type diagonal space.

    Raises NonDiagonalSpace when the space has exponential factors or an
    infinite-dimensional atom.
    """
    basis = diagonal_basis(space)
    if any(any(v != 0 for v in b) for (_, b) in basis):
        raise NonDiagonalSpace(f"{space!r} has exponential basis functions")
    return SupportWeights({a: c for (a, _), c in basis.items()})
