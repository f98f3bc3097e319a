import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fewspace.errors import DimensionError, DomainError, KernelOverflow, NonDiagonalSpace
from fewspace.spaces import (
    GEF,
    Atom,
    CoordinateTensor,
    ExpSpan,
    HyperbolicGAF,
    Power,
    Product,
    SparseLaurent,
    SupportWeights,
    Weyl,
    check_diagonal_condition,
    diagonal_basis,
    kernel_eval,
    log_hessian,
    log_hessian_fd,
    product_weights,
    support_weights,
)

E = ExpSpan([0, 1])
LAURENT = SparseLaurent({-1: 0.5, 0: 1.0, 2: 3.0})

ONE_VAR = [
    Weyl(0),
    Weyl(3),
    E,
    ExpSpan([0, 1j, -0.5 + 0.25j]),
    LAURENT,
    HyperbolicGAF(),
    GEF(),
    Product(E, Weyl(2)),
    Power(HyperbolicGAF(), 3),
    Product(LAURENT, Power(Weyl(1), 2)),
]

TWO_VAR = [
    Weyl(2, 2),
    ExpSpan([[0, 0], [1, 0], [0, 1j], [1, 1]]),
    SparseLaurent({(0, 0): 1, (1, 0): 2, (0, 1): 0.5, (1, 2): 1}),
    CoordinateTensor([Product(E, Weyl(2)), GEF()]),
    CoordinateTensor([HyperbolicGAF(), Weyl(1)]),
    Product(Weyl(1, 2), CoordinateTensor([E, E])),
]


def _point(rng, space):
    # keep away from 0 (Laurent poles) and from the unit circle (GAF)
    n = space.nvars
    return rng.uniform(0.25, 0.85, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


# ---------------------------------------------------------------------------
# kernel_eval
# ---------------------------------------------------------------------------


def test_kernel_examples():
    assert kernel_eval(Weyl(2, 1), 1, 1) == pytest.approx(4)
    assert kernel_eval(E, 0, 0) == pytest.approx(2)
    assert kernel_eval(HyperbolicGAF(), 0, 0) == pytest.approx(1)
    assert kernel_eval(Product(Weyl(1), Weyl(1)), 1, 1) == pytest.approx(
        kernel_eval(Weyl(2), 1, 1)
    )


def test_kernel_closed_forms():
    x, y = 0.3 + 0.4j, -0.2 + 0.1j
    assert kernel_eval(E, x, y) == pytest.approx(1 + np.exp(x + np.conj(y)), rel=1e-14)
    assert kernel_eval(GEF(), x, y) == pytest.approx(np.exp(x * np.conj(y)), rel=1e-14)
    assert kernel_eval(HyperbolicGAF(), x, y) == pytest.approx(1 / (1 - x * np.conj(y)), rel=1e-14)
    expect = 0.5 * (x * np.conj(y)) ** -1 + 1.0 + 3.0 * (x * np.conj(y)) ** 2
    assert kernel_eval(LAURENT, x, y) == pytest.approx(expect, rel=1e-13)


def test_kernel_is_sum_over_orthonormal_basis():
    # K(x, y) = sum_i phi_i(x) conj(phi_i(y)) for the explicit diagonal basis
    rng = np.random.default_rng(3)
    for space in [Weyl(3), Product(E, Weyl(2)), LAURENT, Weyl(2, 2), CoordinateTensor([E, Weyl(1)])]:
        x, y = _point(rng, space), _point(rng, space)
        total = 0j
        for (a, b), c in diagonal_basis(space).items():
            a, b = np.array(a), np.array(b)
            phi_x = math.sqrt(c) * np.prod(x**a) * np.exp(b @ x)
            phi_y = math.sqrt(c) * np.prod(y**a) * np.exp(b @ y)
            total += phi_x * np.conj(phi_y)
        assert kernel_eval(space, x, y) == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("space", ONE_VAR + TWO_VAR, ids=repr)
def test_kernel_hermitian_and_positive(space):
    rng = np.random.default_rng(11)
    for _ in range(20):
        x, y = _point(rng, space), _point(rng, space)
        kxy = kernel_eval(space, x, y)
        kyx = kernel_eval(space, y, x)
        assert abs(kxy - np.conj(kyx)) <= 1e-12 * max(1.0, abs(kxy))
        kxx = kernel_eval(space, x, x)
        assert abs(kxx.imag) <= 1e-12 * abs(kxx)
        assert kxx.real > 0


@settings(max_examples=60, deadline=None)
@given(
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.integers(0, 6),
)
def test_kernel_hermitian_property(x, y, d):
    space = Product(E, Weyl(d))
    kxy, kyx = kernel_eval(space, x, y), kernel_eval(space, y, x)
    assert abs(kxy - np.conj(kyx)) <= 1e-12 * max(1.0, abs(kxy))


def test_kernel_errors():
    with pytest.raises(DimensionError):
        kernel_eval(Weyl(2, 2), [1, 2, 3], [1, 2])
    with pytest.raises(DomainError):
        kernel_eval(LAURENT, 0, 1)
    with pytest.raises(DomainError):
        kernel_eval(HyperbolicGAF(), 1.0, 0)
    with pytest.raises(KernelOverflow):
        kernel_eval(GEF(), 40, 40)
    with pytest.raises(DimensionError):
        Product(Weyl(1, 1), Weyl(1, 2))


def test_weyl_zero_is_constant():
    assert kernel_eval(Weyl(0, 2), [1 + 1j, 2], [3, -1j]) == 1
    np.testing.assert_array_equal(log_hessian(Weyl(0, 2), [0.3, 0.1j]).matrix, np.zeros((2, 2)))


def test_power_one_is_identity():
    rng = np.random.default_rng(0)
    for space in ONE_VAR + TWO_VAR:
        x, y = _point(rng, space), _point(rng, space)
        assert kernel_eval(Power(space, 1), x, y) == kernel_eval(space, x, y)
        np.testing.assert_array_equal(
            log_hessian(Power(space, 1), x).matrix, log_hessian(space, x).matrix
        )


def test_log_domain_kernel_far_out():
    # log K stays finite where K itself overflows
    s = SparseLaurent({0: 1.0, 5: 1.0})
    far = np.array([[np.exp(200.0) + 0j]])
    assert np.isfinite(s.log_kernel_diag(far)).all()
    # support {0, 1}: H = |x|^-2 p(1-p) with p = |x|^2/(1+|x|^2), ~1 near 0 and ~|x|^-4 far out
    lin = SparseLaurent({0: 1.0, 1: 1.0})
    assert log_hessian(lin, np.exp(-150.0)).matrix[0, 0].real == pytest.approx(1.0, rel=1e-12)
    assert log_hessian(lin, np.exp(100.0)).matrix[0, 0].real == pytest.approx(np.exp(-400.0), rel=1e-10)


# ---------------------------------------------------------------------------
# log_hessian
# ---------------------------------------------------------------------------


def test_hessian_examples():
    assert log_hessian(HyperbolicGAF(), 0).matrix == pytest.approx(np.array([[1.0]]))
    for z in [0, 1 + 1j, -3.5j]:
        assert log_hessian(GEF(), z).matrix == pytest.approx(np.array([[1.0]]))
    assert log_hessian(E, 0).matrix == pytest.approx(np.array([[0.25]]), abs=1e-15)
    assert log_hessian(Power(HyperbolicGAF(), 3), 0).matrix == pytest.approx(np.array([[3.0]]))


def test_hessian_closed_forms_one_variable():
    for z in [0.2, -0.5 + 0.3j, 0.7j]:
        x = z.real
        assert log_hessian(E, z).matrix[0, 0] == pytest.approx(
            np.exp(2 * x) / (1 + np.exp(2 * x)) ** 2, rel=1e-13
        )
        assert log_hessian(Weyl(4), z).matrix[0, 0] == pytest.approx(
            4 / (1 + abs(z) ** 2) ** 2, rel=1e-13
        )
        assert log_hessian(HyperbolicGAF(), z).matrix[0, 0] == pytest.approx(
            1 / (1 - abs(z) ** 2) ** 2, rel=1e-13
        )


def test_fd_examples():
    assert log_hessian_fd(GEF(), 1 + 1j, 1e-4).matrix == pytest.approx(np.array([[1.0]]), abs=1e-6)
    assert log_hessian_fd(E, 0, 1e-4).matrix == pytest.approx(np.array([[0.25]]), abs=1e-6)
    x = [0.3, -0.2j]
    an = log_hessian(Weyl(5, 2), x).matrix
    fd = log_hessian_fd(Weyl(5, 2), x, 1e-4).matrix
    assert np.max(np.abs(an - fd)) <= 1e-5 * np.max(np.abs(an))


@pytest.mark.parametrize("space", ONE_VAR + TWO_VAR, ids=repr)
def test_analytic_hessian_matches_fd(space):
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = _point(rng, space)
        an = log_hessian(space, x).matrix
        fd = log_hessian_fd(space, x, 1e-4).matrix
        scale = max(np.max(np.abs(an)), 1e-3)
        assert np.max(np.abs(an - fd)) <= 1e-5 * scale + 1e-8


def test_fd_stencil_leaving_domain():
    with pytest.raises(DomainError):
        log_hessian_fd(LAURENT, 1e-5, 1e-4)
    with pytest.raises(DomainError):
        log_hessian_fd(HyperbolicGAF(), 0.99995, 1e-4)


@pytest.mark.parametrize("space", ONE_VAR + TWO_VAR, ids=repr)
def test_hessian_hermitian_psd(space):
    rng = np.random.default_rng(8)
    for _ in range(20):
        field = log_hessian(space, _point(rng, space))
        assert field.is_hermitian(1e-12)
        assert field.is_psd(1e-10)


@pytest.mark.parametrize(
    "e,f",
    [(E, Weyl(3)), (LAURENT, GEF()), (HyperbolicGAF(), E), (Weyl(2, 2), TWO_VAR[1]),
     (TWO_VAR[2], Weyl(1, 2))],
    ids=repr,
)
def test_hessian_additivity(e, f):
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = _point(rng, e)
        h_prod = log_hessian(Product(e, f), x).matrix
        # the product node adds the factor Hessians exactly
        np.testing.assert_array_equal(h_prod, log_hessian(e, x).matrix + log_hessian(f, x).matrix)
        fd = log_hessian_fd(Product(e, f), x).matrix
        assert np.max(np.abs(h_prod - fd)) <= 1e-5 * max(1.0, np.max(np.abs(h_prod)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_hessian_power_rule(lam, a, b):
    for space in (E, Weyl(2), HyperbolicGAF(), LAURENT):
        z = complex(a, b) if abs(complex(a, b)) > 0.05 else 0.3
        if isinstance(space, HyperbolicGAF) and abs(z) >= 0.99:
            continue
        np.testing.assert_array_equal(
            log_hessian(Power(space, lam), z).matrix, lam * log_hessian(space, z).matrix
        )


def test_tensor_is_block_diagonal():
    t = CoordinateTensor([Weyl(2, 2), E])
    h = log_hessian(t, [0.1, 0.2j, 0.5]).matrix
    np.testing.assert_allclose(h[:2, :2], log_hessian(Weyl(2, 2), [0.1, 0.2j]).matrix)
    assert h[2, 2] == pytest.approx(log_hessian(E, 0.5).matrix[0, 0])
    assert np.all(h[:2, 2] == 0) and np.all(h[2, :2] == 0)


# ---------------------------------------------------------------------------
# weights and diagonal bases
# ---------------------------------------------------------------------------


def test_product_weights_examples():
    a = SupportWeights({0: 1, 1: 1})
    assert product_weights(a, a) == SupportWeights({0: 1, 1: 2, 2: 1})
    single = product_weights(SupportWeights({(2, 3): 5}), SupportWeights({(1, 1): 2}))
    assert single == SupportWeights({(3, 4): 10})


@pytest.mark.parametrize("n,d", [(1, 5), (2, 3), (3, 2)])
def test_weyl_weights_are_multinomials(n, d):
    linear = support_weights(Weyl(1, n))
    acc = linear
    for _ in range(d - 1):
        acc = product_weights(acc, linear)
    for a, c in acc.items():
        a0 = d - sum(a)
        expect = math.factorial(d) / math.prod(math.factorial(k) for k in (a0, *a))
        assert c == expect
    assert acc == support_weights(Weyl(d, n))


def test_compositions_count():
    # weights of F_A^lambda count ordered compositions
    a = SupportWeights.uniform([0, 1, 2])
    cube = support_weights(Power(SparseLaurent(a), 3))
    brute = {}
    for i in range(3):
        for j in range(3):
            for k in range(3):
                brute[i + j + k] = brute.get(i + j + k, 0) + 1
    assert cube == SupportWeights(brute)


def test_support_weights_validation():
    with pytest.raises(ValueError):
        SupportWeights({})
    with pytest.raises(ValueError):
        SupportWeights({0: 0.0})
    with pytest.raises(ValueError):
        SupportWeights({(0,): 1, 0: 2})
    with pytest.raises(DimensionError):
        product_weights(SupportWeights({0: 1}), SupportWeights({(0, 0): 1}))


def _random_weights(rng, n):
    k = rng.integers(1, 6)
    pts = {tuple(rng.integers(-2, 4, n)) for _ in range(k)}
    return SupportWeights({p: rng.uniform(0.1, 3.0) for p in pts})


@pytest.mark.parametrize("n", [1, 2])
def test_weight_kernel_consistency(n):
    rng = np.random.default_rng(17 + n)
    for _ in range(20):
        a, b = _random_weights(rng, n), _random_weights(rng, n)
        ab = product_weights(a, b)
        x = rng.uniform(0.3, 1.5, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        y = rng.uniform(0.3, 1.5, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        direct = sum(c * np.prod(x ** np.array(s)) * np.prod(np.conj(y) ** np.array(s))
                     for s, c in ab.items())
        expect = kernel_eval(SparseLaurent(a), x, y) * kernel_eval(SparseLaurent(b), x, y)
        assert abs(direct - expect) <= 1e-10 * abs(expect)


def test_diagonal_condition():
    assert check_diagonal_condition(Product(Weyl(2, 1), E))
    for s in ONE_VAR + TWO_VAR:
        assert check_diagonal_condition(s)

    class ShiftedBasis(Atom):
        """An atom with orthonormal basis (1, 1 + x)."""

        diagonal = False
        nvars = 1

        def kernel(self, x, y):
            return 1 + (1 + x[..., 0]) * np.conj(1 + y[..., 0])

    odd = ShiftedBasis()
    assert not check_diagonal_condition(Product(Weyl(1), odd))
    with pytest.raises(NonDiagonalSpace):
        diagonal_basis(Product(Weyl(1), odd))
    # kernels of such spaces remain usable
    assert kernel_eval(Product(Weyl(1), odd), 0, 0) == pytest.approx(2.0)


def test_exponential_product_basis_has_singleton_classes():
    basis = diagonal_basis(Product(E, Weyl(3)))
    assert len(basis) == 8
    for (a, b), c in basis.items():
        assert c == math.comb(3, a[0])
        assert b[0] in (0, 1)
    with pytest.raises(NonDiagonalSpace):
        support_weights(Product(E, Weyl(3)))


def test_infinite_atoms_need_truncation():
    with pytest.raises(NonDiagonalSpace):
        diagonal_basis(GEF())
    basis = diagonal_basis(GEF(), truncation=4)
    assert [c for c in basis.values()] == [1 / math.factorial(k) for k in range(5)]
