"""Expected zero counts of Gaussian random systems drawn from fewspaces.

Kernels and Kähler-form Hessians of reproducing-kernel spaces of analytic
functions, quadrature of the resulting zero densities, Monte Carlo zero
counts, and Newton-polytope root counts to cross-check them.
"""

from .density import (
    MixedDensityQuery,
    density,
    density_at,
    mixed_determinant,
    multilinear_coefficient,
    theorem_main_check,
)
from .errors import FewspaceError
from .montecarlo import MCReport, count_zeros_disk, mc_expected_count, sample_function
from .polytope import LatticeSupport, bernstein_count, hull_volume, kushnirenko_check
from .quad import (
    CountEstimate,
    Domain,
    annulus,
    disk,
    integrate_density,
    plane,
    polydisk,
    rectangle,
    torus,
    unmixed_power_count,
)
from .spaces import (
    GEF,
    CoordinateTensor,
    ExpSpan,
    HermitianField,
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
    product,
    product_weights,
    support_weights,
)

__version__ = "0.1.0"
