"""Closed-form residual strain phantoms and their exact derivatives.

Two families are provided: a smooth two-Gaussian stress-potential phantom
and a piecewise-polynomial axisymmetric phantom supported on the unit disk.
Both satisfy internal equilibrium, so their solenoidal (divergence-free)
strain part is recoverable from longitudinal ray transform data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite

from .fields import Grid2, ScalarField2, TensorField2, Mask2

PLANE_STRESS = "plane_stress"
PLANE_STRAIN = "plane_strain"


@dataclass(frozen=True)
class ElasticConstants:
    """Isotropic elastic constants and the 2D reduction mode."""

    E: float
    nu: float
    mode: str = PLANE_STRESS

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Young's modulus must be positive")
        if not (-1.0 < self.nu < 0.5):
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")
        if self.mode not in (PLANE_STRESS, PLANE_STRAIN):
            raise ValueError(f"unknown mode {self.mode!r}")


def default_grid(n: int = 400) -> Grid2:
    """Default square grid: unit disk padded ~20 percent, 0.006 spacing at n=400."""
    span = 2.394
    return Grid2.centered(n, n, span / (n - 1), span / (n - 1))


@dataclass(frozen=True)
class AirySpec:
    """Two-Gaussian stress potential: psi = g(-1/4) - g(+1/4) with
    g(x0) = exp(-alpha*((x - x0)^2 + y^2))."""

    alpha: float = 15.0
    constants: ElasticConstants = field(
        default_factory=lambda: ElasticConstants(1.0, 0.34, PLANE_STRESS)
    )
    grid: Grid2 = field(default_factory=default_grid)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def _gauss_derivative(u: np.ndarray, alpha: float, m: int) -> np.ndarray:
    """m-th derivative of exp(-alpha*u^2) via physicists' Hermite polynomials."""
    g = np.exp(-alpha * u * u)
    if m == 0:
        return g
    coef = np.zeros(m + 1)
    coef[m] = 1.0
    h = hermite.hermval(np.sqrt(alpha) * u, coef)
    return (-1.0) ** m * alpha ** (m / 2.0) * h * g


def airy_derivative(spec: AirySpec, mx: int, my: int, grid: Grid2 | None = None) -> np.ndarray:
    """Exact partial derivative d^mx/dx^mx d^my/dy^my of the potential.

    The potential is separable per Gaussian, so the derivative factors into
    1D Hermite-weighted Gaussians.
    """
    if mx < 0 or my < 0:
        raise ValueError("derivative orders must be non-negative")
    g = grid if grid is not None else spec.grid
    x = g.x()[None, :]
    y = g.y()[:, None]
    fy = _gauss_derivative(y, spec.alpha, my)
    fx = _gauss_derivative(x + 0.25, spec.alpha, mx) - _gauss_derivative(
        x - 0.25, spec.alpha, mx
    )
    return fy * fx


def airy_potential(spec: AirySpec) -> ScalarField2:
    return ScalarField2(spec.grid, airy_derivative(spec, 0, 0))


def airy_hessian(spec: AirySpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(psi_xx, psi_yy, psi_xy) evaluated exactly on the configured grid."""
    return (
        airy_derivative(spec, 2, 0),
        airy_derivative(spec, 0, 2),
        airy_derivative(spec, 1, 1),
    )


def strain_from_potential_hessian(
    pxx: np.ndarray, pyy: np.ndarray, pxy: np.ndarray, constants: ElasticConstants, grid: Grid2
) -> TensorField2:
    """Full strain from a stress potential's second derivatives.

    The stress is the perpendicular Hessian (sigma11, sigma22, sigma12) =
    (psi_yy, psi_xx, -psi_xy); strain follows from the compliance of the
    chosen 2D reduction.
    """
    E, nu = constants.E, constants.nu
    if constants.mode == PLANE_STRESS:
        c11 = (pyy - nu * pxx) / E
        c22 = (pxx - nu * pyy) / E
        c12 = -(1.0 + nu) * pxy / E
    else:
        c11 = (1.0 + nu) * ((1.0 - nu) * pyy - nu * pxx) / E
        c22 = (1.0 + nu) * ((1.0 - nu) * pxx - nu * pyy) / E
        c12 = -(1.0 + nu) * pxy / E
    return TensorField2(grid, c11, c22, c12)


def strain_from_airy(
    psi: ScalarField2,
    constants: ElasticConstants,
    hessian: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> TensorField2:
    """Full strain of a stress-potential field.

    When the exact Hessian is available (as for the two-Gaussian phantom)
    pass it; otherwise the second derivatives are taken spectrally.
    """
    if hessian is None:
        from .spectral import SpectralPlan, fft_derivative, mixed_derivative

        plan = SpectralPlan(grid=psi.grid)
        pxx = fft_derivative(psi, "x", 2, plan).values
        pyy = fft_derivative(psi, "y", 2, plan).values
        pxy = mixed_derivative(psi, 1, 1, plan).values
    else:
        pxx, pyy, pxy = hessian
    return strain_from_potential_hessian(pxx, pyy, pxy, constants, psi.grid)


def airy_strain(spec: AirySpec) -> TensorField2:
    """Full strain of the two-Gaussian phantom from exact derivatives."""
    pxx, pyy, pxy = airy_hessian(spec)
    return strain_from_potential_hessian(pxx, pyy, pxy, spec.constants, spec.grid)


def airy_solenoidal(spec: AirySpec) -> TensorField2:
    """Divergence-free strain part: the perpendicular Hessian of the potential
    scaled by 1/E (plane stress) or (1 - nu^2)/E (plane strain)."""
    pxx, pyy, pxy = airy_hessian(spec)
    E, nu = spec.constants.E, spec.constants.nu
    f = 1.0 / E if spec.constants.mode == PLANE_STRESS else (1.0 - nu * nu) / E
    return TensorField2(spec.grid, f * pyy, f * pxx, -f * pxy)


def airy_potential_part(spec: AirySpec) -> TensorField2:
    """Potential strain part d(omega): a scaled ordinary Hessian of psi."""
    pxx, pyy, pxy = airy_hessian(spec)
    E, nu = spec.constants.E, spec.constants.nu
    f = -nu / E if spec.constants.mode == PLANE_STRESS else -nu * (1.0 + nu) / E
    return TensorField2(spec.grid, f * pxx, f * pyy, f * pxy)


def airy_laplacian(spec: AirySpec) -> ScalarField2:
    return ScalarField2(
        spec.grid, airy_derivative(spec, 2, 0) + airy_derivative(spec, 0, 2)
    )


def airy_biharmonic(spec: AirySpec) -> ScalarField2:
    v = (
        airy_derivative(spec, 4, 0)
        + 2.0 * airy_derivative(spec, 2, 2)
        + airy_derivative(spec, 0, 4)
    )
    return ScalarField2(spec.grid, v)


def axisym_phantom(nu: float, grid: Grid2 | None = None) -> TensorField2:
    """Axisymmetric eigenstrain phantom on the unit disk, zero outside.

    In polar components, for r <= 1:

        err(r)  = (7 + 5*nu + (1 + nu)*(9*r - 16)*r) / 12 - (1 - r)^2
        ett(r)  = (7 + 5*nu + (1 + nu)*(3*r - 8)*r) / 12 - (1 - r)^2

    The associated plane-stress stress field is in equilibrium and the
    radial traction vanishes at r = 1.
    """
    if grid is None:
        grid = default_grid()
    X, Y = grid.meshgrid()
    r = np.hypot(X, Y)
    inside = r <= 1.0
    err = (7.0 + 5.0 * nu + (1.0 + nu) * (9.0 * r - 16.0) * r) / 12.0 - (1.0 - r) ** 2
    ett = (7.0 + 5.0 * nu + (1.0 + nu) * (3.0 * r - 8.0) * r) / 12.0 - (1.0 - r) ** 2
    err = np.where(inside, err, 0.0)
    ett = np.where(inside, ett, 0.0)
    # theta = 0 at the centre: the polar components coincide there, so the
    # Cartesian conversion below is continuous even though theta is not.
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(r > 0, X / np.where(r > 0, r, 1.0), 1.0)
        s = np.where(r > 0, Y / np.where(r > 0, r, 1.0), 0.0)
    c11 = err * c * c + ett * s * s
    c22 = err * s * s + ett * c * c
    c12 = (err - ett) * s * c
    return TensorField2(grid, c11, c22, c12)


def add_hydrostatic(f: TensorField2, mask: Mask2, magnitude: float) -> TensorField2:
    """Add magnitude * identity to the field inside the mask."""
    if f.grid != mask.grid:
        raise ValueError("field and mask are on different grids")
    bump = np.where(mask.inside, magnitude, 0.0)
    return TensorField2(f.grid, f.c11 + bump, f.c22 + bump, f.c12)
