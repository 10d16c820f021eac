"""FFT-based derivatives and compatibility diagnostics for gridded fields."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fields import Grid2, ScalarField2, TensorField2, OFFDIAG_WEIGHT


@dataclass(frozen=True)
class SpectralPlan:
    """Shared settings for spectral derivatives.

    pad_factor enlarges the transform window to decouple the periodic images
    of compactly supported fields.  cutoff_fraction < 1 applies a radial
    brick-wall low-pass at that fraction of the Nyquist frequency (useful on
    noisy reconstructions); 1.0 keeps every mode.
    """

    grid: Grid2
    pad_factor: int = 2
    cutoff_fraction: float = 1.0

    def __post_init__(self):
        if int(self.pad_factor) != self.pad_factor or self.pad_factor < 1:
            raise ValueError("pad_factor must be an integer >= 1")
        if not (0.0 < self.cutoff_fraction <= 1.0):
            raise ValueError("cutoff_fraction must lie in (0, 1]")


def _apply_multiplier(values: np.ndarray, plan: SpectralPlan, orders: tuple[int, int]) -> np.ndarray:
    """ifft2( multiplier * fft2(zero-padded values) ), cropped back.

    orders = (mx, my) gives the multiplier (2*pi*i*fx)^mx * (2*pi*i*fy)^my.
    """
    g = plan.grid
    ny, nx = values.shape
    Nx, Ny = plan.pad_factor * nx, plan.pad_factor * ny
    buf = np.zeros((Ny, Nx))
    buf[:ny, :nx] = values
    F = np.fft.fft2(buf)
    fx = np.fft.fftfreq(Nx, d=g.dx)[None, :]
    fy = np.fft.fftfreq(Ny, d=g.dy)[:, None]
    mx, my = orders
    mult = (2j * np.pi * fx) ** mx * (2j * np.pi * fy) ** my
    # an odd-order derivative has no consistent real value at the unpaired
    # Nyquist mode of an even-length axis; drop it
    if mx % 2 == 1 and Nx % 2 == 0:
        mult[:, Nx // 2] = 0.0
    if my % 2 == 1 and Ny % 2 == 0:
        mult[Ny // 2, :] = 0.0
    if plan.cutoff_fraction < 1.0:
        fx_ny = 0.5 / g.dx
        fy_ny = 0.5 / g.dy
        rho2 = (fx / fx_ny) ** 2 + (fy / fy_ny) ** 2
        mult = np.where(rho2 > plan.cutoff_fraction**2, 0.0, mult)
    out = np.fft.ifft2(F * mult).real
    return out[:ny, :nx]


def mixed_derivative(f: ScalarField2, mx: int, my: int, plan: SpectralPlan) -> ScalarField2:
    """Mixed partial d^mx/dx^mx d^my/dy^my of a scalar field."""
    if f.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    if mx < 0 or my < 0 or mx + my == 0:
        raise ValueError("derivative orders must be non-negative and not both zero")
    return ScalarField2(f.grid, _apply_multiplier(f.values, plan, (mx, my)))


def fft_derivative(f: ScalarField2, axis: str, order: int, plan: SpectralPlan) -> ScalarField2:
    """Spectral derivative of given order (1 or 2) along 'x' or 'y'."""
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    orders = (order, 0) if axis == "x" else (0, order)
    return mixed_derivative(f, orders[0], orders[1], plan)


def divergence(f: TensorField2, plan: SpectralPlan) -> tuple[ScalarField2, ScalarField2]:
    """Row divergence (d/dx c11 + d/dy c12, d/dx c12 + d/dy c22)."""
    if f.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    d1 = _apply_multiplier(f.c11, plan, (1, 0)) + _apply_multiplier(f.c12, plan, (0, 1))
    d2 = _apply_multiplier(f.c12, plan, (1, 0)) + _apply_multiplier(f.c22, plan, (0, 1))
    return ScalarField2(f.grid, d1), ScalarField2(f.grid, d2)


def gradient_scale(f: TensorField2, plan: SpectralPlan) -> float:
    """RMS of all first partials of the components (Frobenius weighting)."""
    total = 0.0
    n = 0
    for comp, w in ((f.c11, 1.0), (f.c22, 1.0), (f.c12, OFFDIAG_WEIGHT)):
        for orders in ((1, 0), (0, 1)):
            d = _apply_multiplier(comp, plan, orders)
            total += w * float(np.sum(d * d))
            n += d.size
    return float(np.sqrt(total / n))


def divergence_rms(f: TensorField2, plan: SpectralPlan) -> float:
    d1, d2 = divergence(f, plan)
    return float(np.sqrt(np.mean(d1.values**2 + d2.values**2)))


def saint_venant(f: TensorField2, plan: SpectralPlan) -> ScalarField2:
    """2D incompatibility: d2/dy2 c11 + d2/dx2 c22 - 2 d2/dxdy c12.

    Vanishes identically on any symmetrised gradient; equals the squared
    Laplacian of the potential for a perpendicular-Hessian stress field.
    """
    if f.grid != plan.grid:
        raise ValueError("field grid does not match the plan grid")
    w = (
        _apply_multiplier(f.c11, plan, (0, 2))
        + _apply_multiplier(f.c22, plan, (2, 0))
        - 2.0 * _apply_multiplier(f.c12, plan, (1, 1))
    )
    return ScalarField2(f.grid, w)


def airy_from_stress(sigma: TensorField2, warn_tol: float = 1e-3) -> ScalarField2:
    """Stress potential from a divergence-free stress field.

    psi(x, y) is the double cumulative integral of sigma12 over the quadrant
    {s < x, t > y}, accumulated by midpoint summation; the corner where the
    quadrant covers the whole grid carries the (vanishing) total integral.
    Warns if sigma is measurably not divergence-free.
    """
    g = sigma.grid
    plan = SpectralPlan(grid=g)
    scale = gradient_scale(sigma, plan)
    if scale > 0 and divergence_rms(sigma, plan) > warn_tol * scale:
        warnings.warn(
            "stress field is not divergence-free; the recovered potential "
            "will not reproduce it",
            stacklevel=2,
        )
    s12 = sigma.c12
    # over {s < x}: cumulative sum along x with half weight on the current cell
    cum_x = (np.cumsum(s12, axis=1) - 0.5 * s12) * g.dx
    # over {t > y}: reversed cumulative sum along y, again midpoint weighted
    rev = np.cumsum(cum_x[::-1, :], axis=0)[::-1, :]
    psi = (rev - 0.5 * cum_x) * g.dy
    return ScalarField2(g, psi)


def biharmonic_residual(
    psi: ScalarField2, sf: TensorField2, E: float, plan: SpectralPlan
) -> ScalarField2:
    """Diagnostic residual Lap^2 psi - E*(d2/dy2 sf11 - 2 d2/dxdy sf12 + d2/dx2 sf22).

    Zero (to discretisation error) when psi is the potential of the
    divergence-free strain part sf.  This is a consistency check only;
    recovering psi by solving the biharmonic equation is out of scope.
    """
    if psi.grid != plan.grid or sf.grid != plan.grid:
        raise ValueError("field grids do not match the plan grid")
    lap2 = (
        _apply_multiplier(psi.values, plan, (4, 0))
        + 2.0 * _apply_multiplier(psi.values, plan, (2, 2))
        + _apply_multiplier(psi.values, plan, (0, 4))
    )
    rhs = E * (
        _apply_multiplier(sf.c11, plan, (0, 2))
        - 2.0 * _apply_multiplier(sf.c12, plan, (1, 1))
        + _apply_multiplier(sf.c22, plan, (2, 0))
    )
    return ScalarField2(psi.grid, lap2 - rhs)
