"""Closed-form phantoms checked against independently derived values.

The two-Gaussian potential values below were frozen from a symbolic
evaluation of the closed forms (exact Gaussian derivatives, then the
isotropic stress-to-strain map); the axisymmetric values come from the
radial profiles evaluated by hand.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from straintomo.fields import Grid2, mask_from_support
from straintomo.phantoms import (
    PLANE_STRAIN,
    AirySpec,
    ElasticConstants,
    add_hydrostatic,
    airy_biharmonic,
    airy_derivative,
    airy_laplacian,
    airy_potential,
    airy_potential_part,
    airy_solenoidal,
    airy_strain,
    axisym_phantom,
    default_grid,
)

# grid whose samples land exactly on the two probe points
PROBE_GRID = Grid2(nx=2, ny=2, dx=0.35, dy=0.15, ox=-0.25, oy=-0.15)
AT_PEAK = (1, 0)      # (-1/4, 0)
AT_GENERIC = (0, 1)   # (0.1, -0.15)


class TestElasticConstants:
    def test_validation(self):
        with pytest.raises(ValueError):
            ElasticConstants(E=0.0, nu=0.3)
        with pytest.raises(ValueError):
            ElasticConstants(E=1.0, nu=0.5)
        with pytest.raises(ValueError):
            ElasticConstants(E=1.0, nu=0.3, mode="triaxial")


class TestDefaultGrid:
    def test_spacing_and_origin(self):
        g = default_grid(400)
        assert g.dx == pytest.approx(0.006)
        assert g.ox == pytest.approx(-1.197)
        assert g.nx == g.ny == 400


class TestAiryPotential:
    def test_value_at_first_gaussian_centre(self):
        psi = airy_potential(AirySpec(grid=PROBE_GRID))
        # exp(0) - exp(-15/4)
        assert psi.values[AT_PEAK] == pytest.approx(0.9764822541439909, rel=1e-12)

    def test_odd_in_x(self):
        g = default_grid(64)
        psi = airy_potential(AirySpec(grid=g))
        assert np.allclose(psi.values, -psi.values[:, ::-1], atol=1e-14)

    def test_derivative_matches_finite_differences(self):
        g = default_grid(400)
        spec = AirySpec(grid=g)
        psi = airy_potential(spec)
        dxn = np.gradient(psi.values, g.dx, axis=1)
        assert np.allclose(airy_derivative(spec, 1, 0), dxn, atol=5e-3)

    def test_laplacian_frozen_value(self):
        lap = airy_laplacian(AirySpec(grid=PROBE_GRID))
        assert lap.values[AT_PEAK] == pytest.approx(-63.8804280662415, rel=1e-12)

    def test_biharmonic_frozen_consistency(self):
        # biharmonic = laplacian applied twice; compare on a smooth interior
        g = default_grid(256)
        spec = AirySpec(grid=g)
        lap = airy_laplacian(spec).values
        lxx = np.gradient(np.gradient(lap, g.dx, axis=1), g.dx, axis=1)
        lyy = np.gradient(np.gradient(lap, g.dy, axis=0), g.dy, axis=0)
        bih = airy_biharmonic(spec).values
        inner = (slice(8, -8), slice(8, -8))
        scale = np.max(np.abs(bih))
        assert np.max(np.abs((lxx + lyy - bih)[inner])) / scale < 5e-3


class TestAiryStrain:
    def test_frozen_probe_values(self):
        eps = airy_strain(AirySpec(grid=PROBE_GRID))
        assert eps.c11[AT_PEAK] == pytest.approx(-17.535241074066324, rel=1e-12)
        assert eps.c22[AT_PEAK] == pytest.approx(-24.62584144965307, rel=1e-12)
        assert eps.c12[AT_PEAK] == 0.0
        assert eps.c11[AT_GENERIC] == pytest.approx(-0.9310564045871563, rel=1e-10)
        assert eps.c22[AT_GENERIC] == pytest.approx(12.77008692810695, rel=1e-12)
        assert eps.c12[AT_GENERIC] == pytest.approx(21.009059722850253, rel=1e-12)

    def test_parity_in_x(self):
        # psi odd in x: the diagonal strains are odd, the shear is even
        g = default_grid(64)
        eps = airy_strain(AirySpec(grid=g))
        assert np.allclose(eps.c11, -eps.c11[:, ::-1], atol=1e-12)
        assert np.allclose(eps.c22, -eps.c22[:, ::-1], atol=1e-12)
        assert np.allclose(eps.c12, eps.c12[:, ::-1], atol=1e-12)

    def test_plane_strain_changes_diagonal_only_shear_scale(self):
        g = default_grid(16)
        ps = airy_strain(AirySpec(grid=g))
        cs = ElasticConstants(1.0, 0.34, PLANE_STRAIN)
        pe = airy_strain(AirySpec(grid=g, constants=cs))
        # same stress potential, different compliance: shear scales by (1+nu)
        # in both modes, so c12 agrees; the diagonal must not
        assert np.allclose(pe.c12, ps.c12)
        assert not np.allclose(pe.c11, ps.c11)

    def test_decomposition_sums_to_strain(self):
        g = default_grid(64)
        spec = AirySpec(grid=g)
        eps = airy_strain(spec)
        sol = airy_solenoidal(spec)
        pot = airy_potential_part(spec)
        assert np.allclose(sol.c11 + pot.c11, eps.c11, atol=1e-10)
        assert np.allclose(sol.c22 + pot.c22, eps.c22, atol=1e-10)
        assert np.allclose(sol.c12 + pot.c12, eps.c12, atol=1e-10)


class TestAxisymPhantom:
    def test_zero_outside_unit_disk(self):
        g = default_grid(128)
        f = axisym_phantom(0.3, g)
        X, Y = g.meshgrid()
        out = np.hypot(X, Y) > 1.0
        assert np.all(f.c11[out] == 0.0)
        assert np.all(f.c22[out] == 0.0)
        assert np.all(f.c12[out] == 0.0)

    def test_centre_value(self):
        nu = 0.3
        g = Grid2.centered(5, 5, 0.5, 0.5)
        f = axisym_phantom(nu, g)
        centre = (7.0 + 5.0 * nu) / 12.0 - 1.0
        assert f.c11[2, 2] == pytest.approx(centre)
        assert f.c22[2, 2] == pytest.approx(centre)
        assert f.c12[2, 2] == 0.0

    def test_rim_values_on_axis(self):
        # on the x axis the Cartesian components are the polar ones;
        # err(1) = -nu/6 and ett(1) = 1/6
        nu = 0.3
        g = Grid2.centered(5, 5, 0.5, 0.5)
        f = axisym_phantom(nu, g)
        assert f.c11[2, 4] == pytest.approx(-nu / 6.0)
        assert f.c22[2, 4] == pytest.approx(1.0 / 6.0)
        assert abs(f.c12[2, 4]) < 1e-15

    def test_radial_traction_free_at_rim(self):
        # plane-stress radial stress at r=1 is err(1) + nu*ett(1) up to the
        # compliance prefactor; the profiles are built to cancel it
        for nu in (0.0, 0.2, 0.34, 0.45):
            err1 = (7 + 5 * nu + (1 + nu) * (9 - 16)) / 12.0
            ett1 = (7 + 5 * nu + (1 + nu) * (3 - 8)) / 12.0
            assert err1 + nu * ett1 == pytest.approx(0.0, abs=1e-14)

    @settings(max_examples=8, deadline=None)
    @given(st.floats(0.0, 0.45), st.integers(1, 7))
    def test_rotation_equivariance(self, nu, quarter_seed):
        # quarter-turn of an axisymmetric tensor swaps the diagonal and
        # flips the shear
        g = default_grid(32)
        f = axisym_phantom(nu, g)
        assert np.allclose(np.rot90(f.c11), f.c22, atol=1e-12)
        assert np.allclose(np.rot90(f.c12), -f.c12, atol=1e-12)

    def test_mirror_symmetry(self):
        g = default_grid(32)
        f = axisym_phantom(0.34, g)
        assert np.allclose(f.c11, f.c11[:, ::-1], atol=1e-14)
        assert np.allclose(f.c12, -f.c12[:, ::-1], atol=1e-14)


class TestAddHydrostatic:
    def test_adds_identity_inside_only(self):
        g = default_grid(64)
        f = axisym_phantom(0.3, g)
        m = mask_from_support(f)
        h = add_hydrostatic(f, m, 0.2)
        assert np.allclose(h.c11 - f.c11, np.where(m.inside, 0.2, 0.0))
        assert np.allclose(h.c22 - f.c22, np.where(m.inside, 0.2, 0.0))
        assert np.array_equal(h.c12, f.c12)

    def test_grid_mismatch_rejected(self):
        f = axisym_phantom(0.3, default_grid(32))
        m = mask_from_support(axisym_phantom(0.3, default_grid(64)))
        with pytest.raises(ValueError):
            add_hydrostatic(f, m, 0.1)
