"""Hooke-route recovery, the triangle FEM, and the potential-part solve.

The FEM is anchored by a linear patch test (exact for linear elements)
and a manufactured sine solution with a hand-derived body force.
"""

import numpy as np
import pytest

from straintomo.elasticity import (
    FemSolution,
    body_force,
    build_mesh,
    constitutive_matrix,
    default_target_h,
    fem_solve,
    helmholtz_check,
    hooke_recover,
    reconstruct_fem,
    sym_gradient,
    write_mesh_off,
)
from straintomo.fields import (
    Grid2,
    Mask2,
    ScalarField2,
    TensorField2,
    mask_from_support,
    rel_rms_error,
)
from straintomo.phantoms import (
    PLANE_STRAIN,
    PLANE_STRESS,
    AirySpec,
    ElasticConstants,
    airy_potential_part,
    airy_solenoidal,
    airy_strain,
    default_grid,
)

CS = ElasticConstants(2.0, 0.3)

SQUARE = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], float)


def square_mask(n=64, span=2.2):
    g = Grid2.centered(n, n, span / (n - 1), span / (n - 1))
    X, Y = g.meshgrid()
    return Mask2(g, (np.abs(X) <= 1) & (np.abs(Y) <= 1), SQUARE)


class TestConstitutive:
    def test_plane_stress_entries(self):
        D = constitutive_matrix(ElasticConstants(1.0, 0.3, PLANE_STRESS))
        f = 1.0 / 0.91
        assert D[0, 0] == pytest.approx(f)
        assert D[0, 1] == pytest.approx(0.3 * f)
        assert D[2, 2] == pytest.approx(0.35 * f)
        assert D[0, 2] == 0.0

    def test_plane_strain_entries(self):
        D = constitutive_matrix(ElasticConstants(1.0, 0.25, PLANE_STRAIN))
        f = 1.0 / (1.25 * 0.5)
        assert D[0, 0] == pytest.approx(0.75 * f)
        assert D[0, 1] == pytest.approx(0.25 * f)
        assert D[2, 2] == pytest.approx(0.25 * f)

    def test_scales_with_modulus(self):
        D1 = constitutive_matrix(ElasticConstants(1.0, 0.3))
        D7 = constitutive_matrix(ElasticConstants(7.0, 0.3))
        assert np.allclose(D7, 7 * D1)


class TestHookeRecover:
    def test_plane_stress_identity_on_exact_split(self):
        # the divergence-free part of the phantom is its normalised stress,
        # so the compliance map must return the full strain exactly
        cs = ElasticConstants(1.0, 0.34, PLANE_STRESS)
        spec = AirySpec(grid=default_grid(128), constants=cs)
        rec = hooke_recover(airy_solenoidal(spec), cs)
        m = mask_from_support(airy_strain(spec), tol=1e-6)
        assert rel_rms_error(rec, airy_strain(spec), m) < 1e-12

    def test_plane_strain_identity_on_exact_split(self):
        cs = ElasticConstants(1.0, 0.34, PLANE_STRAIN)
        spec = AirySpec(grid=default_grid(128), constants=cs)
        rec = hooke_recover(airy_solenoidal(spec), cs)
        m = mask_from_support(airy_strain(spec), tol=1e-6)
        assert rel_rms_error(rec, airy_strain(spec), m) < 1e-12

    def test_nu_zero_is_identity_map(self):
        g = Grid2.centered(8, 8, 0.1, 0.1)
        rng = np.random.default_rng(0)
        sf = TensorField2(g, *rng.normal(size=(3, 8, 8)))
        rec = hooke_recover(sf, ElasticConstants(3.0, 0.0))
        assert np.allclose(rec.c11, sf.c11)
        assert np.allclose(rec.c12, sf.c12)

    def test_independent_of_modulus(self):
        g = Grid2.centered(8, 8, 0.1, 0.1)
        rng = np.random.default_rng(1)
        sf = TensorField2(g, *rng.normal(size=(3, 8, 8)))
        a = hooke_recover(sf, ElasticConstants(1.0, 0.3))
        b = hooke_recover(sf, ElasticConstants(200.0, 0.3))
        assert np.allclose(a.c11, b.c11)


class TestBodyForce:
    def test_hand_derived_gaussian(self):
        g = Grid2.centered(128, 128, 8.0 / 127, 8.0 / 127)
        X, Y = g.meshgrid()
        G = np.exp(-(X**2 + Y**2))
        sf = TensorField2(g, X * G, Y * G, np.zeros_like(G))
        b1, b2 = body_force(sf, CS)
        f = CS.E / (1 - CS.nu**2)
        ex1 = -f * ((1 - 2 * X**2) - 2 * CS.nu * X * Y) * G
        ex2 = -f * ((1 - 2 * Y**2) - 2 * CS.nu * X * Y) * G
        assert np.max(np.abs(b1.values - ex1)) < 5e-5
        assert np.max(np.abs(b2.values - ex2)) < 5e-5

    def test_linear_in_the_field(self):
        g = Grid2.centered(32, 32, 0.2, 0.2)
        X, Y = g.meshgrid()
        G = np.exp(-(X**2 + Y**2))
        sf = TensorField2(g, X * G, Y * G, X * Y * G)
        sf3 = TensorField2(g, 3 * sf.c11, 3 * sf.c22, 3 * sf.c12)
        b1, _ = body_force(sf, CS)
        c1, _ = body_force(sf3, CS)
        assert np.allclose(c1.values, 3 * b1.values, atol=1e-10)


class TestBuildMesh:
    def test_disk_area_and_orientation(self):
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        poly = np.column_stack([np.cos(th), np.sin(th)])
        g = Grid2.centered(64, 64, 2.2 / 63, 2.2 / 63)
        X, Y = g.meshgrid()
        mask = Mask2(g, np.hypot(X, Y) <= 1, poly)
        mesh = build_mesh(mask, 0.05)
        p = mesh.vertices[mesh.triangles]
        areas = 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )
        assert np.all(areas > 0)
        assert areas.sum() == pytest.approx(np.pi, rel=0.02)

    def test_boundary_vertices_near_polygon(self):
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        poly = np.column_stack([np.cos(th), np.sin(th)])
        g = Grid2.centered(64, 64, 2.2 / 63, 2.2 / 63)
        X, Y = g.meshgrid()
        mask = Mask2(g, np.hypot(X, Y) <= 1, poly)
        h = 0.05
        mesh = build_mesh(mask, h)
        r = np.hypot(*mesh.vertices[mesh.boundary_vertices].T)
        assert np.max(np.abs(r - 1.0)) < 1.5 * h

    def test_bad_target_h(self):
        with pytest.raises(ValueError):
            build_mesh(square_mask(), 0.0)

    def test_default_target_h_tracks_bbox(self):
        assert default_target_h(square_mask()) == pytest.approx(0.01)

    def test_off_export(self, tmp_path):
        mesh = build_mesh(square_mask(), 0.25)
        p = tmp_path / "m.off"
        write_mesh_off(mesh, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "OFF"
        nv, nt, _ = map(int, lines[1].split())
        assert nv == mesh.vertices.shape[0]
        assert nt == mesh.triangles.shape[0]


class TestFemSolve:
    def test_linear_patch_reproduced_exactly(self):
        # linear displacement, zero body force: linear elements are exact
        mask = square_mask()
        mesh = build_mesh(mask, 0.1)
        A = np.array([[0.3, 0.1], [-0.2, 0.5]])
        om_star = mesh.vertices @ A.T
        zero = ScalarField2(mask.grid, np.zeros(mask.grid.shape()))
        sol = fem_solve(mesh, (zero, zero), CS,
                        dirichlet_values=om_star[mesh.boundary_vertices])
        assert np.max(np.abs(sol.omega - om_star)) < 1e-12

    def test_patch_strain_is_constant(self):
        mask = square_mask()
        mesh = build_mesh(mask, 0.1)
        A = np.array([[0.3, 0.1], [-0.2, 0.5]])
        om_star = mesh.vertices @ A.T
        zero = ScalarField2(mask.grid, np.zeros(mask.grid.shape()))
        sol = fem_solve(mesh, (zero, zero), CS,
                        dirichlet_values=om_star[mesh.boundary_vertices])
        dw = sym_gradient(sol, mask.grid)
        X, Y = mask.grid.meshgrid()
        ins = (np.abs(X) < 0.9) & (np.abs(Y) < 0.9)
        assert np.allclose(dw.c11[ins], 0.3, atol=1e-10)
        assert np.allclose(dw.c22[ins], 0.5, atol=1e-10)
        assert np.allclose(dw.c12[ins], -0.05, atol=1e-10)
        out = ~mask.inside
        assert np.all(dw.c11[out] == 0.0)

    def test_manufactured_sine_solution(self):
        # omega = (sin(pi x) sin(pi y), 0) on the unit square, body force
        # derived by hand from Div(C : d omega)
        mask = square_mask()
        g = mask.grid
        X, Y = g.meshgrid()
        f = CS.E / (1 - CS.nu**2)
        s, c = np.sin(np.pi * X), np.cos(np.pi * X)
        st, ct = np.sin(np.pi * Y), np.cos(np.pi * Y)
        b1 = -f * np.pi**2 * s * st * (1 + 0.5 * (1 - CS.nu))
        b2 = f * np.pi**2 * c * ct * (0.5 * (1 - CS.nu) + CS.nu)
        mesh = build_mesh(mask, 0.04)
        sol = fem_solve(mesh, (ScalarField2(g, b1), ScalarField2(g, b2)), CS)
        exact = np.sin(np.pi * mesh.vertices[:, 0]) * np.sin(np.pi * mesh.vertices[:, 1])
        assert np.max(np.abs(sol.omega[:, 0] - exact)) < 0.02
        assert np.max(np.abs(sol.omega[:, 1])) < 0.02

    def test_manufactured_solution_converges(self):
        mask = square_mask()
        g = mask.grid
        X, Y = g.meshgrid()
        f = CS.E / (1 - CS.nu**2)
        b1 = -f * np.pi**2 * np.sin(np.pi * X) * np.sin(np.pi * Y) * (1 + 0.5 * (1 - CS.nu))
        b2 = f * np.pi**2 * np.cos(np.pi * X) * np.cos(np.pi * Y) * (0.5 * (1 - CS.nu) + CS.nu)
        bf = (ScalarField2(g, b1), ScalarField2(g, b2))
        errs = []
        for h in (0.1, 0.05):
            mesh = build_mesh(mask, h)
            sol = fem_solve(mesh, bf, CS)
            exact = np.sin(np.pi * mesh.vertices[:, 0]) * np.sin(np.pi * mesh.vertices[:, 1])
            errs.append(np.max(np.abs(sol.omega[:, 0] - exact)))
        assert errs[1] < 0.5 * errs[0]

    def test_zero_load_zero_boundary_gives_zero(self):
        mask = square_mask(n=32)
        mesh = build_mesh(mask, 0.2)
        zero = ScalarField2(mask.grid, np.zeros(mask.grid.shape()))
        sol = fem_solve(mesh, (zero, zero), CS)
        assert np.max(np.abs(sol.omega)) == 0.0

    def test_dirichlet_shape_checked(self):
        mask = square_mask(n=32)
        mesh = build_mesh(mask, 0.2)
        zero = ScalarField2(mask.grid, np.zeros(mask.grid.shape()))
        with pytest.raises(ValueError):
            fem_solve(mesh, (zero, zero), CS, dirichlet_values=np.zeros((3, 2)))

    def test_solution_shape_validated(self):
        mask = square_mask(n=32)
        mesh = build_mesh(mask, 0.2)
        with pytest.raises(ValueError):
            FemSolution(mesh, np.zeros((2, 2)), CS)


class TestReconstructFem:
    def test_exact_solenoidal_input(self):
        # with the exact divergence-free part in, the potential-part solve
        # must rebuild the full strain
        cs = ElasticConstants(1.0, 0.34)
        spec = AirySpec(grid=default_grid(128))
        sol = airy_solenoidal(spec)
        eps = airy_strain(spec)
        m = mask_from_support(eps, tol=1e-6)
        rec = reconstruct_fem(sol, m, cs)
        assert rel_rms_error(rec, eps, m) < 0.03

    def test_agrees_with_hooke_route(self):
        cs = ElasticConstants(1.0, 0.34)
        spec = AirySpec(grid=default_grid(128))
        sol = airy_solenoidal(spec)
        m = mask_from_support(airy_strain(spec), tol=1e-6)
        fem = reconstruct_fem(sol, m, cs)
        hk = hooke_recover(sol, cs)
        assert rel_rms_error(fem, hk, m) < 0.03


class TestHelmholtzCheck:
    def test_exact_split_is_orthogonal(self):
        spec = AirySpec(grid=default_grid(128))
        sol = airy_solenoidal(spec)
        pot = airy_potential_part(spec)
        m = mask_from_support(airy_strain(spec), tol=1e-6)
        d = helmholtz_check(sol, pot, m)
        assert abs(d["normalized_inner_product"]) < 1e-9
        assert d["divergence_ratio"] < 1e-3

    def test_full_strain_is_not_divergence_free(self):
        spec = AirySpec(grid=default_grid(128))
        eps = airy_strain(spec)
        pot = airy_potential_part(spec)
        m = mask_from_support(eps, tol=1e-6)
        d = helmholtz_check(eps, pot, m)
        assert d["divergence_ratio"] > 0.01

    def test_grid_mismatch_rejected(self):
        spec = AirySpec(grid=default_grid(64))
        other = AirySpec(grid=default_grid(32))
        m = mask_from_support(airy_strain(spec), tol=1e-6)
        with pytest.raises(ValueError):
            helmholtz_check(airy_solenoidal(spec), airy_potential_part(other), m)
