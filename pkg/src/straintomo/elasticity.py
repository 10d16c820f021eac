"""Full-strain recovery from the solenoidal part: Hooke route and FEM route.

For a body free of applied traction the solenoidal strain part is
proportional to the stress, so the full strain follows either pointwise
from the compliance (Hooke route) or by splitting off the potential part
d(omega): the displacement-like field omega solves a linear elastic
boundary value problem with body force -Div(C : sf) and omega = 0 on the
region boundary (FEM route with linear triangles).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path as MplPath
from scipy import sparse
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import spsolve

from .fields import Grid2, ScalarField2, TensorField2, Mask2, OFFDIAG_WEIGHT
from .phantoms import ElasticConstants, PLANE_STRESS
from .spectral import SpectralPlan, divergence_rms, fft_derivative, gradient_scale


def constitutive_matrix(constants: ElasticConstants) -> np.ndarray:
    """3x3 stiffness in engineering convention (exx, eyy, gamma=2*exy)."""
    E, nu = constants.E, constants.nu
    if constants.mode == PLANE_STRESS:
        f = E / (1.0 - nu * nu)
        return f * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return f * np.array(
        [[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 * (1.0 - 2.0 * nu)]]
    )


def apply_stiffness(sf: TensorField2, constants: ElasticConstants):
    """Stress-like planes (t11, t22, t12) from strain-like planes."""
    D = constitutive_matrix(constants)
    t11 = D[0, 0] * sf.c11 + D[0, 1] * sf.c22
    t22 = D[1, 0] * sf.c11 + D[1, 1] * sf.c22
    t12 = 2.0 * D[2, 2] * sf.c12
    return t11, t22, t12


def hooke_recover(sf: TensorField2, constants: ElasticConstants) -> TensorField2:
    """Full strain from the solenoidal part via the compliance.

    The solenoidal part is E/1 (plane stress) or E/(1-nu^2) (plane strain)
    times the compliance applied to the stress, so the full strain is a
    pointwise linear map of it:

        plane stress:  e11 = sf11 - nu*sf22
        plane strain:  e11 = sf11 - nu/(1-nu)*sf22
    """
    nu = constants.nu
    if constants.mode == PLANE_STRESS:
        c11 = sf.c11 - nu * sf.c22
        c22 = sf.c22 - nu * sf.c11
        c12 = (1.0 + nu) * sf.c12
    else:
        r = nu / (1.0 - nu)
        c11 = sf.c11 - r * sf.c22
        c22 = sf.c22 - r * sf.c11
        c12 = sf.c12 / (1.0 - nu)
    return TensorField2(sf.grid, c11, c22, c12)


def body_force(
    sf: TensorField2, constants: ElasticConstants, plan: SpectralPlan | None = None
) -> tuple[ScalarField2, ScalarField2]:
    """b = -Div(C : sf), evaluated spectrally on the grid."""
    if plan is None:
        plan = SpectralPlan(grid=sf.grid)
    t11, t22, t12 = apply_stiffness(sf, constants)
    g = sf.grid
    sig = TensorField2(g, t11, t22, t12)
    b1 = -(
        fft_derivative(ScalarField2(g, sig.c11), "x", 1, plan).values
        + fft_derivative(ScalarField2(g, sig.c12), "y", 1, plan).values
    )
    b2 = -(
        fft_derivative(ScalarField2(g, sig.c12), "x", 1, plan).values
        + fft_derivative(ScalarField2(g, sig.c22), "y", 1, plan).values
    )
    return ScalarField2(g, b1), ScalarField2(g, b2)


# ---------------------------------------------------------------------------
# Structured triangle mesh
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Linear triangle mesh. boundary_vertices indexes vertices on the rim."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    cell_size: float
    cell_origin: tuple[float, float]
    cell_tri: np.ndarray  # (ncy, ncx) lattice cell -> first triangle index, -1 outside

    def __post_init__(self):
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be (N, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (M, 3)")


def _triangle_areas(vertices, triangles):
    p = vertices[triangles]
    return 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def _snap_to_polygon(points, poly):
    """Closest point on the polygon outline for each query point."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    len2 = np.maximum(np.sum(d * d, axis=1), 1e-300)
    best = np.full(points.shape[0], np.inf)
    out = np.empty_like(points)
    for e in range(a.shape[0]):
        t = np.clip(((points - a[e]) @ d[e]) / len2[e], 0.0, 1.0)
        proj = a[e] + t[:, None] * d[e]
        dist = np.sum((points - proj) ** 2, axis=1)
        better = dist < best
        best[better] = dist[better]
        out[better] = proj[better]
    return out


def build_mesh(mask: Mask2, target_h: float) -> TriMesh:
    """Structured triangulation of the mask polygon.

    The bounding box is tiled with squares of side target_h; squares whose
    centres fall inside the polygon are kept and split into two triangles.
    Outermost vertices are snapped onto the polygon (snaps that would
    degenerate a triangle are undone).
    """
    if not target_h > 0:
        raise ValueError("target_h must be positive")
    poly = mask.boundary_polygon
    x0, y0 = poly.min(axis=0)
    x1, y1 = poly.max(axis=0)
    h = float(target_h)
    ncx = max(1, int(np.ceil((x1 - x0) / h)))
    ncy = max(1, int(np.ceil((y1 - y0) / h)))

    cx = x0 + (np.arange(ncx) + 0.5) * h
    cy = y0 + (np.arange(ncy) + 0.5) * h
    CX, CY = np.meshgrid(cx, cy)
    keep = MplPath(poly).contains_points(np.column_stack([CX.ravel(), CY.ravel()]))
    keep = keep.reshape(ncy, ncx)
    if not keep.any():
        raise ValueError("no mesh cells fall inside the mask polygon")

    # lattice vertex ids for kept cells only
    vid = -np.ones((ncy + 1, ncx + 1), dtype=np.int64)
    iy, ix = np.nonzero(keep)
    corners = np.stack([(iy, ix), (iy, ix + 1), (iy + 1, ix + 1), (iy + 1, ix)], axis=0)
    used = np.zeros_like(vid, dtype=bool)
    for cy_, cx_ in corners:
        used[cy_, cx_] = True
    vy, vx = np.nonzero(used)
    vid[vy, vx] = np.arange(vy.size)
    vertices = np.column_stack([x0 + vx * h, y0 + vy * h]).astype(float)

    v00 = vid[iy, ix]
    v10 = vid[iy, ix + 1]
    v11 = vid[iy + 1, ix + 1]
    v01 = vid[iy + 1, ix]
    tris = np.empty((2 * iy.size, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])  # lower-right triangle
    tris[1::2] = np.column_stack([v00, v11, v01])  # upper-left triangle

    cell_tri = -np.ones((ncy, ncx), dtype=np.int64)
    cell_tri[iy, ix] = 2 * np.arange(iy.size)

    # a lattice vertex is on the rim when any touching lattice cell is absent
    kp = np.zeros((ncy + 2, ncx + 2), dtype=bool)
    kp[1:-1, 1:-1] = keep
    surrounded = kp[:-1, :-1] & kp[:-1, 1:] & kp[1:, :-1] & kp[1:, 1:]
    boundary = used & ~surrounded
    bvy, bvx = np.nonzero(boundary)
    bidx = vid[bvy, bvx]

    snapped = vertices.copy()
    targets = _snap_to_polygon(vertices[bidx], poly)
    move = np.hypot(*(targets - vertices[bidx]).T)
    allow = move <= 1.5 * h
    snapped[bidx[allow]] = targets[allow]

    # undo snaps that collapse or invert a triangle
    areas = _triangle_areas(snapped, tris)
    bad = areas < 0.05 * h * h
    if bad.any():
        revert = np.unique(tris[bad].ravel())
        revert = revert[np.isin(revert, bidx)]
        snapped[revert] = vertices[revert]

    return TriMesh(
        vertices=snapped,
        triangles=tris,
        boundary_vertices=np.sort(bidx),
        cell_size=h,
        cell_origin=(float(x0), float(y0)),
        cell_tri=cell_tri,
    )


def write_mesh_off(mesh: TriMesh, path) -> None:
    """OFF-style text export for debugging."""
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.vertices.shape[0]} {mesh.triangles.shape[0]} 0\n")
        for x, y in mesh.vertices:
            fh.write(f"{x!r} {y!r} 0.0\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# ---------------------------------------------------------------------------
# Linear-triangle FEM
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FemSolution:
    """Vertex displacements of the potential-part boundary value problem."""

    mesh: TriMesh
    omega: np.ndarray  # (N, 2)
    constants: ElasticConstants

    def __post_init__(self):
        if self.omega.shape != (self.mesh.vertices.shape[0], 2):
            raise ValueError("omega must be (n_vertices, 2)")
        if not np.all(np.isfinite(self.omega)):
            raise ValueError("omega must be finite")


def _element_gradients(vertices, triangles):
    """Shape-function gradient coefficients and areas per element."""
    p = vertices[triangles]
    x1, y1 = p[:, 0, 0], p[:, 0, 1]
    x2, y2 = p[:, 1, 0], p[:, 1, 1]
    x3, y3 = p[:, 2, 0], p[:, 2, 1]
    area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    bx = np.stack([y2 - y3, y3 - y1, y1 - y2], axis=1) / area2[:, None]
    by = np.stack([x3 - x2, x1 - x3, x2 - x1], axis=1) / area2[:, None]
    return bx, by, 0.5 * area2


def assemble_stiffness(mesh: TriMesh, constants: ElasticConstants) -> sparse.csr_matrix:
    """Global stiffness from constant-strain triangles (2 dof per vertex)."""
    D = constitutive_matrix(constants)
    bx, by, area = _element_gradients(mesh.vertices, mesh.triangles)
    m = mesh.triangles.shape[0]
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = bx
    B[:, 1, 1::2] = by
    B[:, 2, 0::2] = by
    B[:, 2, 1::2] = bx
    Ke = np.einsum("eia,ij,ejb,e->eab", B, D, B, area)
    dof = np.empty((m, 6), dtype=np.int64)
    dof[:, 0::2] = 2 * mesh.triangles
    dof[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    n = 2 * mesh.vertices.shape[0]
    return sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def fem_solve(
    mesh: TriMesh,
    b: tuple[ScalarField2, ScalarField2],
    constants: ElasticConstants,
    dirichlet_values: np.ndarray | None = None,
) -> FemSolution:
    """Solve Div(C : d omega) = b with omega prescribed on the rim.

    The body force is bilinearly interpolated from the grid at element
    centroids and lumped equally to vertices.  Dirichlet rows and columns
    are eliminated; the reduced system is solved directly and its residual
    is verified.
    """
    bxf, byf = b
    if bxf.grid != byf.grid:
        raise ValueError("body force components are on different grids")
    g = bxf.grid
    K = assemble_stiffness(mesh, constants)
    _, _, area = _element_gradients(mesh.vertices, mesh.triangles)

    cent = mesh.vertices[mesh.triangles].mean(axis=1)
    coords = [(cent[:, 1] - g.oy) / g.dy, (cent[:, 0] - g.ox) / g.dx]
    bcx = map_coordinates(bxf.values, coords, order=1, mode="constant", cval=0.0)
    bcy = map_coordinates(byf.values, coords, order=1, mode="constant", cval=0.0)

    n = 2 * mesh.vertices.shape[0]
    F = np.zeros(n)
    # integrating Div(C : d omega) = b against a test function flips the
    # sign: K omega = -int b.v
    share = -area[:, None] / 3.0
    np.add.at(F, 2 * mesh.triangles, share * bcx[:, None])
    np.add.at(F, 2 * mesh.triangles + 1, share * bcy[:, None])

    fixed = np.concatenate([2 * mesh.boundary_vertices, 2 * mesh.boundary_vertices + 1])
    xd = np.zeros(n)
    if dirichlet_values is not None:
        dv = np.asarray(dirichlet_values, dtype=float)
        if dv.shape != (mesh.boundary_vertices.size, 2):
            raise ValueError("dirichlet_values must be (n_boundary, 2)")
        xd[2 * mesh.boundary_vertices] = dv[:, 0]
        xd[2 * mesh.boundary_vertices + 1] = dv[:, 1]
    free = np.setdiff1d(np.arange(n), fixed, assume_unique=False)
    if free.size == 0:
        omega = xd.reshape(-1, 2)
        return FemSolution(mesh, omega, constants)

    Kff = K[free][:, free]
    rhs = F[free] - K[free][:, fixed] @ xd[fixed]
    x = spsolve(Kff.tocsc(), rhs)
    if not np.all(np.isfinite(x)):
        raise RuntimeError("sparse solve produced non-finite displacements")
    resid = np.linalg.norm(Kff @ x - rhs)
    ref = max(np.linalg.norm(rhs), np.linalg.norm(Kff @ x), 1e-300)
    if resid > 1e-10 * ref:
        raise RuntimeError(f"sparse solve residual too large: {resid / ref:.3e}")

    sol = xd.copy()
    sol[free] = x
    return FemSolution(mesh, sol.reshape(-1, 2), constants)


def sym_gradient(sol: FemSolution, grid: Grid2) -> TensorField2:
    """Symmetrised gradient of the FEM displacement sampled on a grid.

    Strain is constant per element; each grid point takes the value of the
    triangle of its lattice cell (points outside the mesh get zero, points
    displaced by boundary snapping use the nearest covering cell).
    """
    mesh = sol.mesh
    bx, by, _ = _element_gradients(mesh.vertices, mesh.triangles)
    ux = sol.omega[mesh.triangles, 0]
    uy = sol.omega[mesh.triangles, 1]
    e11 = np.sum(bx * ux, axis=1)
    e22 = np.sum(by * uy, axis=1)
    e12 = 0.5 * (np.sum(by * ux, axis=1) + np.sum(bx * uy, axis=1))

    h = mesh.cell_size
    ox, oy = mesh.cell_origin
    ncy, ncx = mesh.cell_tri.shape
    X, Y = grid.meshgrid()
    fx = (X.ravel() - ox) / h
    fy = (Y.ravel() - oy) / h
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    inside = (ix >= 0) & (ix < ncx) & (iy >= 0) & (iy < ncy)
    ixc = np.clip(ix, 0, ncx - 1)
    iyc = np.clip(iy, 0, ncy - 1)
    base = mesh.cell_tri[iyc, ixc]
    covered = inside & (base >= 0)
    # diagonal of each cell runs corner to corner: lower-right triangle first
    local_upper = (fy - iy) > (fx - ix)
    tri = np.where(covered, base + local_upper.astype(np.int64), 0)

    out = []
    for comp in (e11, e22, e12):
        vals = np.where(covered, comp[tri], 0.0)
        out.append(vals.reshape(grid.shape()))
    return TensorField2(grid, out[0], out[1], out[2])


def default_target_h(mask: Mask2) -> float:
    """Half a percent of the largest mask bounding-box dimension."""
    poly = mask.boundary_polygon
    extent = poly.max(axis=0) - poly.min(axis=0)
    return 0.005 * float(extent.max())


def reconstruct_fem(
    sf: TensorField2,
    mask: Mask2,
    constants: ElasticConstants,
    plan: SpectralPlan | None = None,
    target_h: float | None = None,
) -> TensorField2:
    """Full strain via the potential-part boundary value problem.

    Chains body_force -> build_mesh -> fem_solve -> sym_gradient and adds
    the potential part to the solenoidal input.
    """
    if target_h is None:
        target_h = default_target_h(mask)
    b = body_force(sf, constants, plan)
    mesh = build_mesh(mask, target_h)
    sol = fem_solve(mesh, b, constants)
    domega = sym_gradient(sol, sf.grid)
    return TensorField2(
        sf.grid, sf.c11 + domega.c11, sf.c22 + domega.c22, sf.c12 + domega.c12
    )


def helmholtz_check(
    sf: TensorField2, domega: TensorField2, mask: Mask2, plan: SpectralPlan | None = None
) -> dict:
    """Diagnostics of a solenoidal/potential split.

    Returns the normalised Frobenius inner product of the two parts over
    the mask (should be ~0), the spectral divergence RMS of sf, and the
    gradient scale used to normalise it.
    """
    if sf.grid != domega.grid or sf.grid != mask.grid:
        raise ValueError("fields and mask must share one grid")
    if plan is None:
        plan = SpectralPlan(grid=sf.grid)
    m = mask.inside
    dot = float(
        np.sum(sf.c11[m] * domega.c11[m])
        + np.sum(sf.c22[m] * domega.c22[m])
        + OFFDIAG_WEIGHT * np.sum(sf.c12[m] * domega.c12[m])
    )
    na = float(
        np.sqrt(np.sum(sf.c11[m] ** 2 + sf.c22[m] ** 2 + OFFDIAG_WEIGHT * sf.c12[m] ** 2))
    )
    nb = float(
        np.sqrt(
            np.sum(
                domega.c11[m] ** 2 + domega.c22[m] ** 2 + OFFDIAG_WEIGHT * domega.c12[m] ** 2
            )
        )
    )
    inner = 0.0 if na == 0.0 or nb == 0.0 else dot / (na * nb)
    div_rms = divergence_rms(sf, plan)
    scale = gradient_scale(sf, plan)
    return {
        "normalized_inner_product": inner,
        "divergence_rms": div_rms,
        "gradient_scale": scale,
        "divergence_ratio": div_rms / scale if scale > 0 else 0.0,
    }
