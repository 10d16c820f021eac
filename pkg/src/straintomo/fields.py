"""Grid-sampled scalar and tensor fields, masks, error metrics, and file I/O.

All fields live on a uniform Cartesian grid.  Arrays are stored with shape
(ny, nx) so that ``values[j, i]`` is the sample at physical position
``(ox + i*dx, oy + j*dy)``.  Symmetric rank-2 tensor fields carry three
component planes (c11, c22, c12); norms and error metrics count the
off-diagonal component twice, matching the Frobenius inner product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

# Frobenius convention: the off-diagonal component enters norms twice.
OFFDIAG_WEIGHT = 2.0

_FIELD_MAGIC = "STF1"


@dataclass(frozen=True)
class Grid2:
    """Uniform 2D sampling grid: nx x ny samples with spacing (dx, dy).

    Sample (i, j) sits at (ox + i*dx, oy + j*dy).
    """

    nx: int
    ny: int
    dx: float
    dy: float
    ox: float
    oy: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 samples per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacing must be positive")

    @classmethod
    def centered(cls, nx: int, ny: int, dx: float, dy: float) -> "Grid2":
        """Grid whose sample positions are symmetric about the origin."""
        return cls(nx, ny, dx, dy, -0.5 * (nx - 1) * dx, -0.5 * (ny - 1) * dy)

    def x(self) -> np.ndarray:
        return self.ox + self.dx * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.oy + self.dy * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates of every sample, each shaped (ny, nx)."""
        return np.meshgrid(self.x(), self.y())

    def diagonal(self) -> float:
        return float(np.hypot((self.nx - 1) * self.dx, (self.ny - 1) * self.dy))

    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)


def _frozen_array(values, shape, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.shape != shape:
        raise ValueError(f"array shape {arr.shape} does not match grid shape {shape}")
    if dtype is float and not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField2:
    """A scalar field sampled on a Grid2."""

    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.shape()))


@dataclass(frozen=True, eq=False)
class TensorField2:
    """A symmetric rank-2 tensor field with component planes c11, c22, c12."""

    grid: Grid2
    c11: np.ndarray
    c22: np.ndarray
    c12: np.ndarray

    def __post_init__(self):
        shape = self.grid.shape()
        for name in ("c11", "c22", "c12"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), shape))

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.c11, self.c22, self.c12)

    def frobenius(self) -> np.ndarray:
        """Pointwise Frobenius magnitude sqrt(c11^2 + c22^2 + 2*c12^2)."""
        return np.sqrt(self.c11**2 + self.c22**2 + OFFDIAG_WEIGHT * self.c12**2)

    def trace(self) -> ScalarField2:
        return ScalarField2(self.grid, self.c11 + self.c22)


@dataclass(frozen=True, eq=False)
class Mask2:
    """Region of interest: boolean interior plus an ordered boundary polygon."""

    grid: Grid2
    inside: np.ndarray
    boundary_polygon: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "inside", _frozen_array(self.inside, self.grid.shape(), dtype=bool)
        )
        poly = np.array(self.boundary_polygon, dtype=float, copy=True)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise ValueError("boundary polygon needs at least 3 (x, y) vertices")
        if not np.all(np.isfinite(poly)):
            raise ValueError("boundary polygon vertices must be finite")
        poly.setflags(write=False)
        object.__setattr__(self, "boundary_polygon", poly)
        if not self.inside.any():
            raise ValueError("mask interior is empty")


@dataclass
class ReconReport:
    """Quality metrics of a reconstruction run."""

    rel_rms_error: float | None = None
    exterior_interior_ratio: float | None = None
    per_component_max_error: tuple[float, float, float] | None = None
    traction_violation_suspected: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("rel_rms_error", "exterior_interior_ratio"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative number")

    def to_dict(self) -> dict:
        d = {
            "rel_rms_error": self.rel_rms_error,
            "exterior_interior_ratio": self.exterior_interior_ratio,
            "per_component_max_error": None
            if self.per_component_max_error is None
            else list(self.per_component_max_error),
            "traction_violation_suspected": self.traction_violation_suspected,
        }
        d.update(self.metadata)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields are sampled on different grids")


def rel_rms_error(a: TensorField2, b: TensorField2, mask: Mask2) -> float:
    """Relative RMS error of tensor field ``a`` against reference ``b``.

    Computed inside the mask with the Frobenius component weighting
    (off-diagonal counted twice); ``b`` supplies the normalisation.
    """
    _check_same_grid(a, b)
    _check_same_grid(a, mask)
    m = mask.inside
    num = 0.0
    den = 0.0
    for (ca, cb), w in zip(
        [(a.c11, b.c11), (a.c22, b.c22), (a.c12, b.c12)], [1.0, 1.0, OFFDIAG_WEIGHT]
    ):
        num += w * float(np.sum((ca[m] - cb[m]) ** 2))
        den += w * float(np.sum(cb[m] ** 2))
    if den == 0.0:
        raise ValueError("reference field is zero inside the mask")
    return float(np.sqrt(num / den))


def per_component_max_error(
    a: TensorField2, b: TensorField2, mask: Mask2
) -> tuple[float, float, float]:
    """Max abs residual per component inside the mask, scaled by the
    reference component's max magnitude (0 when the reference is zero)."""
    _check_same_grid(a, b)
    _check_same_grid(a, mask)
    m = mask.inside
    out = []
    for ca, cb in [(a.c11, b.c11), (a.c22, b.c22), (a.c12, b.c12)]:
        ref = float(np.max(np.abs(cb[m])))
        err = float(np.max(np.abs(ca[m] - cb[m])))
        out.append(err / ref if ref > 0 else (0.0 if err == 0 else float("inf")))
    return tuple(out)


def exterior_ratio(f: TensorField2, mask: Mask2) -> float:
    """RMS Frobenius magnitude outside the mask over the max magnitude inside.

    A reconstruction of a field truly supported inside the mask should give a
    small value; a large value signals leakage (for example a nonzero
    boundary traction folded into the data).
    """
    _check_same_grid(f, mask)
    inside = mask.inside
    mag2 = f.c11**2 + f.c22**2 + OFFDIAG_WEIGHT * f.c12**2
    peak_in = float(np.sqrt(np.max(mag2[inside])))
    if peak_in == 0.0:
        raise ValueError("field is zero inside the mask")
    outside = ~inside
    if not outside.any():
        return 0.0
    rms_out = float(np.sqrt(np.mean(mag2[outside])))
    return rms_out / peak_in


def mask_from_support(f: TensorField2 | ScalarField2, tol: float = 1e-9) -> Mask2:
    """Mask of the samples where ``f`` exceeds ``tol`` times its peak magnitude.

    The boundary polygon is traced with marching squares at the 0.5 level of
    the inside indicator; when several contours exist the longest one is kept.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if isinstance(f, TensorField2):
        mag = f.frobenius()
    else:
        mag = np.abs(f.values)
    peak = float(mag.max())
    if peak == 0.0:
        raise ValueError("cannot build a support mask for an all-zero field")
    inside = mag > tol * peak
    grid = f.grid
    # pad with a zero ring so contours close even when the support touches
    # the grid border
    padded = np.pad(inside.astype(float), 1)
    contours = measure.find_contours(padded, 0.5)
    if not contours:
        raise ValueError("support region has no traceable boundary")
    lengths = [np.sum(np.hypot(*np.diff(c, axis=0).T)) for c in contours]
    c = contours[int(np.argmax(lengths))]
    if len(c) > 1 and np.allclose(c[0], c[-1]):
        c = c[:-1]
    # find_contours returns (row, col) pairs; undo the pad offset
    poly = np.column_stack(
        [grid.ox + (c[:, 1] - 1.0) * grid.dx, grid.oy + (c[:, 0] - 1.0) * grid.dy]
    )
    return Mask2(grid, inside, poly)


def polygon_area(polygon: np.ndarray) -> float:
    """Shoelace area of an (N, 2) vertex loop."""
    p = np.asarray(polygon, float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def mask_from_polygon(grid: Grid2, polygon: np.ndarray) -> Mask2:
    """Mask of the grid samples lying inside a closed vertex loop."""
    from matplotlib.path import Path as MplPath

    poly = np.asarray(polygon, dtype=float)
    X, Y = grid.meshgrid()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = MplPath(poly).contains_points(pts).reshape(grid.shape())
    return Mask2(grid, inside, poly)


def write_polygon_csv(polygon: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(polygon, float), fmt="%.17g", delimiter=",",
               header="x,y", comments="")


def read_polygon_csv(path) -> np.ndarray:
    poly = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise ValueError("polygon file must hold at least three x,y rows")
    return poly


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------
#
# Field files: one ASCII header line
#     STF1 <ncomp> <nx> <ny> <dx> <dy> <ox> <oy>\n
# followed by ncomp planes of nx*ny little-endian float64 values, each plane
# row-major over (y, x).  ncomp is 1 for scalar fields, 3 for tensor fields
# (c11, c22, c12 in that order).


def write_field(f: ScalarField2 | TensorField2, path) -> None:
    if isinstance(f, ScalarField2):
        planes = [f.values]
    else:
        planes = [f.c11, f.c22, f.c12]
    g = f.grid
    header = (
        f"{_FIELD_MAGIC} {len(planes)} {g.nx} {g.ny} "
        f"{g.dx!r} {g.dy!r} {g.ox!r} {g.oy!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for p in planes:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def read_field(path) -> ScalarField2 | TensorField2:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 8 or header[0] != _FIELD_MAGIC:
            raise ValueError(f"{path}: not a {_FIELD_MAGIC} field file")
        try:
            ncomp, nx, ny = (int(t) for t in header[1:4])
            dx, dy, ox, oy = (float(t) for t in header[4:8])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed header") from exc
        if ncomp not in (1, 3):
            raise ValueError(f"{path}: ncomp must be 1 or 3, got {ncomp}")
        grid = Grid2(nx, ny, dx, dy, ox, oy)
        count = ncomp * nx * ny
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise ValueError(f"{path}: truncated payload")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f8").reshape(ncomp, ny, nx)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values")
    if ncomp == 1:
        return ScalarField2(grid, data[0])
    return TensorField2(grid, data[0], data[1], data[2])


def write_field_csv(f: ScalarField2 | TensorField2, path) -> None:
    """Delimited export: one sample per row with physical coordinates."""
    X, Y = f.grid.meshgrid()
    if isinstance(f, ScalarField2):
        header = "x,y,value"
        cols = [X, Y, f.values]
    else:
        header = "x,y,c11,c22,c12"
        cols = [X, Y, f.c11, f.c22, f.c12]
    table = np.column_stack([c.ravel() for c in cols])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")
