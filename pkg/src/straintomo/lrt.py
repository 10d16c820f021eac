"""Ray transforms of scalar and tensor fields and their inversion.

The longitudinal ray transform (LRT) of a symmetric rank-2 field is the
line integral of the field contracted twice with the ray direction:

    I(s, theta) = integral of  xi' eps xi  along the ray
    xi = (cos theta, sin theta),  offset s along xi_perp = (-sin theta, cos theta)

For strain data this is what a transmission Bragg-edge measurement sees,
up to division by the chord length through the sample.  Inversion recovers
the divergence-free (solenoidal) part of the field only: the filtered
back projection here applies the scalar ramp-filter machinery per angle
and accumulates with direction-weighted components xi (x) xi.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len, rfft, irfft
from scipy.ndimage import map_coordinates

from .fields import Grid2, ScalarField2, TensorField2, Mask2

KIND_SCALAR = "scalar_integral"
KIND_LRT = "lrt_integral"
KIND_AVERAGE = "average_strain"
_KINDS = (KIND_SCALAR, KIND_LRT, KIND_AVERAGE)

_SINOGRAM_MAGIC = "SGM1"

# Sharafutdinov split of the inverse: solenoidal-projector weights applied
# to the unfiltered tensor back projection before the half-Laplacian.
_C0 = 0.75
_C1 = -0.25

_CHUNK = 16  # angles per worker chunk; fixed so results do not depend on thread count


def _thread_count() -> int:
    env = os.environ.get("STRAIN_TOMO_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValueError("STRAIN_TOMO_THREADS must be an integer") from exc
        return max(1, n)
    return min(os.cpu_count() or 1, 8)


def _chunked(n: int):
    return [(i, min(i + _CHUNK, n)) for i in range(0, n, _CHUNK)]


def _run_chunks(worker, n: int):
    """Run worker(start, stop) over fixed chunks, returning results in order."""
    chunks = _chunked(n)
    threads = _thread_count()
    if threads <= 1 or len(chunks) <= 1:
        return [worker(a, b) for a, b in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: worker(*ab), chunks))


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Projection data: rows are angles, columns are ray offsets.

    kind distinguishes plain scalar line integrals, tensor LRT integrals,
    and chord-averaged strain (LRT divided by the chord length).
    """

    angles: np.ndarray
    s_values: np.ndarray
    data: np.ndarray
    kind: str

    def __post_init__(self):
        ang = np.array(self.angles, dtype=float, copy=True)
        s = np.array(self.s_values, dtype=float, copy=True)
        d = np.array(self.data, dtype=float, copy=True)
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sinogram kind {self.kind!r}")
        if ang.ndim != 1 or ang.size < 1:
            raise ValueError("angles must be a non-empty 1D array")
        if np.any(ang < 0) or np.any(ang >= 2 * np.pi):
            raise ValueError("angles must lie in [0, 2*pi)")
        if ang.size > 1 and not np.all(np.diff(ang) > 0):
            raise ValueError("angles must be strictly increasing")
        if s.ndim != 1 or s.size < 2:
            raise ValueError("s_values must have at least 2 entries")
        ds = np.diff(s)
        if not np.allclose(ds, ds[0], rtol=1e-9, atol=0.0):
            raise ValueError("s_values must be uniformly spaced")
        if not np.allclose(s + s[::-1], 0.0, atol=1e-9 * max(1.0, abs(s[-1]))):
            raise ValueError("s_values must be symmetric about 0")
        if d.shape != (ang.size, s.size):
            raise ValueError("data shape must be (n_angles, n_s)")
        if not np.all(np.isfinite(d)):
            raise ValueError("sinogram data must be finite")
        for name, arr in (("angles", ang), ("s_values", s), ("data", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def ds(self) -> float:
        return float(self.s_values[1] - self.s_values[0])


def symmetric_offsets(n_s: int, ds: float) -> np.ndarray:
    return (np.arange(n_s) - 0.5 * (n_s - 1)) * ds


def default_offsets(grid: Grid2) -> np.ndarray:
    """Offset grid covering the full grid diagonal at the finer grid spacing."""
    ds = min(grid.dx, grid.dy)
    n_s = int(np.ceil(grid.diagonal() / ds)) + 1
    return symmetric_offsets(n_s, ds)


def ray_direction(theta: float) -> tuple[float, float]:
    return (float(np.cos(theta)), float(np.sin(theta)))


def _integration_steps(grid: Grid2, s_max: float):
    dt = 0.5 * min(grid.dx, grid.dy)
    half = 0.5 * grid.diagonal() + dt
    n_t = int(np.ceil(2 * half / dt))
    t = -half + (np.arange(n_t) + 0.5) * dt
    return t, dt


def _project_single(values, grid: Grid2, theta, s, t, dt):
    """Line integrals at every offset for one angle, by bilinear sampling."""
    c, si = np.cos(theta), np.sin(theta)
    X = s[:, None] * (-si) + t[None, :] * c
    Y = s[:, None] * c + t[None, :] * si
    rows = (Y - grid.oy) / grid.dy
    cols = (X - grid.ox) / grid.dx
    samp = map_coordinates(
        values, [rows.ravel(), cols.ravel()], order=1, mode="constant", cval=0.0
    ).reshape(len(s), len(t))
    return samp.sum(axis=1) * dt


def _check_offsets_cover(data: np.ndarray, what: str):
    peak = float(np.max(np.abs(data)))
    if peak == 0.0:
        return
    edge = max(float(np.max(np.abs(data[:, 0]))), float(np.max(np.abs(data[:, -1]))))
    if edge > 1e-6 * peak:
        raise ValueError(
            f"{what}: offset range too small, boundary rays still see the field"
        )


def _prepare_angles(angles) -> np.ndarray:
    ang = np.asarray(angles, dtype=float)
    if ang.ndim != 1 or ang.size < 2:
        raise ValueError("need at least 2 projection angles")
    return ang


def radon_forward(
    f: ScalarField2, angles, s_values: np.ndarray | None = None
) -> Sinogram:
    """Scalar line-integral transform with bilinear in-plane interpolation."""
    ang = _prepare_angles(angles)
    s = default_offsets(f.grid) if s_values is None else np.asarray(s_values, float)
    t, dt = _integration_steps(f.grid, float(np.max(np.abs(s))))
    values = f.values

    def worker(a, b):
        return np.stack(
            [_project_single(values, f.grid, th, s, t, dt) for th in ang[a:b]]
        )

    data = np.concatenate(_run_chunks(worker, ang.size), axis=0)
    _check_offsets_cover(data, "radon_forward")
    return Sinogram(ang, s, data, KIND_SCALAR)


def lrt_forward(
    eps: TensorField2, angles, s_values: np.ndarray | None = None
) -> Sinogram:
    """Longitudinal ray transform of a symmetric tensor field.

    Per angle the components are first contracted with the ray direction
    (cos^2 c11 + 2 sin cos c12 + sin^2 c22) and the resulting scalar is
    projected along rays of that same direction.
    """
    ang = _prepare_angles(angles)
    s = default_offsets(eps.grid) if s_values is None else np.asarray(s_values, float)
    t, dt = _integration_steps(eps.grid, float(np.max(np.abs(s))))

    def worker(a, b):
        rows = []
        for th in ang[a:b]:
            c, si = np.cos(th), np.sin(th)
            combined = c * c * eps.c11 + 2.0 * si * c * eps.c12 + si * si * eps.c22
            rows.append(_project_single(combined, eps.grid, th, s, t, dt))
        return np.stack(rows)

    data = np.concatenate(_run_chunks(worker, ang.size), axis=0)
    _check_offsets_cover(data, "lrt_forward")
    return Sinogram(ang, s, data, KIND_LRT)


# ---------------------------------------------------------------------------
# Angular quadrature and filtering
# ---------------------------------------------------------------------------


def angle_quadrature_weights(angles) -> np.ndarray:
    """Back projection weights per angle, summing to pi.

    Rays at theta and theta + pi carry the same integrand, so angles are
    folded modulo pi; coincident folded angles split their node's weight.
    Node weights are circular trapezoidal half-gaps on the folded
    half-circle, which reduces to pi/n for uniform coverage.
    """
    a = np.asarray(angles, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ValueError("need at least 2 angles")
    folded = np.mod(a, np.pi)
    order = np.argsort(folded, kind="stable")
    fs = folded[order]
    tol = 1e-9
    starts = np.empty(fs.size, dtype=bool)
    starts[0] = True
    starts[1:] = np.diff(fs) > tol
    node_of = np.cumsum(starts) - 1
    nodes = fs[starts]
    # the half-circle wraps: a node at ~0 and one at ~pi coincide
    if nodes.size > 1 and nodes[0] + np.pi - nodes[-1] <= tol:
        node_of[node_of == nodes.size - 1] = 0
        nodes = nodes[:-1]
    if nodes.size == 1:
        node_weights = np.array([np.pi])
    else:
        nxt = np.roll(nodes, -1).copy()
        nxt[-1] += np.pi
        prv = np.roll(nodes, 1).copy()
        prv[0] -= np.pi
        node_weights = 0.5 * (nxt - prv)
    counts = np.bincount(node_of, minlength=nodes.size)
    w_sorted = node_weights[node_of] / counts[node_of]
    w = np.empty_like(w_sorted)
    w[order] = w_sorted
    return w


def _check_angular_coverage(angles):
    folded = np.sort(np.mod(np.asarray(angles, float), np.pi))
    gaps = np.diff(np.concatenate([folded, [folded[0] + np.pi]]))
    if gaps.max() > 0.25 * np.pi:
        raise ValueError(
            "angle list leaves a folded angular gap above 45 degrees; "
            "tensor inversion needs at least half-circle coverage"
        )


def _ramp_filter(L: int, ds: float) -> np.ndarray:
    """Ramp |freq| response built from the discrete spatial kernel.

    Sampling |freq| directly underweights DC and dishes the reconstruction;
    transforming the band-limited spatial kernel keeps the small positive
    DC term.
    """
    m = np.arange(L)
    m = np.minimum(m, L - m)  # signed lag magnitude, wrapped
    kernel = np.zeros(L)
    kernel[0] = 1.0 / (4.0 * ds * ds)
    odd = m % 2 == 1
    kernel[odd] = -1.0 / (np.pi * np.pi * m[odd] ** 2 * ds * ds)
    return np.fft.rfft(kernel).real * ds


# back projection samples each row linearly at arbitrary offsets; at the raw
# offset spacing that interpolation leaks near-Nyquist error which breaks the
# divergence-free structure of the tensor output.  Band-limited refinement of
# the rows by this factor pushes the leak below the angular-quadrature floor.
_ROW_REFINE = 8


def _filter_rows(data: np.ndarray, ds: float, window: str, refine: int = 1) -> np.ndarray:
    """Ramp-filter every row in the frequency domain with x2 zero padding,
    optionally resampling the result `refine` times finer."""
    n = data.shape[1]
    L = next_fast_len(2 * n)
    ramp = _ramp_filter(L, ds)
    if window == "cosine":
        freqs = np.fft.rfftfreq(L, d=ds)
        ramp *= np.cos(0.5 * np.pi * freqs / freqs[-1])
    elif window != "ramlak":
        raise ValueError(f"unknown filter window {window!r}")
    spec = rfft(data, n=L, axis=1)
    filtered = irfft(spec * ramp[None, :], n=refine * L, axis=1) * refine
    return np.ascontiguousarray(filtered[:, : refine * n])


def _refine_rows(data: np.ndarray, refine: int) -> np.ndarray:
    """Band-limited resampling of every row, `refine` times finer."""
    n = data.shape[1]
    L = next_fast_len(2 * n)
    fine = irfft(rfft(data, n=L, axis=1), n=refine * L, axis=1) * refine
    return np.ascontiguousarray(fine[:, : refine * n])


def _refined_offsets(s_values: np.ndarray, refine: int) -> np.ndarray:
    ds = float(s_values[1] - s_values[0])
    return float(s_values[0]) + np.arange(refine * s_values.size) * (ds / refine)


def _backproject(
    data: np.ndarray,
    angles: np.ndarray,
    s_values: np.ndarray,
    grid: Grid2,
    weight_sets: list[np.ndarray],
):
    """Accumulate sum_theta w_theta * row_theta(x . xi_perp) for each weight set.

    Rows are sampled linearly in s; offsets outside the measured range
    contribute zero.  Work is chunked over angles with per-chunk buffers
    reduced in a fixed order, so results do not depend on thread count.
    """
    X, Y = grid.meshgrid()
    xf = X.ravel()
    yf = Y.ravel()
    s0 = float(s_values[0])
    ds = float(s_values[1] - s_values[0])
    m = s_values.size
    nsets = len(weight_sets)

    def worker(a, b):
        acc = [np.zeros(xf.size) for _ in range(nsets)]
        for k in range(a, b):
            th = angles[k]
            row = data[k]
            sidx = (xf * (-np.sin(th)) + yf * np.cos(th) - s0) / ds
            i0 = np.floor(sidx).astype(np.int64)
            frac = sidx - i0
            valid = (i0 >= 0) & (i0 <= m - 2)
            i0c = np.clip(i0, 0, m - 2)
            vals = np.where(valid, row[i0c] * (1.0 - frac) + row[i0c + 1] * frac, 0.0)
            for j, wset in enumerate(weight_sets):
                if wset[k] != 0.0:
                    acc[j] += wset[k] * vals
        return acc

    partials = _run_chunks(worker, angles.size)
    out = []
    for j in range(nsets):
        total = np.zeros(xf.size)
        for part in partials:
            total += part[j]
        out.append(total.reshape(grid.shape()))
    return out


def default_reconstruction_grid(sg: Sinogram) -> Grid2:
    """Square grid spanning the offset range at the offset spacing."""
    n = sg.s_values.size
    return Grid2.centered(n, n, sg.ds, sg.ds)


def fbp_scalar(
    sg: Sinogram, grid: Grid2 | None = None, window: str = "ramlak"
) -> ScalarField2:
    """Scalar filtered back projection, calibrated so that
    fbp_scalar(radon_forward(f)) approximates f."""
    if sg.kind not in (KIND_SCALAR, KIND_LRT):
        raise ValueError(f"cannot apply scalar FBP to kind {sg.kind!r}")
    if sg.angles.size < 2:
        raise ValueError("need at least 2 angles")
    g = default_reconstruction_grid(sg) if grid is None else grid
    w = angle_quadrature_weights(sg.angles)
    q = _filter_rows(sg.data, sg.ds, window, refine=_ROW_REFINE)
    s_fine = _refined_offsets(sg.s_values, _ROW_REFINE)
    (vals,) = _backproject(q, sg.angles, s_fine, g, [w])
    return ScalarField2(g, vals)


def trace_fbp(sg: Sinogram, grid: Grid2 | None = None, window: str = "ramlak") -> ScalarField2:
    """Trace of the solenoidal strain part, straight from the LRT sinogram.

    Because the direction weights satisfy cos^2 + sin^2 = 1, the scalar FBP
    of the LRT data equals the trace of the tensor FBP.
    """
    if sg.kind != KIND_LRT:
        raise ValueError("trace reconstruction needs an lrt_integral sinogram")
    return fbp_scalar(sg, grid=grid, window=window)


def tensor_fbp(
    sg: Sinogram, grid: Grid2 | None = None, window: str = "ramlak"
) -> TensorField2:
    """Tensor filtered back projection of LRT data.

    Each angle's ramp-filtered row is back projected into the three
    components with weights cos^2, sin^2, and sin*cos: the direction dyad
    applied to the scalar inversion.  The result is the divergence-free
    part of the measured field.
    """
    if sg.kind != KIND_LRT:
        raise ValueError("tensor FBP needs an lrt_integral sinogram")
    _check_angular_coverage(sg.angles)
    g = default_reconstruction_grid(sg) if grid is None else grid
    w = angle_quadrature_weights(sg.angles)
    c = np.cos(sg.angles)
    s = np.sin(sg.angles)
    q = _filter_rows(sg.data, sg.ds, window, refine=_ROW_REFINE)
    s_fine = _refined_offsets(sg.s_values, _ROW_REFINE)
    c11, c22, c12 = _backproject(
        q, sg.angles, s_fine, g, [w * c * c, w * s * s, w * s * c]
    )
    return TensorField2(g, c11, c22, c12)


def backproject_scalar(sg: Sinogram, grid: Grid2) -> ScalarField2:
    """Unfiltered back projection with full-circle measure (weights sum to 2*pi)."""
    w = 2.0 * angle_quadrature_weights(sg.angles)
    (vals,) = _backproject(sg.data, sg.angles, sg.s_values, grid, [w])
    return ScalarField2(grid, vals)


def _padded_grid(grid: Grid2, pad_factor: int) -> tuple[Grid2, int, int]:
    ex = grid.nx * (pad_factor - 1)
    ey = grid.ny * (pad_factor - 1)
    left, bottom = ex // 2, ey // 2
    g = Grid2(
        grid.nx + ex,
        grid.ny + ey,
        grid.dx,
        grid.dy,
        grid.ox - left * grid.dx,
        grid.oy - bottom * grid.dy,
    )
    return g, left, bottom


def sharafutdinov_inverse(
    sg: Sinogram, grid: Grid2 | None = None, pad_factor: int = 2
) -> TensorField2:
    """Solenoidal-part inversion in its operator form.

    The unfiltered direction-weighted back projection is formed on a padded
    grid, then the half-Laplacian and the solenoidal trace projector are
    applied per Fourier mode:

        out_hat = |k| * (3/4 * g_hat - 1/4 * (I - k k'/|k|^2) tr(g)_hat)

    Equivalent to tensor_fbp up to discretisation.
    """
    if sg.kind != KIND_LRT:
        raise ValueError("tensor inversion needs an lrt_integral sinogram")
    if pad_factor < 1 or int(pad_factor) != pad_factor:
        raise ValueError("pad_factor must be an integer >= 1")
    _check_angular_coverage(sg.angles)
    g = default_reconstruction_grid(sg) if grid is None else grid
    gp, left, bottom = _padded_grid(g, pad_factor)

    w = 2.0 * angle_quadrature_weights(sg.angles)
    c = np.cos(sg.angles)
    s = np.sin(sg.angles)
    fine = _refine_rows(sg.data, _ROW_REFINE)
    s_fine = _refined_offsets(sg.s_values, _ROW_REFINE)
    g11, g22, g12 = _backproject(
        fine, sg.angles, s_fine, gp, [w * c * c, w * s * s, w * s * c]
    )

    F11 = np.fft.fft2(g11)
    F22 = np.fft.fft2(g22)
    F12 = np.fft.fft2(g12)
    fx = np.fft.fftfreq(gp.nx, d=gp.dx)[None, :]
    fy = np.fft.fftfreq(gp.ny, d=gp.dy)[:, None]
    k2 = fx * fx + fy * fy
    absk = np.sqrt(k2)
    k2safe = np.where(k2 > 0, k2, 1.0)
    trace = F11 + F22
    out11 = absk * (_C0 * F11 + _C1 * (1.0 - fx * fx / k2safe) * trace)
    out22 = absk * (_C0 * F22 + _C1 * (1.0 - fy * fy / k2safe) * trace)
    out12 = absk * (_C0 * F12 + _C1 * (-fx * fy / k2safe) * trace)

    sl = np.s_[bottom : bottom + g.ny, left : left + g.nx]
    c11 = np.fft.ifft2(out11).real[sl]
    c22 = np.fft.ifft2(out22).real[sl]
    c12 = np.fft.ifft2(out12).real[sl]
    return TensorField2(g, c11, c22, c12)


# ---------------------------------------------------------------------------
# Chord lengths and averaged-strain data
# ---------------------------------------------------------------------------


def chord_lengths(polygon: np.ndarray, angles, s_values) -> np.ndarray:
    """Length of each ray's intersection with a polygon, shape (n_angles, n_s).

    Rays are parametrised x(t) = s*xi_perp + t*xi.  Edge crossings are
    collected with a half-open convention so shared vertices count once;
    sorted crossing parameters pair up into inside intervals.
    """
    poly = np.asarray(polygon, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
        raise ValueError("polygon must be an (N, 2) array with N >= 3")
    ang = np.asarray(angles, dtype=float)
    s = np.asarray(s_values, dtype=float)
    a = poly
    d = np.roll(poly, -1, axis=0) - poly
    out = np.empty((ang.size, s.size))
    for k, th in enumerate(ang):
        xi = np.array([np.cos(th), np.sin(th)])
        xip = np.array([-xi[1], xi[0]])
        den = xi[0] * d[:, 1] - xi[1] * d[:, 0]  # cross(xi, edge)
        ok = den != 0.0
        wx = a[:, 0][:, None] - s[None, :] * xip[0]
        wy = a[:, 1][:, None] - s[None, :] * xip[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (wx * xi[1] - wy * xi[0]) / np.where(ok, den, 1.0)[:, None]
            t = (wx * d[:, 1][:, None] - wy * d[:, 0][:, None]) / np.where(
                ok, den, 1.0
            )[:, None]
        hit = ok[:, None] & (u >= 0.0) & (u < 1.0)
        t = np.where(hit, t, np.inf)
        t.sort(axis=0)
        lo = t[0::2, :]
        hi = t[1::2, :]
        if hi.shape[0] < lo.shape[0]:
            lo = lo[: hi.shape[0], :]
        # a finite upper crossing implies a finite lower one after sorting
        pair_ok = np.isfinite(hi)
        spans = np.where(pair_ok, hi, 0.0) - np.where(pair_ok, lo, 0.0)
        out[k] = spans.sum(axis=0)
    return out


def average_to_lrt(avg: Sinogram, mask: Mask2) -> Sinogram:
    """Rescale chord-averaged strain data to LRT line integrals.

    Multiplies each sample by the chord length of its ray through the mask
    boundary polygon; rays that miss the region become zero.
    """
    if avg.kind != KIND_AVERAGE:
        raise ValueError("average_to_lrt needs an average_strain sinogram")
    L = chord_lengths(mask.boundary_polygon, avg.angles, avg.s_values)
    data = np.where(L > 0.0, avg.data * L, 0.0)
    return Sinogram(avg.angles, avg.s_values, data, KIND_LRT)


def with_noise(sg: Sinogram, sigma_fraction: float, seed) -> Sinogram:
    """Add Gaussian noise with std sigma_fraction * max |data|.

    Uses a counter-based generator keyed by the seed, so results are
    reproducible regardless of evaluation order elsewhere.
    """
    if sigma_fraction < 0:
        raise ValueError("sigma_fraction must be non-negative")
    if sigma_fraction == 0:
        return sg
    sigma = sigma_fraction * float(np.max(np.abs(sg.data)))
    rng = np.random.Generator(np.random.Philox(seed))
    noisy = sg.data + rng.normal(0.0, sigma, sg.data.shape)
    return Sinogram(sg.angles, sg.s_values, noisy, sg.kind)


# ---------------------------------------------------------------------------
# Sinogram I/O
# ---------------------------------------------------------------------------
#
# Binary format: one ASCII header line
#     SGM1 <kind> <n_theta> <n_s> <ds>\n
# then n_theta little-endian float64 angles, then the (n_theta, n_s) data
# block row-major.  Offsets are implicit: symmetric about zero at spacing ds.


def write_sinogram(sg: Sinogram, path) -> None:
    header = f"{_SINOGRAM_MAGIC} {sg.kind} {sg.angles.size} {sg.s_values.size} {sg.ds!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(sg.angles, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(sg.data, dtype="<f8").tobytes())


def read_sinogram(path) -> Sinogram:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 5 or header[0] != _SINOGRAM_MAGIC:
            raise ValueError(f"{path}: not a {_SINOGRAM_MAGIC} sinogram file")
        kind = header[1]
        try:
            n_theta, n_s = int(header[2]), int(header[3])
            ds = float(header[4])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed header") from exc
        ang_bytes = fh.read(n_theta * 8)
        dat_bytes = fh.read(n_theta * n_s * 8)
        if len(ang_bytes) != n_theta * 8 or len(dat_bytes) != n_theta * n_s * 8:
            raise ValueError(f"{path}: truncated payload")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    angles = np.frombuffer(ang_bytes, dtype="<f8")
    data = np.frombuffer(dat_bytes, dtype="<f8").reshape(n_theta, n_s)
    return Sinogram(angles, symmetric_offsets(n_s, ds), data, kind)


def write_sinogram_csv(sg: Sinogram, path) -> None:
    """Delimited export with one (theta, s, value) row per sample."""
    T = np.repeat(sg.angles, sg.s_values.size)
    S = np.tile(sg.s_values, sg.angles.size)
    table = np.column_stack([T, S, sg.data.ravel()])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="theta,s,value", comments="")


def read_sinogram_csv(path, kind: str = KIND_AVERAGE) -> Sinogram:
    """Import a (theta, s, value) table; every angle must share one offset grid."""
    table = np.genfromtxt(path, delimiter=",", names=True)
    for col in ("theta", "s", "value"):
        if col not in (table.dtype.names or ()):
            raise ValueError(f"{path}: missing column {col!r}")
    thetas = np.unique(table["theta"])
    svals = np.unique(table["s"])
    if table.shape[0] != thetas.size * svals.size:
        raise ValueError(f"{path}: rows do not fill a complete (theta, s) grid")
    data = np.full((thetas.size, svals.size), np.nan)
    ti = np.searchsorted(thetas, table["theta"])
    si = np.searchsorted(svals, table["s"])
    data[ti, si] = table["value"]
    if np.any(np.isnan(data)):
        raise ValueError(f"{path}: duplicate or missing (theta, s) samples")
    return Sinogram(thetas, svals, data, kind)
