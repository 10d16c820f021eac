"""Command-line pipelines: phantoms, projection, reconstruction, diagnostics.

Each subcommand writes its data products (STF1/SGM1 + CSV), PNG renderings
of those products, and a JSON run manifest into ``--out-dir``.  Outputs are
deterministic for a fixed config and seed.  Exit codes: 0 success, 1 input
or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .elasticity import hooke_recover, reconstruct_fem
from .fields import (
    Mask2,
    ReconReport,
    ScalarField2,
    TensorField2,
    exterior_ratio,
    mask_from_polygon,
    mask_from_support,
    per_component_max_error,
    polygon_area,
    read_field,
    read_polygon_csv,
    rel_rms_error,
    write_field,
    write_field_csv,
    write_polygon_csv,
)
from .lrt import (
    KIND_AVERAGE,
    KIND_LRT,
    Sinogram,
    average_to_lrt,
    default_reconstruction_grid,
    lrt_forward,
    read_sinogram,
    read_sinogram_csv,
    tensor_fbp,
    trace_fbp,
    with_noise,
    write_sinogram,
    write_sinogram_csv,
)
from .phantoms import (
    AirySpec,
    ElasticConstants,
    add_hydrostatic,
    airy_strain,
    axisym_phantom,
    default_grid,
)
from .plots import save_field_heatmaps, save_sinogram_heatmap, save_sweep_plot
from .spectral import SpectralPlan, saint_venant

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# support tracing tolerance for the smooth (Gaussian-tailed) phantom
AIRY_MASK_TOL = 1e-6

# exterior leakage above this fraction of the interior peak suggests the
# measured object was not traction-free
TRACTION_RATIO_THRESHOLD = 0.05

DEFAULT_LADDER = (25, 50, 100, 200, 400, 800)


@dataclass
class RunConfig:
    """Echoed verbatim into every run manifest."""

    subcommand: str
    inputs: dict = field(default_factory=dict)
    out_dir: str = "."
    n_angles: int | None = None
    angle_scheme: str | None = None
    noise_sigma_fraction: float = 0.0
    seed: int = 0
    constants: dict | None = None
    cutoff_fraction: float = 1.0
    route: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.noise_sigma_fraction < 0:
            raise ValueError("noise_sigma_fraction must be >= 0")
        if self.n_angles is not None and self.n_angles < 2:
            raise ValueError("n_angles must be at least 2")


class _Parser(argparse.ArgumentParser):
    """argparse flags bad usage with exit code 2; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _constants_from(args) -> ElasticConstants:
    return ElasticConstants(E=args.E, nu=args.nu, mode=args.mode)


def scheme_angles(scheme: str, n_angles: int, start: float = 0.0) -> np.ndarray:
    """Projection angles for a named sampling scheme, sorted into [0, 2pi)."""
    if scheme == "uniform_360":
        ang = start + np.arange(n_angles) * (2.0 * np.pi / n_angles)
    elif scheme == "golden_50":
        if n_angles != 50:
            raise ValueError("golden_50 scheme uses exactly 50 angles")
        ang = start + np.arange(50) * GOLDEN_ANGLE
    else:
        raise ValueError(f"unknown angle scheme {scheme!r}")
    ang = np.sort(np.mod(ang, 2.0 * np.pi))
    if np.min(np.diff(ang)) <= 0:
        raise ValueError("angle scheme produced duplicate angles")
    return ang


def _parse_explicit_angles(text: str) -> np.ndarray:
    try:
        ang = np.array([float(v) for v in text.split(",") if v.strip()], float)
    except ValueError as exc:
        raise ValueError(f"cannot parse angle list: {exc}") from None
    if ang.size < 2:
        raise ValueError("explicit angle list needs at least 2 angles")
    ang = np.sort(np.mod(ang, 2.0 * np.pi))
    if np.min(np.diff(ang)) <= 0:
        raise ValueError("explicit angle list has duplicate angles")
    return ang


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_manifest(args, config: RunConfig, metrics: dict, outputs: list[str]):
    manifest = {
        "config": asdict(config),
        "metrics": metrics,
        "outputs": sorted(outputs),
        "versions": {
            "straintomo": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
    }
    path = _out(args, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _save_field_products(f, args, stem: str, outputs: list[str]):
    write_field(f, _out(args, stem + ".stf"))
    write_field_csv(f, _out(args, stem + ".csv"))
    save_field_heatmaps(f, _out(args, stem + ".png"), title=stem)
    outputs += [stem + ".stf", stem + ".csv", stem + ".png"]


def _require_tensor(f, what: str) -> TensorField2:
    if not isinstance(f, TensorField2):
        raise ValueError(f"{what} must be a 3-component tensor field file")
    return f


def _require_scalar(f, what: str) -> ScalarField2:
    if not isinstance(f, ScalarField2):
        raise ValueError(f"{what} must be a 1-component scalar field file")
    return f


# ---------------------------------------------------------------------------
# phantom
# ---------------------------------------------------------------------------


def cmd_phantom(args) -> int:
    outputs: list[str] = []
    metrics: dict = {}
    if args.kind == "airy":
        grid = default_grid(args.nx)
        spec = AirySpec(alpha=args.alpha, constants=_constants_from(args), grid=grid)
        eps = airy_strain(spec)
        mask = mask_from_support(eps, tol=AIRY_MASK_TOL)
    elif args.kind == "axisym":
        grid = default_grid(args.nx)
        eps = axisym_phantom(args.nu, grid)
        mask = mask_from_support(eps)
    else:  # external: validate an existing file, trace its support
        if not args.field:
            raise ValueError("kind=external needs --field")
        eps = _require_tensor(read_field(args.field), "--field")
        grid = eps.grid
        mask = mask_from_support(eps, tol=AIRY_MASK_TOL)
        metrics["validated"] = os.path.basename(args.field)
    if args.hydrostatic:
        eps = add_hydrostatic(eps, mask, args.hydrostatic)

    _save_field_products(eps, args, "strain", outputs)
    write_polygon_csv(mask.boundary_polygon, _out(args, "mask.csv"))
    outputs.append("mask.csv")
    metrics.update(
        {
            "grid": [grid.nx, grid.ny, grid.dx, grid.dy, grid.ox, grid.oy],
            "peak_frobenius": float(eps.frobenius().max()),
            "mask_area": polygon_area(mask.boundary_polygon),
        }
    )
    config = RunConfig(
        subcommand="phantom",
        inputs={} if args.kind != "external" else {"field": args.field},
        out_dir=args.out_dir,
        constants={"E": args.E, "nu": args.nu, "mode": args.mode},
        extra={
            "kind": args.kind,
            "alpha": args.alpha,
            "nx": args.nx,
            "hydrostatic": args.hydrostatic,
        },
    )
    _write_manifest(args, config, metrics, outputs)
    return 0


# ---------------------------------------------------------------------------
# project
# ---------------------------------------------------------------------------


def cmd_project(args) -> int:
    eps = _require_tensor(read_field(args.field), "--field")
    if args.angles is not None:
        scheme = "explicit_list"
        ang = _parse_explicit_angles(args.angles)
    else:
        scheme = args.scheme
        n = 50 if args.scheme == "golden_50" and args.n_angles is None else args.n_angles
        if n is None:
            n = 200
        ang = scheme_angles(args.scheme, n, start=args.start_angle)
    config = RunConfig(
        subcommand="project",
        inputs={"field": args.field},
        out_dir=args.out_dir,
        n_angles=int(ang.size),
        angle_scheme=scheme,
        noise_sigma_fraction=args.noise,
        seed=args.seed,
        extra={"start_angle": args.start_angle},
    )
    sg = lrt_forward(eps, ang)
    if args.noise > 0:
        sg = with_noise(sg, args.noise, seed=args.seed)
    outputs: list[str] = []
    write_sinogram(sg, _out(args, "sinogram.sgm"))
    write_sinogram_csv(sg, _out(args, "sinogram.csv"))
    save_sinogram_heatmap(sg.angles, sg.s_values, sg.data, _out(args, "sinogram.png"),
                          title="longitudinal ray transform")
    outputs += ["sinogram.sgm", "sinogram.csv", "sinogram.png"]
    metrics = {
        "n_angles": int(ang.size),
        "n_offsets": int(sg.s_values.size),
        "ds": sg.ds,
        "max_abs": float(np.max(np.abs(sg.data))),
    }
    _write_manifest(args, config, metrics, outputs)
    return 0


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------


def _load_sinogram(path: str, input_kind: str) -> Sinogram:
    if path.endswith(".csv"):
        return read_sinogram_csv(
            path, kind=KIND_AVERAGE if input_kind == "average" else KIND_LRT
        )
    return read_sinogram(path)


def cmd_reconstruct(args) -> int:
    sg = _load_sinogram(args.sinogram, args.input_kind)
    grid = read_field(args.like).grid if args.like else default_reconstruction_grid(sg)

    mask: Mask2 | None = None
    if args.mask:
        mask = mask_from_polygon(grid, read_polygon_csv(args.mask))
    if sg.kind == KIND_AVERAGE or args.input_kind == "average":
        if mask is None:
            raise ValueError("average-strain input needs --mask to supply path lengths")
        sg = average_to_lrt(sg, mask)
    if args.route in ("fem", "both") and mask is None:
        raise ValueError("the FEM route needs --mask for the boundary value problem")

    cons = _constants_from(args)
    plan = SpectralPlan(grid=grid, pad_factor=args.pad_factor,
                        cutoff_fraction=args.cutoff)
    sf = tensor_fbp(sg, grid=grid, window=args.window)

    outputs: list[str] = []
    _save_field_products(sf, args, "solenoidal", outputs)

    reference = None
    ref_mask = mask
    if args.reference:
        reference = _require_tensor(read_field(args.reference), "--reference")
        if reference.grid != grid:
            raise ValueError("--reference grid does not match the reconstruction grid")
        if ref_mask is None:
            ref_mask = mask_from_support(reference, tol=AIRY_MASK_TOL)

    report = ReconReport(metadata={"route": args.route, "window": args.window,
                                   "cutoff_fraction": args.cutoff})
    if mask is not None:
        ratio = exterior_ratio(sf, mask)
        report.exterior_interior_ratio = ratio
        report.traction_violation_suspected = bool(ratio > TRACTION_RATIO_THRESHOLD)

    recons = {}
    if args.route in ("hooke", "both"):
        recons["strain_hooke"] = hooke_recover(sf, cons)
    if args.route in ("fem", "both"):
        recons["strain_fem"] = reconstruct_fem(sf, mask, cons, plan)
    for stem, f in recons.items():
        _save_field_products(f, args, stem, outputs)

    if reference is not None:
        errors = {
            stem: rel_rms_error(f, reference, ref_mask) for stem, f in recons.items()
        }
        report.metadata["rel_rms_error_by_route"] = errors
        primary = "strain_hooke" if "strain_hooke" in errors else "strain_fem"
        report.rel_rms_error = errors[primary]
        report.per_component_max_error = per_component_max_error(
            recons[primary], reference, ref_mask
        )

    with open(_out(args, "report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    outputs.append("report.json")

    config = RunConfig(
        subcommand="reconstruct",
        inputs={
            k: v
            for k, v in {
                "sinogram": args.sinogram,
                "mask": args.mask,
                "reference": args.reference,
                "like": args.like,
            }.items()
            if v
        },
        out_dir=args.out_dir,
        constants={"E": args.E, "nu": args.nu, "mode": args.mode},
        cutoff_fraction=args.cutoff,
        route=args.route,
        extra={"window": args.window, "input_kind": args.input_kind,
               "pad_factor": args.pad_factor},
    )
    _write_manifest(args, config, report.to_dict(), outputs)
    return 0


# ---------------------------------------------------------------------------
# incompat
# ---------------------------------------------------------------------------


def cmd_incompat(args) -> int:
    f = _require_tensor(read_field(args.field), "--field")
    plan = SpectralPlan(grid=f.grid, pad_factor=args.pad_factor,
                        cutoff_fraction=args.cutoff)
    w = saint_venant(f, plan)
    outputs: list[str] = []
    _save_field_products(w, args, "incompat", outputs)
    metrics = {
        "rms": float(np.sqrt(np.mean(w.values**2))),
        "max_abs": float(np.max(np.abs(w.values))),
    }
    if args.reference:
        ref = _require_scalar(read_field(args.reference), "--reference")
        if ref.grid != f.grid:
            raise ValueError("--reference grid does not match the field grid")
        metrics["rel_rms_vs_reference"] = float(
            np.sqrt(np.mean((w.values - ref.values) ** 2) / np.mean(ref.values**2))
        )
    config = RunConfig(
        subcommand="incompat",
        inputs={k: v for k, v in {"field": args.field,
                                  "reference": args.reference}.items() if v},
        out_dir=args.out_dir,
        cutoff_fraction=args.cutoff,
        extra={"pad_factor": args.pad_factor},
    )
    _write_manifest(args, config, metrics, outputs)
    return 0


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def cmd_trace(args) -> int:
    sg = read_sinogram(args.sinogram)
    grid = read_field(args.like).grid if args.like else None
    tr = trace_fbp(sg, grid=grid)
    outputs: list[str] = []
    _save_field_products(tr, args, "trace", outputs)
    metrics = {"rms": float(np.sqrt(np.mean(tr.values**2)))}
    if args.reference:
        # reference holds sigma_kk / E; plane strain scales it by (1 - nu^2)
        ref = _require_scalar(read_field(args.reference), "--reference")
        if ref.grid != tr.grid:
            raise ValueError("--reference grid does not match the trace grid")
        target = ref.values * ((1.0 - args.nu**2) if args.mode == "plane_strain" else 1.0)
        metrics["rel_rms_vs_reference"] = float(
            np.sqrt(np.mean((tr.values - target) ** 2) / np.mean(target**2))
        )
    config = RunConfig(
        subcommand="trace",
        inputs={k: v for k, v in {"sinogram": args.sinogram, "like": args.like,
                                  "reference": args.reference}.items() if v},
        out_dir=args.out_dir,
        constants={"E": args.E, "nu": args.nu, "mode": args.mode},
    )
    _write_manifest(args, config, metrics, outputs)
    return 0


# ---------------------------------------------------------------------------
# noise sweep
# ---------------------------------------------------------------------------


def _sweep_point(eps, cons, grid, mask, n, noise, seed):
    ang = np.arange(n) * (2.0 * np.pi / n)
    sg = lrt_forward(eps, ang)
    clean = rel_rms_error(hooke_recover(tensor_fbp(sg, grid=grid), cons), eps, mask)
    noisy = clean
    if noise > 0:
        sgn = with_noise(sg, noise, seed=seed)
        noisy = rel_rms_error(hooke_recover(tensor_fbp(sgn, grid=grid), cons), eps, mask)
    return clean, noisy


def fit_slope(n_values, errors, floor: float | None) -> float:
    """Least-squares slope of log error vs log n over the noise-limited points.

    Points within 3x of the discretisation floor are excluded; if that
    leaves fewer than two points the fit uses all of them.
    """
    n_values = np.asarray(n_values, float)
    errors = np.asarray(errors, float)
    keep = np.ones(n_values.size, bool)
    if floor is not None:
        keep = errors > 3.0 * floor
    if keep.sum() < 2:
        keep[:] = True
    return float(np.polyfit(np.log(n_values[keep]), np.log(errors[keep]), 1)[0])


def cmd_noise_sweep(args) -> int:
    eps = _require_tensor(read_field(args.field), "--field")
    grid = eps.grid
    cons = _constants_from(args)
    if args.mask:
        mask = mask_from_polygon(grid, read_polygon_csv(args.mask))
    else:
        mask = mask_from_support(eps, tol=AIRY_MASK_TOL)
    ladder = tuple(int(v) for v in args.ladder.split(","))
    if any(n < 2 for n in ladder) or len(ladder) < 2:
        raise ValueError("ladder needs at least two entries of at least 2 angles")

    with ThreadPoolExecutor(max_workers=min(4, len(ladder))) as pool:
        results = list(
            pool.map(
                lambda item: _sweep_point(
                    eps, cons, grid, mask, item[1], args.noise, args.seed + item[0]
                ),
                enumerate(ladder),
            )
        )
    clean = [r[0] for r in results]
    noisy = [r[1] for r in results]

    floor = None
    floor_method = "none"
    if args.full_floor or max(grid.nx, grid.ny) <= 200:
        n_floor = 50000 if args.full_floor else 5000
        ang = np.arange(n_floor) * (2.0 * np.pi / n_floor)
        sgf = lrt_forward(eps, ang)
        floor = rel_rms_error(
            hooke_recover(tensor_fbp(sgf, grid=grid), cons), eps, mask
        )
        floor_method = f"noiseless run at {n_floor} projections"
    else:
        # large grids: the flat noiseless ladder is the floor estimate
        floor = float(max(clean))
        floor_method = "max of the noiseless ladder"

    slope = fit_slope(ladder, noisy, floor)
    outputs: list[str] = []
    table = np.column_stack([ladder, clean, noisy])
    np.savetxt(_out(args, "sweep.csv"), table, fmt="%.17g", delimiter=",",
               header="n_angles,clean_error,noisy_error", comments="")
    save_sweep_plot(list(ladder), {"noisy": noisy, "noiseless": clean}, floor,
                    _out(args, "sweep.png"), title="convergence with projection count")
    outputs += ["sweep.csv", "sweep.png"]
    metrics = {
        "ladder": list(ladder),
        "clean_errors": [float(v) for v in clean],
        "noisy_errors": [float(v) for v in noisy],
        "floor": floor,
        "floor_method": floor_method,
        "fitted_slope": slope,
    }
    config = RunConfig(
        subcommand="noise-sweep",
        inputs={k: v for k, v in {"field": args.field, "mask": args.mask}.items() if v},
        out_dir=args.out_dir,
        noise_sigma_fraction=args.noise,
        seed=args.seed,
        constants={"E": args.E, "nu": args.nu, "mode": args.mode},
        extra={"ladder": list(ladder), "full_floor": args.full_floor},
    )
    _write_manifest(args, config, metrics, outputs)
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _add_constants_flags(p):
    p.add_argument("--E", type=float, default=1.0, help="Young's modulus")
    p.add_argument("--nu", type=float, default=0.34, help="Poisson ratio")
    p.add_argument("--mode", choices=["plane_stress", "plane_strain"],
                   default="plane_stress")


def _add_plan_flags(p):
    p.add_argument("--cutoff", type=float, default=1.0,
                   help="spectral frequency cutoff fraction in (0, 1]")
    p.add_argument("--pad-factor", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strain-tomo",
                     description="2D strain tomography pipelines")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("phantom", help="generate or validate a strain field")
    p.add_argument("kind", choices=["airy", "axisym", "external"])
    p.add_argument("--alpha", type=float, default=15.0)
    p.add_argument("--nx", type=int, default=400)
    p.add_argument("--field", help="STF1 file to validate (kind=external)")
    p.add_argument("--hydrostatic", type=float, default=0.0,
                   help="add this equibiaxial strain inside the support")
    _add_constants_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="forward ray transform of a field file")
    p.add_argument("--field", required=True)
    p.add_argument("--scheme", choices=["uniform_360", "golden_50"],
                   default="uniform_360")
    p.add_argument("--n-angles", type=int, default=None)
    p.add_argument("--angles", default=None,
                   help="explicit comma-separated angle list (radians)")
    p.add_argument("--start-angle", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0,
                   help="Gaussian noise std as a fraction of max |LRT|")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("reconstruct", help="solenoidal part and full strain")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--input-kind", choices=["lrt", "average"], default="lrt")
    p.add_argument("--route", choices=["hooke", "fem", "both"], default="hooke")
    p.add_argument("--mask", help="boundary polygon CSV")
    p.add_argument("--reference", help="ground-truth STF1 file for error metrics")
    p.add_argument("--like", help="copy the reconstruction grid from this field file")
    p.add_argument("--window", choices=["ramlak", "cosine"], default="ramlak")
    _add_constants_flags(p)
    _add_plan_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("incompat", help="Saint-Venant incompatibility map")
    p.add_argument("--field", required=True)
    p.add_argument("--reference", help="scalar STF1 file to compare against")
    _add_plan_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_incompat)

    p = sub.add_parser("trace", help="scalar FBP of an LRT sinogram")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--like", help="copy the output grid from this field file")
    p.add_argument("--reference",
                   help="scalar STF1 holding sigma_kk/E for comparison")
    _add_constants_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("noise-sweep", help="projection-count convergence study")
    p.add_argument("--field", required=True)
    p.add_argument("--mask", help="boundary polygon CSV")
    p.add_argument("--ladder", default=",".join(str(n) for n in DEFAULT_LADDER))
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-floor", action="store_true",
                   help="estimate the floor with 50000 projections instead of 5000")
    _add_constants_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_noise_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"strain-tomo: error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"strain-tomo: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
