"""Command-line interface for surface registration experiments.

Every command is a thin driver over the library: it reads a key-value
config file (all keys overridable by flags), runs one operation and writes
its results as native meshes, OBJ exports, CSV tables and a summary JSON.
Outputs are a pure function of (config, input files, seed): rerunning a
command with the same inputs reproduces the files byte for byte.

Exit codes: 0 success, 1 numerical failure (solver, step or convergence),
2 usage or config error, 3 I/O error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .adjoint import backward_sweep, gradient
from .config import ConfigError, RunConfig, _base_type, as_dict, build_config, parse_file
from .errors import (
    DegenerateElementError,
    MeshError,
    MeshFormatError,
    MeshMismatchError,
    SolverError,
    StepFailureError,
    ZeroVelocityError,
)
from .fixtures import (
    VASE_PRESETS,
    cylinder_surface,
    torus_surface,
    torus_triangle,
    vase_family,
    vase_surface,
)
from .geometry import Immersion, surface_area
from .mesh import (
    Topology,
    build_grid,
    compatible,
    export_obj,
    load_mesh,
    load_velocity,
    save_mesh,
    save_velocity,
)
from .metric import inner_product
from .registration import RegistrationStatus, energy, register
from .shooting import export_frames, path_energy, path_length, shoot
from .statistics import MeanStatus, karcher_mean, triangle_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2
EXIT_IO = 3

#: finite-difference step sizes swept by the gradient check
GRADCHECK_STEPS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7)

#: model-domain topology required by each fixture shape
_FIXTURE_TOPOLOGY = {
    "cylinder": "cylinder",
    "bent-cylinder": "cylinder",
    "vase": "cylinder",
    "vase-family": "cylinder",
    "torus": "torus",
    "torus-triangle": "torus",
}

#: bent-cylinder parameters used when the config does not set them
_BENT_DEFAULTS = {"bend_deg": 90.0, "ripples": 5, "ripple_amplitude": 0.02}


def _parse_bool(text: str) -> bool:
    words = {"true": True, "yes": True, "on": True, "1": True,
             "false": False, "no": False, "off": False, "0": False}
    try:
        return words[text.strip().lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}") from None


_FLAG_TYPES = {bool: _parse_bool, int: int, float: float, str: str}


def _config_flag_fields() -> list:
    return [(f.name, _base_type(f.type)) for f in fields(RunConfig)]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for name, base in _config_flag_fields():
        group.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=_FLAG_TYPES[base],
            default=None,
            metavar=base.__name__.upper(),
            help=f"override config key {name!r}",
        )


def _load_config(args) -> tuple[RunConfig, set]:
    """Build the run config and report which keys were set explicitly."""
    file_values = parse_file(args.config) if args.config else {}
    overrides = {}
    for name, _ in _config_flag_fields():
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    cfg = build_config(file_values, overrides)
    return cfg, set(file_values) | set(overrides)


def _domain_mesh(cfg: RunConfig):
    return build_grid(Topology.parse(cfg.topology), cfg.nx, cfg.ny)


def _load_immersion(path: str) -> Immersion:
    mesh, coords = load_mesh(path)
    return Immersion(mesh, coords)


def _write_shape(q: Immersion, path: str, obj: bool) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_mesh(q.mesh, q.coords, path)
    logger.info("wrote %s", path)
    if obj:
        obj_path = os.path.splitext(path)[0] + ".obj"
        export_obj(q.mesh, q.coords, obj_path)
        logger.info("wrote %s", obj_path)


def _write_summary(out_dir: str, payload: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return path


def _write_history_csv(out_dir: str, history) -> str:
    path = os.path.join(out_dir, "history.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "energy", "kinetic", "match", "grad_norm", "step"])
        for rec in history:
            writer.writerow(
                [rec.iteration, repr(rec.energy), repr(rec.kinetic),
                 repr(rec.match), repr(rec.grad_norm), repr(rec.step)]
            )
    return path


def _registration_summary(result) -> dict:
    last = result.history[-1]
    return {
        "status": result.status.value,
        "iterations": result.iterations,
        "energy": last.energy,
        "kinetic_energy": last.kinetic,
        "matching_error": last.match,
        "gradient_norm": last.grad_norm,
        "path_length": path_length(result.path),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_meshgen(args) -> int:
    cfg, _ = _load_config(args)
    mesh = _domain_mesh(cfg)
    coords = np.column_stack([mesh.nodes, np.zeros(mesh.n_nodes)])
    _write_shape(Immersion(mesh, coords), args.out, args.obj)
    print(f"{args.out}: {cfg.topology} {cfg.nx}x{cfg.ny}, "
          f"{mesh.n_nodes} nodes, {mesh.n_triangles} triangles")
    return EXIT_OK


def _fixture_shapes(cfg: RunConfig, shape: str, preset: int) -> list[tuple[str, Immersion]]:
    mesh = _domain_mesh(cfg)
    if shape in ("cylinder", "bent-cylinder"):
        q = cylinder_surface(mesh, cfg.radius, cfg.height, cfg.bend_deg,
                             cfg.ripples, cfg.ripple_amplitude)
        return [(shape, q)]
    if shape == "torus":
        q = torus_surface(mesh, cfg.major_radius, cfg.minor_radius, cfg.asymmetry)
        return [(shape, q)]
    if shape == "vase":
        if not 0 <= preset < len(VASE_PRESETS):
            raise ConfigError(f"vase preset must be in [0, {len(VASE_PRESETS)}), got {preset}")
        q = vase_surface(mesh, cfg.radius, cfg.height, VASE_PRESETS[preset])
        return [(f"vase_{preset}", q)]
    if shape == "torus-triangle":
        shapes = torus_triangle(mesh, cfg.major_radius, cfg.minor_radius, cfg.asymmetry)
        return list(zip(("triangle_a", "triangle_b", "triangle_c"), shapes))
    if shape == "vase-family":
        shapes = vase_family(mesh, cfg.radius, cfg.height)
        return [(f"vase_{k}", q) for k, q in enumerate(shapes)]
    raise ConfigError(f"unknown fixture shape {shape!r}")


def cmd_fixture(args) -> int:
    cfg, provided = _load_config(args)
    needed = _FIXTURE_TOPOLOGY.get(args.shape)
    if needed is None:
        raise ConfigError(f"unknown fixture shape {args.shape!r}")
    if "topology" in provided and cfg.topology != needed:
        raise ConfigError(
            f"fixture {args.shape!r} needs topology {needed!r}, config says {cfg.topology!r}"
        )
    cfg.topology = needed
    if args.shape == "bent-cylinder":
        for key, value in _BENT_DEFAULTS.items():
            if key not in provided:
                setattr(cfg, key, value)

    shapes = _fixture_shapes(cfg, args.shape, args.preset)
    if len(shapes) == 1:
        paths = [args.out]
    else:
        os.makedirs(args.out, exist_ok=True)
        paths = [os.path.join(args.out, f"{name}.mesh") for name, _ in shapes]
    for (name, q), path in zip(shapes, paths):
        _write_shape(q, path, args.obj)
        print(f"{path}: {name}, surface area {surface_area(q):.6f}")
    return EXIT_OK


def cmd_register(args) -> int:
    cfg, _ = _load_config(args)
    template = _load_immersion(args.template)
    target = _load_immersion(args.target)
    result = register(template, target, cfg)

    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_shape(result.path.final, os.path.join(out, "registered.mesh"), obj=True)
    save_velocity(template.mesh, result.u0, os.path.join(out, "initial_velocity.vel"))
    _write_history_csv(out, result.history)
    if cfg.export_frames:
        export_frames(result.path, os.path.join(out, "frames"))
    summary = {
        "command": "register",
        "template": args.template,
        "target": args.target,
        "config": as_dict(cfg),
        **_registration_summary(result),
    }
    _write_summary(out, summary)

    last = result.history[-1]
    print(f"register: {result.status.value} after {result.iterations} iterations, "
          f"energy {last.energy:.6e}, match {last.match:.6e}")
    if result.status is not RegistrationStatus.CONVERGED:
        print(f"error: registration did not converge ({result.status.value})",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_shoot(args) -> int:
    cfg, _ = _load_config(args)
    q0 = _load_immersion(args.initial)
    vmesh, u0 = load_velocity(args.velocity)
    if not compatible(q0.mesh, vmesh):
        raise MeshMismatchError("shoot: velocity file does not match the initial mesh")

    path = shoot(q0, u0, cfg.n_steps, cfg.alpha, eps_reg=cfg.eps_reg, cg_tol=cfg.cg_tol)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    written = export_frames(path, os.path.join(out, "frames"))
    _write_shape(path.final, os.path.join(out, "final.mesh"), obj=True)
    summary = {
        "command": "shoot",
        "initial": args.initial,
        "velocity": args.velocity,
        "config": as_dict(cfg),
        "n_frames": path.n_steps + 1,
        "path_energy": path_energy(path),
        "path_length": path_length(path),
        "final_area": surface_area(path.final),
    }
    _write_summary(out, summary)
    print(f"shoot: {path.n_steps + 1} frames, length {summary['path_length']:.6e}, "
          f"{len(written)} files")
    return EXIT_OK


def cmd_triangle(args) -> int:
    cfg, _ = _load_config(args)
    qa = _load_immersion(args.a)
    qb = _load_immersion(args.b)
    qc = _load_immersion(args.c)
    report = triangle_experiment(qa, qb, qc, cfg)

    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    for name, mid in zip(("midpoint_ab", "midpoint_bc", "midpoint_ca"), report.midpoints):
        _write_shape(mid, os.path.join(out, f"{name}.mesh"), obj=True)
    summary = {
        "command": "triangle",
        "vertices": [args.a, args.b, args.c],
        "config": as_dict(cfg),
        "angles_deg": list(report.angles_deg),
        "angle_sum_deg": report.angle_sum_deg,
        "side_lengths": list(report.side_lengths),
        "midpoint_areas": list(report.midpoint_areas),
        "vertex_areas": list(report.vertex_areas),
        "statuses": {k: s.value for k, s in sorted(report.statuses.items())},
    }
    _write_summary(out, summary)

    a1, a2, a3 = report.angles_deg
    print(f"triangle: angles {a1:.3f} + {a2:.3f} + {a3:.3f} = "
          f"{report.angle_sum_deg:.3f} deg")
    if not report.converged:
        bad = [k for k, s in sorted(report.statuses.items())
               if s is not RegistrationStatus.CONVERGED]
        print(f"error: registrations did not converge: {', '.join(bad)}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_mean(args) -> int:
    cfg, _ = _load_config(args)
    shapes = [_load_immersion(p) for p in args.shapes]
    init = _load_immersion(args.start) if args.start else None
    result = karcher_mean(shapes, init, cfg, mean_tol=cfg.mean_tol,
                          max_outer=cfg.max_outer, jobs=cfg.jobs)

    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_shape(result.mean, os.path.join(out, "mean.mesh"), obj=True)
    with open(os.path.join(out, "norms.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["outer_iteration", "velocity_norm"])
        for k, vn in enumerate(result.velocity_norms, start=1):
            writer.writerow([k, repr(vn)])
    summary = {
        "command": "mean",
        "shapes": list(args.shapes),
        "start": args.start,
        "config": as_dict(cfg),
        "status": result.status.value,
        "outer_iterations": result.iterations,
        "velocity_norms": result.velocity_norms,
        "registration_statuses": [s.value for s in result.statuses],
        "mean_area": surface_area(result.mean),
    }
    _write_summary(out, summary)

    print(f"mean: {result.status.value} after {result.iterations} outer iterations, "
          f"final velocity norm {result.velocity_norms[-1]:.6e}")
    if result.status is not MeanStatus.CONVERGED:
        print("error: mean iteration did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _gradcheck_base(cfg: RunConfig) -> Immersion:
    mesh = _domain_mesh(cfg)
    topology = Topology.parse(cfg.topology)
    if topology is Topology.CYLINDER:
        return cylinder_surface(mesh, cfg.radius, cfg.height, cfg.bend_deg,
                                cfg.ripples, cfg.ripple_amplitude)
    if topology is Topology.TORUS:
        return torus_surface(mesh, cfg.major_radius, cfg.minor_radius, cfg.asymmetry)
    coords = np.column_stack([mesh.nodes, np.zeros(mesh.n_nodes)])
    return Immersion(mesh, coords)


def cmd_gradcheck(args) -> int:
    cfg, _ = _load_config(args)
    q0 = _gradcheck_base(cfg)
    rng = np.random.default_rng(cfg.seed)
    shape = (q0.mesh.n_nodes, 3)
    q_target = q0.displaced(0.05 * rng.standard_normal(shape))
    u0 = 0.2 * rng.standard_normal(shape)

    path = shoot(q0, u0, cfg.n_steps, cfg.alpha, eps_reg=cfg.eps_reg, cg_tol=cfg.cg_tol)
    adj = backward_sweep(path, q_target, cfg.sigma, diagnostics=False, cg_tol=cfg.cg_tol)
    grad = gradient(path, adj)
    op0 = path.operators[0]

    header = ["dir"] + [f"h={h:g}" for h in GRADCHECK_STEPS] + ["min"]
    rows = []
    mins = []
    for k in range(cfg.directions):
        v = rng.standard_normal(shape)
        pairing = inner_product(op0, grad, v)
        errs = []
        for h in GRADCHECK_STEPS:
            e_plus, _, _ = energy(q0, u0 + h * v, q_target, cfg)
            e_minus, _, _ = energy(q0, u0 - h * v, q_target, cfg)
            fd = (e_plus - e_minus) / (2.0 * h)
            scale = max(abs(pairing), abs(fd), 1e-30)
            errs.append(abs(pairing - fd) / scale)
        mins.append(min(errs))
        rows.append([str(k)] + [f"{e:.3e}" for e in errs] + [f"{mins[-1]:.3e}"])

    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    worst = max(mins)
    passed = worst <= cfg.fd_tol

    summary = {
        "command": "gradcheck",
        "config": as_dict(cfg),
        "fd_steps": list(GRADCHECK_STEPS),
        "min_errors": mins,
        "worst_error": worst,
        "tolerance": cfg.fd_tol,
        "passed": passed,
    }
    _write_summary(cfg.out_dir, summary)
    print(f"gradcheck: worst min-over-h relative error {worst:.3e} "
          f"({'<=' if passed else '>'} {cfg.fd_tol:g}) -> {'pass' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", default=None,
                        help="key-value config file (flags override its keys)")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (-v info, -vv debug)")

    parser = argparse.ArgumentParser(
        prog="innershape",
        description="Geodesic registration and statistics of parametrized surfaces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("meshgen", parents=[common],
                       help="write the flat model-domain mesh as a surface file")
    p.add_argument("--out", required=True, metavar="FILE", help="output mesh file")
    p.add_argument("--obj", action="store_true", help="also write an OBJ next to it")
    _add_config_flags(p)
    p.set_defaults(func=cmd_meshgen)

    p = sub.add_parser("fixture", parents=[common], help="generate a named test surface")
    p.add_argument("--shape", required=True, choices=sorted(_FIXTURE_TOPOLOGY),
                   help="which surface family to generate")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="output file (single shape) or directory (shape families)")
    p.add_argument("--preset", type=int, default=0, metavar="K",
                   help="vase preset index (shape 'vase' only)")
    p.add_argument("--obj", action="store_true", help="also write OBJ exports")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("register", parents=[common],
                       help="register a template surface onto a target")
    p.add_argument("--template", required=True, metavar="FILE", help="template mesh")
    p.add_argument("--target", required=True, metavar="FILE", help="target mesh")
    _add_config_flags(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("shoot", parents=[common],
                       help="integrate the geodesic flow from a velocity file")
    p.add_argument("--initial", required=True, metavar="FILE", help="initial mesh")
    p.add_argument("--velocity", required=True, metavar="FILE", help="velocity file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("triangle", parents=[common],
                       help="geodesic triangle between three surfaces")
    p.add_argument("--a", required=True, metavar="FILE", help="vertex surface A")
    p.add_argument("--b", required=True, metavar="FILE", help="vertex surface B")
    p.add_argument("--c", required=True, metavar="FILE", help="vertex surface C")
    _add_config_flags(p)
    p.set_defaults(func=cmd_triangle)

    p = sub.add_parser("mean", parents=[common],
                       help="iterated mean of a collection of surfaces")
    p.add_argument("--shapes", required=True, nargs="+", metavar="FILE",
                   help="input surfaces")
    p.add_argument("--start", default=None, metavar="FILE",
                   help="starting guess mesh (default: first shape)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of the energy gradient")
    _add_config_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MeshMismatchError as exc:
        print(f"error: mesh mismatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MeshFormatError as exc:
        print(f"error: bad input file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    except StepFailureError as exc:
        print(f"error: step failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DegenerateElementError, ZeroVelocityError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MeshError as exc:
        print(f"error: mesh: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
