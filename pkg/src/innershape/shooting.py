"""Discrete geodesic shooting for the inner metric.

The flow integrates, with step dt = 1/N,

    q_{i+1} = q_i + dt * u_i
    A(q_{i+1}) u_{i+1} = A(q_i) u_i + dt * (d/dq) l(u_i, u_i; q_i)

where A is the metric operator and l the kinetic form: the momentum is
updated by the surface gradient of the kinetic energy, then converted back
to a velocity with the metric at the new immersion.  Time always spans
[0, 1]; reaching the same endpoint with more steps only refines the path.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateElementError, SolverError, StepFailureError
from .geometry import Immersion
from .metric import (
    MetricOperator,
    assemble,
    flat,
    inner_product,
    kinetic_surface_gradient,
    sharp,
)
from . import mesh as meshio


@dataclass
class GeodesicPath:
    """A discrete geodesic: immersions q_0..q_N and velocities u_0..u_{N-1}.

    ``kinetic[i]`` is 1/2 <u_i, u_i> at q_i; ``operators[i]`` caches the
    assembled metric operator at q_i for i < N (reused by the adjoint sweep).
    """

    alpha: float
    dt: float
    immersions: list[Immersion] = field(repr=False)
    velocities: list[np.ndarray] = field(repr=False)
    kinetic: np.ndarray = field(repr=False)
    operators: list[MetricOperator] = field(repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.velocities)

    @property
    def final(self) -> Immersion:
        return self.immersions[-1]


def shoot(
    q0: Immersion,
    u0: np.ndarray,
    n_steps: int,
    alpha: float,
    eps_reg: float | None = None,
    cg_tol: float | None = None,
) -> GeodesicPath:
    """Integrate the geodesic flow from an initial immersion and velocity.

    Parameters
    ----------
    q0 : Immersion
    u0 : ndarray, shape (n, 3)
        Initial velocity, one vector per unique node.
    n_steps : int
        Number of time steps N; dt = 1/N.
    alpha : float
        Metric length scale.
    eps_reg, cg_tol : optional
        Forwarded to geometry checks and sharp-solves.

    Raises
    ------
    StepFailureError
        Wrapping degenerate geometry or solver failures, with the index of
        the step being advanced.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (q0.mesh.n_nodes, 3):
        raise ValueError(f"expected ({q0.mesh.n_nodes}, 3) velocity, got {u0.shape}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    dt = 1.0 / n_steps
    sharp_kwargs = {} if cg_tol is None else {"tol": cg_tol}

    immersions = [q0]
    velocities = [u0]
    kinetic = np.empty(n_steps)
    operators: list[MetricOperator] = []

    try:
        operators.append(assemble(q0, alpha, eps_reg))
    except (DegenerateElementError, SolverError, ValueError) as exc:
        raise StepFailureError(0, str(exc)) from exc

    for i in range(n_steps):
        q_i = immersions[i]
        u_i = velocities[i]
        op_i = operators[i]
        kinetic[i] = 0.5 * inner_product(op_i, u_i, u_i)
        try:
            q_next = Immersion(q_i.mesh, q_i.coords + dt * u_i)
            if i < n_steps - 1:
                momentum = flat(op_i, u_i) + dt * kinetic_surface_gradient(
                    q_i, alpha, u_i, u_i, eps_reg
                )
                op_next = assemble(q_next, alpha, eps_reg)
                operators.append(op_next)
                velocities.append(sharp(op_next, momentum, **sharp_kwargs))
        except (DegenerateElementError, SolverError, ValueError) as exc:
            raise StepFailureError(i, str(exc)) from exc
        immersions.append(q_next)

    return GeodesicPath(
        alpha=alpha,
        dt=dt,
        immersions=immersions,
        velocities=velocities,
        kinetic=kinetic,
        operators=operators,
    )


def path_energy(path: GeodesicPath) -> float:
    """Discrete energy: dt times the summed per-step kinetic energies."""
    return path.dt * float(np.sum(path.kinetic))


def path_length(path: GeodesicPath) -> float:
    """Discrete length: dt times the summed per-step speeds."""
    return path.dt * float(np.sum(np.sqrt(2.0 * np.maximum(path.kinetic, 0.0))))


def export_frames(path: GeodesicPath, out_dir, basename: str = "frame") -> list[str]:
    """Write every frame as OBJ + native mesh, plus per-node speed CSVs.

    Frame i gets ``<basename>_<i>.obj`` and ``.mesh``; for i < N a
    ``<basename>_<i>_speed.csv`` holds each node's velocity magnitude.
    Returns the list of written file names.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    width = len(str(path.n_steps))
    for i, q in enumerate(path.immersions):
        stem = os.path.join(out_dir, f"{basename}_{i:0{width}d}")
        meshio.export_obj(q.mesh, q.coords, stem + ".obj")
        meshio.save_mesh(q.mesh, q.coords, stem + ".mesh")
        written += [stem + ".obj", stem + ".mesh"]
        if i < len(path.velocities):
            speed = np.linalg.norm(path.velocities[i], axis=1)
            with open(stem + "_speed.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["node", "speed"])
                for k, s in enumerate(speed):
                    writer.writerow([k, repr(float(s))])
            written.append(stem + "_speed.csv")
    return written
