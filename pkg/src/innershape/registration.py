"""Endpoint registration by gradient descent on the initial velocity.

Minimizes  E(u_0) = path energy + 1/(2 sigma^2) * |q_N - q_target|^2_flat
over the initial velocity of a shot geodesic, using the exact adjoint
gradient and Armijo backtracking with step doubling after accepted steps.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .adjoint import backward_sweep, gradient as adjoint_gradient
from .errors import StepFailureError
from .geometry import Immersion, check_same_mesh
from .metric import assemble, inner_product, parameter_mass_matrix, sharp
from .shooting import GeodesicPath, path_energy, shoot

logger = logging.getLogger(__name__)

INIT_MODES = ("zero", "l2diff")


@dataclass
class RegistrationConfig:
    """Parameters of a registration run.

    ``init`` selects the initial velocity: "zero", or "l2diff" for the
    metric-raised pointwise difference to the target.  ``tol_match`` is
    optional; when set, reaching it also counts as convergence.  With
    ``fixed_step`` the line search is disabled and every step uses
    ``step_size`` unchanged.
    """

    alpha: float = 0.6
    sigma: float = 1.0
    n_steps: int = 10
    max_iters: int = 200
    step_size: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    step_min: float = 1e-12
    tol_grad: float = 1e-6
    tol_match: float | None = None
    init: str = "zero"
    fixed_step: bool = False
    eps_reg: float | None = None
    cg_tol: float | None = None

    def validate(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError(f"armijo_shrink must be in (0, 1), got {self.armijo_shrink}")
        if not 0 < self.armijo_c < 1:
            raise ValueError(f"armijo_c must be in (0, 1), got {self.armijo_c}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")


class RegistrationStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STEP_FAILURE = "step_failure"


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    kinetic: float
    match: float
    grad_norm: float
    step: float


@dataclass
class RegistrationResult:
    """Best iterate of a registration run with its full descent history."""

    u0: np.ndarray = field(repr=False)
    path: GeodesicPath = field(repr=False)
    history: list[IterationRecord] = field(repr=False)
    status: RegistrationStatus = RegistrationStatus.MAX_ITERS

    @property
    def iterations(self) -> int:
        return self.history[-1].iteration if self.history else 0

    @property
    def energy(self) -> float:
        return self.history[-1].energy


def l2_matching(q: Immersion, q_target: Immersion) -> float:
    """Squared pointwise distance integrated over the flat parameter domain."""
    check_same_mesh(q.mesh, q_target.mesh, "matching")
    mass = parameter_mass_matrix(q.mesh)
    d = q.coords - q_target.coords
    return float(np.vdot(d, mass @ d))


def energy(
    q0: Immersion, u0: np.ndarray, q_target: Immersion, cfg: RegistrationConfig
) -> tuple[float, float, float]:
    """Objective value at an initial velocity: (total, kinetic, match)."""
    path = _shoot(q0, u0, cfg)
    return _energy_of(path, q_target, cfg)


def _shoot(q0: Immersion, u0: np.ndarray, cfg: RegistrationConfig) -> GeodesicPath:
    return shoot(q0, u0, cfg.n_steps, cfg.alpha, eps_reg=cfg.eps_reg, cg_tol=cfg.cg_tol)


def _energy_of(
    path: GeodesicPath, q_target: Immersion, cfg: RegistrationConfig
) -> tuple[float, float, float]:
    kin = path_energy(path)
    match = l2_matching(path.final, q_target)
    return kin + match / (2.0 * cfg.sigma * cfg.sigma), kin, match


def initial_velocity(q0: Immersion, q_target: Immersion, cfg: RegistrationConfig) -> np.ndarray:
    """Starting velocity per ``cfg.init``."""
    if cfg.init == "zero":
        return np.zeros((q0.mesh.n_nodes, 3))
    op = assemble(q0, cfg.alpha, cfg.eps_reg)
    mass = parameter_mass_matrix(q0.mesh)
    return sharp(op, mass @ (q_target.coords - q0.coords))


def register(q0: Immersion, q_target: Immersion, cfg: RegistrationConfig) -> RegistrationResult:
    """Descend the registration objective from the configured start.

    Returns the best iterate; the history has one row per iterate (the
    initial one included) with the step size that produced it.  Statuses:
    CONVERGED when the gradient norm falls to ``tol_grad`` (or the matching
    error to ``tol_match``), MAX_ITERS when the budget runs out,
    STEP_FAILURE when no acceptable step of size >= ``step_min`` exists.
    """
    cfg.validate()
    check_same_mesh(q0.mesh, q_target.mesh, "registration")

    u = initial_velocity(q0, q_target, cfg)
    path = _shoot(q0, u, cfg)
    e_total, e_kin, e_match = _energy_of(path, q_target, cfg)

    history: list[IterationRecord] = []
    step = cfg.step_size
    status = RegistrationStatus.MAX_ITERS
    iteration = 0
    last_step = 0.0

    while True:
        adj = backward_sweep(path, q_target, cfg.sigma, diagnostics=False, cg_tol=cfg.cg_tol)
        g = adjoint_gradient(path, adj)
        sq_norm = max(inner_product(path.operators[0], g, g), 0.0)
        g_norm = float(np.sqrt(sq_norm))
        history.append(
            IterationRecord(iteration, e_total, e_kin, e_match, g_norm, last_step)
        )
        logger.info(
            "iter %d: E=%.6e kinetic=%.6e match=%.6e |grad|=%.3e step=%.2e",
            iteration, e_total, e_kin, e_match, g_norm, last_step,
        )

        if g_norm <= cfg.tol_grad:
            status = RegistrationStatus.CONVERGED
            break
        if cfg.tol_match is not None and e_match <= cfg.tol_match:
            status = RegistrationStatus.CONVERGED
            break
        if iteration >= cfg.max_iters:
            status = RegistrationStatus.MAX_ITERS
            break

        accepted = False
        if cfg.fixed_step:
            try:
                trial_path = _shoot(q0, u - step * g, cfg)
                trial = _energy_of(trial_path, q_target, cfg)
                accepted = True
            except StepFailureError as exc:
                logger.warning("fixed step failed: %s", exc)
        else:
            while step >= cfg.step_min:
                try:
                    trial_path = _shoot(q0, u - step * g, cfg)
                    trial = _energy_of(trial_path, q_target, cfg)
                except StepFailureError as exc:
                    logger.debug("step %.2e rejected: %s", step, exc)
                    step *= cfg.armijo_shrink
                    continue
                if trial[0] <= e_total - cfg.armijo_c * step * sq_norm:
                    accepted = True
                    break
                step *= cfg.armijo_shrink

        if not accepted:
            status = RegistrationStatus.STEP_FAILURE
            break

        u = u - step * g
        path = trial_path
        e_total, e_kin, e_match = trial
        iteration += 1
        last_step = step
        if not cfg.fixed_step:
            step *= 2.0

    return RegistrationResult(u0=u, path=path, history=history, status=status)
