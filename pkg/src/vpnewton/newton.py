"""Standard and stress-velocity Newton solvers for one momentum step."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly as asm
from .linalg import AmgParams, KrylovStats, amg_setup, fgmres, ilu0_factor

log = logging.getLogger(__name__)

METHODS = ("std", "sv")
LINEAR_SOLVERS = ("amg", "ilu", "direct")


class LinearSolveError(RuntimeError):
    pass


@dataclass
class NewtonConfig:
    method: str = "sv"
    reduction: float = 1e4
    max_iter: int = 200
    max_halvings: int = 20
    linear_solver: str = "amg"
    rtol: float = 1e-8
    restart: int = 100
    maxit: int = 300
    amg: AmgParams = field(default_factory=AmgParams)
    project_pi: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ValueError(f"linear solver must be one of {LINEAR_SOLVERS}")
        if not self.reduction > 1:
            raise ValueError("residual reduction factor must exceed 1")
        if self.max_iter < 1:
            raise ValueError("need at least one Newton iteration")


@dataclass
class NewtonStats:
    """Per-iteration history; entry 0 of the residual/energy lists is the initial state."""

    residual_norms: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    energy_changes: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    krylov: list = field(default_factory=list)
    stagnated: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def iterations(self):
        return len(self.alphas)

    @property
    def krylov_iterations(self):
        return [k.iterations for k in self.krylov]


def line_search(state, v, v_tilde, max_halvings=20):
    """Backtracking on the energy from a unit step, halving until it decreases.

    Returns ``(alpha, energy change, stagnated)``.  Without a decrease after
    ``max_halvings`` halvings the smallest step is returned and flagged.
    """
    alpha = 1.0
    base = asm.energy_integrand(v, state)
    change = 0.0
    for _ in range(max_halvings + 1):
        change = asm.integrate(asm.energy_integrand(v + alpha * v_tilde, state) - base, state)
        if change < 0.0:
            return alpha, change, False
        if _ < max_halvings:
            alpha *= 0.5
    return alpha, change, True


def solve_linear(J, rhs, config):
    if config.linear_solver == "direct":
        x = spla.spsolve(J.tocsc(), rhs)
        res = np.linalg.norm(rhs - J @ x)
        return x, KrylovStats(iterations=1, initial_residual=np.linalg.norm(rhs),
                              final_residual=res, converged=True)
    if config.linear_solver == "amg":
        M = amg_setup(J, config.amg)
    else:
        M = ilu0_factor(J)
    x, stats = fgmres(J, rhs, M, rtol=config.rtol, restart=config.restart, maxiter=config.maxit)
    if not stats.converged:
        raise LinearSolveError(
            f"{config.linear_solver}-FGMRES stopped after {stats.iterations} iterations "
            f"at relative residual {stats.relative_residual:.3e}")
    return x, stats


def solve_momentum(state, config=None, v0=None, callback=None):
    """Newton iteration for the implicit momentum step.

    Starts from ``v0`` (default: the previous velocity) and stops once the
    residual norm has dropped by ``config.reduction``.  Returns the velocity,
    the final stress-like field (``None`` for the standard method) and stats.
    """
    config = config or NewtonConfig()
    t0 = time.perf_counter()
    v = np.array(state.v_prev if v0 is None else v0, dtype=float)
    v[state.grid.boundary_dofs] = 0.0
    sv = config.method == "sv"
    pi = asm.initial_pi(state, v) if sv else None

    stats = NewtonStats()
    r = asm.assemble_residual(state, v)
    r0 = np.linalg.norm(r)
    stats.residual_norms.append(r0)
    stats.energies.append(asm.assemble_energy(v, state))
    target = r0 / config.reduction
    if r0 < 1e-14:
        stats.converged = True
    while not stats.converged and stats.iterations < config.max_iter:
        if sv:
            J = asm.assemble_jacobian_sv(state, v, pi)
        else:
            J = asm.assemble_jacobian_std(state, v)
        dv, kstats = solve_linear(J, r, config)
        alpha, dE, stagnated = line_search(state, v, dv, config.max_halvings)
        if sv:
            pi = asm.update_pi(state, v, pi, dv, alpha, project=config.project_pi)
        v = v + alpha * dv
        r = asm.assemble_residual(state, v)
        rn = np.linalg.norm(r)
        stats.residual_norms.append(rn)
        stats.energies.append(asm.assemble_energy(v, state))
        stats.energy_changes.append(dE)
        stats.alphas.append(alpha)
        stats.krylov.append(kstats)
        stats.stagnated.append(stagnated)
        log.debug("newton %3d  |r| %.6e  rel %.3e  alpha %.4g  krylov %d",
                  stats.iterations, rn, rn / r0, alpha, kstats.iterations)
        if callback is not None:
            callback(stats, v, pi)
        if rn <= target:
            stats.converged = True
    stats.wall_time = time.perf_counter() - t0
    return v, pi, stats
