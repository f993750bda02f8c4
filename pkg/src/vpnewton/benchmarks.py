"""The two test problems: a single hard momentum solve and the moving-cyclone benchmark."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import assembly as asm
from .grid import build_grid
from .newton import NewtonConfig, solve_momentum
from .rheology import PhysicsParams
from .transport import advect_fields

log = logging.getLogger(__name__)

KM = 1000.0
DAY = 86400.0
L_DOMAIN = 512 * KM


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class ProblemSpec:
    name: str
    L: float
    n: int
    dt: float
    n_steps: int
    single_step: bool
    forcing: Callable
    A0: Callable
    H0: Callable
    delta_min: float = 2e-9
    p_star: float = 27.5
    A_in: float = 1.0
    H_in: float | None = None

    @property
    def dx(self):
        return self.L / self.n

    def grid(self):
        return build_grid(self.L, self.n)

    def params(self):
        return PhysicsParams(delta_min=self.delta_min, P_star=self.p_star)


def _cells_for(dx):
    n = L_DOMAIN / dx
    if dx <= 0 or abs(n - round(n)) > 1e-9 * n:
        raise ValueError(f"mesh size {dx} m does not divide the 512 km domain")
    return int(round(n))


def problem1_concentration(x, y):
    xs, ys = x / (1000 * KM), y / (1000 * KM)
    r = 0.04 - (xs - 0.25) ** 2 - (ys - 0.25) ** 2
    r1 = 0.1 + (2 * xs) ** 2 - 2 * ys
    return 1 - 0.5 * np.exp(-800 * np.abs(r)) - 0.4 * np.exp(-90 * np.abs(r1)) \
        - 0.4 * np.exp(-90 * np.abs(r1 + 0.7))


def problem1_thickness(x, y):
    return 2.0 * problem1_concentration(x, y)


def problem1_forcing(t, x, y):
    shape = np.shape(x) + (2,)
    return np.full(shape, 5.0), np.zeros(shape)


def problem1_spec(dx=1 * KM, delta_min=2e-9, p_star=27.5):
    """Single implicit step with localized weak ice and constant wind."""
    return ProblemSpec(
        name="problem1", L=L_DOMAIN, n=_cells_for(dx), dt=1800.0, n_steps=1,
        single_step=True, forcing=problem1_forcing,
        A0=problem1_concentration, H0=problem1_thickness, delta_min=delta_min, p_star=p_star,
    )


def cyclone_center(t_days):
    """Position (km) of the wind center, advancing then reversing at day 4."""
    t = np.asarray(t_days, dtype=float)
    return np.where(t <= 4.0, 256.0 + 51.2 * t, 665.6 - 51.2 * t)


def wind_amplitude(t_days):
    t = np.asarray(t_days, dtype=float)
    early = -np.tanh((4.0 - t) * (4.0 + t) / 2.0)
    late = np.tanh((12.0 - t) * (-4.0 + t) / 2.0)
    return 15.0 * np.where(t <= 4.0, early, late)


def wind_angle(t_days):
    return np.deg2rad(np.where(np.asarray(t_days) <= 4.0, 72.0, 81.0))


def problem2_forcing(t, x, y):
    """Wind and ocean velocities (m/s) at time ``t`` (s) and points ``x, y`` (m).

    Offsets from the wind center enter the wind formula in kilometers.
    """
    td = t / DAY
    if not (-1e-12 <= td <= 8.0 + 1e-12):
        raise ValueError(f"forcing defined for t in [0, 8] days, got {td} days")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v_o = 0.01 * np.stack([-1.0 + 2.0 * y / L_DOMAIN, 1.0 - 2.0 * x / L_DOMAIN], axis=-1)
    m = cyclone_center(td)
    dxk = x / KM - m
    dyk = y / KM - m
    omega = np.exp(-np.sqrt(dxk**2 + dyk**2) / 100.0) / 50.0
    a = wind_angle(td)
    c, s = np.cos(a), np.sin(a)
    amp = omega * wind_amplitude(td)
    v_a = np.stack([amp * (c * dxk + s * dyk), amp * (-s * dxk + c * dyk)], axis=-1)
    return v_a, v_o


def problem2_thickness(x, y):
    return 0.3 + 0.005 * (np.sin(60.0 * x / (1000 * KM)) + np.sin(30.0 * y / (1000 * KM)))


def problem2_concentration(x, y):
    return np.ones(np.broadcast(x, y).shape)


def problem2_spec(dx=4 * KM, days=4.0, steps=None, delta_min=2e-9, dt=1800.0, p_star=27.5):
    n_steps = int(round(days * DAY / dt)) if steps is None else int(steps)
    return ProblemSpec(
        name="problem2", L=L_DOMAIN, n=_cells_for(dx), dt=dt, n_steps=n_steps,
        single_step=False, forcing=problem2_forcing,
        A0=problem2_concentration, H0=problem2_thickness, delta_min=delta_min, p_star=p_star,
    )


def problem2_initial(grid):
    xc, yc = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    return np.zeros(grid.n_dofs), problem2_concentration(xc, yc), problem2_thickness(xc, yc)


def initial_fields(spec, grid):
    xc, yc = grid.cell_centers[:, 0], grid.cell_centers[:, 1]
    A = np.clip(spec.A0(xc, yc), 0.0, 1.0)
    H = np.maximum(spec.H0(xc, yc), 0.0)
    return np.zeros(grid.n_dofs), A, H


@dataclass
class StepRecord:
    step: int
    t: float
    stats: object
    ncp_error: float | None = None
    pi_norm_max: float | None = None


@dataclass
class RunResult:
    spec: ProblemSpec
    v: np.ndarray
    A: np.ndarray
    H: np.ndarray
    pi: np.ndarray | None
    steps: list = field(default_factory=list)
    transport: list = field(default_factory=list)

    @property
    def newton_iterations(self):
        return [s.stats.iterations for s in self.steps]

    @property
    def all_converged(self):
        return all(s.stats.converged for s in self.steps)

    def mean_newton(self):
        return float(np.mean(self.newton_iterations))

    def mean_krylov(self):
        its = [k for s in self.steps for k in s.stats.krylov_iterations]
        return float(np.mean(its)) if its else 0.0


def run_simulation(spec, config=None, on_nonconvergence="abort", step_callback=None, max_steps=None):
    """Advance the coupled system: explicit transport, then the implicit momentum solve.

    ``on_nonconvergence`` is ``"abort"`` (raise) or ``"continue"``.
    ``step_callback(step_index, state, v, pi, record)`` is called after
    every momentum solve.
    """
    if on_nonconvergence not in ("abort", "continue"):
        raise ValueError("on_nonconvergence must be 'abort' or 'continue'")
    config = config or NewtonConfig()
    grid = spec.grid()
    params = spec.params()
    v, A, H = initial_fields(spec, grid)
    H_in = spec.H_in if spec.H_in is not None else H.copy()
    result = RunResult(spec=spec, v=v, A=A, H=H, pi=None)
    n_steps = spec.n_steps if max_steps is None else min(spec.n_steps, max_steps)
    for n in range(n_steps):
        t_new = (n + 1) * spec.dt
        if not spec.single_step:
            A, H, tlog = advect_fields(grid, v, A, H, spec.dt, A_in=spec.A_in, H_in=H_in)
            result.transport.append(tlog)
        state = asm.MomentumState(grid=grid, A=A, H=H, v_prev=v, dt=spec.dt, t=t_new,
                                  params=params, forcing=spec.forcing)
        v, pi, stats = solve_momentum(state, config)
        rec = StepRecord(step=n + 1, t=t_new, stats=stats)
        if pi is not None:
            rec.ncp_error = asm.ncp_error(state, v, pi)
            rec.pi_norm_max = float(np.sqrt(2.0 * (pi[..., 0]**2 + 2 * pi[..., 1]**2 + pi[..., 2]**2)).max())
        result.steps.append(rec)
        log.info("%s step %d/%d: %d Newton iterations, mean Krylov %.1f, converged=%s",
                 spec.name, n + 1, n_steps, stats.iterations,
                 np.mean(stats.krylov_iterations) if stats.krylov else 0.0, stats.converged)
        if step_callback is not None:
            step_callback(n, state, v, pi, rec)
        if not stats.converged and on_nonconvergence == "abort":
            raise NonConvergenceError(
                f"{spec.name} step {n + 1}: residual reduced only to "
                f"{stats.residual_norms[-1] / stats.residual_norms[0]:.3e} in {stats.iterations} iterations")
        result.v, result.A, result.H, result.pi = v, A, H, pi
    return result
