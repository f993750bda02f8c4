"""Command line driver, config files, CSV logs and legacy VTK snapshots."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import assembly as asm
from . import rheology as rh
from .benchmarks import KM, L_DOMAIN, NonConvergenceError, problem1_spec, problem2_spec, run_simulation
from .linalg import AmgParams
from .newton import LINEAR_SOLVERS, METHODS, LinearSolveError, NewtonConfig

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "newton_iter", "residual_norm", "energy", "alpha", "krylov_iters", "krylov_relres")
SUMMARY_COLUMNS = ("step", "time_s", "newton_iters", "converged", "initial_residual",
                   "final_residual", "mean_krylov", "ncp_error", "pi_norm_max")

EXIT_OK, EXIT_ERROR, EXIT_NONCONVERGED = 0, 1, 2


@dataclass
class RunConfig:
    problem: int = 1
    dx_km: float = 4.0
    dt_s: float = 1800.0
    dmin: float = 2e-9
    p_star: float = 27.5
    newton: str = "sv"
    linsolve: str = "amg"
    rtol: float = 1e-8
    restart: int = 100
    maxit: int = 300
    amg_theta: float = 0.5
    amg_sweeps: int = 3
    days: float = 4.0
    steps: int | None = None
    out: str = "output"
    snapshot_every: int = 0
    on_nonconvergence: str = "continue"

    def __post_init__(self):
        if self.problem not in (1, 2):
            raise ValueError(f"problem must be 1 or 2, got {self.problem}")
        for name in ("dx_km", "dt_s", "dmin", "rtol", "restart", "maxit", "amg_theta", "amg_sweeps", "days"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        n = L_DOMAIN / (self.dx_km * KM)
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"dx = {self.dx_km} km does not divide 512 km")
        if not self.p_star >= 0:
            raise ValueError("p_star must be non-negative")
        if self.steps is not None and self.steps <= 0:
            raise ValueError("steps must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")
        if self.newton not in METHODS:
            raise ValueError(f"newton must be one of {METHODS}")
        if self.linsolve not in LINEAR_SOLVERS:
            raise ValueError(f"linsolve must be one of {LINEAR_SOLVERS}")
        if self.on_nonconvergence not in ("abort", "continue"):
            raise ValueError("on_nonconvergence must be 'abort' or 'continue'")

    def problem_spec(self):
        if self.problem == 1:
            return problem1_spec(self.dx_km * KM, delta_min=self.dmin, p_star=self.p_star)
        return problem2_spec(self.dx_km * KM, days=self.days, steps=self.steps,
                             delta_min=self.dmin, dt=self.dt_s, p_star=self.p_star)

    def newton_config(self):
        return NewtonConfig(method=self.newton, linear_solver=self.linsolve, rtol=self.rtol,
                            restart=self.restart, maxit=self.maxit,
                            amg=AmgParams(theta=self.amg_theta, sweeps=self.amg_sweeps))


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    d = RunConfig()
    p = argparse.ArgumentParser(prog="vpnewton", description="Implicit viscous-plastic sea-ice momentum solver.")
    p.add_argument("--config", help="text file with 'key = value' lines; flags override it")
    p.add_argument("--problem", type=int, choices=(1, 2))
    p.add_argument("--dx-km", type=float, help=f"mesh size in km (default {d.dx_km})")
    p.add_argument("--dt-s", type=float, help="time step in seconds (problem 2; problem 1 uses 1800)")
    p.add_argument("--dmin", type=float, help="regularization of the strain-rate invariant")
    p.add_argument("--p-star", type=float, help=f"ice strength parameter in N/m^2 (default {d.p_star})")
    p.add_argument("--newton", choices=METHODS)
    p.add_argument("--linsolve", choices=LINEAR_SOLVERS)
    p.add_argument("--rtol", type=float)
    p.add_argument("--restart", type=int)
    p.add_argument("--maxit", type=int)
    p.add_argument("--amg-theta", type=float)
    p.add_argument("--amg-sweeps", type=int)
    p.add_argument("--days", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.add_argument("--snapshot-every", type=int, help="write VTK every N steps (0 = final only)")
    p.add_argument("--on-nonconvergence", choices=("abort", "continue"))
    return p


def read_config_file(path):
    """Parse ``key = value`` lines; keys use flag spelling with or without dashes."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = val
    return values


def _convert(name, text):
    if text is None or (isinstance(text, str) and text.lower() == "none"):
        return None
    kind = {"problem": int, "restart": int, "maxit": int, "amg_sweeps": int,
            "steps": int, "snapshot_every": int,
            "dx_km": float, "dt_s": float, "dmin": float, "p_star": float, "rtol": float,
            "amg_theta": float, "days": float}.get(name, str)
    return kind(text)


def parse_cli(argv=None):
    """Build a :class:`RunConfig` from command-line flags and an optional config file."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    values = {}
    if ns.config:
        try:
            values.update({k: _convert(k, v) for k, v in read_config_file(ns.config).items()})
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    for f in dataclasses.fields(RunConfig):
        val = getattr(ns, f.name, None)
        if val is not None:
            values[f.name] = val
    try:
        cfg = RunConfig(**values)
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def render_config(cfg):
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        lines.append(f"{f.name.replace('_', '-')} = {val!r}" if isinstance(val, float)
                     else f"{f.name.replace('_', '-')} = {val}")
    return "\n".join(lines) + "\n"


def config_argv(cfg):
    """Flags reproducing ``cfg`` on the command line."""
    argv = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if val is not None:
            argv += [_flag(f.name), repr(val) if isinstance(val, float) else str(val)]
    return argv


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.16e}"


def _records(stats):
    if hasattr(stats, "alphas"):
        return [(1, stats)]
    out = []
    for i, item in enumerate(stats, 1):
        if hasattr(item, "stats"):
            out.append((item.step, item.stats))
        elif isinstance(item, tuple):
            out.append(item)
        else:
            out.append((i, item))
    return out


def newton_log_rows(stats):
    """One row per Newton iteration; residual and energy are taken after the update."""
    rows = []
    for step, st in _records(stats):
        for k in range(st.iterations):
            ks = st.krylov[k]
            rows.append((step, k + 1, st.residual_norms[k + 1], st.energies[k + 1], st.alphas[k],
                         ks.iterations, ks.relative_residual))
    return rows


def write_newton_log(stats, path):
    """CSV of the Newton history of one solve (``NewtonStats``) or of a run (step records)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for row in newton_log_rows(stats):
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write Newton log {path}: {exc}") from exc
    return path


def write_step_summary(steps, path):
    """Per-step CSV with the initial residual, so convergence can be recomputed from the logs."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for rec in steps:
                st = rec.stats
                mk = np.mean(st.krylov_iterations) if st.krylov else None
                w.writerow([_fmt(rec.step), _fmt(rec.t), _fmt(st.iterations), int(st.converged),
                            _fmt(st.residual_norms[0]), _fmt(st.residual_norms[-1]), _fmt(mk),
                            _fmt(rec.ncp_error), _fmt(rec.pi_norm_max)])
    except OSError as exc:
        raise OSError(f"cannot write step summary {path}: {exc}") from exc
    return path


def read_newton_log(path):
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LOG_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return list(reader)


def derived_fields(grid, v, A, H, params):
    """Cell fields for plotting: ice strength, mean shear deformation and mean Delta."""
    state = asm.MomentumState(grid=grid, A=A, H=H, v_prev=np.zeros(grid.n_dofs), dt=1.0, params=params)
    eps = state.strain_rates(np.asarray(v, dtype=float))
    w = grid.quad.weights / grid.cell_area
    shear = rh.shear_deformation(eps) @ w
    delta = rh.delta_from_strain(eps, params.e_ellipse, params.delta_min) @ w
    return {"P": state.P, "shear_deformation": shear, "delta": delta}


def write_vtk_snapshot(grid, v, A, H, derived, path, title="sea ice state"):
    """Legacy ASCII VTK structured grid with nodal velocity and cell scalars."""
    path = Path(path)
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    cells = {"A": A, "H": H, **derived}
    xy = grid.node_coords
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_GRID",
           f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1", f"POINTS {grid.n_nodes} double"]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in xy]
    out += [f"POINT_DATA {grid.n_nodes}", "VECTORS velocity double"]
    out += [f"{a:.17g} {b:.17g} 0" for a, b in v]
    out.append(f"CELL_DATA {grid.n_cells}")
    for name in ("A", "H", "P", "shear_deformation", "delta"):
        vals = np.asarray(cells[name], dtype=float)
        if vals.shape != (grid.n_cells,):
            raise ValueError(f"cell field {name} needs {grid.n_cells} values")
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [f"{x:.17g}" for x in vals]
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK snapshot {path}: {exc}") from exc
    return path


def run(cfg):
    """Execute a configured run and write its outputs; returns the exit code."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(render_config(cfg))
    spec = cfg.problem_spec()
    params = spec.params()
    grid = spec.grid()

    def snapshot(n, state, v, pi, rec):
        last = n + 1 == spec.n_steps
        if last or (cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0):
            d = derived_fields(grid, v, state.A, state.H, params)
            write_vtk_snapshot(grid, v, state.A, state.H, d, out / f"{spec.name}_{n + 1:05d}.vtk")

    try:
        result = run_simulation(spec, cfg.newton_config(), on_nonconvergence=cfg.on_nonconvergence,
                                step_callback=snapshot)
    except (NonConvergenceError, LinearSolveError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    write_newton_log(result.steps, out / "newton_log.csv")
    write_step_summary(result.steps, out / "steps.csv")
    log.info("mean Newton iterations %.2f, mean Krylov iterations %.2f",
             result.mean_newton(), result.mean_krylov())
    return EXIT_OK if result.all_converged else EXIT_NONCONVERGED


def main(argv=None):
    try:
        cfg = parse_cli(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        return run(cfg)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
