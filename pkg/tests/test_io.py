import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpnewton import io_cli
from vpnewton import rheology as rh
from vpnewton.benchmarks import KM, initial_fields, problem1_spec
from vpnewton.grid import build_grid
from vpnewton.io_cli import RunConfig, parse_cli, render_config
from vpnewton.newton import NewtonConfig, solve_momentum
from vpnewton import assembly as asm


def test_parse_problem1():
    cfg = parse_cli("--problem 1 --dx-km 4 --newton sv --linsolve amg".split())
    spec = cfg.problem_spec()
    assert spec.name == "problem1" and spec.n == 128 and spec.n_steps == 1
    assert cfg.newton_config().method == "sv"


def test_parse_problem2_days():
    assert parse_cli("--problem 2 --dx-km 4 --days 8".split()).problem_spec().n_steps == 384
    assert parse_cli("--problem 2 --dx-km 4 --days 1".split()).problem_spec().n_steps == 48
    assert parse_cli("--problem 2 --dx-km 4 --steps 7".split()).problem_spec().n_steps == 7


def test_parse_dmin_override():
    cfg = parse_cli(["--dmin", "2e-10"])
    assert cfg.dmin == 2e-10
    assert cfg.problem_spec().params().delta_min == 2e-10


def test_parse_p_star():
    assert parse_cli([]).problem_spec().params().P_star == 27.5
    cfg = parse_cli(["--problem", "2", "--p-star", "27.5e3"])
    assert cfg.problem_spec().params().P_star == 27.5e3


@pytest.mark.parametrize("argv", [
    ["--bogus"], ["--newton", "picard"], ["--linsolve", "cg"], ["--dx-km", "3"],
    ["--dx-km", "-4"], ["--problem", "3"], ["--steps", "0"], ["--p-star", "-1"],
])
def test_invalid_flags_rejected(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        parse_cli(argv)
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# Problem II setup\nproblem = 2\ndx-km = 8   # coarse\nnewton = std\nsteps = 5\n")
    cfg = parse_cli(["--config", str(p), "--newton", "sv"])
    assert (cfg.problem, cfg.dx_km, cfg.newton, cfg.steps) == (2, 8.0, "sv", 5)


def test_config_file_errors(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("colour = blue\n")
    with pytest.raises(SystemExit):
        parse_cli(["--config", str(p)])
    p.write_text("problem 2\n")
    with pytest.raises(SystemExit):
        parse_cli(["--config", str(p)])
    with pytest.raises(SystemExit):
        parse_cli(["--config", str(tmp_path / "missing.cfg")])


configs = st.builds(
    RunConfig,
    problem=st.sampled_from([1, 2]),
    dx_km=st.sampled_from([0.5, 1.0, 2.0, 4.0, 8.0, 512 / 3]),
    dt_s=st.floats(1.0, 1e5),
    dmin=st.floats(1e-12, 1e-6),
    p_star=st.sampled_from([0.0, 27.5, 27.5e3]) | st.floats(0.0, 1e5),
    newton=st.sampled_from(["std", "sv"]),
    linsolve=st.sampled_from(["amg", "ilu", "direct"]),
    rtol=st.floats(1e-14, 1e-2),
    restart=st.integers(1, 500),
    maxit=st.integers(1, 5000),
    amg_theta=st.floats(0.01, 0.99),
    amg_sweeps=st.integers(1, 5),
    days=st.floats(0.01, 8.0),
    steps=st.none() | st.integers(1, 1000),
    out=st.text("abcxyz_/0123456789", min_size=1, max_size=20),
    snapshot_every=st.integers(0, 100),
    on_nonconvergence=st.sampled_from(["abort", "continue"]),
)


@settings(max_examples=100, deadline=None)
@given(cfg=configs)
def test_config_round_trip(tmp_path_factory, cfg):
    path = tmp_path_factory.mktemp("cfg") / "c.txt"
    path.write_text(render_config(cfg))
    assert parse_cli(["--config", str(path)]) == cfg
    assert parse_cli(io_cli.config_argv(cfg)) == cfg


@pytest.fixture(scope="module")
def three_iterations():
    spec = problem1_spec(32 * KM)
    g = spec.grid()
    v, A, H = initial_fields(spec, g)
    state = asm.MomentumState(grid=g, A=A, H=H, v_prev=v, dt=spec.dt, params=spec.params(),
                              forcing=spec.forcing)
    return solve_momentum(state, NewtonConfig(max_iter=3))[2]


def test_newton_log_rows(tmp_path, three_iterations):
    path = io_cli.write_newton_log(three_iterations, tmp_path / "log.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "step,newton_iter,residual_norm,energy,alpha,krylov_iters,krylov_relres"
    assert len(lines) == 4
    rows = io_cli.read_newton_log(path)
    assert [int(r["newton_iter"]) for r in rows] == [1, 2, 3]
    assert float(rows[-1]["residual_norm"]) == three_iterations.residual_norms[-1]
    # 17 significant digits in scientific notation
    assert rows[0]["residual_norm"].count("e") == 1 and len(rows[0]["residual_norm"].split("e")[0]) == 18


def test_newton_log_deterministic(tmp_path, three_iterations):
    a = io_cli.write_newton_log(three_iterations, tmp_path / "a.csv").read_bytes()
    b = io_cli.write_newton_log(three_iterations, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_log_error_has_path(tmp_path, three_iterations):
    with pytest.raises(OSError, match="missing"):
        io_cli.write_newton_log(three_iterations, tmp_path / "missing" / "log.csv")


def test_cli_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = io_cli.main(["--problem", "2", "--dx-km", "32", "--steps", "3", "--out", str(out),
                        "--snapshot-every", "2"])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "config.txt", "newton_log.csv", "problem2_00002.vtk", "problem2_00003.vtk", "steps.csv"]
    rows = io_cli.read_newton_log(out / "newton_log.csv")
    with (out / "steps.csv").open() as fh:
        summary = list(csv.DictReader(fh))
    assert len(summary) == 3
    for s in summary:
        mine = [r for r in rows if r["step"] == s["step"]]
        assert len(mine) == int(s["newton_iters"])
        res = [float(r["residual_norm"]) for r in mine]
        # recompute the convergence flag from the logs
        converged = res[-1] <= float(s["initial_residual"]) / 1e4
        assert converged == bool(int(s["converged"]))
        assert res[-1] <= float(s["initial_residual"])
    assert parse_cli(["--config", str(out / "config.txt")]).steps == 3


def test_cli_rerun_is_byte_identical(tmp_path):
    args = ["--problem", "1", "--dx-km", "64"]
    io_cli.main(args + ["--out", str(tmp_path / "a")])
    io_cli.main(args + ["--out", str(tmp_path / "b")])
    for name in ("newton_log.csv", "steps.csv", "problem1_00001.vtk"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert io_cli.main(["--bogus"]) == 1
    real = RunConfig.newton_config

    def capped(self):
        cfg = real(self)
        cfg.max_iter = 1
        return cfg

    monkeypatch.setattr(RunConfig, "newton_config", capped)
    args = ["--problem", "1", "--dx-km", "32", "--out", str(tmp_path / "x")]
    assert io_cli.main(args) == 2
    assert io_cli.main(args + ["--on-nonconvergence", "abort"]) == 1


def read_vtk(path):
    """Minimal legacy-VTK reader checking the structure section by section."""
    tok = path.read_text().split("\n")
    assert tok[0].startswith("# vtk DataFile Version")
    assert tok[2] == "ASCII" and tok[3] == "DATASET STRUCTURED_GRID"
    nx, ny, nz = map(int, tok[4].split()[1:])
    head, n, kind = tok[5].split()
    assert head == "POINTS" and int(n) == nx * ny * nz
    i = 6
    pts = np.array([list(map(float, l.split())) for l in tok[i:i + int(n)]])
    i += int(n)
    assert tok[i] == f"POINT_DATA {n}" and tok[i + 1].startswith("VECTORS velocity")
    vel = np.array([list(map(float, l.split())) for l in tok[i + 2:i + 2 + int(n)]])
    i += 2 + int(n)
    ncell = int(tok[i].split()[1])
    assert ncell == (nx - 1) * (ny - 1)
    i += 1
    cells = {}
    while i < len(tok) and tok[i]:
        name = tok[i].split()[1]
        assert tok[i + 1] == "LOOKUP_TABLE default"
        cells[name] = np.array([float(x) for x in tok[i + 2:i + 2 + ncell]])
        i += 2 + ncell
    return pts, vel, cells


def test_vtk_zero_velocity(tmp_path):
    g = build_grid(512e3, 4)
    p = rh.PhysicsParams()
    A, H = np.ones(g.n_cells), np.full(g.n_cells, 0.5)
    v = np.zeros(g.n_dofs)
    d = io_cli.derived_fields(g, v, A, H, p)
    pts, vel, cells = read_vtk(io_cli.write_vtk_snapshot(g, v, A, H, d, tmp_path / "s.vtk"))
    assert pts.shape == (25, 3) and not vel.any()
    assert list(cells) == ["A", "H", "P", "shear_deformation", "delta"]
    np.testing.assert_array_equal(cells["shear_deformation"], 0.0)
    np.testing.assert_allclose(cells["delta"], p.delta_min, rtol=1e-15)
    np.testing.assert_allclose(cells["P"], 27.5 * 0.5)


def test_vtk_rigid_rotation(tmp_path):
    g = build_grid(512e3, 8)
    x, y = (g.node_coords - 256e3).T
    v = (1e-6 * np.stack([-y, x], -1)).ravel()
    d = io_cli.derived_fields(g, v, np.ones(g.n_cells), np.ones(g.n_cells), rh.PhysicsParams())
    assert np.abs(d["shear_deformation"]).max() <= 1e-12
    _, vel, cells = read_vtk(io_cli.write_vtk_snapshot(g, v, np.ones(g.n_cells), np.ones(g.n_cells), d,
                                                       tmp_path / "r.vtk"))
    np.testing.assert_array_equal(vel[:, :2], v.reshape(-1, 2))


def test_vtk_pure_shear():
    g = build_grid(1.0, 4)
    x, y = g.node_coords.T
    v = np.stack([y, np.zeros_like(x)], -1).ravel()   # e12 = 1/2 everywhere
    d = io_cli.derived_fields(g, v, np.ones(16), np.ones(16), rh.PhysicsParams())
    np.testing.assert_allclose(d["shear_deformation"], 1.0, rtol=1e-14)


def test_vtk_rejects_bad_cell_field(tmp_path):
    g = build_grid(1.0, 2)
    d = {"P": np.ones(4), "shear_deformation": np.ones(3), "delta": np.ones(4)}
    with pytest.raises(ValueError):
        io_cli.write_vtk_snapshot(g, np.zeros(g.n_dofs), np.ones(4), np.ones(4), d, tmp_path / "x.vtk")
