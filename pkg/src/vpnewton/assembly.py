"""Weak-form assembly of the implicit momentum step.

Everything is vectorized over cells.  Element quantities are expressed
through per-grid basis tables (shape values, strain rates and tau of every
local basis function at every quadrature point); a uniform grid lets all
cells share them.

Sign convention: ``assemble_residual`` returns ``F(phi_i) - A(v, phi_i)``,
which is minus the gradient of the energy.  The Jacobians are derivatives
of ``A`` (positive definite), so a Newton step solves ``J dv = residual``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numba import njit

from . import rheology as rh
from .grid import StructuredGrid

FROB_W = np.array([1.0, 2.0, 1.0])
# cells per block when summing element matrices; bounds the temporaries
ASSEMBLY_CHUNK = 1 << 17

Forcing = Callable[[float, np.ndarray, np.ndarray], tuple]


class FemTables:
    """Basis tables and the Dirichlet-eliminated CSR pattern of a grid."""

    def __init__(self, grid: StructuredGrid):
        self.grid = grid
        q = grid.quad
        self.w = q.weights
        self.N = q.shape
        nq = q.npoints
        # vector basis: local dof i = 2a + k
        self.Nv = np.zeros((nq, 8, 2))
        grad_phi = np.zeros((nq, 8, 2, 2))
        for a in range(4):
            for k in range(2):
                self.Nv[:, 2 * a + k, k] = q.shape[:, a]
                grad_phi[:, 2 * a + k, k, :] = q.grad[:, a, :]
        self.Beps = rh.strain_rate(grad_phi)                  # (nq, 8, 3)
        self.trB = self.Beps[..., 0] + self.Beps[..., 2]      # (nq, 8)
        NN = np.einsum("qa,qb->qab", q.shape, q.shape)
        self.NN = NN.reshape(nq, 16)
        mass4 = np.einsum("q,qab->ab", self.w, NN)
        self.mass_e = np.kron(mass4, np.eye(2))               # (8, 8)
        self._tau_tables = {}
        self._pattern = None

    def tau_basis(self, e_ellipse):
        if e_ellipse not in self._tau_tables:
            Bt = rh.tau(self.Beps, e_ellipse)
            G = np.einsum("qis,qjs->qij", Bt * FROB_W, Bt)
            self._tau_tables[e_ellipse] = (Bt, G.reshape(len(self.w), 64))
        return self._tau_tables[e_ellipse]

    @property
    def pattern(self):
        """(indptr, indices, scatter map, boundary-diagonal slots, nnz)."""
        if self._pattern is None:
            self._pattern = self._build_pattern()
        return self._pattern

    def _build_pattern(self):
        g = self.grid
        bnd = g.boundary_dofs
        indptr, indices = _structured_rows(g.nx, g.ny, bnd)
        nnz = len(indices)
        scatter = np.empty(g.n_cells * 64, dtype=np.int32 if nnz < 2**31 - 1 else np.int64)
        _scatter_slots(g.cell_dofs, indptr, indices, bnd, scatter)
        rows = np.repeat(np.arange(g.n_dofs), np.diff(indptr))
        bdiag = np.flatnonzero(bnd[rows] & (rows == indices))
        return indptr, indices, scatter, bdiag, nnz

    def to_csr(self, Ke, cells=None):
        """Sum element matrices into the eliminated CSR pattern."""
        indptr, indices, scatter, bdiag, nnz = self.pattern
        if cells is not None:
            scatter = scatter.reshape(self.grid.n_cells, 64)[cells].ravel()
        data = np.bincount(scatter, weights=Ke.ravel(), minlength=nnz + 1)[:nnz]
        data[bdiag] = 1.0
        n = self.grid.n_dofs
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def to_vector(self, re, cells=None):
        dofs = self.grid.cell_dofs if cells is None else self.grid.cell_dofs[cells]
        out = np.bincount(dofs.ravel(), weights=re.ravel(), minlength=self.grid.n_dofs)
        out[self.grid.boundary_dofs] = 0.0
        return out


@njit(cache=True)
def _structured_rows(nx, ny, bnd):
    """CSR rows of the Q1 vector stencil with Dirichlet couplings removed.

    A node couples to the (clipped) 3x3 block of nodes around it; boundary
    rows keep only their diagonal.
    """
    nnx = nx + 1
    n = 2 * nnx * (ny + 1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(18 * n, dtype=np.int64)
    pos = 0
    for r in range(n):
        if bnd[r]:
            indices[pos] = r
            pos += 1
        else:
            node = r // 2
            i, j = node % nnx, node // nnx
            for jj in range(max(0, j - 1), min(ny, j + 1) + 1):
                for ii in range(max(0, i - 1), min(nx, i + 1) + 1):
                    for m in range(2):
                        c = 2 * (jj * nnx + ii) + m
                        if not bnd[c]:
                            indices[pos] = c
                            pos += 1
        indptr[r + 1] = pos
    return indptr, indices[:pos].copy()


@njit(cache=True)
def _scatter_slots(cell_dofs, indptr, indices, bnd, out):
    """CSR slot of every element-matrix entry; eliminated entries map to ``nnz``."""
    nc = cell_dofs.shape[0]
    nnz = len(indices)
    for c in range(nc):
        for a in range(8):
            r = cell_dofs[c, a]
            for b in range(8):
                col = cell_dofs[c, b]
                slot = nnz
                if r == col or not (bnd[r] or bnd[col]):
                    for jj in range(indptr[r], indptr[r + 1]):
                        if indices[jj] == col:
                            slot = jj
                            break
                out[c * 64 + a * 8 + b] = slot
    return out


@lru_cache(maxsize=8)
def fem_tables(grid: StructuredGrid) -> FemTables:
    return FemTables(grid)


def zero_forcing(t, x, y):
    z = np.zeros(np.shape(x) + (2,))
    return z, z.copy()


@dataclass
class MomentumState:
    """Data of one implicit momentum step.

    ``A``, ``H`` are the transported cell fields at the new time level;
    ``v_prev`` is the velocity of the previous step; ``t`` is the new time
    at which the forcing is evaluated (seconds).
    """

    grid: StructuredGrid
    A: np.ndarray
    H: np.ndarray
    v_prev: np.ndarray
    dt: float
    t: float = 0.0
    params: rh.PhysicsParams = field(default_factory=rh.PhysicsParams)
    forcing: Forcing = zero_forcing

    def __post_init__(self):
        g = self.grid
        self.A = np.asarray(self.A, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        self.v_prev = np.asarray(self.v_prev, dtype=float)
        if self.A.shape != (g.n_cells,) or self.H.shape != (g.n_cells,):
            raise ValueError(f"A and H need {g.n_cells} cell values")
        if self.v_prev.shape != (g.n_dofs,):
            raise ValueError(f"velocity needs {g.n_dofs} entries, got {self.v_prev.shape}")
        self.P = rh.ice_strength(self.H, self.A, self.params)
        xq = g.quad_coords
        va, vo = self.forcing(self.t, xq[..., 0], xq[..., 1])
        self.va_q = np.asarray(va, dtype=float)
        self.vo_q = np.asarray(vo, dtype=float)
        self.tables = fem_tables(g)
        self.vprev_q = self.values(self.v_prev)
        self.tau_atm_q = rh.atm_drag(self.va_q, self.params)

    def values(self, v):
        """Velocity at quadrature points, (n_cells, nq, 2)."""
        return np.einsum("qik,ci->cqk", self.tables.Nv, v[self.grid.cell_dofs])

    def strain_rates(self, v):
        return np.einsum("qis,ci->cqs", self.tables.Beps, v[self.grid.cell_dofs])

    def taus(self, v):
        Bt, _ = self.tables.tau_basis(self.params.e_ellipse)
        return np.einsum("qis,ci->cqs", Bt, v[self.grid.cell_dofs])

    def deltas(self, tau_q):
        return rh.delta(tau_q, self.params.delta_min)

    def _explicit_force(self):
        """Per-quad-point vector load not depending on the unknown velocity."""
        p = self.params
        rhoH = p.rho_ice * self.H[:, None, None]
        f = rhoH * self.vprev_q + self.dt * self.tau_atm_q
        if p.f_c != 0.0:
            d = self.vprev_q - self.vo_q
            cross = np.stack([-d[..., 1], d[..., 0]], axis=-1)
            f = f - self.dt * rhoH * p.f_c * cross
        return f


def _sub(arr, cells):
    return arr if cells is None else arr[cells]


def element_residual(state, v, cells=None):
    t = state.tables
    p = state.params
    Bt, _ = t.tau_basis(p.e_ellipse)
    vq = _sub(state.values(v), cells)
    tq = _sub(state.taus(v), cells)
    dq = state.deltas(tq)
    H = _sub(state.H, cells)
    P = _sub(state.P, cells)
    vo = _sub(state.vo_q, cells)
    f = _sub(state._explicit_force(), cells) - p.rho_ice * H[:, None, None] * vq
    f = f + state.dt * rh.ocean_drag(vq, vo, p)
    re = np.einsum("cqk,qik->ci", f * t.w[None, :, None], t.Nv)
    coef = -state.dt * (P[:, None] / dq) * t.w
    re += np.einsum("cqs,qis->ci", (coef[..., None] * tq) * FROB_W, Bt)
    re += state.dt * 0.5 * P[:, None] * (t.w @ t.trB)[None, :]
    return re


def assemble_residual(state, v):
    """``F(phi_i) - A(v, phi_i)`` with Dirichlet entries zeroed."""
    v = np.asarray(v, dtype=float)
    if v.shape != (state.grid.n_dofs,):
        raise ValueError(f"velocity has shape {v.shape}, expected ({state.grid.n_dofs},)")
    return state.tables.to_vector(element_residual(state, v))


def assemble_residual_cells(state, v, cells):
    return state.tables.to_vector(element_residual(state, v, cells), cells)


def energy_integrand(v, state):
    """Energy density at every quadrature point, (n_cells, nq)."""
    p = state.params
    vq = state.values(v)
    eq = state.strain_rates(v)
    dq = state.deltas(state.taus(v))
    rhoH = p.rho_ice * state.H[:, None]
    out = 0.5 * rhoH * (vq**2).sum(-1) - rhoH * (state.vprev_q * vq).sum(-1)
    rel = np.linalg.norm(state.vo_q - vq, axis=-1)
    out += state.dt * (0.5 * state.P[:, None] * (dq - eq[..., 0] - eq[..., 2])
                       + p.C_o * p.rho_o * rel**3 / 3.0)
    if p.f_c != 0.0:
        d = state.vprev_q - state.vo_q
        cross = np.stack([-d[..., 1], d[..., 0]], axis=-1)
        out += state.dt * rhoH * p.f_c * (cross * vq).sum(-1)
    out -= state.dt * (state.tau_atm_q * vq).sum(-1)
    return out


def integrate(density, state):
    return float((density * state.tables.w).sum())


def assemble_energy(v, state):
    """Discrete convex energy whose gradient is minus the residual."""
    return integrate(energy_integrand(np.asarray(v, dtype=float), state), state)


def _common_element_matrix(state, vq, dq, cells=None):
    """Mass + viscous + ocean-drag part shared by both linearizations."""
    t = state.tables
    p = state.params
    _, G = t.tau_basis(p.e_ellipse)
    H = _sub(state.H, cells)
    P = _sub(state.P, cells)
    nc = len(H)
    Ke = (p.rho_ice * H)[:, None, None] * t.mass_e[None]
    Ke = Ke + (((state.dt * t.w) * (P[:, None] / dq)) @ G).reshape(nc, 8, 8)
    D = rh.ocean_drag_derivative(vq, _sub(state.vo_q, cells), p)
    X = (-state.dt * t.w[None, :, None, None] * D).reshape(nc, len(t.w), 4)
    drag = np.einsum("qm,cqn->cmn", t.NN, X).reshape(nc, 4, 4, 2, 2)
    Ke += drag.transpose(0, 1, 3, 2, 4).reshape(nc, 8, 8)
    return Ke


def _jacobian_std_q(state, vq, tq, cells):
    p = state.params
    t = state.tables
    Bt, _ = t.tau_basis(p.e_ellipse)
    dq = state.deltas(tq)
    Ke = _common_element_matrix(state, vq, dq, cells)
    u = np.einsum("cqs,qis->cqi", tq * FROB_W, Bt)
    P = _sub(state.P, cells)
    coef = -state.dt * 2.0 * P[:, None] / dq**3 * t.w
    Ke += np.matmul(np.swapaxes(coef[..., None] * u, 1, 2), u)
    return Ke


def _jacobian_sv_q(state, vq, tq, pq, cells):
    p = state.params
    t = state.tables
    Bt, _ = t.tau_basis(p.e_ellipse)
    dq = state.deltas(tq)
    Ke = _common_element_matrix(state, vq, dq, cells)
    ut = np.einsum("cqs,qis->cqi", tq * FROB_W, Bt)
    up = np.einsum("cqs,qis->cqi", pq * FROB_W, Bt)
    P = _sub(state.P, cells)
    coef = -state.dt * 2.0 * P[:, None] / dq**2 * t.w / (2.0 * rh.pi_scale(pq))
    cu = coef[..., None] * up
    sym_part = np.matmul(np.swapaxes(cu, 1, 2), ut)
    Ke += sym_part + np.swapaxes(sym_part, 1, 2)
    return Ke


def element_jacobian_std(state, v, cells=None):
    return _jacobian_std_q(state, _sub(state.values(v), cells), _sub(state.taus(v), cells), cells)


def element_jacobian_sv(state, v, pi, cells=None):
    return _jacobian_sv_q(state, _sub(state.values(v), cells), _sub(state.taus(v), cells),
                          _sub(pi, cells), cells)


def _assemble_chunked(state, element):
    """Sum ``element(cells)`` over blocks of cells, bounding temporary memory."""
    t = state.tables
    n = state.grid.n_cells
    indptr, indices, scatter, bdiag, nnz = t.pattern
    scatter = scatter.reshape(n, 64)
    data = np.zeros(nnz + 1)
    for start in range(0, n, ASSEMBLY_CHUNK):
        cells = np.arange(start, min(n, start + ASSEMBLY_CHUNK))
        data += np.bincount(scatter[cells].ravel(), weights=element(cells).ravel(), minlength=nnz + 1)
    data = data[:nnz]
    data[bdiag] = 1.0
    nd = state.grid.n_dofs
    return sp.csr_matrix((data, indices, indptr), shape=(nd, nd))


def assemble_jacobian_std(state, v):
    v = np.asarray(v, dtype=float)
    vq, tq = state.values(v), state.taus(v)
    return _assemble_chunked(state, lambda c: _jacobian_std_q(state, vq[c], tq[c], c))


def assemble_jacobian_sv(state, v, pi):
    if pi.shape != (state.grid.n_cells, len(state.tables.w), 3):
        raise ValueError(f"pi field has shape {pi.shape}")
    v = np.asarray(v, dtype=float)
    vq, tq = state.values(v), state.taus(v)
    return _assemble_chunked(state, lambda c: _jacobian_sv_q(state, vq[c], tq[c], pi[c], c))


def initial_pi(state, v):
    """Stress-like variable consistent with ``v``: ``tau(v) / Delta(v)``."""
    tq = state.taus(v)
    return rh.pi_from_velocity(tq, state.deltas(tq))


def pi_step(state, v, pi, v_tilde):
    """Newton increment of the stress-like variable (no solve needed)."""
    tl = state.taus(v)
    dl = state.deltas(tl)[..., None]
    tt = state.taus(v_tilde)
    coupling = rh.modified_outer(tl, pi)(tt)
    return -pi + tl / dl + tt / dl - 2.0 * coupling / dl**2


def update_pi(state, v, pi, v_tilde, alpha, project=True):
    new = pi + alpha * pi_step(state, v, pi, v_tilde)
    return rh.project_pi(new) if project else new


def ncp_error(state, v, pi):
    """Max over quadrature points of ``|pi Delta - tau|_F / Delta``."""
    tq = state.taus(v)
    dq = state.deltas(tq)
    r = rh.ncp_residual(pi, tq, dq)
    return float(np.max(np.sqrt(rh.frob(r, r)) / dq))
