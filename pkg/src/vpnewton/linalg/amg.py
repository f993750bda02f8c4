"""Classical (Ruge-Stueben) algebraic multigrid used as a preconditioner."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels as kn
from .dense import DenseLU


@dataclass(frozen=True)
class AmgParams:
    theta: float = 0.5
    sweeps: int = 3
    max_levels: int = 25
    coarse_size: int = 64
    num_functions: int = 2


@dataclass
class Level:
    A: sp.csr_matrix
    diag: np.ndarray
    func: np.ndarray
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None
    splitting: np.ndarray | None = None


@dataclass
class AmgHierarchy:
    levels: list
    coarse: DenseLU
    params: AmgParams
    stagnated: bool = False
    _work: list = field(default_factory=list, repr=False)

    @property
    def sizes(self):
        return [lvl.A.shape[0] for lvl in self.levels]

    def operator_complexity(self):
        return sum(lvl.A.nnz for lvl in self.levels) / self.levels[0].A.nnz

    def grid_complexity(self):
        return sum(self.sizes) / self.sizes[0]

    def __call__(self, r):
        return amg_vcycle(self, r)

    def __repr__(self):
        return (f"AmgHierarchy(levels={len(self.levels)}, sizes={self.sizes}, "
                f"op_complexity={self.operator_complexity():.3f})")


def _csr(A):
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _diag(A):
    d = A.diagonal()
    if np.any(d == 0.0):
        raise ValueError("AMG smoother needs a nonzero diagonal")
    return d


def cf_splitting(A, theta=0.25, func=None):
    """C/F splitting (1 = coarse, 0 = fine) of a CSR matrix."""
    A = _csr(A)
    n = A.shape[0]
    if func is None:
        func = np.zeros(n, dtype=np.int64)
    sp_, sj = kn.strength(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, theta,
                          np.asarray(func, dtype=np.int64))
    S = sp.csr_matrix((np.ones(len(sj)), sj, sp_), shape=(n, n))
    T = S.T.tocsr()
    T.sort_indices()
    state = kn.rs_first_pass(n, sp_, sj, T.indptr.astype(np.int64), T.indices.astype(np.int64))
    state = kn.rs_second_pass(n, sp_, sj, state)
    return state, (sp_, sj)


def amg_setup(A, params: AmgParams | None = None):
    params = params or AmgParams()
    A = _csr(A)
    n = A.shape[0]
    nf = max(1, params.num_functions)
    func = np.arange(n, dtype=np.int64) % nf if n % nf == 0 else np.zeros(n, dtype=np.int64)
    levels = [Level(A=A, diag=_diag(A), func=func)]
    stagnated = False
    while len(levels) < params.max_levels and levels[-1].A.shape[0] > params.coarse_size:
        lvl = levels[-1]
        state, (sp_, sj) = cf_splitting(lvl.A, params.theta, lvl.func)
        ip = lvl.A.indptr.astype(np.int64)
        ii = lvl.A.indices.astype(np.int64)
        pp, pj, px, nc, cmap = kn.classical_interpolation(ip, ii, lvl.A.data, sp_, sj, state, lvl.func)
        if nc == 0 or nc >= lvl.A.shape[0]:
            stagnated = True
            break
        P = sp.csr_matrix((px, pj, pp), shape=(lvl.A.shape[0], nc))
        R = P.T.tocsr()
        Ac = _csr(R @ lvl.A @ P)
        lvl.P, lvl.R, lvl.splitting = P, R, state
        levels.append(Level(A=Ac, diag=_diag(Ac), func=lvl.func[state == kn.C_PT]))
    coarse = DenseLU(levels[-1].A.toarray())
    return AmgHierarchy(levels=levels, coarse=coarse, params=params, stagnated=stagnated)


def _vcycle(h, k, b):
    lvl = h.levels[k]
    if k == len(h.levels) - 1:
        return h.coarse.solve(b)
    A = lvl.A
    x = np.zeros_like(b)
    ip, ii = A.indptr, A.indices
    kn.sgs_sweep(ip, ii, A.data, lvl.diag, x, b, h.params.sweeps)
    r = b - A @ x
    x += lvl.P @ _vcycle(h, k + 1, lvl.R @ r)
    kn.sgs_sweep(ip, ii, A.data, lvl.diag, x, b, h.params.sweeps)
    return x


def amg_vcycle(hierarchy, r):
    """One V(nu, nu) cycle with symmetric Gauss-Seidel, zero initial guess."""
    r = np.ascontiguousarray(r, dtype=float)
    if r.shape != (hierarchy.levels[0].A.shape[0],):
        raise ValueError("vector size does not match the hierarchy")
    return _vcycle(hierarchy, 0, r)
