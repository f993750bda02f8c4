"""Zero-fill incomplete LU in natural ordering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as kn


@dataclass
class Ilu0:
    indptr: np.ndarray
    indices: np.ndarray
    lu: np.ndarray
    dptr: np.ndarray
    shifted_pivots: int = 0

    def __call__(self, r):
        return ilu0_apply(self, r)

    def L(self):
        n = len(self.indptr) - 1
        M = sp.csr_matrix((self.lu, self.indices, self.indptr), shape=(n, n))
        return sp.tril(M, -1).tocsr() + sp.identity(n, format="csr")

    def U(self):
        n = len(self.indptr) - 1
        M = sp.csr_matrix((self.lu, self.indices, self.indptr), shape=(n, n))
        return sp.triu(M).tocsr()


def ilu0_factor(A):
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    ip = A.indptr.astype(np.int64)
    ii = A.indices.astype(np.int64)
    dptr = kn.diag_pointers(ip, ii)
    if np.any(dptr < 0):
        raise ValueError("ILU(0) needs a structurally nonzero diagonal")
    dmax = np.abs(A.data[dptr]).max() if A.shape[0] else 1.0
    lu, shifted = kn.ilu0_factor(ip, ii, A.data, dptr, 1e-12 * dmax)
    return Ilu0(ip, ii, lu, dptr, int(shifted))


def ilu0_apply(factors, r):
    return kn.ilu0_solve(factors.indptr, factors.indices, factors.lu, factors.dptr,
                         np.ascontiguousarray(r, dtype=float))
