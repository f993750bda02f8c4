"""Dense LU with partial pivoting (coarsest AMG level, small oracles)."""
import warnings

import numpy as np
import scipy.linalg as sla


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class DenseLU:
    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"need a square matrix, got {A.shape}")
        self.n = A.shape[0]
        if self.n == 0:
            self.lu = None
            return
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, check_finite=True)
        u = np.abs(np.diag(lu))
        if u.max() == 0.0 or u.min() <= np.finfo(float).eps * u.max() * self.n:
            raise SingularMatrixError("matrix is singular to working precision")
        self.lu = (lu, piv)

    def solve(self, b):
        if self.lu is None:
            return np.zeros(0)
        return sla.lu_solve(self.lu, b)


def dense_lu_solve(A, b):
    return DenseLU(A).solve(np.asarray(b, dtype=float))
