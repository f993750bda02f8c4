"""CSR helpers on top of scipy.sparse."""
import numpy as np
import scipy.io
import scipy.sparse as sp


def spmv(A, x):
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"cannot multiply {A.shape} matrix with vector of length {x.shape[0]}")
    return A @ x


def is_structurally_symmetric(A):
    P = sp.csr_matrix(A, copy=True)
    P.data[:] = 1.0
    return (P != P.T).nnz == 0


def dump_matrix_market(A, path):
    """Write ``A`` in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), field="real", precision=17)
    return path
