from .amg import AmgHierarchy, AmgParams, amg_setup, amg_vcycle, cf_splitting
from .dense import DenseLU, SingularMatrixError, dense_lu_solve
from .ilu import Ilu0, ilu0_apply, ilu0_factor
from .krylov import KrylovStats, fgmres
from .sparse import dump_matrix_market, spmv

__all__ = [
    "AmgHierarchy", "AmgParams", "amg_setup", "amg_vcycle", "cf_splitting",
    "DenseLU", "SingularMatrixError", "dense_lu_solve",
    "Ilu0", "ilu0_apply", "ilu0_factor",
    "KrylovStats", "fgmres",
    "dump_matrix_market", "spmv",
]
