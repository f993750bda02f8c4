"""Flexible GMRES with right preconditioning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KrylovStats:
    iterations: int = 0
    initial_residual: float = 0.0
    final_residual: float = 0.0
    converged: bool = False
    history: list = field(default_factory=list)

    @property
    def relative_residual(self):
        if self.initial_residual == 0.0:
            return 0.0
        return self.final_residual / self.initial_residual


def _identity(r):
    return r.copy()


def fgmres(A, b, preconditioner=None, x0=None, rtol=1e-8, restart=100, maxiter=300):
    """Solve ``A x = b`` to ``|b - A x| <= rtol |b|``.

    ``preconditioner`` is any callable approximating ``A^{-1}``; it may
    change between iterations.  ``maxiter`` bounds the total number of
    inner iterations over all restart cycles; running out is reported in
    the stats rather than raised.  ``history`` holds the (estimated)
    residual norm after every iteration.
    """
    M = preconditioner or _identity
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    r = b - A @ x if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    stats = KrylovStats(initial_residual=beta, final_residual=beta)
    stats.history.append(beta)
    target = rtol * bnorm
    if beta <= target or beta == 0.0:
        stats.converged = True
        return x, stats

    m = restart
    V = np.empty((m + 1, n))
    Z = np.empty((m, n))
    Hm = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    total = 0
    while total < maxiter:
        V[0] = r / beta
        g = np.zeros(m + 1)
        g[0] = beta
        j = 0
        happy = False
        while j < m and total < maxiter:
            Z[j] = M(V[j])
            w = A @ Z[j]
            # classical Gram-Schmidt, applied twice
            h = V[: j + 1] @ w
            w -= h @ V[: j + 1]
            h2 = V[: j + 1] @ w
            w -= h2 @ V[: j + 1]
            h += h2
            hn = np.linalg.norm(w)
            Hm[: j + 1, j] = h
            Hm[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * Hm[i, j] + sn[i] * Hm[i + 1, j]
                Hm[i + 1, j] = -sn[i] * Hm[i, j] + cs[i] * Hm[i + 1, j]
                Hm[i, j] = t
            denom = np.hypot(Hm[j, j], Hm[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = Hm[j, j] / denom, Hm[j + 1, j] / denom
            Hm[j, j] = denom
            Hm[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j += 1
            total += 1
            est = abs(g[j])
            stats.history.append(est)
            if est <= target:
                break
            if hn <= 1e-14 * denom:
                happy = True
                break
            V[j] = w / hn
        y = np.linalg.solve(np.triu(Hm[:j, :j]), g[:j]) if j else np.zeros(0)
        x += y @ Z[:j]
        r = b - A @ x
        beta = np.linalg.norm(r)
        stats.iterations = total
        stats.final_residual = beta
        if beta <= target or happy:
            stats.converged = beta <= target or happy
            return x, stats
        if beta == 0.0:
            break
    stats.converged = stats.final_residual <= target
    return x, stats
