"""Compiled CSR kernels for the smoothers, ILU(0) and classical AMG setup.

All routines take raw CSR arrays (``indptr``, ``indices``, ``data``) with
sorted column indices per row.
"""
import heapq

import numpy as np
from numba import njit

U_PT, F_PT, C_PT = -1, 0, 1


@njit(cache=True)
def sgs_sweep(indptr, indices, data, diag, x, b, nsweeps):
    """``nsweeps`` symmetric Gauss-Seidel sweeps (forward then backward)."""
    n = len(b)
    for _ in range(nsweeps):
        for i in range(n):
            s = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                s -= data[jj] * x[indices[jj]]
            # the diagonal term was subtracted along with the rest of the row
            x[i] += s / diag[i]
        for i in range(n - 1, -1, -1):
            s = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                s -= data[jj] * x[indices[jj]]
            x[i] += s / diag[i]


@njit(cache=True)
def diag_pointers(indptr, indices):
    n = len(indptr) - 1
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i:
                out[i] = jj
                break
    return out


@njit(cache=True)
def ilu0_factor(indptr, indices, data, dptr, eps_pivot):
    """In-place IKJ ILU(0); returns factor values and number of shifted pivots."""
    n = len(indptr) - 1
    lu = data.copy()
    pos = np.full(n, -1, dtype=np.int64)
    shifted = 0
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = jj
        for kk in range(indptr[i], dptr[i]):
            k = indices[kk]
            lu[kk] /= lu[dptr[k]]
            lik = lu[kk]
            for jj in range(dptr[k] + 1, indptr[k + 1]):
                p = pos[indices[jj]]
                if p >= 0:
                    lu[p] -= lik * lu[jj]
        if abs(lu[dptr[i]]) < eps_pivot:
            lu[dptr[i]] = eps_pivot if lu[dptr[i]] >= 0 else -eps_pivot
            shifted += 1
        for jj in range(indptr[i], indptr[i + 1]):
            pos[indices[jj]] = -1
    return lu, shifted


@njit(cache=True)
def ilu0_solve(indptr, indices, lu, dptr, r):
    n = len(r)
    z = r.copy()
    for i in range(n):
        s = z[i]
        for jj in range(indptr[i], dptr[i]):
            s -= lu[jj] * z[indices[jj]]
        z[i] = s
    for i in range(n - 1, -1, -1):
        s = z[i]
        for jj in range(dptr[i] + 1, indptr[i + 1]):
            s -= lu[jj] * z[indices[jj]]
        z[i] = s / lu[dptr[i]]
    return z


@njit(cache=True)
def strength(indptr, indices, data, theta, func):
    """Classical strength: ``|a_ij| >= theta * max_{k != i} |a_ik|``.

    Only couplings between unknowns of the same function count.
    Returns CSR (indptr, indices) of the strength graph without diagonal.
    """
    n = len(indptr) - 1
    sp_ = np.zeros(n + 1, dtype=np.int64)
    sj = np.empty(len(indices), dtype=np.int64)
    nnz = 0
    for i in range(n):
        amax = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j != i and func[j] == func[i]:
                a = abs(data[jj])
                if a > amax:
                    amax = a
        if amax > 0.0:
            thr = theta * amax
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                if j != i and func[j] == func[i] and abs(data[jj]) >= thr:
                    sj[nnz] = j
                    nnz += 1
        sp_[i + 1] = nnz
    return sp_, sj[:nnz].copy()


@njit(cache=True)
def rs_first_pass(n, sp_, sj, tp, tj):
    """Ruge-Stueben greedy C/F splitting on the strength graph ``S``.

    ``(tp, tj)`` is ``S`` transposed: row ``i`` lists the points that
    strongly depend on ``i``.  Ties in the measure break toward the lower
    index, making the result deterministic.
    """
    state = np.full(n, U_PT, dtype=np.int64)
    lam = np.empty(n, dtype=np.int64)
    heap = [(0, 0)]
    heap.pop()
    for i in range(n):
        lam[i] = tp[i + 1] - tp[i]
        if sp_[i + 1] == sp_[i] and lam[i] == 0:
            state[i] = F_PT      # isolated point
        else:
            heap.append((-lam[i], i))
    heapq.heapify(heap)
    while len(heap) > 0:
        neg, i = heapq.heappop(heap)
        if state[i] != U_PT or -neg != lam[i]:
            continue
        if lam[i] == 0:
            # nothing depends on i: it interpolates from its C neighbors
            state[i] = F_PT
            continue
        state[i] = C_PT
        for jj in range(tp[i], tp[i + 1]):
            j = tj[jj]
            if state[j] == U_PT:
                state[j] = F_PT
                for kk in range(sp_[j], sp_[j + 1]):
                    k = sj[kk]
                    if state[k] == U_PT:
                        lam[k] += 1
                        heapq.heappush(heap, (-lam[k], k))
        for jj in range(sp_[i], sp_[i + 1]):
            j = sj[jj]
            if state[j] == U_PT:
                lam[j] -= 1
                heapq.heappush(heap, (-lam[j], j))
    return state


@njit(cache=True)
def rs_second_pass(n, sp_, sj, state):
    """Promote F points so strongly coupled F pairs share a C point."""
    mark = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if state[i] != F_PT:
            continue
        for jj in range(sp_[i], sp_[i + 1]):
            j = sj[jj]
            if state[j] == C_PT:
                mark[j] = i
        for jj in range(sp_[i], sp_[i + 1]):
            j = sj[jj]
            if state[j] != F_PT:
                continue
            found = False
            for kk in range(sp_[j], sp_[j + 1]):
                if mark[sj[kk]] == i:
                    found = True
                    break
            if not found:
                state[j] = C_PT
                mark[j] = i
    return state


@njit(cache=True)
def classical_interpolation(indptr, indices, data, sp_, sj, state, func):
    """Classical (modified) Ruge-Stueben interpolation.

    Strong C neighbors interpolate directly; strong F neighbors are
    distributed over the common strong C points using entries whose sign
    is opposite to the neighbor's diagonal; weak couplings to unknowns of
    the same function are lumped into the diagonal.
    """
    n = len(indptr) - 1
    cmap = np.full(n, -1, dtype=np.int64)
    nc = 0
    for i in range(n):
        if state[i] == C_PT:
            cmap[i] = nc
            nc += 1
    # row lengths
    pp = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if state[i] == C_PT:
            pp[i + 1] = pp[i] + 1
        else:
            cnt = 0
            for jj in range(sp_[i], sp_[i + 1]):
                if state[sj[jj]] == C_PT:
                    cnt += 1
            pp[i + 1] = pp[i] + cnt
    pj = np.empty(pp[n], dtype=np.int64)
    px = np.zeros(pp[n])
    strong = np.full(n, -1, dtype=np.int64)
    slot = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start = pp[i]
        if state[i] == C_PT:
            pj[start] = cmap[i]
            px[start] = 1.0
            continue
        if pp[i + 1] == start:
            continue
        pos = start
        for jj in range(sp_[i], sp_[i + 1]):
            j = sj[jj]
            strong[j] = i
            if state[j] == C_PT:
                slot[j] = pos
                pj[pos] = cmap[j]
                pos += 1
        diag = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            a = data[jj]
            if j == i:
                diag += a
            elif strong[j] == i and state[j] == C_PT:
                px[slot[j]] += a
            elif strong[j] == i and state[j] == F_PT:
                dj = 0.0
                for kk in range(indptr[j], indptr[j + 1]):
                    if indices[kk] == j:
                        dj = data[kk]
                        break
                sgn = 1.0 if dj >= 0 else -1.0
                tot = 0.0
                for kk in range(indptr[j], indptr[j + 1]):
                    k = indices[kk]
                    if k != j and strong[k] == i and state[k] == C_PT and sgn * data[kk] < 0:
                        tot += data[kk]
                if tot != 0.0:
                    f = a / tot
                    for kk in range(indptr[j], indptr[j + 1]):
                        k = indices[kk]
                        if k != j and strong[k] == i and state[k] == C_PT and sgn * data[kk] < 0:
                            px[slot[k]] += f * data[kk]
                else:
                    diag += a
            elif func[j] == func[i]:
                diag += a
        for pos in range(start, pp[i + 1]):
            px[pos] = -px[pos] / diag
        for jj in range(sp_[i], sp_[i + 1]):
            slot[sj[jj]] = -1
    return pp, pj, px, nc, cmap
