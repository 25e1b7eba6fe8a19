"""Hot inner loops.

Each kernel has a numba version (``*_numba``) and a numpy/scipy version
(``*_numpy``) with identical semantics. The public name dispatches on
``wavepwr._accel.USE_NUMBA``.
"""
import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------- wave equation

# reassociation lets the row sums vectorize; nnan/ninf stay off so the
# finiteness check survives
@njit(cache=True, fastmath={"reassoc", "contract", "arcp"})
def _wave_loop(indptr, indices, data, diag, u0, c2, steps, limit, out):
    n = u0.shape[0]
    prev = u0.copy()
    cur = u0.copy()
    nxt = np.empty(n)
    for t in range(steps):
        for i in range(n):
            s = diag[i] * cur[i]
            for p in range(indptr[i], indptr[i + 1]):
                s += data[p] * cur[indices[p]]
            nxt[i] = 2.0 * cur[i] - prev[i] - c2 * s
        bad = False
        for i in range(n):
            v = nxt[i]
            if not np.isfinite(v) or abs(v) > limit:
                bad = True
            out[t, i] = v
        if bad:
            return t + 1
        prev, cur, nxt = cur, nxt, prev
    return 0


def wave_propagate_numba(L, u0, c, steps, limit=np.inf):
    """Run ``steps`` wave updates; returns ``(trace, bad_step)``.

    ``L`` is a scipy CSR matrix. ``trace[:, t-1]`` holds ``u(t)``. ``bad_step``
    is the first step producing a non-finite value or one above ``limit`` in
    magnitude, 0 if none.
    """
    L = sp.csr_matrix(L)
    diag = L.diagonal().astype(np.float64)
    off = L - sp.diags(diag)
    off = sp.csr_matrix(off)
    off.eliminate_zeros()
    # row per step keeps the writes contiguous
    out = np.empty((steps, u0.shape[0]))
    bad = _wave_loop(off.indptr, off.indices, off.data.astype(np.float64), diag,
                     np.asarray(u0, dtype=np.float64), float(c) ** 2, int(steps), float(limit), out)
    return np.ascontiguousarray(out.T), int(bad)


def wave_propagate_numpy(L, u0, c, steps, limit=np.inf):
    L = sp.csr_matrix(L)
    c2 = float(c) ** 2
    prev = np.array(u0, dtype=np.float64)
    cur = prev.copy()
    out = np.empty((steps, prev.shape[0]))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            nxt = 2.0 * cur - prev - c2 * (L @ cur)
            out[t] = nxt
            if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > limit:
                return np.ascontiguousarray(out.T), t + 1
            prev, cur = cur, nxt
    return np.ascontiguousarray(out.T), 0


# ---------------------------------------------------------------- kuramoto rhs

@njit(cache=True)
def _kuramoto_loop(indptr, indices, data, x, omega, rows, out):
    B = x.shape[0]
    for b in range(B):
        for r in range(rows.shape[0]):
            i = rows[r]
            xi = x[b, i]
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s += data[p] * np.sin(x[b, indices[p]] - xi)
            out[b, r] = omega[b, i] + s


def kuramoto_rhs_numba(K, x, omega, rows):
    """``omega_i + sum_j K_ij sin(x_j - x_i)`` for ``i`` in ``rows``.

    ``x`` and ``omega`` are ``(B, N)``; ``K`` is scipy CSR; result is ``(B, len(rows))``.
    """
    out = np.empty((x.shape[0], rows.shape[0]))
    _kuramoto_loop(K.indptr.astype(np.int64), K.indices.astype(np.int64), K.data,
                   np.ascontiguousarray(x, dtype=np.float64),
                   np.ascontiguousarray(omega, dtype=np.float64),
                   rows.astype(np.int64), out)
    return out


def kuramoto_rhs_numpy(K, x, omega, rows):
    # sin(xj - xi) = sin xj cos xi - cos xj sin xi
    Kr = K[rows]
    s, c = np.sin(x), np.cos(x)
    xs = x[:, rows]
    return (omega[:, rows]
            + np.cos(xs) * np.asarray((Kr @ s.T).T)
            - np.sin(xs) * np.asarray((Kr @ c.T).T))


if USE_NUMBA:
    wave_propagate = wave_propagate_numba
    kuramoto_rhs = kuramoto_rhs_numba
else:
    wave_propagate = wave_propagate_numpy
    kuramoto_rhs = kuramoto_rhs_numpy
