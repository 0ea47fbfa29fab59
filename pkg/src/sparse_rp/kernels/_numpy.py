"""Pure-numpy reference kernels.

Each function here has a compiled twin in ``_numba`` with the same
signature and the same floating-point operation order wherever that is
practical, so the two backends agree to the last bit on most inputs.
"""

from __future__ import annotations

import itertools

import numpy as np

_CHUNK_ELEMS = 1 << 22


def csc_project(indptr, indices, data, X, k):
    """Return ``X @ R.T`` for ``R`` (k x d) held as CSC arrays."""
    n, d = X.shape
    Y = np.zeros((n, k), dtype=np.float64)
    nnz = indptr[-1]
    if nnz == 0 or n == 0:
        return Y
    cols = np.repeat(np.arange(d, dtype=np.int64), np.diff(indptr))
    # group nonzeros by output row, keeping ascending column order inside a row
    order = np.argsort(indices, kind="stable")
    rows_sorted = indices[order]
    cols_sorted = cols[order]
    vals_sorted = data[order]
    starts = np.flatnonzero(np.r_[True, rows_sorted[1:] != rows_sorted[:-1]])
    rows_present = rows_sorted[starts]
    step = max(1, _CHUNK_ELEMS // max(nnz, 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        contrib = X[lo:hi, cols_sorted] * vals_sorted
        Y[lo:hi, rows_present] = np.add.reduceat(contrib, starts, axis=1)
    return Y


def floyd_abs_dot(u, sign_r, sign_z, noise, d, n_features, mu, sigma, scale):
    """|<r, z>| for sparse rows whose support is drawn by Floyd's algorithm.

    Row ``m`` picks ``s`` distinct positions out of ``d``; step ``t`` draws
    ``j = floor(u[m, t] * (d - s + t + 1))`` and falls back to ``d - s + t``
    when ``j`` is already taken. Positions below ``n_features`` carry
    ``z = sign_z * (mu + sigma * noise)``; the rest carry zero.
    """
    m, s = u.shape
    pos = np.empty((m, s), dtype=np.int64)
    acc = np.zeros(m, dtype=np.float64)
    for t in range(s):
        top = d - s + t
        j = np.floor(u[:, t] * (top + 1)).astype(np.int64)
        np.minimum(j, top, out=j)
        if t:
            taken = (pos[:, :t] == j[:, None]).any(axis=1)
            j = np.where(taken, top, j)
        pos[:, t] = j
        zval = sign_z[:, t] * (mu + sigma * noise[:, t])
        zval = np.where(j < n_features, zval, 0.0)
        acc += sign_r[:, t] * zval
    return np.abs(acc) * scale


def pair_histogram(d, w):
    """Histogram of (smallest, second smallest) element over all w-subsets of range(d).

    Column ``d`` stands in for "no second element" when ``w == 1``.
    """
    hist = np.zeros((d, d + 1), dtype=np.int64)
    if w == 1:
        hist[np.arange(d), d] = 1
        return hist
    for comb in itertools.combinations(range(d), w):
        hist[comb[0], comb[1]] += 1
    return hist


def dcd_svm(Q, upper, orders, tol):
    """Dual coordinate descent for the L1-loss linear SVM.

    Minimises ``0.5 a'Qa - sum(a)`` over the box ``0 <= a <= upper``.
    Returns ``(alpha, epochs, history)`` where ``history[e]`` is the dual
    objective after epoch ``e``.
    """
    n = Q.shape[0]
    alpha = np.zeros(n)
    grad = np.zeros(n)  # Q @ alpha
    history = np.empty(orders.shape[0])
    prev = 0.0
    epochs = 0
    for e in range(orders.shape[0]):
        moved = 0.0
        for i in orders[e]:
            qii = Q[i, i]
            if qii <= 0.0:
                continue
            a = alpha[i]
            g = grad[i] - 1.0
            ub = upper[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= ub:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                a_new = min(max(a - g / qii, 0.0), ub)
                delta = a_new - a
                if delta != 0.0:
                    alpha[i] = a_new
                    grad += delta * Q[:, i]
                    moved = max(moved, abs(pg))
        obj = 0.0
        for i in range(n):
            obj += alpha[i] * (0.5 * grad[i] - 1.0)
        history[e] = obj
        epochs = e + 1
        if moved == 0.0:
            break
        if e > 0 and abs(prev - obj) <= tol * max(abs(obj), 1e-300):
            break
        prev = obj
    return alpha, epochs, history[:epochs].copy()


def pegasos_svm(X, y, lam, orders, tol):
    """Averaged stochastic subgradient descent on ``lam/2 |w|^2 + mean hinge``.

    The returned weights are the averaged iterate with the lowest full
    objective seen at an epoch boundary; ``history`` is that running
    minimum, so it never increases.
    """
    n, p = X.shape
    w = np.zeros(p)
    wbar = np.zeros(p)
    best = np.zeros(p)
    best_obj = np.inf
    history = np.empty(orders.shape[0])
    t = 0
    prev = np.inf
    epochs = 0
    for e in range(orders.shape[0]):
        for i in orders[e]:
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * np.dot(w, X[i])
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * y[i]) * X[i]
            wbar += (w - wbar) / t
        hinge = np.maximum(0.0, 1.0 - y * (X @ wbar))
        obj = 0.5 * lam * np.dot(wbar, wbar) + hinge.mean()
        if obj < best_obj:
            best_obj = obj
            best[:] = wbar
        history[e] = best_obj
        epochs = e + 1
        if np.isfinite(prev) and abs(prev - obj) <= tol * max(abs(obj), 1e-300):
            break
        prev = obj
    return best, epochs, history[:epochs].copy()
