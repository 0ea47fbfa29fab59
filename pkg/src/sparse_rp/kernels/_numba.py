"""Compiled kernels. Signatures and semantics mirror ``_numpy``."""

from __future__ import annotations

import numba
import numpy as np

_opts = dict(cache=True, nogil=True)


@numba.njit(**_opts)
def csc_project(indptr, indices, data, X, k):
    n, d = X.shape
    Y = np.zeros((n, k), dtype=np.float64)
    for i in range(n):
        for j in range(d):
            x = X[i, j]
            if x == 0.0:
                continue
            for p in range(indptr[j], indptr[j + 1]):
                Y[i, indices[p]] += x * data[p]
    return Y


@numba.njit(**_opts)
def floyd_abs_dot(u, sign_r, sign_z, noise, d, n_features, mu, sigma, scale):
    m, s = u.shape
    out = np.empty(m, dtype=np.float64)
    pos = np.empty(s, dtype=np.int64)
    for r in range(m):
        acc = 0.0
        for t in range(s):
            top = d - s + t
            j = np.int64(np.floor(u[r, t] * (top + 1)))
            if j > top:
                j = top
            for q in range(t):
                if pos[q] == j:
                    j = top
                    break
            pos[t] = j
            if j < n_features:
                zval = sign_z[r, t] * (mu + sigma * noise[r, t])
            else:
                zval = 0.0
            acc += sign_r[r, t] * zval
        out[r] = abs(acc) * scale
    return out


@numba.njit(**_opts)
def pair_histogram(d, w):
    hist = np.zeros((d, d + 1), dtype=np.int64)
    if w == 1:
        for i in range(d):
            hist[i, d] = 1
        return hist
    comb = np.arange(w)
    while True:
        hist[comb[0], comb[1]] += 1
        # advance to the next combination in lexicographic order
        i = w - 1
        while i >= 0 and comb[i] == d - w + i:
            i -= 1
        if i < 0:
            break
        comb[i] += 1
        for j in range(i + 1, w):
            comb[j] = comb[j - 1] + 1
    return hist


@numba.njit(**_opts)
def dcd_svm(Q, upper, orders, tol):
    n = Q.shape[0]
    alpha = np.zeros(n)
    grad = np.zeros(n)
    history = np.empty(orders.shape[0])
    prev = 0.0
    epochs = 0
    for e in range(orders.shape[0]):
        moved = 0.0
        for idx in range(n):
            i = orders[e, idx]
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
                    for r in range(n):
                        grad[r] += delta * Q[r, i]
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


@numba.njit(**_opts)
def pegasos_svm(X, y, lam, orders, tol):
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
        for idx in range(n):
            i = orders[e, idx]
            t += 1
            eta = 1.0 / (lam * t)
            margin = 0.0
            for c in range(p):
                margin += w[c] * X[i, c]
            margin *= y[i]
            shrink = 1.0 - eta * lam
            for c in range(p):
                w[c] *= shrink
            if margin < 1.0:
                step = eta * y[i]
                for c in range(p):
                    w[c] += step * X[i, c]
            for c in range(p):
                wbar[c] += (w[c] - wbar[c]) / t
        hsum = 0.0
        for i in range(n):
            f = 0.0
            for c in range(p):
                f += wbar[c] * X[i, c]
            h = 1.0 - y[i] * f
            if h > 0.0:
                hsum += h
        nrm = 0.0
        for c in range(p):
            nrm += wbar[c] * wbar[c]
        obj = 0.5 * lam * nrm + hsum / n
        if obj < best_obj:
            best_obj = obj
            best[:] = wbar
        history[e] = best_obj
        epochs = e + 1
        if np.isfinite(prev) and abs(prev - obj) <= tol * max(abs(obj), 1e-300):
            break
        prev = obj
    return best, epochs, history[:epochs].copy()
