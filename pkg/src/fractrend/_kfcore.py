"""Small-state Kalman recursion kernel for the uncorrected truncated model.

This is the cheap surrogate used by the starting-value search: filter the
raw observations with the (m+1)-state truncated system and no correction,
O(n m^2 p) per likelihood call.  It is deliberately the plain textbook
recursion with the truncated system's own Riccati; its likelihood is only
an approximation of the exact one (good enough to rank starting points).

Compiled with numba when available; a numpy fallback keeps the package
importable without it.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _trunc_kf_loop(y, beta, sigma_diag, abar, cvec, sigma_eta2):
    """Truncated-system Kalman filter; returns (v, F_last, x_pred).

    abar holds the first column of the companion transition, cvec the MA
    loadings of the shock vector R = (1, cvec).
    """
    n, p = y.shape
    s = abar.shape[0]
    R = np.empty(s)
    R[0] = 1.0
    for i in range(s - 1):
        R[i + 1] = cvec[i]
    a = np.zeros(s)
    P = np.empty((s, s))
    for i in range(s):
        for j in range(s):
            P[i, j] = sigma_eta2 * R[i] * R[j]
    v = np.empty((n, p))
    x_pred = np.empty(n)
    F = np.empty((p, p))
    F_last = np.empty((p, p))
    a_f = np.empty(s)
    TP = np.empty((s, s))
    Pn = np.empty((s, s))
    for t in range(n):
        omega = P[0, 0]
        for i in range(p):
            for j in range(p):
                F[i, j] = omega * beta[i] * beta[j]
            F[i, i] += sigma_diag[i]
        if t == n - 1:
            for i in range(p):
                for j in range(p):
                    F_last[i, j] = F[i, j]
        x_pred[t] = a[0]
        for i in range(p):
            v[t, i] = y[t, i] - beta[i] * a[0]
        q = np.linalg.solve(F, beta)
        gamma = 0.0
        qv = 0.0
        for i in range(p):
            gamma += beta[i] * q[i]
            qv += q[i] * v[t, i]
        # filtered moments (standard form; small states stay well behaved)
        for i in range(s):
            a_f[i] = a[i] + P[i, 0] * qv
        for i in range(s):
            for j in range(s):
                Pn[i, j] = P[i, j] - gamma * P[i, 0] * P[j, 0]
        # predict: a <- T a_f, P <- T Pn T' + sigma_eta2 R R'
        for i in range(s):
            nxt = a_f[i + 1] if i + 1 < s else 0.0
            a[i] = abar[i] * a_f[0] + nxt
        for i in range(s):
            for j in range(s):
                x = abar[i] * Pn[0, j]
                if i + 1 < s:
                    x += Pn[i + 1, j]
                TP[i, j] = x
        for i in range(s):
            for j in range(s):
                x = abar[j] * TP[i, 0]
                if j + 1 < s:
                    x += TP[i, j + 1]
                P[i, j] = x + sigma_eta2 * R[i] * R[j]
    return v, F_last, x_pred


def trunc_kf(y, beta, sigma_diag, abar, cvec, sigma_eta2):
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _trunc_kf_loop(
        y,
        np.ascontiguousarray(beta, dtype=np.float64),
        np.ascontiguousarray(sigma_diag, dtype=np.float64),
        np.ascontiguousarray(abar, dtype=np.float64),
        np.ascontiguousarray(cvec, dtype=np.float64),
        float(sigma_eta2),
    )
