"""Scratch experiment: does the truncated KF on corrected observations
reproduce the exact-model prediction errors?

Oracle: direct Gaussian conditioning with dense joint covariances.
"""
import numpy as np

rng = np.random.default_rng(7)


def phi_coeffs(b, k):
    j = np.arange(1, k, dtype=float)
    out = np.empty(k)
    out[0] = 1.0
    if k > 1:
        out[1:] = np.cumprod((j + b - 1.0) / j)
    return out


def run(b=0.5, m=1, n=8, p=1, beta=None, sig=None, s2eta=1.0):
    ind = 1 if b >= 1 else 0
    d = b - ind
    beta = np.array([1.0] if p == 1 else [1.0, 0.7][:p]) if beta is None else beta
    sig = np.full(p, 0.8) if sig is None else sig
    phid = phi_coeffs(d, n + 1)
    # exact covariances: x_t = Delta^{-ind} sum phi(d) eta
    # Phi_b[t,j] = coefficient of eta_{j+1} in x_{t+1} (0-based)
    Phib = np.zeros((n, n))
    for t in range(n):
        for j in range(t + 1):
            Phib[t, j] = phid[t - j]
    if ind:
        Phib = np.cumsum(Phib, axis=0)  # wrong? x_t = sum_{s<=t} (d-part innovations at s)? no:
    # careful: x_t = ind*x_{t-1} + sum_j phi_j(d) eta_{t-j} -> x_t = sum_{s<=t} chi_s if ind, chi = conv
    # Phib above pre-cumsum gives chi coefficients; cumsum over t gives x coefficients. OK.
    gx = s2eta * (Phib @ Phib.T)  # Cov(x_t, x_s)
    # stacked Y covariance
    B = np.kron(np.eye(n), beta.reshape(p, 1))  # (np, n): Y = B x + u stacked
    SY = B @ gx @ B.T + np.kron(np.eye(n), np.diag(sig))
    C_eta_Y = s2eta * Phib.T @ B.T  # Cov(eta_j, Y-rows)? Cov(eta, x_t) = s2eta*Phib[t,j]
    # exact innovations by direct conditioning: E(y_t|Y_{t-1})
    v_exact = np.zeros((n, p))
    y = None
    # simulate
    eta = rng.standard_normal(n) * np.sqrt(s2eta)
    u = rng.standard_normal((n, p)) * np.sqrt(sig)
    chi = np.array([phid[: t + 1][::-1] @ eta[: t + 1] for t in range(n)])
    x = np.cumsum(chi) if ind else chi
    y = np.outer(x, beta) + u
    Yf = y.ravel()
    xpred_exact = np.zeros(n)
    for t in range(n):
        if t == 0:
            mu = np.zeros(p)
            xp = 0.0
        else:
            S11 = SY[: t * p, : t * p]
            cross = SY[t * p : (t + 1) * p, : t * p]
            sol = np.linalg.solve(S11, Yf[: t * p])
            mu = cross @ sol
            xp = gx[t, :t] @ np.linalg.solve(S11, np.zeros(0)) if False else (B[: t * p, t] * 0).sum()
            crossx = (B[: t * p, :] @ gx[:, t])  # Cov(Y_{1:t}, x_{t+1})
            xp = crossx @ sol
        v_exact[t] = y[t] - mu
        xpred_exact[t] = xp
    # Theorem-2 epsilon: eps_{t} = E(x_t - xtil_t | F_{t-1})
    # xtil: truncated: chi_til_t = sum_{i<=m} phi_i eta_{t-i}; xtil = cumsum if ind
    Phib_til = np.zeros((n, n))
    for t in range(n):
        for j in range(max(0, t - m), t + 1):
            Phib_til[t, j] = phid[t - j]
    if ind:
        Phib_til = np.cumsum(Phib_til, axis=0)
    Dcoef = Phib - Phib_til  # x - xtil = Dcoef @ eta
    eps = np.zeros(n)
    for t in range(n):
        if t == 0:
            continue
        S11 = SY[: t * p, : t * p]
        crossD = s2eta * (B[: t * p, :] @ 0 + (Dcoef[t] @ (s2eta * Phib.T) @ 0)) if False else None
        # Cov(x_t - xtil_t, Y_{1:t-?}) : x_t row t uses eta coeffs Dcoef[t], Cov(eta, Y) rows
        crossv = Dcoef[t] @ (s2eta * Phib.T @ B[: t * p, :].T * 0 + C_eta_Y[:, : t * p])
        eps[t] = crossv @ np.linalg.solve(S11, Yf[: t * p])
    # corrected obs
    ycorr = y - np.outer(eps, beta)
    # truncated KF on ycorr (state m+1)
    s = m + 1
    Tm = np.zeros((s, s))
    Tm[0, 0] = ind
    for i in range(s - 1):
        Tm[i, i + 1] = 1
    R = phid[:s].copy()
    Z = np.zeros((p, s))
    Z[:, 0] = beta
    a = np.zeros(s)
    P = s2eta * np.outer(R, R)
    v_fast = np.zeros((n, p))
    xpred_fast = np.zeros(n)
    for t in range(n):
        F = Z @ P @ Z.T + np.diag(sig)
        v_fast[t] = ycorr[t] - Z @ a
        xpred_fast[t] = a[0]
        K = P @ Z.T @ np.linalg.inv(F)
        a = Tm @ (a + K @ v_fast[t])
        P = Tm @ (P - K @ Z @ P) @ Tm.T + s2eta * np.outer(R, R)
    print(f"b={b} m={m} n={n} p={p}")
    print("  max |v_fast - v_exact| =", np.max(np.abs(v_fast - v_exact)))
    print("  max |xpred_fast+eps - xpred_exact| =", np.max(np.abs(xpred_fast + eps - xpred_exact)))


run(b=0.5, m=1, n=8)
run(b=0.5, m=0, n=8)
run(b=0.8, m=2, n=10)
run(b=1.2, m=1, n=9)
run(b=0.3, m=3, n=12)
