"""Scratch: validate the univariate GLS reduction and kernel contraction
against brute-force Gaussian conditioning.

Checks, for both b<1 and b>=1 and p in {1,3}:
  1. x_pred[t] = E(x_t|Y_{t-1}) from the reduced machinery == brute force.
  2. v_t = (I - beta r') y_t + beta z_t == y_t - beta x_pred (and brute force).
  3. omega_t = diag(L_G)^2 - 1/c == Var(x_t|Y_{t-1}) brute force.
  4. eps_t (Theorem-2 weights via Hcum contraction) == direct conditioning.
  5. x_filt == E(x_t|Y_t) brute force.
"""
import numpy as np
import scipy.linalg as sla

rng = np.random.default_rng(3)


def pi_coeffs(b, k):
    j = np.arange(1, k, dtype=float)
    out = np.empty(k)
    out[0] = 1.0
    if k > 1:
        out[1:] = np.cumprod((j - b - 1.0) / j)
    return out


def phi_coeffs(b, k):
    return pi_coeffs(-b, k)


def gram(coefs, n):
    G = np.zeros((n, n))
    for k in range(n):
        s = np.cumsum(coefs[: n - k] * coefs[k:n])
        idx = np.arange(n - k)
        G[idx, idx + k] = s
        G[idx + k, idx] = s
    return G


def run(b, p, m, n=40, s2eta=0.7):
    ind = 1 if b >= 1 else 0
    d = b - ind
    beta = np.linspace(1.0, 0.6, p)
    sig = np.linspace(0.5, 1.5, p)
    phib = phi_coeffs(b, n + 1)
    phid = phi_coeffs(d, n + 1)
    pib = pi_coeffs(b, n)

    # simulate
    eta = rng.standard_normal(n) * np.sqrt(s2eta)
    u = rng.standard_normal((n, p)) * np.sqrt(sig)
    x = np.array([phid[: t + 1][::-1] @ eta[: t + 1] for t in range(n)])
    if ind:
        x = np.cumsum(x)
    y = np.outer(x, beta) + u

    # brute force: stacked covariances
    Phib_mat = np.zeros((n, n))
    for t in range(n):
        Phib_mat[t, : t + 1] = phib[: t + 1][::-1]
    gx = s2eta * (Phib_mat @ Phib_mat.T)
    B = np.kron(np.eye(n), beta.reshape(p, 1))
    SY = B @ gx @ B.T + np.kron(np.eye(n), np.diag(sig))
    Yf = y.ravel()
    xpred_bf = np.zeros(n)
    xfilt_bf = np.zeros(n)
    omega_bf = np.zeros(n)
    for t in range(n):
        cr = B[: t * p, :] @ gx[:, t]
        if t:
            sol = np.linalg.solve(SY[: t * p, : t * p], Yf[: t * p])
            xpred_bf[t] = cr @ sol
            omega_bf[t] = gx[t, t] - cr @ np.linalg.solve(SY[: t * p, : t * p], cr)
        else:
            omega_bf[t] = gx[t, t]
        tp = (t + 1) * p
        cr2 = B[:tp, :] @ gx[:, t]
        xfilt_bf[t] = cr2 @ np.linalg.solve(SY[:tp, :tp], Yf[:tp])

    # reduced machinery
    c = float(beta @ (beta / sig))
    r = (beta / sig) / c
    ybar = y @ r
    G = s2eta * np.eye(n) + (1.0 / c) * gram(pib, n)
    L = sla.cholesky(G, lower=True)
    zeta = np.convolve(pib, ybar)[:n]
    w = sla.solve_triangular(L, zeta, lower=True)
    dL = np.diag(L)
    z = dL * w
    omega = dL**2 - 1.0 / c
    xpred = ybar - z
    v_red = y - np.outer(xpred, beta)
    Cinv = sla.solve_triangular(L, np.eye(n), lower=True)
    HC = s2eta * np.cumsum(Cinv * w[:, None], axis=0)  # HC[t-1, j-1] = h_t[j]

    # eps via Theorem-2 weights
    wbase = phid[1:n].copy()
    if m >= 1:
        wbase[:m] = 0.0
    W = np.cumsum(wbase) if ind else wbase  # W[r-1] = W(r)
    eps = np.zeros(n)
    for t in range(2, n + 1):
        jmax = t - 1
        if jmax >= 1:
            kern = W[: t - 1][::-1]  # W(t-1), ..., W(1) -> dot with h[1..t-1]
            eps[t - 1] = float(kern @ HC[t - 2, : t - 1]) if True else 0.0
    # direct conditioning eps
    Phib_til = np.zeros((n, n))
    for t in range(n):
        for j in range(max(0, t - m), t + 1):
            Phib_til[t, j] = phid[t - j]
    if ind:
        Phib_til = np.cumsum(Phib_til, axis=0)
    Dc = Phib_mat - Phib_til
    C_eta_Y = s2eta * Phib_mat.T @ B.T
    eps_bf = np.zeros(n)
    for t in range(1, n):
        crossv = Dc[t] @ C_eta_Y[:, : t * p]
        eps_bf[t] = crossv @ np.linalg.solve(SY[: t * p, : t * p], Yf[: t * p])

    # x_filt via phi(b) kernel on same-time h rows
    xfilt = np.zeros(n)
    for t in range(1, n + 1):
        kern = phib[:t][::-1]  # phi_{t-1},...,phi_0 -> h[1..t]
        xfilt[t - 1] = float(kern @ HC[t - 1, :t])

    print(f"b={b} p={p} m={m}:")
    print("   xpred  ", np.max(np.abs(xpred - xpred_bf)))
    print("   omega  ", np.max(np.abs(omega - omega_bf)))
    print("   eps    ", np.max(np.abs(eps - eps_bf)))
    print("   xfilt  ", np.max(np.abs(xfilt - xfilt_bf)))
    print("   v ident", np.max(np.abs(((y @ np.eye(p)) - np.outer(ybar, beta)) + np.outer(z, beta) - v_red)))


for b in (0.3, 0.5, 0.8, 1.0, 1.2):
    for p in (1, 3):
        run(b, p, m=2)
run(0.8, 2, m=0)
run(1.2, 2, m=5)
