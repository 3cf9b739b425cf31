"""Fast filtering: truncated/ARMA state space plus exact truncation correction.

The exact filter carries an (n+1)-dimensional state.  The fast route keeps a
small truncated representation of the trend and adds back the conditional
expectation of everything the truncation discards, so its prediction errors
and likelihood are identical to the exact filter's, not approximations.

The work happens in two layers:

* The stacked observation covariance Sigma_Y (``build_obs_covariance``) with
  its single Cholesky factorization, whose nested leading blocks give the
  conditional expectations E(eta_{1:t} | y_1..y_t) for every t at once.
  This is the reference machinery, built blockwise from the closed-form
  covariances Cov(y_t, eta_{t-j}) and Cov(y_t, y_{t-k}).

* A univariate reduction (``GlsReduction``): because a single trend drives
  all p series, conditioning on Y_t is equivalent to conditioning on the
  scalar GLS combination ybar_t = beta' Sigma^{-1} y_t / (beta' Sigma^{-1}
  beta).  Writing Sigma_ybar = Phi G Phi' with Phi the lower-triangular
  Toeplitz matrix of integration coefficients and G = sigma_eta2 I +
  Pi Pi' / c (Pi the difference-coefficient Toeplitz factor, c the GLS
  precision) turns the factorization into one well-conditioned n x n
  Cholesky, independent of p.  Both layers agree to machine precision; the
  reduction is what the filter and the likelihood use by default.

A plain Kalman recursion on the small truncated system with its own Riccati
gains does NOT reproduce the exact prediction errors (the truncated Riccati
misstates the innovation variance whenever the discarded tail is partially
predictable), so the truncated-state conditional means are evaluated through
the eta-projections instead.  The m=0 local-level case is the one where the
naive recursion happens to coincide.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .fracdiff import apply_frac_op, phi_coeffs, pi_coeffs
from .model import ThetaParams, check_valid
from .ssm_exact import FilterError, FilterOutput, gaussian_loglik

__all__ = [
    "ObsCovariance",
    "CorrectionSeries",
    "GlsReduction",
    "build_obs_covariance",
    "approximation_error",
    "kalman_fast",
    "extract_components",
    "Components",
]

DEFAULT_ROW_CAP = 10_000


def _toeplitz_gram(coefs: np.ndarray, n: int) -> np.ndarray:
    """Matrix with entries sum_{u=0}^{min(t,s)} coefs[u] coefs[u+|t-s|].

    This is (C C')[t,s] for the lower-triangular Toeplitz matrix C of
    ``coefs``; built by diagonals with cumulative sums, O(n^2).
    """
    G = np.empty((n, n))
    idx = np.arange(n)
    for k in range(n):
        s = np.cumsum(coefs[: n - k] * coefs[k:n])
        G[idx[: n - k], idx[: n - k] + k] = s
        G[idx[: n - k] + k, idx[: n - k]] = s
    return G


def _lower_toeplitz(coefs: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    for k in range(n):
        out[np.arange(k, n), np.arange(0, n - k)] = coefs[k]
    return out


# ---------------------------------------------------------------------------
# Stacked covariance machinery (reference path)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObsCovariance:
    """Covariance of the stacked observation vector Y_n = (y_1', ..., y_n')'.

    ``Sigma_Y`` has p x p blocks beta gamma_x(t,s) beta' + delta_ts Sigma,
    ``Sigma_etaY`` stacks Cov(eta_j, y_s) = sigma_eta2 phi_{s-j}(b) beta'
    (cumulative coefficients on the unit-root branch, plain ones below it),
    and ``chol`` is the single lower Cholesky factor whose leading tp x tp
    blocks factor Sigma_{Y_t} for every t.
    """

    Sigma_Y: np.ndarray  # (np) x (np)
    chol: np.ndarray  # lower triangular
    Sigma_etaY: np.ndarray  # n x (np)
    n: int
    p: int


def build_obs_covariance(
    theta: ThetaParams, n: int, max_rows: int = DEFAULT_ROW_CAP
) -> ObsCovariance:
    """Assemble and factor the stacked covariance of Y_n at theta.

    Memory is O((np)^2); refuses np above ``max_rows``.  Factorization
    failure reports the pivot at which the matrix stopped being positive
    definite (typically a symptom of Sigma ~ 0).
    """
    check_valid(theta)
    p = theta.p
    if n * p > max_rows:
        raise FilterError(
            f"stacked covariance would have {n * p} rows, cap is {max_rows}"
        )
    # Unified across branches: x_t = sum_j phi_{t-j}(b) eta_j, so the trend
    # autocovariance is sigma_eta2 * gram(phi(b)) and Cov(y_s, eta_j) =
    # sigma_eta2 phi_{s-j}(b) beta'.  For b >= 1 the phi(b) sequence equals
    # the cumulated phi(d) sequence, which is the unit-root branch formula.
    phib = phi_coeffs(theta.b, n)
    gamma_x = theta.sigma_eta2 * _toeplitz_gram(phib, n)
    bb = np.outer(theta.beta, theta.beta)
    Sigma_Y = np.kron(gamma_x, bb) + np.kron(np.eye(n), np.diag(theta.sigma_diag))
    try:
        chol = sla.cholesky(Sigma_Y, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        pivot = _pivot_from_error(exc)
        raise FilterError(
            f"Sigma_Y factorization failed at pivot {pivot}; "
            "observation covariance is numerically singular"
        ) from exc
    Phi = _lower_toeplitz(phib, n)
    Sigma_etaY = theta.sigma_eta2 * np.kron(Phi.T, theta.beta)
    return ObsCovariance(Sigma_Y=Sigma_Y, chol=chol, Sigma_etaY=Sigma_etaY, n=n, p=p)


def _pivot_from_error(exc: Exception) -> str:
    msg = str(exc)
    for token in msg.split():
        if token.rstrip("-thsndr").isdigit():
            return token
    return "?"


# ---------------------------------------------------------------------------
# Univariate GLS reduction (default engine)
# ---------------------------------------------------------------------------


class GlsReduction:
    """Exact univariate reduction of the conditioning problem.

    Conditioning any Gaussian functional of (x, eta) on Y_t equals
    conditioning on the scalar series ybar_t = r' y_t with
    r = Sigma^{-1} beta / c, c = beta' Sigma^{-1} beta, because the
    orthogonal-complement combinations of y carry idiosyncratic noise only.
    All per-t conditional means come from one Cholesky factorization of
    G = sigma_eta2 I + Pi Pi' / c.
    """

    def __init__(self, theta: ThetaParams, n: int):
        check_valid(theta)
        self.theta = theta
        self.n = n
        self.c = float(theta.beta @ (theta.beta / theta.sigma_diag))
        self.r = (theta.beta / theta.sigma_diag) / self.c
        self.phib = phi_coeffs(theta.b, n + 1)
        self.pib = pi_coeffs(theta.b, n)
        G = (1.0 / self.c) * _toeplitz_gram(self.pib, n)
        G[np.diag_indices(n)] += theta.sigma_eta2
        try:
            self.L = sla.cholesky(G, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise FilterError(
                f"whitened innovation Gram factorization failed: {exc}"
            ) from exc
        dL = np.diagonal(self.L)
        self.var_z = dL**2
        # Var(x_t | F_{t-1}); non-negative up to rounding.
        self.omega = np.maximum(self.var_z - 1.0 / self.c, 0.0)
        self._w: np.ndarray | None = None
        self._HC: np.ndarray | None = None

    # -- data-dependent pieces ------------------------------------------------

    def innovations(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Scalar prediction errors z_t of ybar and the GLS series ybar."""
        ybar = y @ self.r
        zeta = np.convolve(self.pib, ybar)[: self.n]
        w = sla.solve_triangular(self.L, zeta, lower=True, check_finite=False)
        self._w = w
        self._HC = None
        z = np.diagonal(self.L) * w
        return z, ybar

    def eta_cummeans(self) -> np.ndarray:
        """HC[t-1, j-1] = E(eta_j | F_t) for j <= t, as one n x n array."""
        if self._w is None:
            raise RuntimeError("call innovations() first")
        if self._HC is None:
            Cinv = sla.solve_triangular(
                self.L, np.eye(self.n), lower=True, check_finite=False
            )
            self._HC = self.theta.sigma_eta2 * np.cumsum(
                Cinv * self._w[:, None], axis=0
            )
        return self._HC

    def contract(self, kernel: np.ndarray, same_time: bool) -> np.ndarray:
        """out[t] = sum_j kernel[t-j] E(eta_j | F_s), s = t (same_time) or t-1.

        ``kernel`` is indexed by the lag r = t - j; kernel[0] is only used
        in the same_time case (j = t).  O(n^2).
        """
        HC = self.eta_cummeans()
        n = self.n
        out = np.zeros(n)
        if same_time:
            for t in range(1, n + 1):
                out[t - 1] = np.dot(kernel[t - 1 :: -1], HC[t - 1, :t])
        else:
            for t in range(2, n + 1):
                out[t - 1] = np.dot(kernel[t - 1 : 0 : -1], HC[t - 2, : t - 1])
        return out


# ---------------------------------------------------------------------------
# Truncation correction (Theorem-2 weights)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrectionSeries:
    """Approximation errors eps_t: E of the truncation remainder given F_{t-1}.

    eps_t is a deterministic function of y_1..y_{t-1} only, has mean zero,
    and vanishes identically when nothing was truncated (m >= n-1, or b = 1
    in truncation mode where all mean-reverting coefficients are zero).
    """

    eps: np.ndarray
    mode: str  # "truncation" | "arma"
    m: int


def _tail_weight_kernel(
    theta: ThetaParams, n: int, m: int, mode: str, psi: np.ndarray | None
) -> np.ndarray:
    """Kernel W indexed by lag r = t - j >= 1 weighting E(eta_j | F_{t-1}).

    Truncation mode: phi_r(d) for r > m (zero up to m); ARMA mode:
    phi_r(d) - psi_r from r = 1.  On the unit-root branch the weights are
    the running sums of these, which is the cumulated double-sum form.
    """
    ind, d = theta.split()
    phid = phi_coeffs(d, n + 1)
    w = phid[1 : n + 1].copy()
    if mode == "truncation":
        w[: min(m, n)] = 0.0
    elif mode == "arma":
        if psi is None:
            raise ValueError("ARMA mode needs the Wold coefficients psi")
        psi = np.asarray(psi, dtype=float)
        if len(psi) < n + 1:
            raise ValueError(f"need psi up to lag {n}, got {len(psi)}")
        w -= psi[1 : n + 1]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if ind:
        w = np.cumsum(w)
    # prepend unused lag-0 slot so kernel[r] is the weight at lag r
    return np.concatenate(([0.0], w))


def _state_mean_kernel(
    theta: ThetaParams, n: int, m: int, mode: str, psi: np.ndarray | None
) -> np.ndarray:
    """Kernel giving E(xtilde_t | F_{t-1}) = sum_j kernel[t-j] E(eta_j | F_{t-1}).

    Complementary to the tail kernel: the two sum to the full integration
    coefficients phi(b), which is the direct formula for E(x_t | F_{t-1}).
    """
    ind, d = theta.split()
    if mode == "truncation":
        phid = phi_coeffs(d, n + 1)
        w = phid[1 : n + 1].copy()
        w[min(m, n) :] = 0.0
    else:
        psi = np.asarray(psi, dtype=float)
        w = psi[1 : n + 1].copy()
    if ind:
        base = np.concatenate(([1.0], w))  # include phi_0 in the running sum
        return np.cumsum(base)
    return np.concatenate(([0.0], w))


def approximation_error(
    theta: ThetaParams,
    cov: ObsCovariance | GlsReduction,
    y: np.ndarray,
    m: int,
    mode: str = "truncation",
    psi: np.ndarray | None = None,
) -> CorrectionSeries:
    """Conditional expectation of the truncation remainder, per period.

    Accepts either the stacked :class:`ObsCovariance` (reference path: the
    conditional eta-means come from the nested Cholesky blocks of Sigma_Y)
    or a :class:`GlsReduction` (default fast path).  Both produce identical
    eps to machine precision.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, p = y.shape
    check_valid(theta, p)
    if m >= n:
        warnings.warn(
            f"truncation lag m={m} >= n={n}: nothing truncated, eps is zero",
            stacklevel=2,
        )
        return CorrectionSeries(eps=np.zeros(n), mode=mode, m=m)
    W = _tail_weight_kernel(theta, n, m, mode, psi)
    if isinstance(cov, GlsReduction):
        if cov.n != n:
            raise ValueError("reduction was built for a different sample size")
        cov.innovations(y)
        eps = cov.contract(W, same_time=False)
    else:
        if cov.n != n or cov.p != p:
            raise ValueError("covariance was built for a different shape")
        # E(eta_{1:t} | Y_t) = Sigma_etaY,t Sigma_Yt^{-1} Y_t for all t via
        # one forward solve against the full factor, then cumulative sums
        # of the per-block contributions.
        z = sla.solve_triangular(cov.chol, y.ravel(), lower=True, check_finite=False)
        C = sla.solve_triangular(
            cov.chol, cov.Sigma_etaY.T, lower=True, check_finite=False
        )
        M = (C * z[:, None]).reshape(n, p, n).sum(axis=1)
        HC = np.cumsum(M, axis=0)  # HC[t-1, j-1] = E(eta_j | F_t)
        eps = np.zeros(n)
        for t in range(2, n + 1):
            eps[t - 1] = np.dot(W[t - 1 : 0 : -1], HC[t - 2, : t - 1])
    return CorrectionSeries(eps=eps, mode=mode, m=m)


# ---------------------------------------------------------------------------
# The fast filter
# ---------------------------------------------------------------------------


def build_truncated_system(
    theta: ThetaParams, m: int, ar: np.ndarray | None = None, ma: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(T, R, Z) of the (m+1)-state truncated or ARMA companion system.

    Truncation mode (ar/ma None): T is the leading (m+1) block of the exact
    transition (indicator top-left, superdiagonal ones) and R stacks
    (1, phi_1(d), ..., phi_m(d)).  ARMA mode: companion form of the fitted
    AR polynomial times (1-L)^ind, with the MA coefficients loading R.
    """
    ind, d = theta.split()
    s = m + 1
    if ar is None:
        abar = np.zeros(s)
        abar[0] = ind
        cvec = phi_coeffs(d, s)[1:]
    else:
        ar = np.asarray(ar, dtype=float)
        ma = np.asarray(ma, dtype=float)
        if len(ar) != m or len(ma) != m:
            raise ValueError("AR/MA coefficient lengths must equal m")
        abar = np.zeros(s)
        if ind:
            abar[0] = ar[0] + 1.0 if m >= 1 else 1.0
            for i in range(1, m):
                abar[i] = ar[i] - ar[i - 1]
            if m >= 1:
                abar[m] = -ar[m - 1]
        else:
            abar[:m] = ar
        cvec = ma.copy()
    T = np.zeros((s, s))
    T[:, 0] = abar
    T[np.arange(s - 1), np.arange(1, s)] = 1.0
    R = np.concatenate(([1.0], cvec))
    Z = np.zeros((theta.p, s))
    Z[:, 0] = theta.beta
    return T, R, Z


def kalman_fast(
    y: np.ndarray,
    theta: ThetaParams,
    m: int = 4,
    mode: str = "truncation",
    arma_table=None,
    cov: ObsCovariance | None = None,
) -> FilterOutput:
    """Truncation-corrected filter; prediction errors equal the exact filter's.

    Decomposes the exact trend prediction as x_{t|t-1} = xtilde_{t|t-1} +
    eps_t: the truncated-state conditional mean plus the correction, both
    evaluated from the conditional expectations of the shocks given one
    covariance factorization.  The corrected observations ydotdot = y - beta
    eps enter the prediction errors v_t = ydotdot_t - beta xtilde_{t|t-1}.

    The returned F_t sequence and F_steady are the exact model's prediction
    error covariances (available for free from the factorization), so the
    log-likelihood matches ``kalman_exact`` at the same theta.

    Parameters
    ----------
    m : int
        Truncation lag / ARMA order.  m >= n-1 reduces to the exact
        representation (eps = 0).
    mode : {"truncation", "arma"}
        Tail weights phi_i(d) beyond m, or phi_i(d) - psi_i with the Wold
        coefficients of the fitted ARMA approximation.
    arma_table : ArmaApproxTable, required in ARMA mode
        Source of the (ar, ma, psi) at this theta.b.
    cov : ObsCovariance, optional
        Use the stacked reference machinery instead of the univariate
        reduction (slower; intended for cross-checks).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, p = y.shape
    check_valid(theta, p)
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    if m < 0:
        raise ValueError(f"truncation lag must be >= 0, got {m}")
    psi = None
    ar = ma = None
    if mode == "arma":
        if arma_table is None:
            raise ValueError("ARMA mode requires an approximation table")
        from .arma_map import eval_table

        ar, ma, psi = eval_table(arma_table, theta.b, n_psi=n + 1)
        if arma_table.m != m:
            raise ValueError(
                f"table was built for m={arma_table.m}, filter called with m={m}"
            )
    elif mode != "truncation":
        raise ValueError(f"unknown mode {mode!r}")

    red = GlsReduction(theta, n)
    z, ybar = red.innovations(y)

    m_eff = min(m, n)
    if m >= n:
        corr = approximation_error(theta, red, y, m, mode, psi)  # warns, zero
    else:
        corr = approximation_error(theta, cov if cov is not None else red, y, m, mode, psi)
    K = _state_mean_kernel(theta, n, m_eff, mode, psi)
    x_tilde_pred = red.contract(K, same_time=False)
    x_pred = x_tilde_pred + corr.eps
    y_corr = y - np.outer(corr.eps, theta.beta)
    v = y_corr - np.outer(x_tilde_pred, theta.beta)

    omega = red.omega
    F_all = omega[:, None, None] * np.outer(theta.beta, theta.beta)[None, :, :]
    F_all += np.diag(theta.sigma_diag)[None, :, :]
    F_steady = F_all[-1]
    x_filt = red.contract(red.phib, same_time=True)
    loglik = gaussian_loglik(v, F_steady)
    return FilterOutput(
        v=v,
        F=F_all,
        x_pred=x_pred,
        x_filt=x_filt,
        P11=omega,
        loglik=loglik,
        F_steady=F_steady,
        x_filt_var=None,
    )


def innovations_loglik(y: np.ndarray, theta: ThetaParams) -> float:
    """Likelihood-only fast path: one Cholesky, no correction bookkeeping.

    Identical value to ``kalman_fast(...).loglik`` (same v, same F_steady,
    via the scalar-innovations identity v_t = (I - beta r') y_t + beta z_t);
    used where only the objective is needed, e.g. inside optimizers.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, p = y.shape
    red = GlsReduction(theta, n)
    z, ybar = red.innovations(y)
    v = y - np.outer(ybar - z, theta.beta)
    F_steady = red.omega[-1] * np.outer(theta.beta, theta.beta) + np.diag(
        theta.sigma_diag
    )
    return gaussian_loglik(v, F_steady)


# ---------------------------------------------------------------------------
# Component extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Components:
    trend: np.ndarray
    trend_band: np.ndarray  # two filtered standard deviations
    idio: np.ndarray
    eta_hat: np.ndarray


def extract_components(
    y: np.ndarray, theta: ThetaParams, filter_out: FilterOutput
) -> Components:
    """Filtered trend, a two-standard-deviation band, idiosyncratic parts,
    and the recovered fundamental shocks eta_hat = Delta_+^b x_filt.

    The reconstruction y = beta * trend + idio holds exactly by definition.
    When the filter did not carry filtered state variances (the fast filter
    defers them), they are computed here from the covariance reduction.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, p = y.shape
    check_valid(theta, p)
    var = filter_out.x_filt_var
    if var is None:
        red = GlsReduction(theta, n)
        phib = red.phib[:n]
        gamma_diag = theta.sigma_eta2 * np.cumsum(phib**2)
        Cinv = sla.solve_triangular(red.L, np.eye(n), lower=True, check_finite=False)
        Q = theta.sigma_eta2 * (Cinv @ _lower_toeplitz(phib, n).T)
        var = gamma_diag - np.cumsum(Q**2, axis=0).diagonal()
        var = np.maximum(var, 0.0)
    trend = filter_out.x_filt
    band = 2.0 * np.sqrt(var)
    idio = y - np.outer(trend, theta.beta)
    eta_hat = apply_frac_op(trend, pi_coeffs(theta.b, n))
    return Components(trend=trend, trend_band=band, idio=idio, eta_hat=eta_hat)
