"""Model parameters, identification constraints, and DGP simulation.

The observation model is

    y_t = beta * x_t + u_t,        u_t ~ NID(0, Sigma), Sigma diagonal,
    x_t = ind * x_{t-1} + sum_{j=0}^{t-1} phi_j(d) eta_{t-j},

with a scalar latent trend x_t integrated of order b = ind + d, driven by
eta_t ~ NID(0, sigma_eta2).  Two mutually exclusive identification schemes
are supported: fixing Var(eta_t) = 1 with the first loading restricted to be
positive, or freeing sigma_eta2 with the first loading fixed at one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fracdiff import B_MAX, phi_coeffs, split_order

__all__ = ["ThetaParams", "SimOutput", "validate", "simulate"]

NORMALIZATIONS = ("first_loading_positive", "first_loading_unity")


@dataclass(frozen=True)
class ThetaParams:
    """Full parameter vector of the common fractional trend model.

    Attributes
    ----------
    beta : ndarray, shape (p,)
        Factor loadings.
    sigma_diag : ndarray, shape (p,)
        Diagonal of the idiosyncratic covariance Sigma, all > 0.
    b : float
        Integration order of the trend, in [0, 1.5).
    sigma_eta2 : float
        Variance of the trend shock; 1 under ``first_loading_positive``.
    normalization : str
        Identification scheme, one of ``first_loading_positive`` or
        ``first_loading_unity``.
    """

    beta: np.ndarray
    sigma_diag: np.ndarray
    b: float
    sigma_eta2: float = 1.0
    normalization: str = "first_loading_positive"

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(
            self, "sigma_diag", np.atleast_1d(np.asarray(self.sigma_diag, dtype=float))
        )

    @property
    def p(self) -> int:
        return len(self.beta)

    @property
    def k(self) -> int:
        """Number of free parameters (p loadings-or-equivalent + p variances + order)."""
        return 2 * self.p + 1

    def split(self) -> tuple[int, float]:
        """Unit-root indicator and mean-reverting fraction d = b - ind."""
        return split_order(self.b)

    def with_(self, **kwargs) -> "ThetaParams":
        return replace(self, **kwargs)


def validate(theta: ThetaParams, p: int | None = None) -> list[str]:
    """Collect every violated invariant of a parameter vector.

    Returns an empty list when theta is admissible.  Violations are data,
    not exceptions: callers decide whether to raise.
    """
    issues: list[str] = []
    if p is not None and theta.p != p:
        issues.append(f"beta has length {theta.p}, expected {p}")
    if len(theta.sigma_diag) != theta.p:
        issues.append(
            f"sigma_diag has length {len(theta.sigma_diag)}, expected {theta.p}"
        )
    if not np.all(np.isfinite(theta.beta)):
        issues.append("beta contains non-finite entries")
    if not (np.all(np.isfinite(theta.sigma_diag)) and np.all(theta.sigma_diag > 0)):
        issues.append("Sigma not full rank (diagonal entries must be strictly positive)")
    if not (np.isfinite(theta.b) and 0.0 <= theta.b < B_MAX):
        issues.append(f"b outside [0, {B_MAX}): {theta.b!r}")
    if not (np.isfinite(theta.sigma_eta2) and theta.sigma_eta2 > 0):
        issues.append(f"sigma_eta2 must be strictly positive, got {theta.sigma_eta2!r}")
    if theta.normalization not in NORMALIZATIONS:
        issues.append(f"unknown normalization {theta.normalization!r}")
    elif theta.normalization == "first_loading_positive":
        if theta.p and not theta.beta[0] > 0:
            issues.append("first loading must be strictly positive")
        if abs(theta.sigma_eta2 - 1.0) > 1e-12:
            issues.append("sigma_eta2 must equal 1 under first_loading_positive")
    elif theta.normalization == "first_loading_unity":
        if theta.p and theta.beta[0] != 1.0:
            issues.append("first loading must equal 1 under first_loading_unity")
    return issues


def check_valid(theta: ThetaParams, p: int | None = None) -> None:
    issues = validate(theta, p)
    if issues:
        raise ValueError("invalid parameters: " + "; ".join(issues))


@dataclass(frozen=True)
class SimOutput:
    """One simulated draw of the data-generating process."""

    y: np.ndarray  # n x p observables
    x: np.ndarray  # n latent trend
    eta: np.ndarray  # n trend shocks
    u: np.ndarray  # n x p idiosyncratic shocks
    seed: int

    @property
    def n(self) -> int:
        return len(self.x)


def simulate(theta: ThetaParams, n: int, seed: int = 0) -> SimOutput:
    """Simulate the exact DGP for n periods.

    The trend is built by direct convolution of the integration coefficients
    phi_j(d) with the shocks, cumulated once when b >= 1.  The simulator is
    the exact model; any truncation or ARMA approximation lives only in the
    filters.  Deterministic given (theta, n, seed).
    """
    check_valid(theta)
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal(n) * np.sqrt(theta.sigma_eta2)
    u = rng.standard_normal((n, theta.p)) * np.sqrt(theta.sigma_diag)
    ind, d = theta.split()
    x = np.convolve(phi_coeffs(d, n), eta)[:n]
    if ind:
        x = np.cumsum(x)
    y = np.outer(x, theta.beta) + u
    return SimOutput(y=y, x=x, eta=eta, u=u, seed=seed)
