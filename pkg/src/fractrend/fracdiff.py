"""Truncated (type II) fractional difference and integration operators.

The operator (1-L)^b is expanded as sum_j pi_j(b) L^j with the coefficients
computed by the multiplicative recursion

    pi_0(b) = 1,    pi_j(b) = ((j - b - 1) / j) * pi_{j-1}(b),

which is exact in floating point up to rounding and does not overflow for
large j, unlike ratios of Gamma functions.  The inverse operator (1-L)^{-b}
has coefficients phi_j(b) = pi_j(-b).  All operators act with zero
pre-sample values (type II convention), so applying an operator to a series
of length n is a truncated convolution with the first n coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FracCoeffs",
    "frac_diff_coeffs",
    "frac_int_coeffs",
    "pi_coeffs",
    "phi_coeffs",
    "apply_frac_op",
    "split_order",
]

#: b must lie in [0, B_MAX) for model orders; the coefficient recursions
#: themselves are valid for any finite b.
B_MAX = 1.5


def pi_coeffs(b: float, k: int) -> np.ndarray:
    """First k coefficients of the fractional difference operator (1-L)^b.

    Parameters
    ----------
    b : float
        Differencing order, any finite real.
    k : int
        Number of coefficients, k >= 1.

    Returns
    -------
    ndarray of shape (k,) with pi_0(b), ..., pi_{k-1}(b).
    """
    if not np.isfinite(b):
        raise ValueError(f"fractional order must be finite, got {b!r}")
    if k < 1:
        raise ValueError(f"coefficient count must be >= 1, got {k}")
    j = np.arange(1, k, dtype=float)
    # pi_j / pi_{j-1} = (j - b - 1) / j; cumulative product gives pi_j.
    out = np.empty(k)
    out[0] = 1.0
    if k > 1:
        out[1:] = np.cumprod((j - b - 1.0) / j)
    return out


def phi_coeffs(b: float, k: int) -> np.ndarray:
    """First k coefficients of the fractional integration operator (1-L)^{-b}."""
    return pi_coeffs(-b, k)


@dataclass(frozen=True)
class FracCoeffs:
    """Truncated coefficient sequence of a fractional operator.

    ``coeffs[j]`` is pi_j(b) for kind ``"difference"`` and phi_j(b) for kind
    ``"integration"``.  ``coeffs[0]`` is exactly 1.
    """

    b: float
    kind: str  # "difference" | "integration"
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in ("difference", "integration"):
            raise ValueError(f"unknown operator kind {self.kind!r}")

    def extended(self, k: int) -> np.ndarray:
        """Coefficients extended (or truncated) to length k."""
        if len(self.coeffs) >= k:
            return self.coeffs[:k]
        order = self.b if self.kind == "difference" else -self.b
        return pi_coeffs(order, k)


def frac_diff_coeffs(b: float, k: int) -> FracCoeffs:
    """Coefficients of the truncated fractional difference operator."""
    return FracCoeffs(b=b, kind="difference", coeffs=pi_coeffs(b, k))


def frac_int_coeffs(b: float, k: int) -> FracCoeffs:
    """Coefficients of the truncated fractional integration operator."""
    return FracCoeffs(b=b, kind="integration", coeffs=phi_coeffs(b, k))


def apply_frac_op(series: np.ndarray, coeffs: FracCoeffs | np.ndarray) -> np.ndarray:
    """Apply a truncated fractional operator to a series.

    out[t] = sum_{j=0}^{t} coeffs[j] * series[t-j], with zero pre-sample
    values.  ``series`` may be 1-d (length n) or 2-d (n x p, column-wise).
    Coefficient sequences shorter than n are extended internally when a
    :class:`FracCoeffs` is passed; raw arrays must have length >= n.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if isinstance(coeffs, FracCoeffs):
        w = coeffs.extended(n)
    else:
        w = np.asarray(coeffs, dtype=float)
        if len(w) < n:
            raise ValueError(f"need {n} coefficients, got {len(w)}")
        w = w[:n]
    if x.ndim == 1:
        return np.convolve(w, x)[:n]
    out = np.empty_like(x)
    for col in range(x.shape[1]):
        out[:, col] = np.convolve(w, x[:, col])[:n]
    return out


def split_order(b: float) -> tuple[int, float]:
    """Split an order b in [0, 1.5) into a unit-root indicator and d = b - ind.

    The indicator is 1 for b >= 1 (unit-root branch) and 0 otherwise, so the
    mean-reverting fraction d always lies in [0, 1).
    """
    if not (0.0 <= b < B_MAX):
        raise ValueError(f"order must lie in [0, {B_MAX}), got {b!r}")
    ind = 1 if b >= 1.0 else 0
    return ind, b - ind
