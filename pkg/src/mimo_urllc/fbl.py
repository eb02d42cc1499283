"""Finite-blocklength rate mathematics.

The normal-approximation rate is written through

    f(x; a) = ln(1 + 1/x) - a * sqrt((2x + 1) / (x + 1)^2),   x = 1/SINR,

with ``a = Qinv(eps) / sqrt(L (1 - beta))``; then ``R = (1 - beta)/ln2 * f(1/SINR; a)``.
``f`` is non-negative exactly on ``0 < x <= g^{-1}(a)`` where
``g(x) = (x + 1) ln(1 + 1/x) / sqrt(2x + 1)`` is strictly decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

# Acklam's rational approximation of the standard normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def q_func(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _acklam_lower(p: float) -> float:
    """Quantile Phi^{-1}(p) for 0 < p <= 0.5 (rough, ~1e-9 relative)."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def q_inv(epsilon: float) -> float:
    """Inverse Gaussian tail: x such that Q(x) = epsilon, for 0 < epsilon < 0.5.

    Rational starting value refined by Halley steps on ``Q(x) - epsilon``
    (erfc is accurate in the tail, so the residual is meaningful down to
    ~1e-300).
    """
    eps = float(epsilon)
    if not 0.0 < eps < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    x = -_acklam_lower(eps)
    for _ in range(2):
        e = q_func(x) - eps
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        # Newton on Q with Halley correction; Q' = -pdf, Q'' = x pdf
        u = e / pdf
        x = x + u / (1.0 - 0.5 * x * u)
    return x


def a_coeff(epsilon, L: int, K: int):
    """Penalty coefficient ``Qinv(eps) / sqrt(L (1 - K/L)) = Qinv(eps)/sqrt(L - K)``."""
    if not (K >= 1 and L > K):
        raise ValueError(f"need L > K >= 1, got L={L}, K={K}")
    eps = np.asarray(epsilon, dtype=float)
    qi = np.vectorize(q_inv, otypes=[float])(eps)
    beta = K / L
    a = qi / math.sqrt(L * (1.0 - beta))
    return float(a) if a.ndim == 0 else a


def g_eval(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("g is defined for x > 0")
    val = (x + 1.0) * np.log1p(1.0 / x) / np.sqrt(2.0 * x + 1.0)
    return float(val) if val.ndim == 0 else val


def f_eval(x, a):
    x = np.asarray(x, dtype=float)
    val = np.log1p(1.0 / x) - a * np.sqrt(2.0 * x + 1.0) / (x + 1.0)
    return float(val) if val.ndim == 0 else val


def _bisect_log(fun, lo: float, hi: float, rtol: float) -> float:
    """Root of a decreasing ``fun`` on [lo, hi] (positive reals), bisecting in log scale."""
    flo, fhi = fun(lo), fun(hi)
    if not (flo >= 0.0 >= fhi):
        raise ArithmeticError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if fun(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _bracket(fun, start: float = 1.0) -> tuple[float, float]:
    lo = hi = start
    while fun(lo) < 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ArithmeticError("lower bracket not found")
    while fun(hi) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("upper bracket not found")
    return lo, hi


def g_inv(a: float, rtol: float = 1e-12) -> float:
    """Unique x > 0 with g(x) = a; infinity for a == 0."""
    a = float(a)
    if a < 0:
        raise ValueError("a must be non-negative")
    if a == 0.0:
        return math.inf

    def fun(x):
        return (x + 1.0) * math.log1p(1.0 / x) / math.sqrt(2.0 * x + 1.0) - a

    # g(x) ~ 1/sqrt(2x) for large x, so the root is near 1/(2a^2)
    guess = 0.5 / (a * a) if a > 1e-150 else math.inf
    if guess > 1e300:
        return math.inf
    lo, hi = _bracket(fun, max(1.0, guess))
    return _bisect_log(fun, lo, hi, rtol)


def f_inv(c: float, a: float, rtol: float = 1e-12) -> float:
    """Unique x in (0, g^{-1}(a)] with f(x; a) = c, for c >= 0."""
    c, a = float(c), float(a)
    if c < 0:
        raise ValueError("f_inv needs c >= 0")
    if a == 0.0:
        return math.inf if c == 0.0 else 1.0 / math.expm1(c)
    x_max = g_inv(a)
    if c == 0.0:
        return x_max

    def fun(x):
        return math.log1p(1.0 / x) - a * math.sqrt(2.0 * x + 1.0) / (x + 1.0) - c

    if math.isinf(x_max):
        # penalty term vanishes in double precision
        return 1.0 / math.expm1(c)
    if fun(x_max) >= 0.0:
        return x_max  # root within the tolerance of x_max
    lo = min(x_max, 1.0 / math.expm1(c))  # f <= ln(1+1/x) puts the root below this
    while fun(lo) < 0.0:
        lo *= 0.5
    return _bisect_log(fun, lo, x_max, rtol)


def sinr_threshold(rate_req, beta: float, a) -> np.ndarray:
    """Minimum SINR meeting ``rate_req`` (bit/s/Hz): ``1 / f^{-1}(R ln2 / (1 - beta))``."""
    rate_req, a = np.broadcast_arrays(np.asarray(rate_req, float), np.asarray(a, float))
    out = np.empty(rate_req.shape)
    for idx in np.ndindex(rate_req.shape):
        x = f_inv(rate_req[idx] * LN2 / (1.0 - beta), a[idx])
        out[idx] = 0.0 if math.isinf(x) else 1.0 / x
    return out


def dispersion(gamma):
    gamma = np.asarray(gamma, dtype=float)
    return 1.0 - 1.0 / (1.0 + gamma) ** 2


def rate_fbl(gamma, beta: float, L: int, epsilon):
    """Normal-approximation rate in bit/s/Hz for SINR ``gamma`` (not clamped)."""
    gamma = np.asarray(gamma, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    qi = np.vectorize(q_inv, otypes=[float])(eps)
    shannon = (1.0 - beta) * np.log2(1.0 + gamma)
    penalty = np.sqrt((1.0 - beta) * dispersion(gamma) / L) * qi / LN2
    r = shannon - penalty
    return float(r) if r.ndim == 0 else r


def rate_from_a(gamma, beta: float, a):
    """Same rate expressed through the penalty coefficient ``a`` (a = 0: Shannon)."""
    gamma = np.asarray(gamma, dtype=float)
    r = (1.0 - beta) / LN2 * (np.log1p(gamma) - np.asarray(a) * np.sqrt(dispersion(gamma)))
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class FblParams:
    """Finite-blocklength constants of one device."""

    L: int
    beta: float
    epsilon: float
    a: float
    x_max: float

    @classmethod
    def build(cls, epsilon: float, L: int, K: int) -> "FblParams":
        a = a_coeff(epsilon, L, K)
        return cls(L=L, beta=K / L, epsilon=float(epsilon), a=a, x_max=g_inv(a))

    @property
    def min_sinr(self) -> float:
        """Smallest SINR with non-negative rate."""
        return 1.0 / self.x_max


# --- closed-form SINR lower bounds ------------------------------------------

def sinr_lb_mrc(p_data, stats, M: int) -> np.ndarray:
    """Per-device SINR lower bound of an MRC receiver with estimated CSI.

    ``p_d,k (M-1) sigma_k / (sum_{i!=k} p_d,i sigma_i + sum_i p_d,i delta_i + 1)``
    """
    if M < 2:
        raise ValueError("MRC bound needs M >= 2")
    p = np.asarray(p_data, dtype=float)
    sigma, delta = np.asarray(stats.sigma), np.asarray(stats.delta)
    ps = p * sigma
    denom = ps.sum() - ps + (p * delta).sum() + 1.0
    return (M - 1) * ps / denom


def sinr_lb_zf(p_data, stats, M: int, K: int | None = None) -> np.ndarray:
    """Per-device SINR lower bound of a ZF receiver: ``(M-K) sigma_k p_d,k / (sum_i p_d,i delta_i + 1)``."""
    p = np.asarray(p_data, dtype=float)
    K = p.size if K is None else K
    if M <= K:
        raise ValueError("ZF bound needs M > K")
    sigma, delta = np.asarray(stats.sigma), np.asarray(stats.delta)
    return (M - K) * sigma * p / ((p * delta).sum() + 1.0)


def rate_lb(gamma_hat, beta: float, L: int, epsilon):
    """Rate lower bound: the finite-blocklength rate evaluated at the SINR bound."""
    return rate_fbl(gamma_hat, beta, L, epsilon)


@dataclass(frozen=True)
class SinrLbReport:
    gamma_hat: np.ndarray
    rate_lb: np.ndarray
    feasible: np.ndarray
