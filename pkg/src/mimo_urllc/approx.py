"""Local bounds used to turn the rate-maximization into a sequence of GPs.

* ``G(x) = sqrt(1 - 1/(1+x)^2)`` is majorized by ``rho ln x + eta`` for
  ``x >= (sqrt(17) - 3)/4`` (tangent at the anchor).
* ``ln(1 + x)`` is minorized by ``rho_hat ln x + eta_hat`` for all ``x > 0``.
* ``prod_i (1 + x_i)`` is minorized by the monomial ``lambda prod_i x_i^tau_i``.

Combining the first two gives the log-linear surrogate objective whose weights
are returned by :func:`surrogate_weights`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fbl import LN2

log = logging.getLogger(__name__)

MAJORANT_MIN_SINR = (math.sqrt(17.0) - 3.0) / 4.0


def G(x):
    """Square root of the channel dispersion, seen as a function of the SINR."""
    x = np.asarray(x, dtype=float)
    val = np.sqrt(1.0 - 1.0 / (1.0 + x) ** 2)
    return float(val) if val.ndim == 0 else val


def G_prime(x):
    x = np.asarray(x, dtype=float)
    val = 1.0 / ((1.0 + x) ** 2 * np.sqrt(x * x + 2.0 * x))
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class LogBoundCoeffs:
    """``rho * ln(x) + eta``, expanded at ``anchor``."""

    rho: np.ndarray
    eta: np.ndarray
    anchor: np.ndarray

    def __call__(self, x):
        return self.rho * np.log(x) + self.eta


def dispersion_log_majorant(anchor) -> LogBoundCoeffs:
    """Log-function majorant of ``G`` tangent at ``anchor`` (anchor >= 0.2808)."""
    xt = np.asarray(anchor, dtype=float)
    if np.any(xt < MAJORANT_MIN_SINR):
        raise ValueError(
            f"anchor below {MAJORANT_MIN_SINR:.6f}: the log majorant of G is not valid there")
    root = np.sqrt(xt * xt + 2.0 * xt)
    rho = xt / root - xt * root / (1.0 + xt) ** 2
    eta = G(xt) - rho * np.log(xt)
    return LogBoundCoeffs(rho=rho, eta=eta, anchor=xt)


def log1p_log_minorant(anchor) -> LogBoundCoeffs:
    """Log-function minorant of ``ln(1 + x)`` tangent at ``anchor`` > 0."""
    xt = np.asarray(anchor, dtype=float)
    if np.any(xt <= 0):
        raise ValueError("anchor must be positive")
    rho = xt / (1.0 + xt)
    eta = np.log1p(xt) - rho * np.log(xt)
    return LogBoundCoeffs(rho=rho, eta=eta, anchor=xt)


def linear_majorant(anchor):
    """First-order Taylor majorant of the concave ``G``; returns a callable."""
    xt = float(anchor)
    g0, d0 = G(xt), G_prime(xt)
    return lambda x: g0 + d0 * (np.asarray(x, dtype=float) - xt)


@dataclass(frozen=True)
class MonomialBoundCoeffs:
    """``lambda * prod x_i^tau_i``, the monomial minorant of ``prod (1 + x_i)``."""

    lam: float
    tau: np.ndarray
    anchor: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.lam * np.prod(x ** self.tau, axis=-1)

    @property
    def log_lam(self) -> float:
        return float(np.sum(np.log1p(self.anchor)) - np.sum(self.tau * np.log(self.anchor)))


def product_monomial_minorant(anchor_vec) -> MonomialBoundCoeffs:
    """Best local monomial approximation of ``prod_i (1 + x_i)`` at ``anchor_vec``.

    ``tau_i = x_i / (1 + x_i)`` and ``lambda = prod (1 + x_i) / prod x_i^tau_i``.
    """
    xb = np.atleast_1d(np.asarray(anchor_vec, dtype=float))
    if np.any(xb <= 0):
        raise ValueError("anchors must be strictly positive")
    tau = xb / (1.0 + xb)
    log_lam = np.sum(np.log1p(xb)) - np.sum(tau * np.log(xb))
    return MonomialBoundCoeffs(lam=float(np.exp(log_lam)), tau=tau, anchor=xb)


def product_one_plus(x):
    x = np.asarray(x, dtype=float)
    return np.prod(1.0 + x, axis=-1)


@dataclass(frozen=True)
class SurrogateWeights:
    """Weights of ``sum_k w_hat_k ln(chi_k) + constant``."""

    w_hat: np.ndarray
    constant: float
    w_tilde: np.ndarray
    dispersion_bound: LogBoundCoeffs | None
    log1p_bound: LogBoundCoeffs

    def value(self, chi) -> float:
        return float(np.sum(self.w_hat * np.log(chi)) + self.constant)


def surrogate_weights(w, a, chi_anchor, beta: float) -> SurrogateWeights:
    """Per-device weights of the log-linear lower bound of the objective.

    The objective is ``sum_k w~_k [ln(1 + chi_k) - a_k G(chi_k)]`` with
    ``w~_k = (1 - beta) w_k / ln 2``; it equals the weighted sum of rate
    bounds in bit/s/Hz when ``chi`` is the SINR bound.
    """
    w = np.asarray(w, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), w.shape)
    chi = np.asarray(chi_anchor, dtype=float)
    w_tilde = (1.0 - beta) * w / LN2
    l4 = log1p_log_minorant(chi)
    rho3 = np.zeros_like(chi)
    eta3 = np.zeros_like(chi)
    l3 = None
    penalized = a > 0
    if np.any(penalized):
        # the G majorant only enters where the dispersion penalty is on
        l3 = dispersion_log_majorant(chi[penalized])
        rho3[penalized] = l3.rho
        eta3[penalized] = l3.eta
    w_hat = w_tilde * l4.rho - a * w_tilde * rho3
    const = float(np.sum(w_tilde * (l4.eta - a * eta3)))
    if np.any(w_hat < 0):
        log.warning("non-positive surrogate weight(s) %s; the GP stays convex",
                    np.flatnonzero(w_hat < 0).tolist())
    return SurrogateWeights(w_hat=w_hat, constant=const, w_tilde=w_tilde, dispersion_bound=l3, log1p_bound=l4)


def true_objective(w, a, chi, beta: float) -> float:
    """``sum_k w~_k [ln(1 + chi_k) - a_k G(chi_k)]``."""
    w_tilde = (1.0 - beta) * np.asarray(w, dtype=float) / LN2
    return float(np.sum(w_tilde * (np.log1p(chi) - np.asarray(a) * G(chi))))
