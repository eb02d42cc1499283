"""MMSE channel-estimation statistics and Rayleigh channel simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EstimationStats:
    """Per-device variances of the channel estimate and of its error."""

    sigma: np.ndarray
    delta: np.ndarray


def mmse_stats(alpha, K: int, p_pilot) -> EstimationStats:
    """Estimate/error variances for orthogonal pilots of total energy ``K * p_pilot``.

    ``sigma = alpha^2 K p / (alpha K p + 1)`` and ``delta = alpha / (alpha K p + 1)``,
    so that ``sigma + delta == alpha``. Works elementwise on arrays.
    """
    alpha = np.asarray(alpha, dtype=float)
    p = np.asarray(p_pilot, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    if np.any(p < 0):
        raise ValueError("pilot power must be non-negative")
    snr = alpha * K * p
    delta = alpha / (snr + 1.0)
    sigma = alpha * snr / (snr + 1.0)
    return EstimationStats(sigma=sigma, delta=delta)


def make_rng(base_seed: int, *index: int) -> np.random.Generator:
    """PCG64 stream for ``(base_seed, *index)``.

    Streams for different indices are independent (SeedSequence spawn keys), so
    trials can be evaluated in any order or in parallel.
    """
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """CN(0, var) samples: two independent real normals of variance var/2."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def draw_true_channels(rng: np.random.Generator, alphas, M: int) -> np.ndarray:
    """M x K matrix whose column k is CN(0, alpha_k I)."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if M < 1:
        raise ValueError("M must be >= 1")
    return complex_normal(rng, (M, alphas.size), alphas[None, :])


def simulate_pilot_estimation(rng, h, alpha, K: int, p_pilot):
    """MMSE estimate from the despread pilot observation ``y = h + n``.

    ``h`` may be one column (length M) or an M x K matrix with per-column
    ``alpha``/``p_pilot``. The observation noise has variance ``1/(K p)``
    per entry. Returns ``(h_hat, h_tilde)`` with ``h_hat + h_tilde == h``.
    """
    h = np.asarray(h)
    alpha = np.asarray(alpha, dtype=float)
    p = np.asarray(p_pilot, dtype=float)
    if np.any(p <= 0):
        raise ValueError("degenerate pilot: pilot power must be positive")
    noise = complex_normal(rng, h.shape, 1.0 / (K * p))
    snr = alpha * K * p
    h_hat = (snr / (snr + 1.0)) * (h + noise)
    h_tilde = h - h_hat
    return h_hat, h_tilde


@dataclass(frozen=True)
class ChannelDraw:
    H: np.ndarray
    H_hat: np.ndarray
    H_tilde: np.ndarray


def draw_channel(rng, alphas, M: int, p_pilot) -> ChannelDraw:
    """True channels plus their pilot-based estimates for one coherence block."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    H = draw_true_channels(rng, alphas, M)
    H_hat, H_tilde = simulate_pilot_estimation(rng, H, alphas, alphas.size,
                                               np.broadcast_to(p_pilot, alphas.shape))
    return ChannelDraw(H, H_hat, H_tilde)
