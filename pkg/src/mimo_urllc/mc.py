"""Monte Carlo evaluation of instantaneous SINR and ergodic finite-blocklength rates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chanmodel import draw_channel, make_rng, mmse_stats
from .fbl import rate_fbl, sinr_lb_mrc, sinr_lb_zf
from .scenario import Scenario

ZF_IDENTITY_TOL = 1e-8
CHUNK = 250


class ReceiverError(np.linalg.LinAlgError):
    """Zero-forcing filter could not be formed for a channel draw."""


@dataclass(frozen=True)
class McConfig:
    n_trials: int = 2000
    base_seed: int = 0
    receiver: str = "mrc"
    threads: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.receiver not in ("mrc", "zf"):
            raise ValueError(f"receiver must be 'mrc' or 'zf', got {self.receiver!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def combiner(H_hat: np.ndarray, receiver: str) -> np.ndarray:
    """Receive filter ``A`` (columns ``a_k``) for one or a stack of estimate matrices."""
    if receiver == "mrc":
        return H_hat
    gram = np.conj(np.swapaxes(H_hat, -1, -2)) @ H_hat
    try:
        Lc = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise ReceiverError("singular Gram matrix") from exc
    K = gram.shape[-1]
    eye = np.broadcast_to(np.eye(K), gram.shape)
    inv = np.linalg.solve(np.conj(np.swapaxes(Lc, -1, -2)), np.linalg.solve(Lc, eye))
    A = H_hat @ inv
    resid = np.abs(np.conj(np.swapaxes(A, -1, -2)) @ H_hat - eye).max(axis=(-1, -2))
    if np.any(resid >= ZF_IDENTITY_TOL):
        raise ReceiverError(f"ZF identity residual {float(resid.max()):.2e}")
    return A


def instantaneous_sinr(H_hat, H_tilde, p_data, receiver: str) -> np.ndarray:
    """Per-device SINR with the estimate known and the estimation error treated as noise.

    ``gamma_k = p_k |a_k^H h^_k|^2 / (sum_{i!=k} p_i |a_k^H h^_i|^2
    + sum_i p_i |a_k^H h~_i|^2 + ||a_k||^2)``. Works on a single M x K draw
    or on a stack (..., M, K).
    """
    H_hat = np.asarray(H_hat)
    H_tilde = np.asarray(H_tilde)
    p = np.asarray(p_data, dtype=float)
    A = combiner(H_hat, receiver)
    AH = np.conj(np.swapaxes(A, -1, -2))
    G = np.abs(AH @ H_hat) ** 2            # [k, i] = |a_k^H h^_i|^2
    E = np.abs(AH @ H_tilde) ** 2
    sig = np.diagonal(G, axis1=-2, axis2=-1) * p
    interf = (G * p).sum(-1) - sig + (E * p).sum(-1)
    noise = (np.abs(A) ** 2).sum(-2)
    return sig / (interf + noise)


def _draw_trial(sc: Scenario, p_pilot, base_seed: int, trial: int, receiver: str,
                max_redraws: int = 100):
    """One trial's channel draw; ZF draws with an unusable Gram matrix are redrawn."""
    rng = make_rng(base_seed, trial)
    for rejected in range(max_redraws):
        d = draw_channel(rng, sc.alphas, sc.M, p_pilot)
        if receiver == "mrc":
            return d, rejected
        try:
            combiner(d.H_hat, "zf")
            return d, rejected
        except ReceiverError:
            continue
    raise ReceiverError(f"trial {trial}: {max_redraws} consecutive singular draws")


def _chunk(sc: Scenario, p_pilot, p_data, cfg: McConfig, lo: int, hi: int):
    draws, rejected = [], 0
    for t in range(lo, hi):
        d, r = _draw_trial(sc, p_pilot, cfg.base_seed, t, cfg.receiver)
        draws.append(d)
        rejected += r
    H_hat = np.stack([d.H_hat for d in draws])
    H_tilde = np.stack([d.H_tilde for d in draws])
    gamma = instantaneous_sinr(H_hat, H_tilde, p_data, cfg.receiver)
    return gamma, rejected


@dataclass
class McResult:
    mean_rate: np.ndarray        # clamped at 0 per trial before averaging
    stderr: np.ndarray
    rate_lb: np.ndarray          # closed-form bound at the same powers
    sinr_lb: np.ndarray
    mean_inv_sinr: np.ndarray    # empirical E{1/gamma}
    clamped: int                 # negative instantaneous rates set to 0
    rejected: int                # ZF draws redrawn for an unusable Gram matrix
    n_trials: int

    @property
    def relative_gap(self) -> np.ndarray:
        return (self.mean_rate - self.rate_lb) / self.mean_rate

    def rows(self) -> list[dict]:
        return [{"device": k, "lb": float(self.rate_lb[k]), "empirical": float(self.mean_rate[k]),
                 "stderr": float(self.stderr[k]), "gap": float(self.relative_gap[k])}
                for k in range(len(self.rate_lb))]


def simulate_sinr(sc: Scenario, p_pilot, p_data, cfg: McConfig):
    """Instantaneous SINR of every trial, shape (n_trials, K), and the redraw count."""
    p_pilot = np.broadcast_to(np.asarray(p_pilot, float), (sc.K,))
    p_data = np.broadcast_to(np.asarray(p_data, float), (sc.K,))
    bounds = [(lo, min(lo + CHUNK, cfg.n_trials)) for lo in range(0, cfg.n_trials, CHUNK)]
    work = lambda b: _chunk(sc, p_pilot, p_data, cfg, *b)  # noqa: E731
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    # merged in trial order regardless of completion order
    gamma = np.concatenate([g for g, _ in parts])
    return gamma, sum(r for _, r in parts)


def empirical_ergodic_rate(sc: Scenario, p_pilot, p_data, cfg: McConfig) -> McResult:
    """Average finite-blocklength rate over channel draws, next to the closed-form bound."""
    gamma, rejected = simulate_sinr(sc, p_pilot, p_data, cfg)
    rates = rate_fbl(gamma, sc.beta, sc.L, sc.epsilons[None, :])
    clamped = int((rates < 0).sum())
    rates = np.maximum(rates, 0.0)
    n = cfg.n_trials
    stats = mmse_stats(sc.alphas, sc.K, np.broadcast_to(p_pilot, (sc.K,)))
    pd = np.broadcast_to(np.asarray(p_data, float), (sc.K,))
    if cfg.receiver == "mrc":
        g_lb = sinr_lb_mrc(pd, stats, sc.M)
    else:
        g_lb = sinr_lb_zf(pd, stats, sc.M, sc.K)
    lb = np.atleast_1d(rate_fbl(g_lb, sc.beta, sc.L, sc.epsilons))
    std = rates.std(axis=0, ddof=1) if n > 1 else np.full(sc.K, math.inf)
    return McResult(mean_rate=rates.mean(axis=0), stderr=std / math.sqrt(n), rate_lb=lb,
                    sinr_lb=g_lb, mean_inv_sinr=(1.0 / gamma).mean(axis=0),
                    clamped=clamped, rejected=rejected, n_trials=n)
