"""Spectral-efficiency bounds and Monte Carlo mutual information."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from ..errors import ValidationError
from .codebook import PatternCodebook
from .signal import SignalConfig, candidate_means

LN2 = math.log(2.0)
_CHUNK_ELEMS = 1 << 21


@dataclass(frozen=True)
class MiEstimate:
    bits: float
    se: float
    samples: int


def se_bound_combinatorial(n_tx: int, k: int) -> float:
    """``log2 C(n_tx, k)`` evaluated on the exact integer binomial."""
    if not (1 <= k <= n_tx):
        raise ValidationError(f"need 1 <= k <= n_tx, got k={k}, n_tx={n_tx}", ["k"])
    return math.log2(math.comb(n_tx, k))


def _mixture_terms(mu: np.ndarray, p_idx: np.ndarray, noise: np.ndarray, noise_power: float) -> np.ndarray:
    """``log2 mean_q exp((|y-mu_p|^2 - |y-mu_q|^2) / N0)`` for each sample.

    The MI estimate is minus the average of these terms.

    ``mu`` is ``(m, size)``; ``p_idx`` and ``noise`` are ``(m, s)``.
    """
    mu_p = np.take_along_axis(mu, p_idx, axis=1)
    y = mu_p + noise
    if noise_power == 0:
        # limit N0 -> 0: only candidates coinciding with mu_p survive
        eq = mu[:, None, :] == mu_p[:, :, None]
        return np.log2(eq.sum(axis=2) / mu.shape[1])
    d_p = np.abs(y - mu_p) ** 2
    d_q = np.abs(y[:, :, None] - mu[:, None, :]) ** 2
    # log2 of the *mean* over q, so an indistinguishable mixture gives exactly 0
    return (logsumexp((d_p[:, :, None] - d_q) / noise_power, axis=2) - math.log(mu.shape[1])) / LN2


Ensemble = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def fixed_ensemble(h: np.ndarray, phases: np.ndarray | None = None) -> Ensemble:
    """Ensemble that always returns the same channel (and phases)."""
    h = np.asarray(h, dtype=complex)
    ph = np.zeros(h.shape[-1]) if phases is None else np.asarray(phases, dtype=float)

    def draw(rng, n):
        return np.broadcast_to(h, (n, h.shape[-1])), np.broadcast_to(ph, (n, h.shape[-1]))

    return draw


def mi_monte_carlo(
    ensemble: Ensemble | np.ndarray,
    cb: PatternCodebook,
    noise_power: float,
    n_channel_draws: int,
    n_noise_draws: int,
    rng: np.random.Generator,
    config: SignalConfig | None = None,
) -> MiEstimate:
    """Estimate I(pattern; y | h) for equiprobable codewords.

    Uses ``I = log2|cb| - E[log2 sum_q exp((|y-mu_p|^2 - |y-mu_q|^2)/N0)]``
    with ``mu_p = h^T x(p)``. Each channel draw contributes the average over
    ``n_noise_draws`` (pattern, noise) samples; the SE is taken across
    channel draws, or across samples when there is a single channel draw.
    """
    if n_channel_draws < 1 or n_noise_draws < 1:
        raise ValidationError("draw counts must be >= 1", ["n_channel_draws", "n_noise_draws"])
    if noise_power < 0:
        raise ValidationError("noise power must be >= 0", ["noise_power"])
    config = config or SignalConfig()
    if not callable(ensemble):
        ensemble = fixed_ensemble(ensemble)
    size = cb.size
    cb.index_matrix()  # raises GuardError for codebooks that cannot be enumerated
    h_all, ph_all = ensemble(rng, n_channel_draws)

    per_channel = np.empty(n_channel_draws)
    sample_terms = []
    step = max(1, _CHUNK_ELEMS // max(1, size * n_noise_draws))
    for start in range(0, n_channel_draws, step):
        sl = slice(start, min(start + step, n_channel_draws))
        mu = candidate_means(h_all[sl], cb, ph_all[sl], config)
        m = mu.shape[0]
        p_idx = rng.integers(0, size, (m, n_noise_draws))
        z = rng.standard_normal((2, m, n_noise_draws))
        noise = math.sqrt(noise_power / 2.0) * (z[0] + 1j * z[1])
        terms = _mixture_terms(mu, p_idx, noise, noise_power)
        per_channel[sl] = -terms.mean(axis=1)
        if n_channel_draws == 1:
            sample_terms.append(terms.ravel())

    bits = float(per_channel.mean())
    if n_channel_draws > 1:
        se = float(per_channel.std(ddof=1) / math.sqrt(n_channel_draws))
    else:
        t = np.concatenate(sample_terms)
        se = float(t.std(ddof=1) / math.sqrt(t.size)) if t.size > 1 else 0.0
    return MiEstimate(bits, se, n_channel_draws * n_noise_draws)
