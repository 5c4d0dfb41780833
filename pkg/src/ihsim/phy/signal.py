"""Constant-envelope transmit signals, harvesting and ML pattern detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..channel import dbm_to_w, w_to_dbm
from ..errors import ValidationError
from .codebook import ActivationPattern, PatternCodebook


@dataclass(frozen=True)
class SignalConfig:
    """Transmit-side settings.

    ``phase_resolution_bits=None`` means continuous phase shifters;
    ``an_power_dbm=-inf`` disables artificial noise and
    ``si_residual_db=-inf`` models perfect self-interference cancellation.
    """

    total_power_dbm: float = 10.0
    phase_resolution_bits: int | None = None
    an_power_dbm: float = -math.inf
    si_residual_db: float = -110.0

    def __post_init__(self):
        bad = []
        if not math.isfinite(self.total_power_dbm):
            bad.append("total_power_dbm")
        if self.phase_resolution_bits is not None and self.phase_resolution_bits < 1:
            bad.append("phase_resolution_bits")
        if math.isnan(self.an_power_dbm) or self.an_power_dbm == math.inf:
            bad.append("an_power_dbm")
        if math.isnan(self.si_residual_db) or self.si_residual_db > 0:
            bad.append("si_residual_db")
        if bad:
            raise ValidationError(f"invalid signal config fields: {', '.join(bad)}", bad)

    @property
    def total_power_w(self) -> float:
        return dbm_to_w(self.total_power_dbm)

    @property
    def an_power_w(self) -> float:
        return 0.0 if self.an_power_dbm == -math.inf else dbm_to_w(self.an_power_dbm)


@dataclass(frozen=True)
class HarvestedPower:
    watts: float
    dbm: float


def quantize_phases(phases: np.ndarray, bits: int | None) -> np.ndarray:
    if bits is None:
        return phases
    step = 2.0 * math.pi / (1 << bits)
    return np.round(phases / step) * step


def cophase_weights(h_eh: np.ndarray, pattern: ActivationPattern | None = None,
                    resolution_bits: int | None = None) -> np.ndarray:
    """Phase-shifter settings aligning every antenna's contribution at the EH.

    With ``pattern=None`` phases for all antennas are returned (the shifters
    stay fixed while the pattern changes); otherwise one phase per active
    antenna of ``pattern``.
    """
    h_eh = np.asarray(h_eh)
    sel = h_eh if pattern is None else h_eh[list(pattern.active)]
    if np.any(sel == 0):
        raise ValidationError("cannot cophase towards a zero channel entry", ["h_eh"])
    return quantize_phases(-np.angle(sel), resolution_bits)


def tx_signal(pattern: ActivationPattern, phases: np.ndarray, config: SignalConfig,
              n_tx: int | None = None) -> np.ndarray:
    """Transmit vector with equal amplitude on the active antennas.

    ``phases`` is either one phase per antenna (length ``n_tx``) or one per
    active antenna.
    """
    phases = np.asarray(phases, dtype=float)
    idx = list(pattern.active)
    if n_tx is None:
        n_tx = len(phases)
    if len(phases) == n_tx:
        ph = phases[idx]
    elif len(phases) == pattern.k:
        ph = phases
    else:
        raise ValidationError("phase vector does not match pattern", ["phases"])
    x = np.zeros(n_tx, dtype=complex)
    x[idx] = math.sqrt(config.total_power_w / pattern.k) * np.exp(1j * ph)
    return x


def harvested_power(h_eh: np.ndarray, x: np.ndarray) -> HarvestedPower:
    h_eh, x = np.asarray(h_eh), np.asarray(x)
    if h_eh.shape != x.shape:
        raise ValidationError("channel and signal lengths differ", ["x"])
    # correctly rounded sum over active elements, so equal contributions give
    # bit-identical power whichever antennas carry them
    on = np.flatnonzero(x)
    c = h_eh[on] * x[on]
    s = complex(math.fsum(c.real), math.fsum(c.imag))
    p = abs(s) ** 2
    return HarvestedPower(p, float(w_to_dbm(p)))


def rx_sample(h: np.ndarray, x: np.ndarray, noise_power: float, rng: np.random.Generator,
              size=None):
    """``y = h^T x + n`` with circular complex Gaussian ``n`` of variance ``noise_power``."""
    s = np.dot(h, x)
    if noise_power == 0:
        return s if size is None else np.full(size, s)
    n = rng.standard_normal((2,) if size is None else (2, size))
    return s + math.sqrt(noise_power / 2.0) * (n[0] + 1j * n[1])


def candidate_means(h: np.ndarray, cb: PatternCodebook, phases: np.ndarray,
                    config: SignalConfig) -> np.ndarray:
    """Noise-free observation ``h^T x(p)`` for every codeword, in codeword order.

    ``h`` may be a single channel ``(n_tx,)`` or a batch ``(m, n_tx)`` with a
    matching phase batch; the result then has shape ``(m, size)``.
    """
    idx = cb.index_matrix()
    amp = math.sqrt(config.total_power_w / cb.k)
    contrib = amp * np.asarray(h) * np.exp(1j * np.asarray(phases))
    return contrib[..., idx].sum(axis=-1)


def ml_detect(y: complex, h_ir: np.ndarray, cb: PatternCodebook, phases: np.ndarray,
              noise_power: float, config: SignalConfig | None = None) -> ActivationPattern:
    """Maximum-likelihood pattern; ties go to the lowest codeword index.

    The noise power does not change the argmin under AWGN; it is accepted
    for interface symmetry with soft detectors.
    """
    return cb.pattern(ml_detect_index(y, h_ir, cb, phases, config or SignalConfig()))


def ml_detect_index(y, h_ir, cb, phases, config: SignalConfig) -> int:
    if cb.size == 0:
        raise ValidationError("empty codebook", ["cb"])
    mu = candidate_means(h_ir, cb, phases, config)
    return int(np.argmin(np.abs(y - mu) ** 2))


def an_mask(y_eve, an_waveform, an_gain: complex = 1.0):
    """Eavesdropper observation with the IR's artificial noise added."""
    return y_eve + an_gain * np.asarray(an_waveform)


def cancel_si(y_ir, an_waveform, config: SignalConfig):
    """Subtract the IR's own artificial noise from its raw observation.

    ``y_ir`` is assumed to contain the AN through a unit self-interference
    path; what remains is the AN scaled by the cancellation residual.
    """
    an = np.asarray(an_waveform)
    if config.si_residual_db == -math.inf:
        return y_ir - an
    return y_ir - an * (1.0 - 10.0 ** (config.si_residual_db / 20.0))


def an_waveform(config: SignalConfig, rng: np.random.Generator, size=None):
    """Unit-circular Gaussian AN scaled to ``an_power_dbm`` (zeros when disabled)."""
    p = config.an_power_w
    z = rng.standard_normal((2,) if size is None else (2, size))
    return math.sqrt(p / 2.0) * (z[0] + 1j * z[1])
