"""Per-link channel vectors.

The large-scale gain of a link is ``g = 10**((-PL + G_array + S) / 20)``
with the 3GPP-style path loss ``128.1 + 37.6 log10(d_km)``, a single array
gain and log-normal shadowing ``S`` shared by all transmit antennas. Small-
scale fading is Rician around a ULA steering vector (LoS) or Rayleigh (NLoS),
both shaped by an exponential Kronecker transmit correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .geometry import ObstacleField, ObstacleSpec, Point3, is_blocked, p_los_analytic

THERMAL_DENSITY_DBM_HZ = -174.0


@dataclass(frozen=True)
class ChannelConfig:
    n_tx: int = 64
    carrier_freq: float = 2e9
    element_spacing: float = 0.5
    array_gain_dbi: float = 15.0
    shadow_sigma_db: float = 8.0
    angle_offset_sigma: float = 2.0  # degrees
    corr_coeff: float = 0.7
    rician_k_db: float = 10.0  # math.inf for a pure LoS component
    subcarrier_bw: float = 15e3
    noise_figure_db: float = 0.0

    def __post_init__(self):
        bad = []
        if self.n_tx < 1:
            bad.append("n_tx")
        if self.shadow_sigma_db < 0:
            bad.append("shadow_sigma_db")
        if self.angle_offset_sigma < 0:
            bad.append("angle_offset_sigma")
        if not (0.0 <= self.corr_coeff < 1.0):
            bad.append("corr_coeff")
        if self.subcarrier_bw <= 0:
            bad.append("subcarrier_bw")
        if math.isnan(self.rician_k_db) or self.rician_k_db == -math.inf:
            bad.append("rician_k_db")
        if bad:
            raise ValidationError(f"invalid channel config fields: {', '.join(bad)}", bad)

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.carrier_freq


@dataclass(frozen=True)
class LinkGeometry:
    tx_pos: Point3
    rx_pos: Point3
    boresight_angle: float = 0.0

    def __post_init__(self):
        if self.distance <= 0:
            raise ValidationError("link endpoints coincide", ["rx_pos"])

    @property
    def distance(self) -> float:
        return self.tx_pos.distance(self.rx_pos)

    @classmethod
    def at_distance(cls, d: float, height: float = 1.5) -> "LinkGeometry":
        """WPT at the origin, receiver ``d`` metres along +x at equal height."""
        return cls(Point3(0.0, 0.0, height), Point3(d, 0.0, height))


@dataclass
class ChannelRealization:
    h: np.ndarray
    los: bool
    path_loss_db: float
    shadowing_db: float
    angle_offset: float

    @property
    def gain_db(self) -> float:
        return 20.0 * math.log10(max(float(np.linalg.norm(self.h)), 1e-300))


def path_loss_db(d: float) -> float:
    """Path loss in dB for ``d`` in metres."""
    if not d > 0:
        raise DomainError(f"path loss needs d > 0, got {d}")
    return 128.1 + 37.6 * math.log10(d / 1000.0)


def sample_shadowing(config: ChannelConfig, rng: np.random.Generator, size=None):
    if config.shadow_sigma_db == 0.0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, config.shadow_sigma_db, size)


def steering_vector(n_tx: int, spacing: float, theta) -> np.ndarray:
    """ULA response; ``theta`` may be an array, giving one row per angle."""
    i = np.arange(n_tx)
    theta = np.asarray(theta, dtype=float)
    return np.exp(1j * 2.0 * np.pi * spacing * np.multiply.outer(np.sin(theta), i))


def correlation_sqrt(n_tx: int, rho: float) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == R``, ``R[i, j] = rho**|i-j|``.

    Closed-form Cholesky factor of the exponential (AR(1)) correlation, so
    no LAPACK call is involved and results are identical across platforms.
    """
    if not (0.0 <= rho < 1.0):
        raise ValidationError(f"correlation must be in [0, 1), got {rho}", ["corr_coeff"])
    i = np.arange(n_tx)
    lag = i[:, None] - i[None, :]
    L = np.where(lag >= 0, rho ** np.maximum(lag, 0), 0.0)
    L[:, 1:] *= math.sqrt(1.0 - rho * rho)
    return L


def noise_power_dbm(config: ChannelConfig) -> float:
    return THERMAL_DENSITY_DBM_HZ + 10.0 * math.log10(config.subcarrier_bw) + config.noise_figure_db


def noise_power_w(config: ChannelConfig) -> float:
    return dbm_to_w(noise_power_dbm(config))


def dbm_to_w(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def w_to_dbm(p_w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p_w) + 30.0


def _resolve_los(geom, field_or_flag, n, rng):
    if isinstance(field_or_flag, (bool, np.bool_)):
        return np.full(n, bool(field_or_flag))
    if isinstance(field_or_flag, ObstacleField):
        return np.full(n, not is_blocked(field_or_flag, geom.tx_pos, geom.rx_pos))
    if isinstance(field_or_flag, ObstacleSpec):
        return rng.random(n) < p_los_analytic(field_or_flag, geom.distance)
    arr = np.asarray(field_or_flag, dtype=bool)
    if arr.shape != (n,):
        raise ValidationError("LoS flag array must have one entry per draw", ["los"])
    return arr


def draw_channels(
    geom: LinkGeometry,
    field_or_flag,
    config: ChannelConfig,
    rng: np.random.Generator,
    n: int,
    *,
    shadowing_db=None,
    angle_offset=None,
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray, np.ndarray]:
    """Draw ``n`` independent realisations of one link.

    ``field_or_flag`` is a LoS bool, a bool array of length ``n``, an
    :class:`ObstacleField` (checked with :func:`is_blocked`) or an
    :class:`ObstacleSpec` (Bernoulli with the analytic LoS probability).
    ``shadowing_db`` / ``angle_offset`` override the random draws.

    Returns ``(h, los, path_loss_db, shadowing_db, angle_offset)`` with ``h``
    of shape ``(n, n_tx)``. The draw order from ``rng`` is fixed: LoS flags,
    shadowing, angle offsets, then the complex Gaussian matrix.
    """
    pl = path_loss_db(geom.distance)
    los = _resolve_los(geom, field_or_flag, n, rng)
    if shadowing_db is None:
        shadow = np.asarray(sample_shadowing(config, rng, n), dtype=float)
    else:
        shadow = np.broadcast_to(np.asarray(shadowing_db, dtype=float), (n,)).copy()
    if angle_offset is None:
        sigma = math.radians(config.angle_offset_sigma)
        offs = rng.normal(0.0, sigma, n) if sigma > 0 else np.zeros(n)
    else:
        offs = np.broadcast_to(np.asarray(angle_offset, dtype=float), (n,)).copy()
    w = (rng.standard_normal((n, config.n_tx)) + 1j * rng.standard_normal((n, config.n_tx))) / math.sqrt(2.0)
    scattered = w @ correlation_sqrt(config.n_tx, config.corr_coeff).T
    g = 10.0 ** ((-pl + config.array_gain_dbi + shadow) / 20.0)

    if math.isinf(config.rician_k_db):
        a_los, a_nlos = 1.0, 0.0
    else:
        k = 10.0 ** (config.rician_k_db / 10.0)
        a_los, a_nlos = math.sqrt(k / (k + 1.0)), math.sqrt(1.0 / (k + 1.0))
    sv = steering_vector(config.n_tx, config.element_spacing, geom.boresight_angle + offs)
    h_los = a_los * sv + a_nlos * scattered if a_nlos else a_los * sv
    h = np.where(los[:, None], h_los, scattered) * g[:, None]
    return h, los, pl, shadow, offs


def draw_channel(
    geom: LinkGeometry,
    field_or_flag,
    config: ChannelConfig,
    rng: np.random.Generator,
    *,
    shadowing_db=None,
    angle_offset=None,
) -> ChannelRealization:
    h, los, pl, shadow, offs = draw_channels(
        geom, field_or_flag, config, rng, 1, shadowing_db=shadowing_db, angle_offset=angle_offset
    )
    return ChannelRealization(h[0], bool(los[0]), pl, float(shadow[0]), float(offs[0]))
