"""Experiment configuration: flat dotted-key JSON with Table-1 defaults.

Absent keys take their defaults; ``null`` stands for an infinite or
disabled value where noted (``channel.rician_k_db``, ``signal.an_power_dbm``,
``signal.phase_resolution_bits``) and for "experiment default" on the sweep
axes and ``trials``.
"""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, field_validator

from ..channel import ChannelConfig
from ..errors import ValidationError
from ..geometry import ObstacleSpec
from ..phy import SignalConfig

DEFAULT_OCR = [round(0.1 * i, 1) for i in range(10)]

# per-experiment defaults for axes left null
EXPERIMENT_DEFAULTS = {
    "los": {"trials": 10_000, "d": [float(d) for d in range(1, 21)]},
    "harvest": {"trials": 1000, "d": [1.0, 20.0], "k": [1, 4, 16, 32]},
    "se": {"trials": 1000, "k": list(range(1, 65))},
    "protocol": {"trials": 20},
    "secrecy": {"trials": 10_000},
}


class Experiment(str, Enum):
    los = "los"
    harvest = "harvest"
    se = "se"
    protocol = "protocol"
    secrecy = "secrecy"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    experiment: Experiment = Experiment.los
    seed: int = Field(1, ge=0, lt=1 << 64)
    trials: Optional[int] = Field(None, ge=1)
    out: Optional[str] = None

    total_power_dbm: float = Field(10.0, alias="wpt.total_power_dbm")
    n_tx: int = Field(64, ge=1, le=64, alias="wpt.n_tx")
    d_info: float = Field(20.0, gt=0, alias="ir.distance_m")
    d_energy: float = Field(1.0, gt=0, alias="eh.distance_m")

    element_spacing: float = Field(0.5, gt=0, alias="channel.antenna_spacing_wl")
    carrier_freq: float = Field(2e9, gt=0, alias="channel.frequency_hz")
    array_gain_dbi: float = Field(15.0, alias="channel.array_gain_dbi")
    angle_offset_sigma: float = Field(2.0, ge=0, alias="channel.angle_offset_sigma_deg")
    shadow_sigma_db: float = Field(8.0, ge=0, alias="channel.shadowing_sigma_db")
    subcarrier_bw: float = Field(15e3, gt=0, alias="channel.subcarrier_bw_hz")
    corr_coeff: float = Field(0.7, ge=0, lt=1, alias="channel.corr_coeff")
    rician_k_db: Optional[float] = Field(10.0, alias="channel.rician_k_db")
    noise_figure_db: float = Field(0.0, alias="channel.noise_figure_db")
    symmetric_los: bool = Field(False, alias="channel.symmetric_los")

    ocr: float = Field(0.3, ge=0, le=0.9, alias="obstacle.ocr")
    radius_m: tuple[float, float] = Field((0.3, 0.6), alias="obstacle.radius_m")
    height_m: tuple[float, float] = Field((5.0, 25.0), alias="obstacle.height_m")
    area_m: tuple[float, float] = Field((50.0, 50.0), alias="obstacle.area_m")
    endcap: bool = Field(True, alias="obstacle.endcap")
    terminal_height: float = Field(1.5, ge=0, alias="obstacle.terminal_height_m")

    phase_resolution_bits: Optional[int] = Field(None, ge=1, alias="signal.phase_resolution_bits")
    an_power_dbm: Optional[float] = Field(None, alias="signal.an_power_dbm")
    si_residual_db: Optional[float] = Field(-110.0, le=0, alias="signal.si_residual_db")

    sweep_d: Optional[list[float]] = Field(None, min_length=1, alias="sweep.d_m")
    sweep_ocr: list[float] = Field(default_factory=lambda: list(DEFAULT_OCR), min_length=1, alias="sweep.ocr")
    sweep_k: Optional[list[int]] = Field(None, min_length=1, alias="sweep.k")

    harvest_patterns: int = Field(50, ge=1, alias="harvest.patterns")
    se_noise_draws: int = Field(2, ge=1, alias="se.noise_draws")
    protocol_frames: int = Field(200, ge=1, alias="protocol.frames")
    protocol_fault_rates: list[float] = Field([0.0, 0.01, 0.02, 0.05], min_length=1, alias="protocol.fault_rates")
    secrecy_snr_db: float = Field(30.0, alias="secrecy.snr_db")
    secrecy_n_tx: int = Field(4, ge=1, le=64, alias="secrecy.n_tx")
    secrecy_k: int = Field(1, ge=1, alias="secrecy.k")
    secrecy_an_over_noise_db: list[Optional[float]] = Field(
        [None, 0.0, 10.0, 20.0], min_length=1, alias="secrecy.an_over_noise_db"
    )
    secrecy_remap_periods: list[Optional[int]] = Field([None, 1, 10], min_length=1, alias="secrecy.remap_periods")
    secrecy_remap_key: int = Field(0xC0FFEE, ge=0, lt=1 << 64, alias="secrecy.remap_key")
    secrecy_eve_colocated: bool = Field(False, alias="secrecy.eve_colocated")

    @field_validator("sweep_ocr")
    @classmethod
    def _ocr_range(cls, v):
        if any(not (0.0 <= x <= 0.9) for x in v):
            raise ValueError("OCR values must lie in [0, 0.9]")
        return v

    @field_validator("sweep_k")
    @classmethod
    def _k_range(cls, v):
        if v is not None and any(not (1 <= x <= 64) for x in v):
            raise ValueError("k values must lie in [1, 64]")
        return v

    @field_validator("sweep_d")
    @classmethod
    def _d_range(cls, v):
        if v is not None and any(x < 0 for x in v):
            raise ValueError("distances must be >= 0")
        return v

    @field_validator("protocol_fault_rates")
    @classmethod
    def _rates(cls, v):
        if any(not (0.0 <= x <= 1.0) for x in v):
            raise ValueError("fault rates must lie in [0, 1]")
        return v

    # resolved views -----------------------------------------------------

    @property
    def n_trials(self) -> int:
        return self.trials or EXPERIMENT_DEFAULTS[self.experiment.value]["trials"]

    @property
    def d_list(self) -> list[float]:
        return self.sweep_d or EXPERIMENT_DEFAULTS.get(self.experiment.value, {}).get("d", [self.d_energy])

    @property
    def k_list(self) -> list[int]:
        return self.sweep_k or EXPERIMENT_DEFAULTS.get(self.experiment.value, {}).get("k", [1])

    def obstacle_spec(self, ocr: float | None = None) -> ObstacleSpec:
        return ObstacleSpec(
            ocr=self.ocr if ocr is None else ocr,
            radius_min=self.radius_m[0], radius_max=self.radius_m[1],
            height_min=self.height_m[0], height_max=self.height_m[1],
            area=tuple(self.area_m), terminal_height=self.terminal_height, endcap=self.endcap,
        )

    def channel_config(self) -> ChannelConfig:
        k_db = math.inf if self.rician_k_db is None else self.rician_k_db
        sigma = self.angle_offset_sigma
        if self.symmetric_los:
            k_db, sigma = math.inf, 0.0
        return ChannelConfig(
            n_tx=self.n_tx, carrier_freq=self.carrier_freq, element_spacing=self.element_spacing,
            array_gain_dbi=self.array_gain_dbi, shadow_sigma_db=self.shadow_sigma_db,
            angle_offset_sigma=sigma, corr_coeff=self.corr_coeff, rician_k_db=k_db,
            subcarrier_bw=self.subcarrier_bw, noise_figure_db=self.noise_figure_db,
        )

    def signal_config(self) -> SignalConfig:
        return SignalConfig(
            total_power_dbm=self.total_power_dbm,
            phase_resolution_bits=self.phase_resolution_bits,
            an_power_dbm=-math.inf if self.an_power_dbm is None else self.an_power_dbm,
            si_residual_db=-math.inf if self.si_residual_db is None else self.si_residual_db,
        )

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with fields replaced (by field name), re-validated."""
        data = self.to_dict()
        names = {name: f.alias or name for name, f in type(self).model_fields.items()}
        for k, v in kw.items():
            data[names[k]] = v.value if isinstance(v, Enum) else v
        return config_from_dict(data)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def _field_name(loc) -> str:
    return ".".join(str(p) for p in loc if not isinstance(p, int)) or "config"


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except PydanticError as exc:
        fields = sorted({_field_name(e["loc"]) for e in exc.errors()})
        raise ValidationError(f"invalid config field(s): {', '.join(fields)}", fields) from None
    # cross-field checks delegated to the domain types
    cfg.obstacle_spec()
    cfg.channel_config()
    cfg.signal_config()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON config; an empty file yields the full default set."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}", ["config"]) from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object", ["config"])
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
