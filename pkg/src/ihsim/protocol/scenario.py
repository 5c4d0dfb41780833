"""Scenario records consumed by :func:`ihsim.protocol.run_scenario`."""

from __future__ import annotations

import math
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from ..channel import ChannelConfig
from ..errors import ValidationError
from ..geometry import ObstacleSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class EhSpec(_Strict):
    id: str
    distance_m: float = Field(1.0, gt=0)
    angle_deg: float = 0.0
    start_frame: int = Field(0, ge=0)


class IrSpec(_Strict):
    id: str
    distance_m: float = Field(20.0, gt=0)
    angle_deg: float = 90.0
    start_frame: int = Field(0, ge=0)
    requested_bits_per_frame: int = Field(6, ge=1)
    # None means "never remap"
    pattern_update_period: Optional[int] = Field(None, ge=1)
    an_enabled: bool = False
    remap_key: int = Field(0, ge=0, lt=1 << 64)
    estimation_error_var: float = Field(0.0, ge=0)

    @property
    def period(self) -> float:
        return math.inf if self.pattern_update_period is None else self.pattern_update_period


class EveSpec(_Strict):
    id: str
    distance_m: float = Field(20.0, gt=0)
    angle_deg: float = 90.0
    # share channel and noise realisations with this IR (same position)
    colocated_with: Optional[str] = None
    an_gain_db: float = 0.0


class FaultSpec(_Strict):
    frame: int = Field(ge=0)
    node: str


class Scenario(_Strict):
    frames: int = Field(200, ge=1)
    n_tx: int = Field(64, ge=1)
    k_active: int = Field(1, ge=1)
    info_bits: int = Field(600, ge=0)
    ocr: float = Field(0.3, ge=0, le=0.9)
    noise: bool = True
    frame_duration_s: float = Field(1e-3, gt=0)
    total_power_dbm: float = 10.0
    an_power_dbm: Optional[float] = None
    si_residual_db: Optional[float] = Field(-110.0, le=0)
    channel: dict[str, Any] = Field(default_factory=dict)
    obstacles: dict[str, Any] = Field(default_factory=dict)
    ehs: list[EhSpec] = Field(default_factory=list)
    irs: list[IrSpec] = Field(default_factory=list)
    eves: list[EveSpec] = Field(default_factory=list)
    faults: list[FaultSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        ids = [n.id for n in (*self.ehs, *self.irs, *self.eves)]
        if len(ids) != len(set(ids)) or "wpt" in ids:
            raise ValueError("node ids must be unique and not 'wpt'")
        if self.k_active > self.n_tx:
            raise ValueError("k_active must not exceed n_tx")
        known = set(ids)
        for f in self.faults:
            if f.node not in known and f.node != "wpt":
                raise ValueError(f"fault targets unknown node {f.node!r}")
        irs = {i.id for i in self.irs}
        for e in self.eves:
            if e.colocated_with is not None and e.colocated_with not in irs:
                raise ValueError(f"eavesdropper {e.id} colocated with unknown IR {e.colocated_with!r}")
        return self

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(n_tx=self.n_tx, **self.channel)

    def obstacle_spec(self) -> ObstacleSpec:
        return ObstacleSpec(ocr=self.ocr, **self.obstacles)


def load_scenario(data: dict) -> Scenario:
    """Validate a scenario mapping, converting errors to :class:`ValidationError`."""
    try:
        sc = Scenario.model_validate(data)
        sc.channel_config()
        sc.obstacle_spec()
    except PydanticError as exc:
        fields = [".".join(str(p) for p in e["loc"]) or "scenario" for e in exc.errors()]
        raise ValidationError(f"malformed scenario: {exc}", fields) from None
    except TypeError as exc:
        raise ValidationError(f"malformed scenario: {exc}", ["channel", "obstacles"]) from None
    return sc


def golden_scenario() -> Scenario:
    """One EH at 1 m and one IR at 20 m over 200 frames, remapping every 10 frames."""
    return Scenario(
        frames=200,
        ehs=[EhSpec(id="eh0", distance_m=1.0)],
        irs=[IrSpec(id="ir0", start_frame=10, pattern_update_period=10, remap_key=0x5EED)],
    )
