"""Message set and node state enumerations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..errors import ValidationError

BROADCAST = "*"


class MsgKind(str, Enum):
    POWER_REQUEST = "PowerRequest"
    IDENT_EXCHANGE = "IdentExchange"
    CONFIG_ACK = "ConfigAck"
    POWER_BEACON = "PowerBeacon"
    RFI = "RFI"
    SEED_FRAME = "SeedFrame"
    ERROR_REPORT = "ErrorReport"
    STOP_INFO = "StopInfo"


class WptState(str, Enum):
    IDLE = "Idle"
    IDENTIFICATION = "Identification"
    POWER_TRANSFER = "PowerTransfer"
    INFO_SEEDING = "InfoSeeding"


class EhState(str, Enum):
    IDLE = "Idle"
    REQUESTING = "Requesting"
    CONFIGURING = "Configuring"
    HARVESTING = "Harvesting"


class IrState(str, Enum):
    SENSING = "Sensing"
    ESTIMATING = "Estimating"
    RFI_SENT = "RfiSent"
    HARVESTING_INFO = "HarvestingInfo"


class EveState(str, Enum):
    LISTENING = "Listening"


@dataclass(frozen=True)
class RfiParams:
    requested_bits_per_frame: int
    pattern_update_period: float  # frames; math.inf disables remapping
    an_enabled: bool = False
    remap_key: int = 0

    def __post_init__(self):
        bad = []
        if self.requested_bits_per_frame < 1:
            bad.append("requested_bits_per_frame")
        if not self.pattern_update_period >= 1:
            bad.append("pattern_update_period")
        if not 0 <= self.remap_key < 1 << 64:
            bad.append("remap_key")
        if bad:
            raise ValidationError(f"invalid RFI payload: {', '.join(bad)}", bad)

    @property
    def remap_enabled(self) -> bool:
        return not math.isinf(self.pattern_update_period)


@dataclass(frozen=True)
class ProtocolMessage:
    kind: Any  # MsgKind, or anything else for malformed traffic
    sender: str
    receiver: str
    frame: int
    payload: Any = field(default=None, compare=True)

    def sort_key(self):
        kind = self.kind.value if isinstance(self.kind, MsgKind) else str(self.kind)
        return (self.frame, self.sender, kind, self.receiver)

    def describe(self) -> str:
        kind = self.kind.value if isinstance(self.kind, MsgKind) else str(self.kind)
        return f"{kind}:{self.sender}>{self.receiver}"
