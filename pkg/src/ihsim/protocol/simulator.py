"""Frame-clocked simulation of the WPT / EH / IR protocol.

One global frame clock drives every node. Messages emitted in frame ``f``
are delivered at ``f + 1``. Within a frame nodes are stepped in a fixed
order: the WPT, then EHs, IRs and eavesdroppers, each by ascending id.
Every random quantity is drawn from a stream keyed by (seed, purpose, node,
frame), so adding or removing a node never perturbs another node's draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .. import rng as rngmod
from ..channel import LinkGeometry, draw_channels, noise_power_w
from ..geometry import Point3, is_blocked, sample_field
from ..phy import (
    SignalConfig,
    an_mask,
    an_waveform,
    bits_to_pattern,
    build_codebook,
    cancel_si,
    cophase_weights,
    harvested_power,
    ml_detect,
    pattern_to_bits,
    remap_codebook,
    tx_signal,
)
from ..phy.codebook import PatternCodebook
from .messages import (
    BROADCAST,
    EhState,
    EveState,
    IrState,
    MsgKind,
    ProtocolMessage,
    RfiParams,
    WptState,
)
from .scenario import EhSpec, EveSpec, IrSpec, Scenario
from .trace import Trace, TraceRecord

TERMINAL_HEIGHT = 1.5
WPT_ID = "wpt"


@dataclass(frozen=True)
class SeedPayload:
    """Physical description of one seeded frame.

    ``tx`` is consumed by the medium to produce observations; receivers use
    only the construction parameters (phases, n_tx, k, bits per use).
    """

    tx: np.ndarray
    phases: np.ndarray
    n_tx: int
    k: int
    bits_per_use: int
    offset: int

    def __eq__(self, other):
        return (
            isinstance(other, SeedPayload)
            and np.array_equal(self.tx, other.tx)
            and np.array_equal(self.phases, other.phases)
            and (self.n_tx, self.k, self.bits_per_use, self.offset)
            == (other.n_tx, other.k, other.bits_per_use, other.offset)
        )

    __hash__ = None


class Medium:
    """Channels, noise and artificial noise shared by all nodes of a run."""

    def __init__(self, scenario: Scenario, seed: int):
        self.seed = seed
        self.ccfg = scenario.channel_config()
        self.noise_w = noise_power_w(self.ccfg) if scenario.noise else 0.0
        self.sig = SignalConfig(
            total_power_dbm=scenario.total_power_dbm,
            an_power_dbm=-math.inf if scenario.an_power_dbm is None else scenario.an_power_dbm,
            si_residual_db=-math.inf if scenario.si_residual_db is None else scenario.si_residual_db,
        )
        ospec = scenario.obstacle_spec()
        self.field = sample_field(ospec, rngmod.stream(seed, "field"))
        self.wpt_pos = Point3(0.0, 0.0, TERMINAL_HEIGHT)
        self._links: dict[str, tuple[LinkGeometry, bool, float]] = {}
        self._alias: dict[str, str] = {}
        for node in (*scenario.ehs, *scenario.irs, *scenario.eves):
            colo = getattr(node, "colocated_with", None)
            if colo is not None:
                self._alias[node.id] = colo
                continue
            th = math.radians(node.angle_deg)
            pos = Point3(node.distance_m * math.cos(th), node.distance_m * math.sin(th), TERMINAL_HEIGHT)
            geom = LinkGeometry(self.wpt_pos, pos)
            los = not is_blocked(self.field, self.wpt_pos, pos)
            shadow = float(self.ccfg.shadow_sigma_db * rngmod.stream(seed, "shadow", node.id).standard_normal())
            self._links[node.id] = (geom, los, shadow)
        self._h: dict[tuple[str, int], np.ndarray] = {}
        self.radiated: dict[int, np.ndarray] = {}

    def key(self, node: str) -> str:
        return self._alias.get(node, node)

    def los(self, node: str) -> bool:
        return self._links[self.key(node)][1]

    def channel(self, node: str, frame: int) -> np.ndarray:
        key = (self.key(node), frame)
        if key not in self._h:
            geom, los, shadow = self._links[key[0]]
            h, *_ = draw_channels(
                geom, los, self.ccfg, rngmod.stream(self.seed, "fading", key[0], frame), 1, shadowing_db=shadow
            )
            self._h[key] = h[0]
        return self._h[key]

    def noise(self, node: str, frame: int) -> complex:
        if self.noise_w == 0.0:
            return 0.0
        z = rngmod.stream(self.seed, "noise", self.key(node), frame).standard_normal(2)
        return math.sqrt(self.noise_w / 2.0) * complex(z[0], z[1])

    def observe(self, node: str, frame: int, x: np.ndarray) -> complex:
        return complex(np.dot(self.channel(node, frame), x)) + self.noise(node, frame)

    def artificial_noise(self, ir: str, frame: int) -> complex:
        return complex(an_waveform(self.sig, rngmod.stream(self.seed, "an", ir, frame)))


@dataclass
class StepResult:
    event: str
    outbox: list[ProtocolMessage] = field(default_factory=list)
    harvested_uw: float | None = None
    bits: list[int] | None = None
    detect_ok: bool | None = None
    extra: dict[str, Any] = field(default_factory=dict)


def _kinds(inbox) -> str:
    return "+".join(m.kind.value if isinstance(m.kind, MsgKind) else str(m.kind) for m in inbox) or "tick"


@dataclass
class SeedingSession:
    ir: str
    params: RfiParams
    codebook: PatternCodebook
    cursor: int = 0


class WptNode:
    node_id = WPT_ID

    def __init__(self, scenario: Scenario, payload: list[int]):
        self.state = WptState.IDLE
        self.n_tx, self.k = scenario.n_tx, scenario.k_active
        self.base_codebook = build_codebook(self.n_tx, self.k)
        self.payload = payload
        self.eh_ids = [e.id for e in sorted(scenario.ehs, key=lambda e: e.id)]
        self.registered: list[str] = []
        self.pending: list[str] = []
        self.session: SeedingSession | None = None
        self.seed_log: dict[int, tuple[int, list[int]]] = {}
        self.violations: list[str] = []

    def _phases(self, medium: Medium, frame: int) -> np.ndarray:
        ref = next((n for n in self.registered if n in self.eh_ids), None)
        if ref is None:
            return np.zeros(self.n_tx)
        return cophase_weights(medium.channel(ref, frame), resolution_bits=medium.sig.phase_resolution_bits)

    def step(self, inbox, frame: int, medium: Medium, fault: bool = False) -> StepResult:
        out: list[ProtocolMessage] = []
        start_state = self.state
        for msg in inbox:
            kind = msg.kind
            if kind == MsgKind.POWER_REQUEST:
                if msg.sender not in self.pending and msg.sender not in self.registered:
                    self.pending.append(msg.sender)
                out.append(ProtocolMessage(MsgKind.IDENT_EXCHANGE, WPT_ID, msg.sender, frame))
                if self.state == WptState.IDLE:
                    self.state = WptState.IDENTIFICATION
            elif kind == MsgKind.CONFIG_ACK:
                if msg.sender in self.pending:
                    self.pending.remove(msg.sender)
                    if msg.sender not in self.registered:
                        self.registered.append(msg.sender)
                if self.state == WptState.IDENTIFICATION and not self.pending:
                    self.state = WptState.POWER_TRANSFER
            elif kind == MsgKind.RFI:
                params: RfiParams = msg.payload
                if self.session is None:
                    bits = min(params.requested_bits_per_frame, self.base_codebook.bits_per_use)
                    cb = PatternCodebook(self.n_tx, self.k, bits)
                    self.session = SeedingSession(msg.sender, params, cb)
                    if msg.sender not in self.registered:
                        self.registered.append(msg.sender)
                if self.state == WptState.POWER_TRANSFER:
                    self.state = WptState.INFO_SEEDING
            elif kind == MsgKind.ERROR_REPORT:
                if self.state == WptState.IDLE:
                    self.violations.append(f"{frame}:ErrorReport in Idle")
                    continue
                self.state = WptState.IDENTIFICATION
                if msg.sender in self.registered:
                    self.registered.remove(msg.sender)
                if msg.sender not in self.pending:
                    self.pending.append(msg.sender)
                resume = (msg.payload or {}).get("resume_bit")
                if self.session is not None and msg.sender == self.session.ir and resume is not None:
                    self.session.cursor = int(resume)
                out.append(ProtocolMessage(MsgKind.IDENT_EXCHANGE, WPT_ID, msg.sender, frame))
            elif kind == MsgKind.STOP_INFO:
                if self.session is not None and msg.sender == self.session.ir:
                    self.session = None
                    if self.state == WptState.INFO_SEEDING:
                        self.state = WptState.POWER_TRANSFER
            elif kind in (MsgKind.POWER_BEACON, MsgKind.SEED_FRAME, MsgKind.IDENT_EXCHANGE):
                self.violations.append(f"{frame}:unexpected {kind.value} from {msg.sender}")
            else:
                self.violations.append(f"{frame}:unknown message kind {kind!r} from {msg.sender}")

        # a suspended seeding session resumes one frame after power transfer is re-established
        if start_state == WptState.POWER_TRANSFER == self.state and self.session is not None:
            self.state = WptState.INFO_SEEDING

        extra: dict[str, Any] = {}
        radiating = self.state in (WptState.POWER_TRANSFER, WptState.INFO_SEEDING) or (
            self.state == WptState.IDENTIFICATION and bool(self.registered)
        )
        if radiating:
            phases = self._phases(medium, frame)
            pattern = self.base_codebook.pattern(0)
            sess = self.session
            seeding = self.state == WptState.INFO_SEEDING and sess is not None and sess.cursor < len(self.payload)
            if seeding:
                b = sess.codebook.bits_per_use
                chunk = self.payload[sess.cursor : sess.cursor + b]
                chunk = chunk + [0] * (b - len(chunk))
                cb = remap_codebook(sess.codebook, sess.params.remap_key, frame, sess.params.pattern_update_period)
                pattern = bits_to_pattern(chunk, cb)
                extra["remap"] = cb.remap
            x = tx_signal(pattern, phases, medium.sig, self.n_tx)
            medium.radiated[frame] = x
            extra["radiated_w"] = float(np.vdot(x, x).real)
            extra["pattern"] = pattern.active
            out.append(
                ProtocolMessage(MsgKind.POWER_BEACON, WPT_ID, BROADCAST, frame, {"power_dbm": medium.sig.total_power_dbm})
            )
            if seeding:
                self.seed_log[frame] = (sess.cursor, chunk)
                out.append(
                    ProtocolMessage(
                        MsgKind.SEED_FRAME, WPT_ID, sess.ir, frame,
                        SeedPayload(x, phases, self.n_tx, self.k, sess.codebook.bits_per_use, sess.cursor),
                    )
                )
                sess.cursor += sess.codebook.bits_per_use
        return StepResult(_kinds(inbox), out, extra=extra)


class EhNode:
    def __init__(self, spec: EhSpec, frame_duration: float):
        self.node_id = spec.id
        self.spec = spec
        self.state = EhState.IDLE
        self.energy_j = 0.0
        self.frame_duration = frame_duration

    def step(self, inbox, frame: int, medium: Medium, fault: bool = False) -> StepResult:
        out: list[ProtocolMessage] = []
        event = _kinds(inbox)
        if fault and self.state == EhState.HARVESTING:
            out.append(ProtocolMessage(MsgKind.ERROR_REPORT, self.node_id, WPT_ID, frame, {}))
            self.state = EhState.REQUESTING
            return StepResult("fault", out, harvested_uw=0.0)
        if self.state == EhState.IDLE:
            if frame >= self.spec.start_frame:
                out.append(ProtocolMessage(MsgKind.POWER_REQUEST, self.node_id, WPT_ID, frame))
                self.state = EhState.REQUESTING
                event = "start" if event == "tick" else event + "+start"
        elif self.state == EhState.CONFIGURING:
            self.state = EhState.HARVESTING
        for msg in inbox:
            if msg.kind == MsgKind.IDENT_EXCHANGE and self.state in (EhState.REQUESTING, EhState.HARVESTING):
                out.append(ProtocolMessage(MsgKind.CONFIG_ACK, self.node_id, WPT_ID, frame))
                self.state = EhState.CONFIGURING
        harvested = 0.0
        if self.state == EhState.HARVESTING and frame in medium.radiated:
            # the EH sees only received RF power, never the pattern or codebook
            p = harvested_power(medium.channel(self.node_id, frame), medium.radiated[frame]).watts
            self.energy_j += p * self.frame_duration
            harvested = p * 1e6
        return StepResult(event, out, harvested_uw=harvested, extra={"energy_j": self.energy_j})


class ChannelEstimate:
    """Handle to the IR's per-frame CSI, optionally with Gaussian error."""

    def __init__(self, medium: Medium, node: str, error_var: float):
        self.medium, self.node, self.error_var = medium, node, error_var

    def at(self, frame: int) -> np.ndarray:
        h = self.medium.channel(self.node, frame)
        if self.error_var == 0:
            return h
        r = rngmod.stream(self.medium.seed, "csi", self.node, frame)
        scale = math.sqrt(self.error_var * float(np.mean(np.abs(h) ** 2)) / 2.0)
        return h + scale * (r.standard_normal(h.shape) + 1j * r.standard_normal(h.shape))


class IrNode:
    def __init__(self, spec: IrSpec, info_bits: int):
        self.node_id = spec.id
        self.spec = spec
        self.state = IrState.SENSING
        self.estimate: ChannelEstimate | None = None
        self.params = RfiParams(
            spec.requested_bits_per_frame, spec.period, spec.an_enabled, spec.remap_key
        )
        self.info_bits = info_bits
        self.sink: list[int] = []
        self.recovering = False
        self.done = False

    def _decode(self, msg: ProtocolMessage, frame: int, medium: Medium) -> list[int]:
        sp: SeedPayload = msg.payload
        y = medium.observe(self.node_id, msg.frame, sp.tx)
        if self.params.an_enabled:
            a = medium.artificial_noise(self.node_id, msg.frame)
            y = cancel_si(y + a, a, medium.sig)
        cb = remap_codebook(
            PatternCodebook(sp.n_tx, sp.k, sp.bits_per_use), self.params.remap_key, msg.frame,
            self.params.pattern_update_period,
        )
        p = ml_detect(y, self.estimate.at(msg.frame), cb, sp.phases, medium.noise_w, medium.sig)
        bits = pattern_to_bits(p, cb)
        end = sp.offset + len(bits)
        if len(self.sink) < end:
            self.sink.extend([0] * (end - len(self.sink)))
        self.sink[sp.offset:end] = bits
        return bits

    def step(self, inbox, frame: int, medium: Medium, fault: bool = False) -> StepResult:
        out: list[ProtocolMessage] = []
        event = _kinds(inbox)
        res = StepResult(event, out, extra={"remap_key": self.params.remap_key})
        if frame < self.spec.start_frame:
            return StepResult("absent", out)
        if fault and self.state == IrState.HARVESTING_INFO and not self.done:
            committed = min(len(self.sink), self.info_bits)
            # the frame being received now is discarded
            out.append(ProtocolMessage(MsgKind.ERROR_REPORT, self.node_id, WPT_ID, frame, {"resume_bit": committed}))
            del self.sink[committed:]
            self.state = IrState.ESTIMATING
            self.recovering = True
            res.event = "fault"
            return res
        beacon = any(m.kind == MsgKind.POWER_BEACON for m in inbox)
        if self.state == IrState.SENSING:
            if beacon and not self.done:
                self.estimate = ChannelEstimate(medium, self.node_id, self.spec.estimation_error_var)
                self.state = IrState.ESTIMATING
        elif self.state == IrState.ESTIMATING:
            if self.recovering:
                if any(m.kind == MsgKind.IDENT_EXCHANGE for m in inbox):
                    out.append(ProtocolMessage(MsgKind.CONFIG_ACK, self.node_id, WPT_ID, frame))
                    self.recovering = False
                    self.state = IrState.RFI_SENT
            else:
                out.append(ProtocolMessage(MsgKind.RFI, self.node_id, WPT_ID, frame, self.params))
                self.state = IrState.RFI_SENT
        elif self.state in (IrState.RFI_SENT, IrState.HARVESTING_INFO):
            seeds = [m for m in inbox if m.kind == MsgKind.SEED_FRAME]
            if seeds:
                self.state = IrState.HARVESTING_INFO
                decoded: list[int] = []
                frames = []
                for m in seeds:
                    decoded += self._decode(m, frame, medium)
                    frames.append(m.frame)
                res.bits = decoded
                res.extra["seed_frames"] = frames
            if not self.done and len(self.sink) >= self.info_bits and self.state == IrState.HARVESTING_INFO:
                del self.sink[self.info_bits:]
                out.append(ProtocolMessage(MsgKind.STOP_INFO, self.node_id, WPT_ID, frame))
                self.done = True
        return res


class EveNode:
    """Passive listener: knows the codebook construction, not the remap key or AN."""

    def __init__(self, spec: EveSpec, an_sources: list[str]):
        self.node_id = spec.id
        self.spec = spec
        self.state = EveState.LISTENING
        self.an_sources = an_sources
        self.decoded: dict[int, list[int]] = {}

    def step(self, inbox, frame: int, medium: Medium, fault: bool = False) -> StepResult:
        seeds = [m for m in inbox if m.kind == MsgKind.SEED_FRAME]
        res = StepResult("overhear" if seeds else "tick")
        bits: list[int] = []
        frames = []
        for m in seeds:
            sp: SeedPayload = m.payload
            y = medium.observe(self.node_id, m.frame, sp.tx)
            for ir in self.an_sources:
                a = medium.artificial_noise(ir, m.frame)
                y = complex(an_mask(y, a, 10.0 ** (self.spec.an_gain_db / 20.0)))
            cb = PatternCodebook(sp.n_tx, sp.k, sp.bits_per_use)
            p = ml_detect(y, medium.channel(self.node_id, m.frame), cb, sp.phases, medium.noise_w, medium.sig)
            got = pattern_to_bits(p, cb)
            self.decoded[m.frame] = got
            bits += got
            frames.append(m.frame)
        if seeds:
            res.bits = bits
            res.extra["seed_frames"] = frames
        return res


def wpt_step(node: WptNode, inbox, frame, medium, fault=False) -> StepResult:
    return node.step(inbox, frame, medium, fault)


def eh_step(node: EhNode, inbox, frame, medium, fault=False) -> StepResult:
    return node.step(inbox, frame, medium, fault)


def ir_step(node: IrNode, inbox, frame, medium, fault=False) -> StepResult:
    return node.step(inbox, frame, medium, fault)


@dataclass
class ScenarioRun:
    trace: Trace
    seeded: list[int]
    decoded: dict[str, list[int]]
    eve_bits: dict[str, tuple[int, int]]  # (correct bits, total bits)
    energy_j: dict[str, float]
    delivered: dict[str, list[ProtocolMessage]]
    wpt: WptNode
    medium: Medium

    @property
    def hash(self) -> str:
        return self.trace.sha256()


def run_scenario(scenario: Scenario, seed: int) -> ScenarioRun:
    medium = Medium(scenario, seed)
    payload = [int(b) for b in rngmod.stream(seed, "payload").integers(0, 2, scenario.info_bits)]
    wpt = WptNode(scenario, payload)
    ehs = [EhNode(s, scenario.frame_duration_s) for s in sorted(scenario.ehs, key=lambda s: s.id)]
    irs = [IrNode(s, scenario.info_bits) for s in sorted(scenario.irs, key=lambda s: s.id)]
    an_irs = [s.id for s in scenario.irs if s.an_enabled]
    eves = [EveNode(s, an_irs) for s in sorted(scenario.eves, key=lambda s: s.id)]
    nodes = [wpt, *ehs, *irs, *eves]
    eve_ids = {e.node_id for e in eves}
    faults = {(f.frame, f.node) for f in scenario.faults}

    trace = Trace()
    delivered: dict[str, list[ProtocolMessage]] = {n.node_id: [] for n in nodes}
    in_flight: list[ProtocolMessage] = []
    for frame in range(scenario.frames):
        arriving = sorted(in_flight, key=ProtocolMessage.sort_key)
        in_flight = []
        for node in nodes:
            nid = node.node_id
            if nid in eve_ids:
                inbox = [m for m in arriving if m.receiver in (nid, BROADCAST) or m.kind == MsgKind.SEED_FRAME]
            else:
                inbox = [m for m in arriving if m.receiver == nid or (m.receiver == BROADCAST and m.sender != nid)]
            delivered[nid].extend(inbox)
            before = node.state
            res = node.step(inbox, frame, medium, (frame, nid) in faults)
            ok = None
            if res.bits is not None and nid != WPT_ID:
                truth = []
                for f in res.extra.get("seed_frames", []):
                    truth += wpt.seed_log[f][1]
                ok = truth == res.bits
                res.extra["truth"] = truth
            trace.append(
                TraceRecord(
                    frame=frame,
                    node=nid,
                    state_before=before.value,
                    event=res.event,
                    state_after=node.state.value,
                    emitted=tuple(m.describe() for m in res.outbox),
                    harvested_uw=res.harvested_uw,
                    bits_decoded=None if res.bits is None else "".join(map(str, res.bits)),
                    detect_ok=ok,
                    extra=res.extra,
                )
            )
            in_flight.extend(res.outbox)

    eve_bits = {}
    for e in eves:
        correct = total = 0
        for f, got in e.decoded.items():
            truth = wpt.seed_log[f][1]
            correct += sum(int(a == b) for a, b in zip(got, truth))
            total += len(truth)
        eve_bits[e.node_id] = (correct, total)
    return ScenarioRun(
        trace=trace,
        seeded=payload,
        decoded={ir.node_id: list(ir.sink) for ir in irs},
        eve_bits=eve_bits,
        energy_j={eh.node_id: eh.energy_j for eh in ehs},
        delivered=delivered,
        wpt=wpt,
        medium=medium,
    )
