"""Seeded experiment runners producing CSV-ready tables.

Every sweep point draws from its own RNG stream keyed by the point's
coordinates, so results do not depend on sweep order, on which other points
are present, or on how many worker threads run (``IHSIM_THREADS``).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..channel import LinkGeometry, draw_channels, noise_power_w, w_to_dbm
from ..errors import ValidationError
from ..geometry import p_los_analytic, p_los_empirical
from ..phy import (
    ENUMERATION_LIMIT,
    SignalConfig,
    an_mask,
    build_codebook,
    cancel_si,
    candidate_means,
    int_to_bits,
    mi_monte_carlo,
    remap_codebook,
    se_bound_combinatorial,
)
from ..phy.signal import quantize_phases
from ..protocol import EhSpec, FaultSpec, IrSpec, Scenario, run_scenario
from ..rng import stream
from .config import ExperimentConfig
from .results import ExperimentResult, mean_se

LOS_COLUMNS = ("ocr", "d", "p_los_analytic", "p_los_empirical", "se")
HARVEST_COLUMNS = (
    "ocr", "d", "k", "n_patterns", "mean_dbm", "mean_dbm_se",
    "spread_max_min_db", "spread_std_db", "spread_se_db",
)
HARVEST_PATTERN_COLUMNS = ("ocr", "d", "k", "pattern", "mean_dbm", "se_db")
SE_COLUMNS = ("ocr", "k", "se_combinatorial", "mi_estimate", "se", "estimator", "codebook_bits")
PROTOCOL_COLUMNS = (
    "fault_rate", "runs", "faults_mean", "faults_se", "reentries_mean", "reentries_se",
    "latency_frames_mean", "latency_frames_se", "decoded_ok_frac", "decoded_ok_se",
)
SECRECY_COLUMNS = (
    "an_over_noise_db", "remap_period", "bits",
    "ir_bit_accuracy", "ir_bit_se", "eve_bit_accuracy", "eve_bit_se",
    "ir_pattern_error", "ir_pattern_se", "eve_pattern_error", "eve_pattern_se",
)


def thread_count() -> int:
    """Worker cap from ``IHSIM_THREADS``; 0 or unset means one per CPU."""
    raw = os.environ.get("IHSIM_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = -1
    if n < 0:
        raise ValidationError(f"IHSIM_THREADS must be a non-negative integer, got {raw!r}", ["IHSIM_THREADS"])
    return n if n > 0 else (os.cpu_count() or 1)


def pmap(fn: Callable, items: Iterable) -> list:
    items = list(items)
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _key(v: float) -> str:
    return repr(float(v))


# -- line of sight -----------------------------------------------------------

def exp_los(cfg: ExperimentConfig) -> ExperimentResult:
    points = [(o, d) for o in sorted(cfg.sweep_ocr) for d in sorted(cfg.d_list)]

    def run(pt):
        ocr, d = pt
        spec = cfg.obstacle_spec(ocr)
        est = p_los_empirical(spec, d, cfg.n_trials, stream(cfg.seed, "los", _key(ocr), _key(d)))
        return (ocr, d, p_los_analytic(spec, d), est.p, est.se)

    res = ExperimentResult(LOS_COLUMNS, name="los")
    for row in pmap(run, points):
        res.add(*row)
    return res


# -- harvested power ---------------------------------------------------------

def random_patterns(n_tx: int, k: int, count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    return [tuple(sorted(int(i) for i in rng.choice(n_tx, k, replace=False))) for _ in range(count)]


@dataclass
class HarvestTables:
    summary: ExperimentResult
    patterns: ExperimentResult


def harvest_dbm(h: np.ndarray, phases: np.ndarray, pattern: tuple[int, ...], sig: SignalConfig) -> np.ndarray:
    """Per-realisation harvested power (dBm) for ``pattern``; ``h`` is ``(R, n_tx)``."""
    amp = math.sqrt(sig.total_power_w / len(pattern))
    c = h * np.exp(1j * phases)
    rx = amp * c[:, list(pattern)].sum(axis=1)
    return w_to_dbm(np.abs(rx) ** 2)


def exp_harvest_tables(cfg: ExperimentConfig) -> HarvestTables:
    ccfg, sig = cfg.channel_config(), cfg.signal_config()
    pats = {k: random_patterns(cfg.n_tx, k, cfg.harvest_patterns, stream(cfg.seed, "harvest-patterns", k))
            for k in cfg.k_list}
    points = [(o, d) for o in sorted(cfg.sweep_ocr) for d in sorted(cfg.d_list)]

    def run(pt):
        ocr, d = pt
        spec = cfg.obstacle_spec(ocr)
        geom = LinkGeometry.at_distance(d, cfg.terminal_height)
        # common random numbers: every pattern and every distance sees the same
        # uniforms, shadowing and fading draws; only geometry and subset differ
        h, *_ = draw_channels(geom, spec, ccfg, stream(cfg.seed, "harvest", _key(ocr)), cfg.n_trials)
        phases = quantize_phases(-np.angle(h), sig.phase_resolution_bits)
        summary, detail = [], []
        for k in cfg.k_list:
            dbm = np.array([harvest_dbm(h, phases, p, sig) for p in pats[k]])  # (patterns, R)
            means = dbm.mean(axis=1)
            ses = dbm.std(axis=1, ddof=1) / math.sqrt(dbm.shape[1]) if dbm.shape[1] > 1 else np.zeros(len(means))
            centred = dbm - dbm.mean(axis=0, keepdims=True)
            paired_se = float(np.sqrt(np.mean(centred.var(axis=1, ddof=1) / dbm.shape[1]))) if dbm.shape[1] > 1 else 0.0
            # deviations from the first mean, so identical means give exactly 0
            spread_std = float((means - means[0]).std(ddof=1)) if len(means) > 1 else 0.0
            m, se = mean_se(list(means))
            summary.append((ocr, d, k, len(means), m, float(ses.mean()), float(means.max() - means.min()),
                            spread_std, paired_se))
            for p, mu, s in zip(pats[k], means, ses):
                detail.append((ocr, d, k, "-".join(map(str, p)), float(mu), float(s)))
        return summary, detail

    summary = ExperimentResult(HARVEST_COLUMNS, name="harvest")
    detail = ExperimentResult(HARVEST_PATTERN_COLUMNS, name="harvest_patterns")
    for s_rows, d_rows in pmap(run, points):
        for r in s_rows:
            summary.add(*r)
        for r in d_rows:
            detail.add(*r)
    return HarvestTables(summary, detail)


def exp_harvest(cfg: ExperimentConfig) -> ExperimentResult:
    return exp_harvest_tables(cfg).summary


# -- spectral efficiency -----------------------------------------------------

STRATA = ((True, True), (True, False), (False, True), (False, False))


def _stratum_weights(cfg: ExperimentConfig, ocr: float) -> dict[tuple[bool, bool], float]:
    spec = cfg.obstacle_spec(ocr)
    pe, pi = p_los_analytic(spec, cfg.d_energy), p_los_analytic(spec, cfg.d_info)
    return {
        (True, True): pe * pi, (True, False): pe * (1 - pi),
        (False, True): (1 - pe) * pi, (False, False): (1 - pe) * (1 - pi),
    }


def exp_se(cfg: ExperimentConfig) -> ExperimentResult:
    """Spectral efficiency versus the number of active antennas.

    The MI estimate is stratified on the LoS state of the WPT-EH link (which
    sets the phase shifters) and the WPT-IR link. Each stratum's MI is
    estimated once per k from channels drawn with that LoS state forced;
    an OCR value only changes the stratum weights, which are the analytic
    LoS probabilities. Codebooks beyond the enumeration limit report the
    combinatorial bound scaled by the probability that the channel is not
    degenerate (both links symmetric LoS).
    """
    ccfg, sig = cfg.channel_config(), cfg.signal_config()
    n0 = noise_power_w(ccfg)
    g_eh = LinkGeometry.at_distance(cfg.d_energy, cfg.terminal_height)
    g_ir = LinkGeometry.at_distance(cfg.d_info, cfg.terminal_height)
    weights = {o: _stratum_weights(cfg, o) for o in sorted(cfg.sweep_ocr)}
    needed = [s for s in STRATA if any(w[s] > 0 for w in weights.values())]

    def ensemble_for(stratum):
        eh_los, ir_los = stratum

        def draw(rng, n):
            h_eh, *_ = draw_channels(g_eh, eh_los, ccfg, rng, n)
            h_ir, *_ = draw_channels(g_ir, ir_los, ccfg, rng, n)
            return h_ir, quantize_phases(-np.angle(h_eh), sig.phase_resolution_bits)

        return draw

    feasible = [k for k in cfg.k_list if build_codebook(cfg.n_tx, k).size <= ENUMERATION_LIMIT]
    jobs = [(k, s) for k in feasible for s in needed]

    def run(job):
        k, s = job
        cb = build_codebook(cfg.n_tx, k)
        est = mi_monte_carlo(ensemble_for(s), cb, n0, cfg.n_trials, cfg.se_noise_draws,
                             stream(cfg.seed, "se", k, int(s[0]), int(s[1])), sig)
        return job, est

    mi = dict(pmap(run, jobs))
    res = ExperimentResult(SE_COLUMNS, name="se")
    for ocr, w in weights.items():
        for k in cfg.k_list:
            bound = se_bound_combinatorial(cfg.n_tx, k)
            bits = build_codebook(cfg.n_tx, k).bits_per_use
            if k in feasible:
                val = math.fsum(w[s] * mi[(k, s)].bits for s in needed)
                se = math.sqrt(math.fsum((w[s] * mi[(k, s)].se) ** 2 for s in needed))
                res.add(ocr, k, bound, val, se, "mi", bits)
            else:
                degenerate = w[(True, True)] if cfg.symmetric_los else 0.0
                res.add(ocr, k, bound, bound * (1.0 - degenerate), 0.0, "weighted_bound", bits)
    return res


# -- protocol ----------------------------------------------------------------

def base_scenario(cfg: ExperimentConfig, faults=()) -> Scenario:
    channel = cfg.channel_config()
    return Scenario(
        frames=cfg.protocol_frames,
        n_tx=cfg.n_tx,
        ocr=cfg.ocr,
        total_power_dbm=cfg.total_power_dbm,
        an_power_dbm=cfg.an_power_dbm,
        si_residual_db=cfg.si_residual_db,
        channel={
            "carrier_freq": channel.carrier_freq, "element_spacing": channel.element_spacing,
            "array_gain_dbi": channel.array_gain_dbi, "shadow_sigma_db": channel.shadow_sigma_db,
            "angle_offset_sigma": channel.angle_offset_sigma, "corr_coeff": channel.corr_coeff,
            "rician_k_db": channel.rician_k_db, "subcarrier_bw": channel.subcarrier_bw,
            "noise_figure_db": channel.noise_figure_db,
        },
        obstacles={
            "radius_min": cfg.radius_m[0], "radius_max": cfg.radius_m[1],
            "height_min": cfg.height_m[0], "height_max": cfg.height_m[1],
            "area": tuple(cfg.area_m), "terminal_height": cfg.terminal_height, "endcap": cfg.endcap,
        },
        ehs=[EhSpec(id="eh0", distance_m=cfg.d_energy)],
        irs=[IrSpec(id="ir0", distance_m=cfg.d_info, start_frame=10, pattern_update_period=10,
                    remap_key=cfg.secrecy_remap_key)],
        faults=list(faults),
    )


@dataclass
class RunStats:
    faults: int
    reentries: int
    latencies: list[int]
    decoded_ok: bool


def run_stats(run) -> RunStats:
    wpt = run.trace.for_node("wpt")
    entries = sum(1 for r in wpt if r.state_after == "Identification" and r.state_before != "Identification")
    ir = run.trace.for_node("ir0")
    faults = [r.frame for r in ir if r.event == "fault"]
    latencies = []
    for f in faults:
        back = next((r.frame for r in ir if r.frame > f and r.state_before != "HarvestingInfo"
                     and r.state_after == "HarvestingInfo"), None)
        if back is not None:
            latencies.append(back - f)
    return RunStats(len(faults), max(0, entries - 1), latencies, run.decoded["ir0"] == run.seeded)


@dataclass
class ProtocolOutputs:
    result: ExperimentResult
    traces: dict[str, str]  # label -> CSV text


def exp_protocol_outputs(cfg: ExperimentConfig) -> ProtocolOutputs:
    golden = run_scenario(base_scenario(cfg), cfg.seed)
    traces = {"golden": golden.trace.to_csv()}

    def run(job):
        rate, i = job
        r = stream(cfg.seed, "protocol-run", _key(rate), i)
        run_seed = int(r.integers(0, 1 << 63))
        hits = np.flatnonzero(r.random(cfg.protocol_frames) < rate)
        sc = base_scenario(cfg, [FaultSpec(frame=int(f), node="ir0") for f in hits])
        out = run_scenario(sc, run_seed)
        return job, run_stats(out), (out.trace.to_csv() if i == 0 else None)

    jobs = [(rate, i) for rate in cfg.protocol_fault_rates for i in range(cfg.n_trials)]
    done = pmap(run, jobs)
    res = ExperimentResult(PROTOCOL_COLUMNS, name="protocol")
    for rate in cfg.protocol_fault_rates:
        stats = [s for (rt, _), s, _ in done if rt == rate]
        for (rt, i), _, text in done:
            if rt == rate and text is not None:
                traces[f"rate{_key(rate)}"] = text
        lat = [x for s in stats for x in s.latencies]
        fm, fse = mean_se([s.faults for s in stats])
        rm, rse = mean_se([s.reentries for s in stats])
        lm, lse = mean_se(lat) if lat else (None, None)
        om, ose = mean_se([float(s.decoded_ok) for s in stats])
        res.add(rate, len(stats), fm, fse, rm, rse, lm, lse, om, ose)
    return ProtocolOutputs(res, traces)


def exp_protocol(cfg: ExperimentConfig) -> ExperimentResult:
    return exp_protocol_outputs(cfg).result


# -- secrecy -----------------------------------------------------------------

def _cn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((2, *shape))
    return math.sqrt(var / 2.0) * (z[0] + 1j * z[1])


def secrecy_point(cfg: ExperimentConfig, an_over_noise_db, period) -> tuple:
    """IR vs eavesdropper over ``trials`` frames of NLoS unit-gain channels.

    Channels, noise, data bits and the AN waveform come from streams that do
    not depend on the sweep point, so every point sees the same draws.
    """
    frames = cfg.n_trials
    n, k = cfg.secrecy_n_tx, min(cfg.secrecy_k, cfg.secrecy_n_tx)
    cb = build_codebook(n, k)
    b = cb.bits_per_use
    sig = SignalConfig(
        total_power_dbm=cfg.total_power_dbm,
        si_residual_db=-math.inf if cfg.si_residual_db is None else cfg.si_residual_db,
    )
    n0 = sig.total_power_w / 10.0 ** (cfg.secrecy_snr_db / 10.0)
    h_ir = _cn(stream(cfg.seed, "secrecy", "h_ir"), (frames, n))
    n_ir = _cn(stream(cfg.seed, "secrecy", "n_ir"), (frames,), n0)
    if cfg.secrecy_eve_colocated:
        h_eve, n_eve = h_ir, n_ir
    else:
        h_eve = _cn(stream(cfg.seed, "secrecy", "h_eve"), (frames, n))
        n_eve = _cn(stream(cfg.seed, "secrecy", "n_eve"), (frames,), n0)
    values = stream(cfg.seed, "secrecy", "bits").integers(0, cb.size, frames)
    period_f = math.inf if period is None else period
    cbs = [remap_codebook(cb, cfg.secrecy_remap_key, f, period_f) for f in range(frames)]
    sent = np.array([c.permute(int(v)) for c, v in zip(cbs, values)])
    zeros = np.zeros(n)
    mu_ir = candidate_means(h_ir, cb, zeros, sig)
    mu_eve = mu_ir if cfg.secrecy_eve_colocated else candidate_means(h_eve, cb, zeros, sig)
    rows = np.arange(frames)
    y_ir = mu_ir[rows, sent] + n_ir
    y_eve = mu_eve[rows, sent] + n_eve
    if an_over_noise_db is not None:
        a = _cn(stream(cfg.seed, "secrecy", "an"), (frames,), n0 * 10.0 ** (an_over_noise_db / 10.0))
        y_ir = cancel_si(y_ir + a, a, sig)
        y_eve = an_mask(y_eve, a)
    det_ir = np.argmin(np.abs(y_ir[:, None] - mu_ir) ** 2, axis=1)
    det_eve = np.argmin(np.abs(y_eve[:, None] - mu_eve) ** 2, axis=1)

    def accuracy(decoded_values):
        per_frame = []
        for v, d in zip(values, decoded_values):
            truth, got = int_to_bits(int(v), b), int_to_bits(int(d), b)
            per_frame.append(sum(x == y for x, y in zip(truth, got)) / b if b else 1.0)
        return mean_se(per_frame)

    ir_vals = [c.unpermute(int(d)) for c, d in zip(cbs, det_ir)]
    ir_acc = accuracy(ir_vals)
    eve_acc = accuracy(det_eve)  # no key: identity mapping
    ir_pe = mean_se((det_ir != sent).astype(float).tolist())
    eve_pe = mean_se((det_eve != sent).astype(float).tolist())
    return (an_over_noise_db, period, frames * b, *ir_acc, *eve_acc, *ir_pe, *eve_pe)


def exp_secrecy(cfg: ExperimentConfig) -> ExperimentResult:
    points = [(a, p) for a in cfg.secrecy_an_over_noise_db for p in cfg.secrecy_remap_periods]
    res = ExperimentResult(SECRECY_COLUMNS, name="secrecy")
    for row in pmap(lambda pt: secrecy_point(cfg, *pt), points):
        res.add(*row)
    return res


RUNNERS = {"los": exp_los, "harvest": exp_harvest, "se": exp_se, "protocol": exp_protocol, "secrecy": exp_secrecy}


def run_experiment(cfg: ExperimentConfig, out: str | Path) -> list[Path]:
    """Run ``cfg.experiment`` and write its CSV(s); returns the paths written."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    written = [out]
    name = cfg.experiment.value
    if name == "harvest":
        tables = exp_harvest_tables(cfg)
        tables.summary.write_csv(out)
        p = out.with_suffix(".patterns.csv")
        tables.patterns.write_csv(p)
        written.append(p)
    elif name == "protocol":
        outs = exp_protocol_outputs(cfg)
        outs.result.write_csv(out)
        for label, text in outs.traces.items():
            p = out.with_suffix(f".trace.{label}.csv")
            p.write_bytes(text.encode("utf-8"))
            written.append(p)
    else:
        RUNNERS[name](cfg).write_csv(out)
    return written
