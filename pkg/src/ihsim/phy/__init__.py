"""Spatial-modulation information seeding and harvesting."""

from .codebook import (
    ENUMERATION_LIMIT,
    ActivationPattern,
    PatternCodebook,
    bits_to_int,
    bits_to_pattern,
    build_codebook,
    int_to_bits,
    pattern_to_bits,
    remap_codebook,
)
from .mutual_info import MiEstimate, fixed_ensemble, mi_monte_carlo, se_bound_combinatorial
from .signal import (
    HarvestedPower,
    SignalConfig,
    an_mask,
    an_waveform,
    cancel_si,
    candidate_means,
    cophase_weights,
    harvested_power,
    ml_detect,
    ml_detect_index,
    rx_sample,
    tx_signal,
)

__all__ = [
    "ENUMERATION_LIMIT", "ActivationPattern", "PatternCodebook", "bits_to_int",
    "bits_to_pattern", "build_codebook", "int_to_bits", "pattern_to_bits",
    "remap_codebook", "MiEstimate", "fixed_ensemble", "mi_monte_carlo",
    "se_bound_combinatorial", "HarvestedPower", "SignalConfig", "an_mask",
    "an_waveform", "cancel_si", "candidate_means", "cophase_weights",
    "harvested_power", "ml_detect", "ml_detect_index", "rx_sample", "tx_signal",
]
