"""Identify, characterize and map forced oscillations in multi-rate grid measurements."""

__version__ = "0.1.0"

from .aliasing import AliasObservation, alias_of, feasible_intervals, resolve_candidates, resolve_true_frequency
from .energy import (
    ModeEnergyConfig,
    Scenario,
    classify_scenario,
    correlate_energy_power,
    heatmap_grid,
    mode_energy_percent,
)
from .ingest import ChannelKind, ChannelSet, PhasorChannel, load_channels, slice_window, validate_channel, write_channels
from .modal import count_modes, estimate_mode_frequency, fdd_curves, mode_shape
from .spectral import (
    band_energy_series,
    csd_matrix,
    detrend,
    hilbert_envelope,
    periodogram,
    spectrogram,
    welch_psd,
    yule_walker_psd,
)
from .synth import SynthScenario, gen_ambient, gen_network, gen_pow

__all__ = [name for name in dir() if not name.startswith("_")]
