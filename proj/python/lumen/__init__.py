"""Photonic accelerator simulator: device, thermal, quantization and system models."""

from ._lumen import (
    Error,
    MRDesign,
    HeaterSolution,
    achievable_resolution,
    allocate_channels,
    build_coupling_matrix,
    cluster_quantize,
    crosstalk_reduction,
    default_config_toml,
    heterodyne_crosstalk,
    linear_layout,
    naive_solve,
    preset,
    preset_names,
    prune_magnitude,
    simulate_desk,
    sparsity_of,
    ted_solve,
    transmission_at_detuning,
    uniform_quantize,
    weight_to_detuning,
)

__all__ = [name for name in dir() if not name.startswith("_")]
