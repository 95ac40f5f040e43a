"""Online co-evolution of a friction model and tracking gains for a car on a slippery incline."""

from ._core import (
    Action,
    BaselineConfig,
    ComparisonReport,
    ConfigError,
    EmptyWindowError,
    Error,
    ExperimentConfig,
    ModelSettings,
    NonFiniteError,
    NonMonotoneTimeError,
    PathQuery,
    RunResult,
    TerrainParams,
    Track,
    VehicleParams,
    VehicleState,
    baseline_action,
    compare,
    fit_inverse_model,
    kinetic_energy,
    load_config,
    normal_forces,
    parse_config,
    run,
    step,
    tracking_cost,
)

__all__ = [name for name in dir() if not name.startswith("_")]
