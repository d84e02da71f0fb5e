"""Shock propagation and systemic-risk indices on firm-level production networks."""

__version__ = "0.1.0"

from .calibration import (
    EssentialityMatrix,
    FirmProductionFunction,
    InputPartition,
    ProductionFunctionSet,
    UnknownSector,
    calibrate,
    classify_inputs,
)
from .indices import (
    IndexRow,
    IndexTable,
    MissingTotal,
    NoEmploymentData,
    batch_indices,
    co2_shares,
    esri,
    esri_of,
    ew_esri,
    ew_esri_of,
    eliminated_co2,
)
from .network import (
    DanglingEdge,
    DuplicateFirmId,
    Firm,
    MissingFile,
    NetworkError,
    NonPositiveWeight,
    ProductionNetwork,
    SchemaError,
    SelfLoop,
    StrengthTable,
    SupplyEdge,
    ValidationReport,
    compute_strengths,
    load_network,
    validate,
    write_network,
)
from .propagation import (
    EquilibriumState,
    InvalidScenario,
    LevelState,
    ShockScenario,
    initial_state,
    production_step,
    propagate,
)
from .strategies import (
    CurvePoint,
    Heuristic,
    InsufficientPoints,
    RegimeFit,
    StrategyCurve,
    fit_rank_regimes,
    rank_firms,
    run_heuristic,
    run_strategy,
)
from .synth import (
    InfeasibleParams,
    SynthParams,
    essentiality_rows,
    generate,
    tail_exponent_estimate,
    top_strength_share,
    write_essentiality,
)

__all__ = [
    "__version__",
    "EssentialityMatrix",
    "FirmProductionFunction",
    "InputPartition",
    "ProductionFunctionSet",
    "UnknownSector",
    "calibrate",
    "classify_inputs",
    "IndexRow",
    "IndexTable",
    "MissingTotal",
    "NoEmploymentData",
    "batch_indices",
    "co2_shares",
    "esri",
    "esri_of",
    "ew_esri",
    "ew_esri_of",
    "eliminated_co2",
    "DanglingEdge",
    "DuplicateFirmId",
    "Firm",
    "MissingFile",
    "NetworkError",
    "NonPositiveWeight",
    "ProductionNetwork",
    "SchemaError",
    "SelfLoop",
    "StrengthTable",
    "SupplyEdge",
    "ValidationReport",
    "compute_strengths",
    "load_network",
    "validate",
    "write_network",
    "EquilibriumState",
    "InvalidScenario",
    "LevelState",
    "ShockScenario",
    "initial_state",
    "production_step",
    "propagate",
    "CurvePoint",
    "Heuristic",
    "InsufficientPoints",
    "RegimeFit",
    "StrategyCurve",
    "fit_rank_regimes",
    "rank_firms",
    "run_heuristic",
    "run_strategy",
    "InfeasibleParams",
    "SynthParams",
    "essentiality_rows",
    "generate",
    "tail_exponent_estimate",
    "top_strength_share",
    "write_essentiality",
]
