"""Entropy production statistics of the two-times measurement protocol.

The package computes the atomic measure Q_{nu,t} for finite quantum systems
by four independent routes, checks the modular-theoretic identities behind
the fluctuation relations, and runs chain-length scaling studies on open
spin systems.  See the README for the CLI front end.
"""

from .checks import (
    CheckReport,
    ScalingRow,
    ScalingStudy,
    battery,
    scaling_study,
    threshold_for,
)
from .config import ConfigError, ExperimentConfig, emit_config, load_config, parse_config
from .linalg import (
    DensityMatrix,
    FaithfulnessError,
    HermitianMatrix,
    SpectralResolution,
    spectral_decompose,
)
from .measures import AbsoluteContinuityError, AtomicMeasure, distance_w1, rn_derivative
from .models import (
    OpenSystemModel,
    ReservoirSpec,
    ResourceLimitError,
    SystemModel,
    build_open_system,
    canonical_open_system,
    canonical_two_level,
    two_level_system,
)
from .modular import (
    SandwichMap,
    cesaro_average,
    connes_cocycle,
    dephase,
    relative_entropy,
    relative_modular,
)
from .protocol import (
    JointDistribution,
    NumericalIntegrityError,
    char_function_grid,
    ep_measure,
    joint_distribution,
    protocol_measure,
)

__version__ = "0.1.0"

__all__ = [
    "AbsoluteContinuityError",
    "AtomicMeasure",
    "CheckReport",
    "ConfigError",
    "DensityMatrix",
    "ExperimentConfig",
    "FaithfulnessError",
    "HermitianMatrix",
    "JointDistribution",
    "NumericalIntegrityError",
    "OpenSystemModel",
    "ReservoirSpec",
    "ResourceLimitError",
    "SandwichMap",
    "ScalingRow",
    "ScalingStudy",
    "SpectralResolution",
    "SystemModel",
    "battery",
    "build_open_system",
    "canonical_open_system",
    "canonical_two_level",
    "cesaro_average",
    "char_function_grid",
    "connes_cocycle",
    "dephase",
    "distance_w1",
    "emit_config",
    "ep_measure",
    "joint_distribution",
    "load_config",
    "parse_config",
    "protocol_measure",
    "relative_entropy",
    "relative_modular",
    "rn_derivative",
    "scaling_study",
    "spectral_decompose",
    "threshold_for",
    "two_level_system",
]
