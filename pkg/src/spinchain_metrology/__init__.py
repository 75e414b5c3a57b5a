"""Thermal-state magnetometry of periodic XX/XY spin chains."""

from .model import ChainSpec, ModeTable, Mode, mode_table, momentum
from .model import dispersion_xx, dispersion_xy, bogoliubov_angle, occupation
from .thermo import (
    DEFAULT_C,
    CFitResult,
    SensitivityReport,
    fit_c,
    free_energy,
    log_partition,
    magnetization_z,
    qfi_h,
    qfi_h_approx,
    qfi_j,
    qfi_j_approx,
    susceptibility_h,
)
from .estimators import EstimatorSpec, estimator_sensitivity, jz_variance_xx
from .oracle import (
    DenseThermalState,
    OracleResourceError,
    build_hamiltonian,
    observable_moments,
    qfi_spectral,
    sld,
    thermal_state,
)
from .protocol import (
    InversionResult,
    ProtocolConfig,
    ProtocolTrace,
    ScalingResult,
    invert_magnetization,
    read_traces,
    run_ensemble,
    run_protocol,
    sample_jz,
    scaling_exponent,
    write_traces,
)

__all__ = [
    "ChainSpec",
    "Mode",
    "ModeTable",
    "mode_table",
    "momentum",
    "dispersion_xx",
    "dispersion_xy",
    "bogoliubov_angle",
    "occupation",
    "DEFAULT_C",
    "CFitResult",
    "SensitivityReport",
    "fit_c",
    "free_energy",
    "log_partition",
    "magnetization_z",
    "qfi_h",
    "qfi_h_approx",
    "qfi_j",
    "qfi_j_approx",
    "susceptibility_h",
    "EstimatorSpec",
    "estimator_sensitivity",
    "jz_variance_xx",
    "DenseThermalState",
    "OracleResourceError",
    "build_hamiltonian",
    "observable_moments",
    "qfi_spectral",
    "sld",
    "thermal_state",
    "InversionResult",
    "ProtocolConfig",
    "ProtocolTrace",
    "ScalingResult",
    "invert_magnetization",
    "read_traces",
    "run_ensemble",
    "run_protocol",
    "sample_jz",
    "scaling_exponent",
    "write_traces",
]

__version__ = "0.1.0"
