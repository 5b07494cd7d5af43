"""Balanced-homodyne noise spectra of a driven optomechanical cavity.

Forward model (closed-form spectra, technical-noise stack, instrument
shaping), two independent numerical oracles, and the inverse problems
used to characterize the device.
"""

from .core import (
    CoefficientSet,
    DriveCondition,
    MechanicalMode,
    OpticalMode,
    SystemParams,
    mech_susceptibility,
    quasi_static_spectrum,
    spectrum_full,
    spring_and_damping,
    squeezing_cross_term,
    transfer_coefficients,
    zero_transduction_angle,
)
from .estimate import (
    EstimationError,
    FitResult,
    ThermometryCurve,
    fit_thermometry,
    homodyne_efficiency_from_tone,
    infer_detuning,
)
from .instrument import (
    QuadratureSetting,
    Scenario,
    SpectrumTrace,
    SqueezingMap,
    assemble_density_map,
    lock_to_quadrature,
    output_spectrum,
    quadrature_to_lock,
    rbw_resample,
    reflection_coefficient,
)
from .noise import (
    AbsorptiveNoiseModel,
    BathModel,
    DetectionChain,
    ExtraModeNoise,
    LaserNoiseModel,
    absorptive_psd,
    apply_detection_chain,
    bath_occupation,
    effective_temperature,
    extra_mode_psd,
    gain_unbalance_correction,
    phase_noise_psd,
)
from .oracle import InputCorrelationMatrix, OracleError, matrix_solve_spectrum, sde_time_domain_psd

__version__ = "0.1.0"
