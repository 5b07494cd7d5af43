"""Environment and technical noise beyond the ideal single-mode model.

Covers the thermal bath (structural damping, optical-absorption heating),
a lumped background mechanical mode, laser frequency noise, the
phenomenological kappa-fluctuation ("absorptive") noise, the detection
chain, and the amplifier gain-unbalance correction.

All spectral contributions are shot-noise normalized and nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, k as k_B

from .core import (
    MechanicalMode,
    SystemParams,
    spectrum_full,
    zero_transduction_angle,
)

__all__ = [
    "BathModel",
    "ExtraModeNoise",
    "LaserNoiseModel",
    "AbsorptiveNoiseModel",
    "DetectionChain",
    "bath_occupation",
    "effective_temperature",
    "phase_noise_psd",
    "absorptive_psd",
    "extra_mode_psd",
    "apply_detection_chain",
    "gain_unbalance_correction",
]

ABSORPTIVE_REF_OMEGA = 2 * np.pi * 1e6  # reference frequency of the amp_coeff


@dataclass(frozen=True)
class BathModel:
    """Thermal bath: base temperature plus photon-dependent heating.

    Structural damping is assumed throughout: gamma_i is spectrally flat
    and the occupation is evaluated per frequency, n(omega) = k_B T / (hbar omega).
    """

    t_b0: float
    c0: float = 0.0

    def __post_init__(self):
        if not self.t_b0 > 0:
            raise ValueError("t_b0 must be positive")
        if self.c0 < 0:
            raise ValueError("c0 must be nonnegative")


@dataclass(frozen=True)
class ExtraModeNoise:
    """Single lumped mechanical resonance standing in for the thermal
    background of all other (more weakly coupled) modes."""

    omega_lump: float
    q_lump: float
    g0_lump: float

    def __post_init__(self):
        if min(self.omega_lump, self.q_lump) <= 0 or self.g0_lump < 0:
            raise ValueError("lumped-mode parameters must be positive")

    @property
    def gamma_lump(self):
        return self.omega_lump / self.q_lump


@dataclass(frozen=True)
class LaserNoiseModel:
    """Flat laser frequency-noise PSD (rad^2 Hz); intensity noise is zero."""

    s_omega_omega: float

    def __post_init__(self):
        if self.s_omega_omega < 0:
            raise ValueError("s_omega_omega must be nonnegative")


@dataclass(frozen=True)
class AbsorptiveNoiseModel:
    """Cavity-linewidth fluctuation noise: amplitude per intracavity photon
    at 1 MHz, with a fixed omega^(-1/2) spectrum, orthogonal in quadrature
    to the mechanical transduction."""

    amp_coeff: float

    def __post_init__(self):
        if self.amp_coeff < 0:
            raise ValueError("amp_coeff must be nonnegative")


@dataclass(frozen=True)
class DetectionChain:
    """Cascade of power efficiencies between cavity output and homodyne record.

    eta_12 is the input-side circulator pass and does not attenuate the
    reflected signal, so it stays out of eta_setup.  Dark noise is quoted
    in dB below shot noise and can optionally be folded in as an
    equivalent efficiency.
    """

    eta_cp: float
    eta_12: float
    eta_23: float
    eta_3h: float
    eta_hd: float
    dark_ratio_db: float = np.inf
    gain_slope_volt: float = -0.0096

    def __post_init__(self):
        for name in ("eta_cp", "eta_12", "eta_23", "eta_3h", "eta_hd"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")

    @property
    def eta_setup(self):
        return self.eta_cp * self.eta_23 * self.eta_3h * self.eta_hd

    @property
    def eta_dark(self):
        """Equivalent efficiency of the dark-noise floor: white electronic
        noise a factor 10^(dB/10) below shot acts like 1/(1 + that) loss."""
        if np.isinf(self.dark_ratio_db):
            return 1.0
        return 1.0 / (1.0 + 10.0 ** (-self.dark_ratio_db / 10.0))


def bath_occupation(omega, t_b):
    """High-temperature bath occupation k_B T / (hbar omega).

    The structural-damping correlators are specified directly with this
    per-frequency occupation (no Bose form, no +1/2); rejects omega <= 0.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if not t_b > 0:
        raise ValueError("t_b must be positive")
    return k_B * t_b / (hbar * omega)


def effective_temperature(bath: BathModel, n_c):
    """Bath temperature including intracavity-photon heating: T_b0 + c0 n_c."""
    if np.any(np.asarray(n_c) < 0):
        raise ValueError("n_c must be nonnegative")
    return bath.t_b0 + bath.c0 * np.asarray(n_c, dtype=float)


def phase_noise_psd(omega, theta, params: SystemParams, laser: LaserNoiseModel):
    """Detected noise from laser phase noise, shot-noise normalized.

    The common phase fluctuation of signal and LO cancels except through
    the dispersion of the cavity reflection r(omega) around the carrier:

        F(omega) ~ e^{-i theta} (r(omega) - r(0)) - e^{i theta} conj(r(-omega) - r(0))

    and the contribution is |F|^2 S_phiphi with S_phiphi = S_ww / omega^2.
    With a flat S_ww this is flat in omega for the bare cavity, vanishes
    for a dispersionless reflector, and vanishes at theta = 0 on resonance.
    """
    if laser.s_omega_omega == 0:
        return np.zeros_like(np.asarray(omega, dtype=float))
    # local import; instrument depends on this module for the noise stack
    from .instrument import reflection_coefficient

    omega = np.asarray(omega, dtype=float)
    delta = params.drive.delta
    r = lambda w: reflection_coefficient(w, params.optical, delta)
    combo = np.exp(-1j * theta) * (r(omega) - r(0.0)) - np.exp(1j * theta) * np.conj(
        r(-omega) - r(0.0)
    )
    # |alpha_in|^2: input photon flux sustaining n_c at this detuning
    flux = params.drive.n_c * (delta**2 + (params.optical.kappa / 2) ** 2) / params.optical.kappa_e
    s_phiphi = laser.s_omega_omega / omega**2
    return flux * np.abs(combo) ** 2 * s_phiphi


def absorptive_psd(omega, theta, n_c, model: AbsorptiveNoiseModel, params: SystemParams = None):
    """Phenomenological kappa-fluctuation noise, shot-noise normalized.

    amp_coeff * n_c * sqrt(omega_ref/omega) * cos^2(theta - theta_perp),
    concentrated in the quadrature orthogonal to the mechanical
    transduction (theta_perp is the zero-transduction angle, ~0 for
    small detuning).  omega_ref is fixed at 2 pi * 1 MHz.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if params is None:
        theta_perp = 0.0
    else:
        theta_perp = zero_transduction_angle(params.mech.omega_m0, params)
    return (
        model.amp_coeff
        * n_c
        * np.sqrt(ABSORPTIVE_REF_OMEGA / omega)
        * np.cos(theta - theta_perp) ** 2
    )


def extra_mode_psd(omega, theta, params: SystemParams, lump: ExtraModeNoise, nbar_lump):
    """Thermal contribution of the lumped background mode.

    Evaluates the six-term thermal part of the full spectrum for a system
    sharing the optical mode and drive but with the lumped mechanical
    parameters; the low-frequency tail falls off as 1/omega.
    """
    if lump.g0_lump == 0:
        return np.zeros_like(np.asarray(omega, dtype=float))
    mech = MechanicalMode(
        omega_m0=lump.omega_lump, gamma_i=lump.gamma_lump, g0=lump.g0_lump
    )
    lump_params = SystemParams.build(
        params.optical, mech, params.drive.delta, params.drive.n_c
    )
    _, _, s_thermal = spectrum_full(omega, theta, lump_params, nbar_lump)
    return s_thermal


def apply_detection_chain(s_out, chain: DetectionChain, eta_kappa, include_dark=False):
    """Mix the cavity-output spectrum with uncorrelated vacuum:

        s_det = eta_tot * s_out + (1 - eta_tot),  eta_tot = eta_setup * eta_kappa

    Vacuum (s_out = 1) is a fixed point for any efficiency.  With
    ``include_dark`` the dark-noise-equivalent efficiency is folded in
    multiplicatively; by default it is not, because a tone-calibrated
    eta_hd already absorbs the dark-noise penalty.
    """
    s_out = np.asarray(s_out, dtype=float)
    if np.any(s_out < 0):
        raise ValueError("s_out must be nonnegative")
    if not 0 < eta_kappa <= 1:
        raise ValueError("eta_kappa must lie in (0, 1]")
    eta_tot = chain.eta_setup * eta_kappa
    if include_dark:
        eta_tot *= chain.eta_dark
    return eta_tot * s_out + (1.0 - eta_tot)


def gain_unbalance_correction(s_meas, v_dc, slope_volt=-0.0096):
    """Undo the DC-level-dependent amplifier gain: s = s_meas / (1 + slope * V_DC).

    The slope is per volt and small (|slope * V_DC| of order 1% at the
    +-1.6 V swings encountered); positive V_DC gives a corrected PSD above
    the measured one, so the correction can only reduce reported
    squeezing.  Rejects voltages outside the calibrated swing or a
    non-positive denominator.
    """
    if abs(v_dc) > 1.6:
        raise ValueError("v_dc outside the calibrated +-1.6 V swing")
    denom = 1.0 + v_dc * slope_volt
    if denom <= 0:
        raise ValueError("gain correction denominator must stay positive")
    return np.asarray(s_meas, dtype=float) / denom
