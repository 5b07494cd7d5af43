"""Frequency-domain model of a linearized, driven optomechanical cavity.

Single optical mode (total linewidth ``kappa``, waveguide-coupled at rate
``kappa_e``) dispersively coupled to one mechanical mode.  Everything is
expressed in zero-point units (positions in units of x_zpf, spectra
normalized to the shot-noise level of an ideal coherent beam), so no
effective mass ever enters.

All frequencies and rates are angular (rad/s) unless a name says ``_hz``.
Evaluation frequencies ``omega`` may be scalars or numpy arrays; every
function in this module is vectorized over ``omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OpticalMode",
    "MechanicalMode",
    "DriveCondition",
    "SystemParams",
    "CoefficientSet",
    "mech_susceptibility",
    "spring_and_damping",
    "transfer_coefficients",
    "spectrum_full",
    "quasi_static_spectrum",
    "squeezing_cross_term",
    "zero_transduction_angle",
]

_REL_TOL = 1e-12


@dataclass(frozen=True)
class OpticalMode:
    """Optical resonance: carrier frequency and decay rates (rad/s).

    ``kappa`` is the total energy decay rate, ``kappa_e`` the extrinsic
    (waveguide) part.  The intrinsic rate is ``kappa_i = kappa - kappa_e``.
    """

    omega_o: float
    kappa: float
    kappa_e: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.kappa_e <= self.kappa:
            raise ValueError("kappa_e must lie in (0, kappa]")

    @property
    def kappa_i(self):
        return self.kappa - self.kappa_e

    @property
    def eta_kappa(self):
        """Coupling efficiency kappa_e/kappa, in (0, 1]."""
        return self.kappa_e / self.kappa

    @property
    def q_optical(self):
        return self.omega_o / self.kappa


@dataclass(frozen=True)
class MechanicalMode:
    """Mechanical resonance: bare frequency, intrinsic damping, vacuum coupling."""

    omega_m0: float
    gamma_i: float
    g0: float

    def __post_init__(self):
        if not self.omega_m0 > 0:
            raise ValueError("omega_m0 must be positive")
        if not self.gamma_i > 0:
            # gamma_i = 0 would make the mechanical susceptibility singular
            raise ValueError("gamma_i must be strictly positive")
        if not self.g0 >= 0:
            raise ValueError("g0 must be nonnegative")

    @property
    def q_m(self):
        return self.omega_m0 / self.gamma_i


@dataclass(frozen=True)
class DriveCondition:
    """Laser drive: detuning (red positive), photon number, derived rates."""

    delta: float
    n_c: float
    g: float
    gamma_meas: float

    @classmethod
    def from_photon_number(cls, delta, n_c, mech: MechanicalMode, optical: OpticalMode):
        if n_c < 0:
            raise ValueError("n_c must be nonnegative")
        g = mech.g0 * math.sqrt(n_c)
        return cls(delta=delta, n_c=n_c, g=g, gamma_meas=4.0 * g**2 / optical.kappa)

    def validate_against(self, mech: MechanicalMode, optical: OpticalMode):
        g_ref = mech.g0 * math.sqrt(self.n_c)
        if abs(self.g - g_ref) > _REL_TOL * max(g_ref, 1.0):
            raise ValueError("g inconsistent with g0*sqrt(n_c)")
        gm_ref = 4.0 * self.g**2 / optical.kappa
        if abs(self.gamma_meas - gm_ref) > _REL_TOL * max(gm_ref, 1.0):
            raise ValueError("gamma_meas inconsistent with 4 g^2 / kappa")


@dataclass(frozen=True)
class SystemParams:
    """Optical mode + mechanical mode + drive, with the renormalized
    mechanical frequency and linewidth cached at construction."""

    optical: OpticalMode
    mech: MechanicalMode
    drive: DriveCondition
    omega_m: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        self.drive.validate_against(self.mech, self.optical)
        d_omega, gamma_om = spring_and_damping(self)
        object.__setattr__(self, "omega_m", self.mech.omega_m0 + d_omega)
        object.__setattr__(self, "gamma", self.mech.gamma_i + gamma_om)

    @classmethod
    def build(cls, optical: OpticalMode, mech: MechanicalMode, delta, n_c):
        return cls(optical, mech, DriveCondition.from_photon_number(delta, n_c, mech, optical))

    def with_drive(self, delta=None, n_c=None):
        return SystemParams.build(
            self.optical,
            self.mech,
            self.drive.delta if delta is None else delta,
            self.drive.n_c if n_c is None else n_c,
        )


@dataclass(frozen=True)
class CoefficientSet:
    """Output-field transfer coefficients at one evaluation frequency.

    The cavity output is
    ``a_out = (1 + a1) a_in + a2 a_in^dag + b1 b_in + b2 b_in^dag``
    plus the intrinsic-port vacuum entering with weights
    ``sqrt(kappa_i/kappa_e) * (a1, a2)``.
    """

    a1: complex
    a2: complex
    b1: complex
    b2: complex


def mech_susceptibility(omega, mech: MechanicalMode):
    """Dimensionless mechanical susceptibility with structural damping.

    chi(omega) = omega_m^2 / (omega_m^2 - omega^2 - i gamma_i omega_m)

    The imaginary part of the denominator is frequency independent
    (constant loss angle), so the static limit is chi(0) = 1/(1 - i/Q_m).
    """
    wm = mech.omega_m0
    return wm**2 / (wm**2 - np.asarray(omega, dtype=float) ** 2 - 1j * mech.gamma_i * wm)


def spring_and_damping(params: SystemParams):
    """Optical spring shift and optomechanical damping rate (rad/s).

    Evaluated once at the bare mechanical frequency; both vanish for an
    undriven cavity and the damping is positive for red detuning
    (delta > 0 in the sign convention used here).
    """
    delta = params.drive.delta
    kappa = params.optical.kappa
    wm = params.mech.omega_m0
    g2 = params.drive.g ** 2
    bracket = 1.0 / (1j * (delta - wm) + kappa / 2) - 1.0 / (-1j * (delta + wm) + kappa / 2)
    return g2 * bracket.imag, 2.0 * g2 * bracket.real


def _denominators(omega, params: SystemParams):
    delta = params.drive.delta
    kappa = params.optical.kappa
    w = np.asarray(omega, dtype=float)
    d_c = 1j * (delta - w) + kappa / 2
    d_cbar = -1j * (delta + w) + kappa / 2
    d_m = 1j * (params.omega_m - w) + params.gamma / 2
    d_mbar = -1j * (params.omega_m + w) + params.gamma / 2
    return d_c, d_cbar, d_m, d_mbar


def transfer_coefficients(omega, params: SystemParams) -> CoefficientSet:
    """Closed-form coefficients relating the cavity output to its inputs.

    The drive-port prefactors carry sqrt(kappa_e); with critical
    kappa_e = kappa this reduces to the single-port expressions.  The
    mechanical denominators use the renormalized (omega_m, gamma) while
    the bath coupling keeps sqrt(gamma_i).
    """
    d_c, d_cbar, d_m, d_mbar = _denominators(omega, params)
    kappa_e = params.optical.kappa_e
    g = params.drive.g
    gamma_i = params.mech.gamma_i

    mech_loop = g**2 * (1.0 / d_m - 1.0 / d_mbar)
    a1 = kappa_e / d_c * (mech_loop / d_c - 1.0)
    a2 = kappa_e / d_c * mech_loop / d_cbar
    b_pref = np.sqrt(kappa_e * gamma_i) / d_c * 1j * g
    b1 = b_pref / d_m
    b2 = b_pref / d_mbar
    return CoefficientSet(a1=a1, a2=a2, b1=b1, b2=b2)


def spectrum_full(omega, theta, params: SystemParams, nbar):
    """Shot-noise-normalized homodyne PSD of the reflected field.

    Parameters
    ----------
    omega : array_like
        Evaluation frequency (rad/s).
    theta : float
        Quadrature angle between the cavity *input* carrier and the LO.
    params : SystemParams
    nbar : array_like
        Mechanical bath occupation at each ``omega`` (scalar or matching
        array); the structural-damping model makes this frequency
        dependent.

    Returns
    -------
    (s_total, s_vac, s_thermal)
        ``s_vac`` collects the optical vacuum contributions from both the
        waveguide and the intrinsic loss port (so a cold cavity returns
        exactly 1 for any coupling); ``s_thermal`` is the six-term
        mechanical-bath contribution with occupations (nbar, nbar + 1).
    """
    c_p = transfer_coefficients(omega, params)
    c_m = transfer_coefficients(-np.asarray(omega, dtype=float), params)
    phase = np.exp(-2j * theta)
    nbar = np.asarray(nbar, dtype=float)

    one_a1 = 1.0 + c_p.a1
    s_vac = (
        np.abs(c_m.a2) ** 2
        + np.abs(one_a1) ** 2
        + 2.0 * np.real(phase * one_a1 * c_m.a2)
    )
    kappa_ratio = params.optical.kappa_i / params.optical.kappa_e
    if kappa_ratio > 0:
        s_vac = s_vac + kappa_ratio * (
            np.abs(c_p.a1) ** 2
            + np.abs(c_m.a2) ** 2
            + 2.0 * np.real(phase * c_p.a1 * c_m.a2)
        )

    s_thermal = (
        np.abs(c_p.b1) ** 2 * (nbar + 1.0)
        + np.abs(c_m.b1) ** 2 * nbar
        + np.abs(c_m.b2) ** 2 * (nbar + 1.0)
        + np.abs(c_p.b2) ** 2 * nbar
        + 2.0 * np.real(phase * c_p.b1 * c_m.b2) * (nbar + 1.0)
        + 2.0 * np.real(phase * c_m.b1 * c_p.b2) * nbar
    )
    # both parts are sums of squared quadrature projections, nonnegative
    # exactly; clamp the cancellation roundoff near zero
    s_vac = np.maximum(s_vac, 0.0)
    s_thermal = np.maximum(s_thermal, 0.0)
    return s_vac + s_thermal, s_vac, s_thermal


def quasi_static_spectrum(theta, params: SystemParams, nbar):
    """Low-frequency (omega << omega_m) limit of the normalized PSD.

    1 + 4 (G_meas/omega_m) [sin(2 theta) + (nbar/Q_m) (1 - cos(2 theta))]

    The correlation term allows values below 1; the thermal term is
    largest in the quadrature carrying the mechanical signal and cancels
    the squeezing entirely once nbar = Q_m at theta = -pi/4.
    """
    ratio = params.drive.gamma_meas / params.mech.omega_m0
    thermal_weight = np.asarray(nbar, dtype=float) / params.mech.q_m
    return 1.0 + 4.0 * ratio * (
        np.sin(2.0 * theta) + thermal_weight * (1.0 - np.cos(2.0 * theta))
    )


def squeezing_cross_term(omega, theta, params: SystemParams):
    """Back-action/position correlation term of the resonant bad-cavity model.

    4 sin(2 theta) (G_meas/omega_m) Re[chi(omega)]; changes sign across
    the mechanical resonance and vanishes at theta = 0, +-pi/2.
    """
    chi = mech_susceptibility(omega, params.mech)
    ratio = params.drive.gamma_meas / params.mech.omega_m0
    return 4.0 * np.sin(2.0 * theta) * ratio * chi.real


def zero_transduction_angle(omega_probe, params: SystemParams):
    """Input-referenced quadrature angle where the mechanical peak at
    ``omega_probe`` transduces minimally.

    From the resonant part of the thermal transfer, the transduced
    amplitude is proportional to |e^{-i theta} u - e^{i theta} v| with
    u = 1/D_c(omega_probe) and v = conj(1/D_c(-omega_probe)); it is
    minimized at theta = (arg u - arg v)/2, which tends to
    -arctan(2 delta/kappa) in the quasi-static bad-cavity limit.
    """
    delta = params.drive.delta
    kappa = params.optical.kappa
    u = 1.0 / (1j * (delta - omega_probe) + kappa / 2)
    v = np.conj(1.0 / (1j * (delta + omega_probe) + kappa / 2))
    return 0.5 * (np.angle(u) - np.angle(v))
