"""From cavity output to a normalized, instrument-shaped spectrum.

Cavity reflection response, lock-angle <-> quadrature mapping, Gaussian
resolution-bandwidth emulation of the spectrum analyzer, and assembly of
spectra and density maps for a complete scenario (system + noise stack +
detection chain).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import OpticalMode, SystemParams
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
    phase_noise_psd,
)
from . import core

__all__ = [
    "QuadratureSetting",
    "SpectrumTrace",
    "SqueezingMap",
    "Scenario",
    "reflection_coefficient",
    "lock_to_quadrature",
    "quadrature_to_lock",
    "rbw_resample",
    "output_spectrum",
    "assemble_density_map",
]

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class QuadratureSetting:
    """Quadrature bookkeeping: input-referenced angle theta, lock angle
    referenced to the reflected carrier, and the reflection phase phi
    linking them via theta_lock = theta - phi."""

    theta: float
    theta_lock: float
    phi: float


@dataclass(frozen=True)
class SpectrumTrace:
    """Shot-noise-normalized PSD on an ordered frequency grid (Hz)."""

    freqs: np.ndarray
    values: np.ndarray
    rbw: float = 0.0
    stderr: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)
        if freqs.ndim != 1 or len(freqs) != len(values):
            raise ValueError("freqs and values must be 1-d and equal length")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite and nonnegative")
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))


@dataclass(frozen=True)
class SqueezingMap:
    """Normalized PSD over (lock angle, frequency)."""

    theta_locks: np.ndarray
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta_locks, dtype=float)
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "theta_locks", t)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)
        if v.shape != (len(t), len(f)):
            raise ValueError("values must have shape (n_theta, n_freq)")
        if not np.all(np.isfinite(v)):
            raise ValueError("map values must be finite")


def reflection_coefficient(omega, optical: OpticalMode, delta):
    """Cavity reflection amplitude r(omega) = 1 - kappa_e / (i(delta - omega) + kappa/2).

    Reduces to the single-port expression for kappa_e = kappa; far off
    resonance the device acts as a near-perfect mirror (r -> 1).
    """
    omega = np.asarray(omega, dtype=float)
    return 1.0 - optical.kappa_e / (1j * (delta - omega) + optical.kappa / 2)


def reflection_phase(optical: OpticalMode, delta):
    """Phase imparted on the carrier upon reflection, phi(delta)."""
    return float(np.angle(reflection_coefficient(0.0, optical, delta)))


def lock_to_quadrature(theta_lock, optical: OpticalMode, delta) -> QuadratureSetting:
    """Convert a lock angle (reflected signal vs LO) to the input-referenced
    quadrature angle: theta = theta_lock + phi(delta)."""
    phi = reflection_phase(optical, delta)
    return QuadratureSetting(theta=theta_lock + phi, theta_lock=theta_lock, phi=phi)


def quadrature_to_lock(theta, optical: OpticalMode, delta) -> QuadratureSetting:
    """Inverse of lock_to_quadrature: theta_lock = theta - phi(delta)."""
    phi = reflection_phase(optical, delta)
    return QuadratureSetting(theta=theta, theta_lock=theta - phi, phi=phi)


def rbw_resample(fine: SpectrumTrace, rbw, out_freqs) -> SpectrumTrace:
    """Emulate the analyzer's resolution bandwidth on a finely sampled trace.

    Convolves with a Gaussian kernel of FWHM = rbw (sigma = rbw / 2.355)
    on the uniform fine grid, then samples at ``out_freqs``.  Edge bins
    are padded by replication.  Linear, power preserving for features
    wider than the kernel, and a no-op on white spectra.
    """
    if rbw <= 0:
        raise ValueError("rbw must be positive")
    freqs = fine.freqs
    values = fine.values
    df = np.diff(freqs)
    if not np.allclose(df, df[0], rtol=1e-6):
        raise ValueError("fine grid must be uniform")
    df = df[0]
    out_freqs = np.asarray(out_freqs, dtype=float)
    if out_freqs.min() < freqs[0] or out_freqs.max() > freqs[-1]:
        raise ValueError("out_freqs outside the span of the fine grid")
    out_spacing = np.min(np.diff(out_freqs)) if len(out_freqs) > 1 else np.inf
    if df > out_spacing / 10:
        raise ValueError("fine grid must be at least 10x denser than out_freqs")

    sigma = rbw * FWHM_TO_SIGMA
    half = int(np.ceil(5 * sigma / df))
    kernel = np.exp(-0.5 * (np.arange(-half, half + 1) * df / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.concatenate([np.full(half, values[0]), values, np.full(half, values[-1])])
    smooth = np.convolve(padded, kernel, mode="valid")
    out_values = np.interp(out_freqs, freqs, smooth)
    meta = dict(fine.meta)
    meta.update(rbw_hz=float(rbw), rbw_kernel="gaussian_fwhm")
    return SpectrumTrace(freqs=out_freqs, values=out_values, rbw=float(rbw), meta=meta)


@dataclass(frozen=True)
class Scenario:
    """Complete forward-model bundle: driven system, noise environment,
    and detection chain.  Each noise block may be None to switch it off."""

    system: SystemParams
    bath: BathModel = None
    lump: ExtraModeNoise = None
    laser: LaserNoiseModel = None
    absorptive: AbsorptiveNoiseModel = None
    chain: DetectionChain = None

    @property
    def eta_tot(self):
        if self.chain is None:
            return 1.0
        return self.chain.eta_setup * self.system.optical.eta_kappa

    def with_drive(self, delta=None, n_c=None):
        return Scenario(
            system=self.system.with_drive(delta=delta, n_c=n_c),
            bath=self.bath,
            lump=self.lump,
            laser=self.laser,
            absorptive=self.absorptive,
            chain=self.chain,
        )


def output_spectrum(omega, theta, scenario: Scenario, detected=True):
    """All noise contributions at input-referenced quadrature ``theta``.

    Returns a dict with the shot-normalized components ``s_vac``,
    ``s_thermal``, ``s_extra``, ``s_phase``, ``s_absorptive`` and their
    sum ``s_norm`` (after the detection chain when ``detected``).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    params = scenario.system
    if scenario.bath is not None:
        t_eff = effective_temperature(scenario.bath, params.drive.n_c)
        nbar = bath_occupation(np.abs(omega), t_eff)
    else:
        nbar = np.zeros_like(omega)

    _, s_vac, s_thermal = core.spectrum_full(omega, theta, params, nbar)
    zero = np.zeros_like(omega)
    s_extra = (
        extra_mode_psd(omega, theta, params, scenario.lump, nbar)
        if (scenario.lump is not None and scenario.bath is not None)
        else zero
    )
    s_phase = (
        phase_noise_psd(omega, theta, params, scenario.laser)
        if scenario.laser is not None
        else zero
    )
    s_abs = (
        absorptive_psd(omega, theta, params.drive.n_c, scenario.absorptive, params)
        if scenario.absorptive is not None
        else zero
    )
    total = s_vac + s_thermal + s_extra + s_phase + s_abs
    if detected and scenario.chain is not None:
        total = apply_detection_chain(total, scenario.chain, params.optical.eta_kappa)
    return {
        "s_norm": total,
        "s_vac": s_vac,
        "s_thermal": s_thermal,
        "s_phase": s_phase,
        "s_extra": s_extra,
        "s_absorptive": s_abs,
    }


def _map_workers():
    raw = os.environ.get("OMSQUEEZE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def assemble_density_map(theta_locks, out_freqs, scenario: Scenario, fine_freqs=None, rbw=None) -> SqueezingMap:
    """Detected, RBW-shaped noise PSD over (lock angle, frequency).

    Each row maps its lock angle to the input-referenced quadrature,
    evaluates the full detected model on the fine grid, and resamples
    through the analyzer kernel.  Rows are independent; evaluation order
    never changes the result.
    """
    theta_locks = np.asarray(theta_locks, dtype=float)
    out_freqs = np.asarray(out_freqs, dtype=float)
    if fine_freqs is None:
        span = out_freqs[-1] - out_freqs[0]
        lo = max(out_freqs[0] - span * 0.05, span / 1e4)
        fine_freqs = np.linspace(lo, out_freqs[-1] + span * 0.05, 50000)
    fine_omega = 2 * np.pi * np.asarray(fine_freqs, dtype=float)
    delta = scenario.system.drive.delta

    def row(theta_lock):
        theta = lock_to_quadrature(theta_lock, scenario.system.optical, delta).theta
        comp = output_spectrum(fine_omega, theta, scenario, detected=True)
        trace = SpectrumTrace(freqs=fine_freqs, values=comp["s_norm"])
        if rbw is not None:
            trace = rbw_resample(trace, rbw, out_freqs)
            return trace.values
        return np.interp(out_freqs, fine_freqs, trace.values)

    workers = _map_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, theta_locks))
    else:
        rows = [row(t) for t in theta_locks]
    return SqueezingMap(theta_locks=theta_locks, freqs=out_freqs, values=np.vstack(rows))
