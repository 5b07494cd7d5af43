"""Independent reference computations for the closed-form spectra.

Two cross-checks of different character:

* a per-frequency numerical solve of the frequency-domain equations of
  motion (no closed-form coefficient algebra), contracted with an input
  correlation matrix and the quadrature projector;
* a seeded time-domain integration of the linearized dynamics driven by
  Gaussian noise with the symmetrized input correlators, followed by
  segment-averaged periodogram estimation.

The semiclassical mapping (symmetrized correlators -> classical Gaussian
noise of variance nbar + 1/2, vacuum -> 1/2 per quadrature) reproduces
every symmetrized output spectrum of a linear system, including squeezed
(sub-unity normalized) ones, because the output PSD is linear in the
input correlation matrix.  Only symmetrized quantities are meaningful
here; sideband asymmetries are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import SystemParams
from .instrument import SpectrumTrace

__all__ = [
    "InputCorrelationMatrix",
    "OracleError",
    "matrix_solve_spectrum",
    "sde_time_domain_psd",
]

ADIABATIC_KAPPA_RATIO = 50.0
_CHUNK = 1 << 22


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class InputCorrelationMatrix:
    """Frequency-domain input correlators over (a_in, a_in^dag, b_in, b_in^dag).

    Entry [i, j] is the coefficient of delta(omega + omega') in
    <w_i(omega) w_j(omega')>.  Vacuum optical block: <a a^dag> = 1,
    <a^dag a> = 0; thermal block uses (nbar + 1, nbar).
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("correlation matrix must be 4x4")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def vacuum_thermal(cls, nbar):
        m = np.zeros((4, 4), dtype=complex)
        m[0, 1] = 1.0
        m[2, 3] = nbar + 1.0
        m[3, 2] = nbar
        return cls(matrix=m)

    def validate(self):
        m = self.matrix
        if m[0, 1] != 1.0 or m[1, 0] != 0.0:
            raise ValueError("optical block must be vacuum: <a a^dag>=1, <a^dag a>=0")
        if not np.isclose(m[2, 3].real, m[3, 2].real + 1.0) or m[2, 3].imag or m[3, 2].imag:
            raise ValueError("thermal block must be (nbar+1, nbar)")


def _output_quadrature_row(omega, theta, params: SystemParams):
    """Coefficients of X_out(omega) on the six inputs
    (a_in, a_in^dag, b_in, b_in^dag, a_in_i, a_in_i^dag), obtained by a
    numerical linear solve of the frequency-domain system."""
    delta = params.drive.delta
    kappa = params.optical.kappa
    kappa_e = params.optical.kappa_e
    kappa_i = params.optical.kappa_i
    gamma_i = params.mech.gamma_i
    g = params.drive.g

    d_c = 1j * (delta - omega) + kappa / 2
    d_cbar = -1j * (delta + omega) + kappa / 2
    d_m = 1j * (params.omega_m - omega) + params.gamma / 2
    d_mbar = -1j * (params.omega_m + omega) + params.gamma / 2

    m = np.array(
        [
            [d_c, 0, 1j * g, 1j * g],
            [0, d_cbar, -1j * g, -1j * g],
            [0, 0, d_m, 0],
            [0, 0, 0, d_mbar],
        ],
        dtype=complex,
    )
    se, si, sg = np.sqrt(kappa_e), np.sqrt(kappa_i), np.sqrt(gamma_i)
    load = np.zeros((4, 6), dtype=complex)
    load[0, 0] = -se
    load[0, 4] = -si
    load[1, 1] = -se
    load[1, 5] = -si
    # mechanical rows: renormalized response driven directly by the inputs
    load[2, 2] = -sg
    load[2, 0] = 1j * g * se / d_c
    load[2, 1] = 1j * g * se / d_cbar
    load[2, 4] = 1j * g * si / d_c
    load[2, 5] = 1j * g * si / d_cbar
    load[3, 3] = -sg
    load[3, 0] = -1j * g * se / d_c
    load[3, 1] = -1j * g * se / d_cbar
    load[3, 4] = -1j * g * si / d_c
    load[3, 5] = -1j * g * si / d_cbar
    try:
        trans = np.linalg.solve(m, load)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"singular frequency-domain system at omega={omega}") from exc
    a_out = se * trans[0]
    a_out[0] += 1.0
    a_out_dag = se * trans[1]
    a_out_dag[1] += 1.0
    return np.exp(-1j * theta) * a_out + np.exp(1j * theta) * a_out_dag


def matrix_solve_spectrum(omega, theta, params: SystemParams, corr: InputCorrelationMatrix):
    """Normalized homodyne PSD via numerical solve + correlator contraction.

    Solves the 4x4 frequency-domain system for (a, a^dag, b, b^dag) at
    +-omega, forms the output quadrature coefficients on all input
    channels (including the intrinsic-port vacuum), and contracts with
    ``corr``.  Must agree with the closed-form spectrum to near machine
    precision.
    """
    c_plus = _output_quadrature_row(float(omega), theta, params)
    c_minus = _output_quadrature_row(-float(omega), theta, params)
    full = np.zeros((6, 6), dtype=complex)
    full[:4, :4] = corr.matrix
    full[4, 5] = 1.0  # intrinsic loss port is always vacuum
    s = c_plus @ full @ c_minus
    if abs(s.imag) > 1e-9 * max(abs(s.real), 1.0):
        raise OracleError("contracted PSD acquired a nonreal part")
    return float(s.real)


def _gaussian_chunks(rng, n_total, scale, chunk=_CHUNK):
    """Deterministic stream of complex Gaussian chunks with Var[z] = scale^2."""
    done = 0
    while done < n_total:
        n = min(chunk, n_total - done)
        z = rng.standard_normal(2 * n).view(np.complex128) * (scale / np.sqrt(2.0))
        yield z
        done += n


def sde_time_domain_psd(
    params: SystemParams,
    nbar,
    theta,
    duration,
    dt,
    seed,
    freq_bins=None,
    segment_samples=None,
) -> SpectrumTrace:
    """Monte-Carlo homodyne spectrum from a seeded stochastic integration.

    Integrates the linearized dynamics with classical Gaussian drives
    whose (co)variances equal the symmetrized quantum correlators
    (vacuum: 1/2 per quadrature; bath: nbar + 1/2, flat across the
    mechanical line), synthesizes the quadrature record, and estimates
    the PSD by averaging Hann-windowed periodograms over non-overlapping
    segments.  The returned values are double-sided densities, already
    unity at the shot-noise floor; stderr holds the per-bin standard
    error from inter-segment variance.

    The cavity is eliminated adiabatically when kappa > 50 omega_m
    (explicit Euler on the co-rotating mechanical envelope, drive-port
    filters frozen at +-omega_m); otherwise the full two-oscillator
    system is integrated.  Step-size preconditions:
    dt <= 0.01/omega_m (adiabatic) or dt <= 0.01/kappa (full).
    """
    kappa = params.optical.kappa
    omega_m = params.omega_m
    gamma = params.gamma
    adiabatic = kappa > ADIABATIC_KAPPA_RATIO * omega_m
    fast = omega_m if adiabatic else kappa
    if dt > 0.01 / fast:
        raise ValueError(
            f"dt={dt:g} violates the step-size precondition dt <= 0.01/{'omega_m' if adiabatic else 'kappa'}"
        )
    if duration < 100.0 / gamma:
        raise ValueError("duration must cover at least 100 mechanical decay times")

    if segment_samples is None:
        segment_samples = 1 << 14
    n_segments = int(duration / dt) // segment_samples
    if n_segments < 8:
        raise ValueError("duration too short for at least 8 PSD segments")

    if freq_bins is None:
        f_m = omega_m / (2 * np.pi)
        span = 0.4 * f_m
        resolution = 1.0 / (segment_samples * dt)
        n_bins = int(min(20, max(4, span / (1.5 * resolution))))
        freq_bins = np.linspace(0.8 * f_m, 1.2 * f_m, n_bins + 1)
    freq_bins = np.asarray(freq_bins, dtype=float)

    rng = np.random.default_rng(seed)
    if adiabatic:
        current = _integrate_adiabatic(params, nbar, theta, dt, n_segments, segment_samples, rng)
    else:
        current = _integrate_full(params, nbar, theta, dt, n_segments, segment_samples, rng)

    return _binned_welch(current, dt, segment_samples, n_segments, freq_bins, params)


def _integrate_adiabatic(params, nbar, theta, dt, n_segments, segment_samples, rng):
    kappa = params.optical.kappa
    kappa_e = params.optical.kappa_e
    kappa_i = params.optical.kappa_i
    gamma_i = params.mech.gamma_i
    delta = params.drive.delta
    g = params.drive.g
    omega_m = params.omega_m
    gamma = params.gamma

    d_c = 1j * (delta - omega_m) + kappa / 2
    d_cbar = -1j * (delta + omega_m) + kappa / 2
    refl_e = 1.0 - kappa_e / d_c
    refl_i = -np.sqrt(kappa_e * kappa_i) / d_c
    mech_out = -1j * g * np.sqrt(kappa_e) / d_c

    decay = 1.0 - gamma * dt / 2.0
    sigma_vac = np.sqrt(0.5 / dt)
    sigma_bath = np.sqrt((nbar + 0.5) / dt)

    n_total = n_segments * segment_samples
    amp_bound = 1e6 * (1.0 + np.sqrt(nbar + params.drive.gamma_meas / gamma + 1.0))

    out = np.empty(n_total)
    state = 0.0 + 0.0j
    zi = np.zeros(1, dtype=complex)
    gen_a = _gaussian_chunks(rng, n_total, sigma_vac)
    gen_i = _gaussian_chunks(rng, n_total, sigma_vac)
    gen_b = _gaussian_chunks(rng, n_total, sigma_bath)
    done = 0
    phase_out = np.exp(-1j * theta)
    while done < n_total:
        za = next(gen_a)
        zirr = next(gen_i)
        zb = next(gen_b)
        n = len(za)
        t = (done + np.arange(n)) * dt
        rot = np.exp(1j * omega_m * t)
        drive = (
            -np.sqrt(gamma_i) * zb
            + 1j * g * (np.sqrt(kappa_e) * za + np.sqrt(kappa_i) * zirr) / d_c
            + 1j * g * (np.sqrt(kappa_e) * np.conj(za) + np.sqrt(kappa_i) * np.conj(zirr)) / d_cbar
        )
        u = rot * drive
        y, zi = lfilter([dt], [1.0, -decay], u, zi=zi)
        env = np.empty(n, dtype=complex)
        env[0] = state
        env[1:] = y[:-1]
        state = y[-1]
        if not np.isfinite(state) or abs(state) > amp_bound:
            raise OracleError(
                "unstable integration (energy growth beyond bound); "
                "the dt <= 0.01/omega_m step-size precondition is too loose for this system"
            )
        x = 2.0 * np.real(env * np.conj(rot))
        a_out = refl_e * za + refl_i * zirr + mech_out * x
        out[done : done + n] = 2.0 * np.real(phase_out * a_out)
        done += n
    return out


def _integrate_full(params, nbar, theta, dt, n_segments, segment_samples, rng):
    kappa = params.optical.kappa
    kappa_e = params.optical.kappa_e
    kappa_i = params.optical.kappa_i
    gamma_i = params.mech.gamma_i
    delta = params.drive.delta
    g = params.drive.g
    omega_m0 = params.mech.omega_m0

    se, si, sg = np.sqrt(kappa_e), np.sqrt(kappa_i), np.sqrt(gamma_i)
    sigma_vac = np.sqrt(0.5 / dt)
    sigma_bath = np.sqrt((nbar + 0.5) / dt)

    n_total = n_segments * segment_samples
    za = rng.standard_normal(2 * n_total).view(np.complex128) * (sigma_vac / np.sqrt(2.0))
    zirr = rng.standard_normal(2 * n_total).view(np.complex128) * (sigma_vac / np.sqrt(2.0))
    zb = rng.standard_normal(2 * n_total).view(np.complex128) * (sigma_bath / np.sqrt(2.0))

    cav_drift = -(1j * delta + kappa / 2)
    rot = np.exp(1j * omega_m0 * dt)
    a = 0.0 + 0.0j
    env = 0.0 + 0.0j
    phase = 1.0 + 0.0j  # e^{i omega_m0 t}
    phase_out = np.exp(-1j * theta)
    out = np.empty(n_total)
    amp_bound = 1e6 * (1.0 + np.sqrt(nbar + params.drive.gamma_meas / params.gamma + 1.0))
    for n in range(n_total):
        x = 2.0 * np.real(env * np.conj(phase))
        a_out = za[n] + se * a
        out[n] = 2.0 * np.real(phase_out * a_out)
        a_new = a + dt * (cav_drift * a - 1j * g * x - se * za[n] - si * zirr[n])
        env_new = env + dt * (-gamma_i / 2 * env + phase * (-1j * g * 2.0 * np.real(a) - sg * zb[n]))
        a, env = a_new, env_new
        phase *= rot
        if n % 65536 == 0 and (not np.isfinite(abs(env)) or abs(env) > amp_bound):
            raise OracleError(
                "unstable integration (energy growth beyond bound); "
                "the dt <= 0.01/kappa step-size precondition is too loose for this system"
            )
    return out


def _binned_welch(current, dt, segment_samples, n_segments, freq_bins, params):
    window = np.hanning(segment_samples)
    norm = dt / (segment_samples * np.mean(window**2))
    freqs = np.fft.rfftfreq(segment_samples, dt)
    idx = np.digitize(freqs, freq_bins) - 1
    n_bins = len(freq_bins) - 1
    sums = np.zeros(n_bins)
    sumsq = np.zeros(n_bins)
    counts = np.bincount(idx[(idx >= 0) & (idx < n_bins)], minlength=n_bins)
    if np.any(counts == 0):
        raise ValueError("freq_bins too fine for the segment resolution")
    sel = (idx >= 0) & (idx < n_bins)
    for k in range(n_segments):
        seg = current[k * segment_samples : (k + 1) * segment_samples]
        pxx = np.abs(np.fft.rfft(window * seg)) ** 2 * norm
        binned = np.bincount(idx[sel], weights=pxx[sel], minlength=n_bins) / counts
        sums += binned
        sumsq += binned**2
    mean = sums / n_segments
    var = np.maximum(sumsq / n_segments - mean**2, 0.0)
    stderr = np.sqrt(var / n_segments)
    centers = 0.5 * (freq_bins[:-1] + freq_bins[1:])
    resolution = 1.0 / (segment_samples * dt)
    return SpectrumTrace(
        freqs=centers,
        values=mean,
        rbw=resolution,
        stderr=stderr,
        meta={
            "segments": int(n_segments),
            "dt_s": float(dt),
            "resolution_hz": float(resolution),
            "omega_m_rad_s": float(params.omega_m),
        },
    )
