"""Command-line entry point: config-driven, reproducible runs to CSV.

Commands
--------
spectrum        one detected spectrum at the configured lock angle
densitymap      detected PSD over (lock angle, frequency), long-form CSV
quasistatic     low-frequency closed-form curve at the configured lock angle
thermometry-fit fit (g0, gamma_i, n_b) to a thermometry CSV
infer-detuning  recover the detuning from a lock-sweep CSV
oracle-check    closed form vs frequency-domain solve over random draws
synth           generate seeded noisy synthetic data for the fits

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
All file frequencies are ordinary Hz, all angles radians, floats carry
9 significant digits; identical config + seed gives byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import core
from .config import ConfigError, ScenarioConfig, load_config, serialize_config
from .estimate import (
    EstimationError,
    ThermometryCurve,
    fit_thermometry,
    generate_lock_sweep,
    generate_thermometry_curve,
    infer_detuning,
)
from .instrument import (
    SpectrumTrace,
    assemble_density_map,
    lock_to_quadrature,
    output_spectrum,
    rbw_resample,
)
from .noise import apply_detection_chain, bath_occupation, effective_temperature
from .oracle import InputCorrelationMatrix, OracleError, matrix_solve_spectrum, sde_time_domain_psd

FMT = "%.9g"


def _fmt(x):
    return FMT % x


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_spectrum_csv(path, trace: SpectrumTrace, components=None):
    """SpectrumTrace schema: freq_hz,s_norm[,s_vac,s_thermal,s_phase,s_extra,s_absorptive][,stderr]."""
    header = ["freq_hz", "s_norm"]
    cols = [trace.freqs, trace.values]
    for name in ("s_vac", "s_thermal", "s_phase", "s_extra", "s_absorptive"):
        if components and name in components:
            header.append(name)
            cols.append(components[name])
    if trace.stderr is not None:
        header.append("stderr")
        cols.append(trace.stderr)
    rows = ([_fmt(c[i]) for c in cols] for i in range(len(trace.freqs)))
    _write_rows(path, header, rows)


def write_map_csv(path, sqmap):
    rows = (
        [_fmt(t), _fmt(f), _fmt(sqmap.values[i, j])]
        for i, t in enumerate(sqmap.theta_locks)
        for j, f in enumerate(sqmap.freqs)
    )
    _write_rows(path, ["theta_lock_rad", "freq_hz", "s_norm"], rows)


def write_fit_csv(path, pairs, residual_norm):
    rows = [[name, _fmt(est), _fmt(err)] for name, est, err in pairs]
    rows.append(["residual_norm", _fmt(residual_norm), _fmt(0.0)])
    _write_rows(path, ["param", "estimate", "stderr"], rows)


def read_thermometry_csv(path) -> ThermometryCurve:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return ThermometryCurve(
        detunings=2 * np.pi * np.atleast_1d(data["delta_hz"]),
        eff_freqs=2 * np.pi * np.atleast_1d(data["eff_freq_hz"]),
        eff_linewidths=2 * np.pi * np.atleast_1d(data["eff_linewidth_hz"]),
        areas=np.atleast_1d(data["area_sn_hz"]),
    )


def read_locksweep_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.column_stack(
        [np.atleast_1d(data["theta_lock_rad"]), np.atleast_1d(data["area_sn_hz"])]
    )


def _detected_components(cfg: ScenarioConfig, theta_lock):
    scenario = cfg.scenario
    grid = cfg.grid
    fine = grid.fine_freqs()
    omega = 2 * np.pi * fine
    theta = lock_to_quadrature(
        theta_lock, scenario.system.optical, scenario.system.drive.delta
    ).theta
    comp = output_spectrum(omega, theta, scenario, detected=False)
    eta = scenario.eta_tot
    out = grid.out_freqs()

    def shape(vals):
        return rbw_resample(SpectrumTrace(freqs=fine, values=vals), grid.rbw_hz, out).values

    detected = apply_detection_chain(
        comp["s_norm"], scenario.chain, scenario.system.optical.eta_kappa
    ) if scenario.chain is not None else comp["s_norm"]
    columns = {
        # vacuum column carries the (1 - eta) uncorrelated-vacuum offset
        "s_vac": shape(eta * comp["s_vac"] + (1 - eta)),
        "s_thermal": shape(eta * comp["s_thermal"]),
        "s_phase": shape(eta * comp["s_phase"]),
        "s_extra": shape(eta * comp["s_extra"]),
        "s_absorptive": shape(eta * comp["s_absorptive"]),
    }
    trace = SpectrumTrace(
        freqs=out, values=shape(detected), rbw=grid.rbw_hz,
        meta={"theta_lock_rad": float(theta_lock)},
    )
    return trace, columns


def cmd_spectrum(cfg: ScenarioConfig, outdir: Path):
    trace, columns = _detected_components(cfg, cfg.theta_lock_rad)
    write_spectrum_csv(outdir / "spectrum.csv", trace, components=columns)
    return 0


def cmd_densitymap(cfg: ScenarioConfig, outdir: Path):
    grid = cfg.grid
    sqmap = assemble_density_map(
        grid.theta_locks(), grid.out_freqs(), cfg.scenario,
        fine_freqs=grid.fine_freqs(), rbw=grid.rbw_hz,
    )
    write_map_csv(outdir / "densitymap.csv", sqmap)
    return 0


def cmd_quasistatic(cfg: ScenarioConfig, outdir: Path):
    scenario = cfg.scenario
    params = scenario.system
    freqs = cfg.grid.out_freqs()
    theta = lock_to_quadrature(
        cfg.theta_lock_rad, params.optical, params.drive.delta
    ).theta
    t_eff = (
        effective_temperature(scenario.bath, params.drive.n_c)
        if scenario.bath is not None
        else None
    )
    nbar = bath_occupation(2 * np.pi * freqs, t_eff) if t_eff else np.zeros_like(freqs)
    values = core.quasi_static_spectrum(theta, params, nbar)
    write_spectrum_csv(outdir / "quasistatic.csv", SpectrumTrace(freqs=freqs, values=values))
    return 0


def cmd_thermometry_fit(cfg: ScenarioConfig, outdir: Path, data=None):
    path = data or cfg.fit_paths.get("thermometry_csv")
    if not path:
        raise ConfigError(["thermometry-fit requires fit.thermometry_csv or --data"])
    curve = read_thermometry_csv(path)
    result = fit_thermometry(curve, cfg.system.optical, cfg.system.drive.n_c)
    two_pi = 2 * np.pi
    write_fit_csv(
        outdir / "thermometry_fit.csv",
        [
            ("g0_hz", result.g0_hat / two_pi, result.g0_err / two_pi),
            ("gamma_i_hz", result.gamma_i_hat / two_pi, result.gamma_i_err / two_pi),
            ("n_b", result.nb_hat, result.nb_err),
            ("omega_m0_hz", result.omega_m0_hat / two_pi, result.omega_m0_err / two_pi),
        ],
        result.residual_norm,
    )
    return 0


def cmd_infer_detuning(cfg: ScenarioConfig, outdir: Path, data=None):
    path = data or cfg.fit_paths.get("locksweep_csv")
    if not path:
        raise ConfigError(["infer-detuning requires fit.locksweep_csv or --data"])
    sweep = read_locksweep_csv(path)
    delta_hat, theta_star = infer_detuning(
        sweep, cfg.system.optical, omega_probe=cfg.system.mech.omega_m0
    )
    kappa = cfg.system.optical.kappa
    write_fit_csv(
        outdir / "detuning_fit.csv",
        [
            ("delta_hz", delta_hat / (2 * np.pi), 0.0),
            ("delta_over_kappa", delta_hat / kappa, 0.0),
            ("theta_star_lock_rad", theta_star, 0.0),
        ],
        0.0,
    )
    return 0


def cmd_oracle_check(cfg: ScenarioConfig, outdir: Path, n_draws=1000, tol=1e-9):
    params = cfg.system
    rng = np.random.default_rng(cfg.seed)
    rows = []
    max_err = 0.0
    for _ in range(n_draws):
        p = params.with_drive(
            delta=params.drive.delta * 10 ** rng.uniform(-1.5, 1.5) * rng.choice((-1.0, 1.0)),
            n_c=params.drive.n_c * 10 ** rng.uniform(-1.5, 1.5),
        )
        omega = 2 * np.pi * 10 ** rng.uniform(5.5, 7.6)
        theta = rng.uniform(-np.pi, np.pi)
        nbar = bath_occupation(omega, 16.0)
        s_ref, _, _ = core.spectrum_full(omega, theta, p, nbar)
        s_orc = matrix_solve_spectrum(
            omega, theta, p, InputCorrelationMatrix.vacuum_thermal(nbar)
        )
        err = abs(s_orc - float(s_ref)) / abs(float(s_ref))
        max_err = max(max_err, err)
        rows.append([_fmt(omega / (2 * np.pi)), _fmt(theta), _fmt(err)])
    rows.append(["max_rel_err", "", _fmt(max_err)])
    _write_rows(outdir / "oracle_check.csv", ["freq_hz", "theta_rad", "rel_err"], rows)
    if cfg.sde_duration_s > 0 and cfg.sde_dt_s > 0:
        trace = sde_time_domain_psd(
            params, nbar=0.0, theta=cfg.theta_lock_rad, duration=cfg.sde_duration_s,
            dt=cfg.sde_dt_s, seed=cfg.seed,
        )
        write_spectrum_csv(outdir / "sde_trace.csv", trace)
    if max_err > tol:
        print(f"oracle-check FAILED: max relative error {max_err:.3e} > {tol:g}")
        return 2
    print(f"oracle-check ok: max relative error {max_err:.3e}")
    return 0


def cmd_synth(cfg: ScenarioConfig, outdir: Path):
    params = cfg.system
    optical, mech = params.optical, params.mech
    t_eff = (
        effective_temperature(cfg.scenario.bath, params.drive.n_c)
        if cfg.scenario.bath is not None
        else 16.0
    )
    n_b = float(bath_occupation(mech.omega_m0, t_eff))
    rng = np.random.default_rng(cfg.seed)
    # red-side sweep: optomechanically damped (stable) at any probe power
    deltas = np.linspace(0.02, 0.65, 13) * optical.kappa
    curve = generate_thermometry_curve(
        optical, mech, params.drive.n_c, deltas, n_b, noise_frac=0.01, rng=rng
    )
    two_pi = 2 * np.pi
    _write_rows(
        outdir / "thermometry.csv",
        ["delta_hz", "eff_freq_hz", "eff_linewidth_hz", "area_sn_hz"],
        (
            [_fmt(d / two_pi), _fmt(f / two_pi), _fmt(lw / two_pi), _fmt(a)]
            for d, f, lw, a in zip(
                curve.detunings, curve.eff_freqs, curve.eff_linewidths, curve.areas
            )
        ),
    )
    sweep = generate_lock_sweep(
        params, np.linspace(-1.2, 1.2, 41), n_b, noise_frac=0.01, rng=rng
    )
    _write_rows(
        outdir / "locksweep.csv",
        ["theta_lock_rad", "area_sn_hz"],
        ([_fmt(t), _fmt(a)] for t, a in sweep),
    )
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "densitymap": cmd_densitymap,
    "quasistatic": cmd_quasistatic,
    "thermometry-fit": cmd_thermometry_fit,
    "infer-detuning": cmd_infer_detuning,
    "oracle-check": cmd_oracle_check,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="omsqueeze", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--n-c", type=float, default=None)
    parser.add_argument("--theta-lock", type=float, default=None)
    parser.add_argument("--data", default=None, help="input CSV for the fit commands")
    args = parser.parse_args(argv)

    overrides = {}
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    if args.n_c is not None:
        overrides[("system", "n_c")] = args.n_c
    if args.theta_lock is not None:
        overrides[("run", "theta_lock_rad")] = args.theta_lock

    try:
        cfg = load_config(args.config, overrides=overrides)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "resolved_config.ini").write_text(serialize_config(cfg), encoding="utf-8")
        if args.command in ("thermometry-fit", "infer-detuning"):
            return _COMMANDS[args.command](cfg, outdir, data=args.data)
        return _COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (EstimationError, OracleError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
