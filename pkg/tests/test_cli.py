import csv
from pathlib import Path

import numpy as np
import pytest

from omsqueeze.cli import main, read_locksweep_csv, read_thermometry_csv
from omsqueeze.config import (
    ConfigError,
    default_config_text,
    load_config,
    load_config_text,
    serialize_config,
)

from conftest import KAPPA, TWO_PI


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "default.ini"
    p.write_text(default_config_text(), encoding="utf-8")
    return p


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestConfig:
    def test_default_loads_table_values(self, config_path):
        cfg = load_config(config_path)
        sys = cfg.system
        assert sys.optical.kappa == pytest.approx(TWO_PI * 3.42e9, rel=1e-12)
        assert sys.optical.eta_kappa == pytest.approx(0.55, rel=1e-12)
        assert sys.mech.g0 == pytest.approx(TWO_PI * 750e3, rel=1e-12)
        assert sys.mech.gamma_i == pytest.approx(TWO_PI * 172, rel=1e-12)
        assert cfg.scenario.bath.t_b0 == 16.0
        assert cfg.scenario.laser.s_omega_omega == 6e3
        assert sys.drive.delta == pytest.approx(0.044 * sys.optical.kappa, rel=1e-12)
        assert sys.drive.n_c == 790.0
        assert cfg.scenario.chain.eta_setup == pytest.approx(0.48, abs=0.005)

    def test_invalid_coupling_names_invariant(self, config_path):
        text = config_path.read_text().replace("eta_kappa = 0.55", "eta_kappa = 1.3")
        with pytest.raises(ConfigError) as err:
            load_config_text(text)
        assert any("kappa_e" in p for p in err.value.problems)

    def test_empty_file_reports_all_missing_keys(self):
        with pytest.raises(ConfigError) as err:
            load_config_text("")
        missing = [p for p in err.value.problems if p.startswith("missing")]
        assert len(missing) >= 10  # every required key, not just the first

    def test_unknown_key_rejected(self, config_path):
        text = config_path.read_text() + "\nmystery_key = 3\n"
        with pytest.raises(ConfigError) as err:
            load_config_text(text)
        assert any("unknown key" in p for p in err.value.problems)

    def test_unknown_section_rejected(self, config_path):
        text = config_path.read_text() + "\n[mystery]\nx = 1\n"
        with pytest.raises(ConfigError):
            load_config_text(text)

    def test_round_trip_idempotent(self, config_path):
        cfg = load_config(config_path)
        canon = serialize_config(cfg)
        cfg2 = load_config_text(canon)
        assert serialize_config(cfg2) == canon

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_shipped_config_matches_defaults(self):
        shipped = Path(__file__).parents[1] / "configs" / "default.ini"
        assert shipped.read_text(encoding="utf-8") == default_config_text()
        load_config(shipped)  # validates


class TestCliCommands:
    def test_spectrum_zero_drive_all_ones(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "spectrum", "--config", str(config_path), "--out", str(out), "--n-c", "0",
        ])
        assert rc == 0
        header, rows = read_csv(out / "spectrum.csv")
        assert header[:2] == ["freq_hz", "s_norm"]
        s = np.array([float(r[1]) for r in rows])
        assert np.all(np.abs(s - 1.0) < 1e-9)

    def test_spectrum_components_sum(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "spectrum", "--config", str(config_path), "--out", str(out),
            "--theta-lock", "0.3",
        ])
        assert rc == 0
        header, rows = read_csv(out / "spectrum.csv")
        assert header == [
            "freq_hz", "s_norm", "s_vac", "s_thermal", "s_phase", "s_extra", "s_absorptive",
        ]
        data = np.array([[float(x) for x in r] for r in rows])
        total = data[:, 2:].sum(axis=1)
        assert np.allclose(data[:, 1], total, rtol=1e-6)

    def test_densitymap_minimum_near_mechanical_frequency(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main(["densitymap", "--config", str(config_path), "--out", str(out)])
        assert rc == 0
        header, rows = read_csv(out / "densitymap.csv")
        assert header == ["theta_lock_rad", "freq_hz", "s_norm"]
        data = np.array([[float(x) for x in r] for r in rows])
        i = int(np.argmin(data[:, 2]))
        assert data[i, 2] < 1.0
        assert abs(data[i, 1] - 28e6) < 3e6

    def test_quasistatic_curve(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "quasistatic", "--config", str(config_path), "--out", str(out),
            "--theta-lock", "-0.5",
        ])
        assert rc == 0
        header, rows = read_csv(out / "quasistatic.csv")
        assert header == ["freq_hz", "s_norm"]
        assert len(rows) == 501

    def test_synth_and_fit_round_trip(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "synth", "--config", str(config_path), "--out", str(out),
            "--seed", "7", "--n-c", "50",
        ])
        assert rc == 0
        curve = read_thermometry_csv(out / "thermometry.csv")
        assert len(curve.detunings) == 13
        rc = main([
            "thermometry-fit", "--config", str(config_path), "--out", str(out),
            "--n-c", "50", "--data", str(out / "thermometry.csv"),
        ])
        assert rc == 0
        header, rows = read_csv(out / "thermometry_fit.csv")
        assert header == ["param", "estimate", "stderr"]
        est = {r[0]: float(r[1]) for r in rows}
        assert est["g0_hz"] == pytest.approx(750e3, rel=0.02)
        assert est["gamma_i_hz"] == pytest.approx(172.0, rel=0.05)
        assert "residual_norm" in est

        sweep = read_locksweep_csv(out / "locksweep.csv")
        assert sweep.shape[1] == 2
        rc = main([
            "infer-detuning", "--config", str(config_path), "--out", str(out),
            "--data", str(out / "locksweep.csv"),
        ])
        assert rc == 0
        _, rows = read_csv(out / "detuning_fit.csv")
        est = {r[0]: float(r[1]) for r in rows}
        assert est["delta_over_kappa"] == pytest.approx(0.044, abs=0.006)

    def test_oracle_check(self, config_path, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "oracle-check", "--config", str(config_path), "--out", str(out), "--seed", "3",
        ])
        assert rc == 0
        _, rows = read_csv(out / "oracle_check.csv")
        assert rows[-1][0] == "max_rel_err"
        assert float(rows[-1][2]) <= 1e-9

    def test_reproducible_outputs(self, config_path, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main([
                "synth", "--config", str(config_path), "--out", str(out),
                "--seed", "42", "--n-c", "50",
            ])
            assert rc == 0
            outs.append((out / "thermometry.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_spectrum_reproducible(self, config_path, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["spectrum", "--config", str(config_path), "--out", str(out)]) == 0
            blobs.append((out / "spectrum.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_oracle_check_emits_sde_trace_with_stderr(self, tmp_path):
        # small fast system so the stochastic trace is cheap
        text = default_config_text()
        text = text.replace("kappa_over_2pi_hz = 3.42e9", "kappa_over_2pi_hz = 2e8")
        text = text.replace("omega_m0_over_2pi_hz = 28e6", "omega_m0_over_2pi_hz = 1e6")
        text = text.replace("gamma_i_over_2pi_hz = 172", "gamma_i_over_2pi_hz = 2e4")
        text = text.replace("g0_over_2pi_hz = 750e3", "g0_over_2pi_hz = 1e3")
        text = text.replace("n_c = 790", "n_c = 10")
        text = text.replace(
            "theta_lock_rad = 0.0",
            "theta_lock_rad = 0.4\nsde_duration_s = 1.2e-3\nsde_dt_s = 1.5e-9",
        )
        cfg = tmp_path / "small.ini"
        cfg.write_text(text, encoding="utf-8")
        out = tmp_path / "out"
        rc = main(["oracle-check", "--config", str(cfg), "--out", str(out), "--seed", "5"])
        assert rc == 0
        header, rows = read_csv(out / "sde_trace.csv")
        assert header == ["freq_hz", "s_norm", "stderr"]
        assert all(float(r[2]) > 0 for r in rows)

    def test_console_entry_point(self, config_path, tmp_path):
        import subprocess
        import sys

        out = tmp_path / "out"
        proc = subprocess.run(
            [sys.executable, "-m", "omsqueeze.cli", "quasistatic",
             "--config", str(config_path), "--out", str(out)],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert (out / "quasistatic.csv").exists()


class TestCliExitCodes:
    def test_config_error_exit_1(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[system]\nkappa_over_2pi_hz = 3.42e9\n", encoding="utf-8")
        rc = main(["spectrum", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_missing_config_exit_1(self, tmp_path):
        rc = main(["spectrum", "--config", str(tmp_path / "x.ini"), "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_numerical_failure_exit_2(self, config_path, tmp_path):
        sweep = tmp_path / "sweep.csv"
        th = np.linspace(0.1, 1.0, 9)
        with open(sweep, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta_lock_rad", "area_sn_hz"])
            w.writerows([[f"{t}", f"{t}"] for t in th])  # no interior minimum
        rc = main([
            "infer-detuning", "--config", str(config_path), "--out", str(tmp_path / "o"),
            "--data", str(sweep),
        ])
        assert rc == 2

    def test_io_error_exit_3(self, config_path, tmp_path):
        rc = main([
            "thermometry-fit", "--config", str(config_path), "--out", str(tmp_path / "o"),
            "--data", str(tmp_path / "missing.csv"),
        ])
        assert rc == 3

    def test_fit_without_data_exit_1(self, config_path, tmp_path):
        rc = main([
            "thermometry-fit", "--config", str(config_path), "--out", str(tmp_path / "o"),
        ])
        assert rc == 1
