"""
Tests of the experiment layer: hyperparameters, the adaptive cutoff ladder, manifests, CSV files,
the runners and the command line.
"""
from pathlib import Path
import math
import warnings

import numpy as np
import pytest

from cqed.exceptions import ConfigError, CutoffError, CutoffWarning, IntegrationError
from cqed.model import DriveRamp, ModelParams, r_for_enhancement, r_from_gain_db
from cqed.operators import CAVITY, partial_trace
from cqed.wigner import WignerGrid, find_wigner_maxima, wigner
from experiments import runners
from experiments.cutoff import CutoffPolicy, CutoffRun, adaptive_cutoff, relative_change
from experiments.hparams import ExperimentConfig, hparams
from experiments.manifest import RunManifest, read_manifest_files, verify_manifest
from experiments.outputs import format_value, read_csv, write_csv, write_wigner_csv
from experiments.runners import (ideal_entanglement, run_adiabatic, run_spectrum, run_sweep,
                                 simulate_adiabatic, simulate_quench)
from synthcoupling import main
from utils.profiler import Profiler

CONFIGS = Path(__file__).resolve().parents[1].joinpath("configs")


def make_config(out_dir, experiment, **overrides):
    hp = hparams.copy()
    for key, value in overrides.items():
        hp[key] = value
    return ExperimentConfig.from_hparams(hp, experiment, out_dir)


SMALL_ADIABATIC = dict(gain_db=4.0, tau=2.0, t_f_over_tau=5.0, dt_out=0.5, cutoff=8,
                       cutoff_max_escalations=3, wigner_extent=3.0, wigner_points=21)


class TestHParams:
    """Overrides from strings and config files."""

    def test_parse(self):
        hp = hparams.copy().parse("g=0.2, kappa=1e-3")
        assert hp.g == 0.2 and hp.kappa == 1e-3
        assert hparams.g == 0.1

    def test_parse_lists(self):
        hp = hparams.copy().parse("sweep_taus=[10, 20], frame='lab', r_max=None")
        assert hp.sweep_taus == [10, 20]
        assert hp.frame == "lab"
        assert hp.r_max is None

    @pytest.mark.parametrize("string", ["bogus=1", "g=abc", "g"])
    def test_parse_errors(self, string):
        with pytest.raises(ConfigError):
            hparams.copy().parse(string)

    def test_load(self, tmp_path):
        fpath = tmp_path.joinpath("run.txt")
        fpath.write_text("# comment\n\ng = 0.05   # bare coupling\nquench_targets = [1.0]\n")
        hp = hparams.copy().load(fpath)
        assert hp.g == 0.05
        assert hp.quench_targets == [1.0]

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            hparams.copy().load(tmp_path.joinpath("missing.txt"))
        fpath = tmp_path.joinpath("bad.txt")
        fpath.write_text("g 0.05\n")
        with pytest.raises(ConfigError):
            hparams.copy().load(fpath)

    @pytest.mark.parametrize("name, experiment", [("spectrum", "spectrum"), ("quench", "quench"),
                                                  ("adiabatic", "adiabatic"),
                                                  ("adiabatic_fast", "adiabatic"),
                                                  ("sweep", "sweep")])
    def test_shipped_configs(self, name, experiment, tmp_path):
        hp = hparams.copy().load(CONFIGS.joinpath(name + ".txt"))
        config = ExperimentConfig.from_hparams(hp, experiment, tmp_path)
        assert config.experiment == experiment


class TestExperimentConfig:
    """Validation of a run configuration."""

    @pytest.mark.parametrize("experiment", ["spectrum", "quench", "adiabatic", "sweep"])
    def test_defaults(self, experiment, tmp_path):
        config = make_config(tmp_path, experiment)
        assert config.ramp.r_max == pytest.approx(r_from_gain_db(10.86))
        assert config.ramp.t_f == pytest.approx(500.0)
        assert dict(config.values)["gain_db"] == 10.86

    def test_r_max_takes_precedence(self, tmp_path):
        config = make_config(tmp_path, "adiabatic", r_max=0.5, t_f=12.0)
        assert config.ramp == DriveRamp(0.5, 100.0, 12.0)

    @pytest.mark.parametrize("overrides", [
        {"frame": "rotating"},
        {"sweep_taus": []},
        {"sweep_gains_db": []},
        {"spectrum_gains_db": "20"},
        {"gain_db": 200.0},
        {"sweep_gains_db": [10.0, 400.0]},
        {"cutoff": 4},
        {"cutoff_growth": 1.0},
        {"tolerance": 0.0},
        {"dt_out": -1.0},
        {"workers": 0},
        {"wigner_points": 2},
        {"sweep_taus": [10.0, -5.0]},
        {"kappa": -1.0},
        {"tau": 0.0},
    ])
    def test_invalid(self, overrides, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, "adiabatic", **overrides)

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, "tomography")

    def test_quench_needs_coupling(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, "quench", g=0.0)


class TestCutoffLadder:
    """Escalation of the Fock cutoff until the watched scalars settle."""

    def test_policy(self):
        policy = CutoffPolicy()
        assert policy.next_cutoff(12) == 18
        assert policy.next_cutoff(18) == 27
        assert CutoffPolicy(growth=1.01).next_cutoff(8) == 9

    @pytest.mark.parametrize("kwargs", [{"initial": 7}, {"initial": 12.5}, {"growth": 0.9},
                                        {"threshold": 0.0}, {"max_escalations": 0}])
    def test_invalid_policy(self, kwargs):
        with pytest.raises(ConfigError):
            CutoffPolicy(**kwargs)

    def test_relative_change(self):
        assert relative_change({"x": 1.0}, {"x": 1.001}) == pytest.approx(1e-3, rel=1e-3)
        # Values below the floor are compared in absolute terms
        assert relative_change({"x": 0.0}, {"x": 1e-9}) == pytest.approx(1e-3)
        assert relative_change({"x": 1.0}, {"y": 1.0}) == math.inf
        assert relative_change({"x": math.nan}, {"x": 1.0}) == math.inf
        assert relative_change(None, {"x": 1.0}) == math.inf

    def test_converges_at_initial_cutoff(self):
        result = adaptive_cutoff(lambda n: CutoffRun(n, {"x": 1.0 + n ** -6.0}), CutoffPolicy(),
                                 verbose=False)
        assert result.fock_cutoff == 12
        assert result.final_cutoff == 18
        assert result.result == 18
        assert result.describe()["ladder"] == "12 -> 18"
        assert "delta_12_18" in result.describe()

    def test_escalates(self):
        result = adaptive_cutoff(lambda n: CutoffRun(n, {"x": 1.0 + 2.0 ** (-n / 2)}),
                                 CutoffPolicy(), verbose=False)
        assert result.ladder == [12, 18, 27, 41]
        assert result.fock_cutoff == 27
        assert result.result == 41
        assert all(d >= 1e-4 for d in result.deltas[:-1]) and result.deltas[-1] < 1e-4

    def test_too_small_rung(self):
        def run(n):
            if n < 18:
                raise CutoffError("too small")
            return CutoffRun(n, {"x": 2.0})

        result = adaptive_cutoff(run, CutoffPolicy(), verbose=False)
        assert result.scalars[0] is None
        assert result.fock_cutoff == 18

    def test_gives_up(self):
        with pytest.raises(CutoffError) as info:
            adaptive_cutoff(lambda n: CutoffRun(n, {"x": float(n)}),
                            CutoffPolicy(max_escalations=2), verbose=False)
        assert info.value.details["ladder"] == [12, 18, 27]

    def test_verbose(self, capsys):
        adaptive_cutoff(lambda n: CutoffRun(n, {"x": 1.0}), CutoffPolicy(initial=8))
        assert "N_F=12" in capsys.readouterr().out


class TestManifest:
    """Run manifest and checksums."""

    def test_checksums(self, tmp_path):
        fpath = write_csv(tmp_path.joinpath("a.csv"), ["x"], [(1.0,)])
        manifest = RunManifest(tmp_path, "spectrum", (("g", 0.1), ("frame", "squeezed")))
        manifest.add_section("Results", {"F_final": "0.9"})
        manifest.add_file(fpath)
        profiler = Profiler()
        profiler.tick("stage")
        manifest_path = manifest.finalize(profiler)

        text = manifest_path.read_text()
        assert "Parameter values:\n\tg: 0.1\n\tframe: 'squeezed'\n" in text
        assert "Results:" in text and "Wall-clock time:" in text
        assert list(read_manifest_files(manifest_path)) == ["a.csv"]
        assert verify_manifest(manifest_path) == []
        assert not tmp_path.joinpath("manifest.txt.tmp").exists()

        fpath.write_text("x\n2.0\n")
        assert verify_manifest(manifest_path) == ["a.csv"]

    def test_duplicate_file(self, tmp_path):
        fpath = write_csv(tmp_path.joinpath("a.csv"), ["x"], [])
        manifest = RunManifest(tmp_path, "quench", ())
        manifest.add_file(fpath)
        with pytest.raises(ValueError):
            manifest.add_file(fpath)

    def test_warnings(self, tmp_path):
        manifest = RunManifest(tmp_path, "adiabatic", ())
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            warnings.warn(CutoffWarning("tail too large", tail=1e-3))
        manifest.add_warnings(caught)
        assert "\tCutoffWarning: tail too large (tail=0.001)" in manifest.lines


class TestOutputs:
    """CSV formatting."""

    @pytest.mark.parametrize("value, text", [(True, "1"), (np.bool_(False), "0"), (3, "3"),
                                             (np.int64(7), "7"), (0.1, "0.1"),
                                             (np.float64(1 / 3), repr(1 / 3)), ("ok", "ok")])
    def test_format_value(self, value, text):
        assert format_value(value) == text

    def test_floats_read_back_exactly(self, tmp_path):
        values = [1 / 3, 2 ** -40, 1e300, -0.0]
        write_csv(tmp_path.joinpath("x.csv"), ["x"], [(v,) for v in values])
        header, rows = read_csv(tmp_path.joinpath("x.csv"))
        assert header == ["x"]
        assert [float(row[0]) for row in rows] == values

    def test_row_length(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path.joinpath("x.csv"), ["a", "b"], [(1.0,)])

    def test_wigner_layout(self, tmp_path):
        grid = WignerGrid(np.array([-1.0, 0.0, 1.0]), np.array([-0.5, 0.5]),
                          np.arange(6.0).reshape(2, 3))
        header, rows = read_csv(write_wigner_csv(tmp_path.joinpath("w.csv"), grid))
        assert header == ["im\\re", "-1.0", "0.0", "1.0"]
        assert rows[1] == ["0.5", "3.0", "4.0", "5.0"]


class TestRunners:
    """Small end-to-end runs of every experiment."""

    def test_spectrum(self, tmp_path):
        hp = hparams.copy().load(CONFIGS.joinpath("spectrum.txt"))
        config = ExperimentConfig.from_hparams(hp, "spectrum", tmp_path.joinpath("first"))
        files = run_spectrum(config, quiet=True)
        assert [f.name for f in files] == ["spectrum.csv", "manifest.txt"]

        header, rows = read_csv(files[0])
        assert header == ["gain_db", "omega", "abs_S", "re_S", "im_S"]
        assert {row[0] for row in rows} == {"0.0", "20.0"}
        assert max(float(row[2]) for row in rows) == pytest.approx(1.0)
        manifest = files[1].read_text()
        assert "Spectrum at 20 dB:" in manifest and "peak_1" in manifest
        assert verify_manifest(files[1]) == []

        # Same configuration, same bytes
        again = ExperimentConfig.from_hparams(hp, "spectrum", tmp_path.joinpath("second"))
        assert run_spectrum(again, quiet=True)[0].read_bytes() == files[0].read_bytes()

    def test_quench(self):
        params = ModelParams(delta_q=0.1, g=0.05)
        curve, scalars = simulate_quench(params, 1.0, 12, 5.0, 26)
        assert curve.overlaps[0] == pytest.approx(1.0)
        assert curve.omega_t[-1] == pytest.approx(5.0)
        assert 0 < curve.mean_overlap <= 1
        assert set(scalars) == {"mean_overlap", "final_overlap", "max_photons"}

    def test_adiabatic(self, tmp_path):
        config = make_config(tmp_path, "adiabatic", **SMALL_ADIABATIC)
        files = run_adiabatic(config, quiet=True)
        names = [f.name for f in files]
        assert names == ["adiabatic.csv", "adiabatic_bounds.csv", "wigner_final.csv",
                         "wigner_nodrive.csv", "manifest.txt"]

        header, rows = read_csv(files[0])
        assert header == ["t", "F", "E_N", "lambda", "re_alpha", "im_alpha", "trace", "purity",
                          "n_squeezed", "n_lab"]
        assert len(rows) == 21
        assert float(rows[0][0]) == 0.0 and float(rows[-1][0]) == 10.0
        assert all(0 < float(row[1]) <= 1 + 1e-9 for row in rows)
        assert all(abs(float(row[6]) - 1) < 1e-6 for row in rows)
        manifest = files[-1].read_text()
        for section in ("Results:", "Cutoff:", "Wigner maxima (final state):",
                        "Control run (r_max = 0):", "Wigner convention:"):
            assert section in manifest
        # A 4 dB cat is barely entangled: the manifest points to the ramp that meets 0.9
        assert "False (F and E_N >= 0.9)" in manifest
        assert "configs/adiabatic_fast.txt" in manifest
        assert verify_manifest(files[-1]) == []

    def test_sweep(self, tmp_path):
        config = make_config(tmp_path, "sweep", sweep_gains_db=[2.0, 4.0], sweep_taus=[2.0],
                             t_f_over_tau=3.0, sweep_ideal_points=3, workers=1, dt_out=1.0,
                             cutoff=8, cutoff_max_escalations=3)
        files = run_sweep(config, quiet=True)
        header, rows = read_csv(files[0])
        assert header == ["r_max_db", "tau", "F_final", "EN_final", "fock_cutoff", "status",
                          "message"]
        assert [row[:2] for row in rows] == [["2.0", "2.0"], ["4.0", "2.0"]]
        assert all(row[5] == "ok" for row in rows)
        header, rows = read_csv(files[1])
        assert header == ["gain_db", "r_max", "g_tilde_over_omega_c", "EN_ideal", "fock_cutoff"]
        assert [float(row[0]) for row in rows] == [0.0, 2.0, 4.0]

    def test_failed_sweep_cell(self, tmp_path, monkeypatch):
        def fail(*args, **kwargs):
            raise IntegrationError("step size underflow")

        monkeypatch.setattr(runners, "adaptive_cutoff", fail)
        config = make_config(tmp_path, "sweep", workers=1)
        gain, tau, f, en, cutoff, status, message = runners._sweep_cell((4.0, 25.0), config)
        assert status == "failed" and cutoff == 0
        assert math.isnan(f) and math.isnan(en)
        assert message == "IntegrationError: step size underflow"

    def test_ideal_entanglement(self):
        entanglement, ratio, fock_cutoff = ideal_entanglement(ModelParams(g=0.1),
                                                              r_from_gain_db(10.86))
        assert ratio == pytest.approx(1.0712, abs=1e-3)
        assert entanglement == pytest.approx(0.9963, abs=1e-3)
        assert fock_cutoff == 30

    def test_frames_agree(self):
        params = ModelParams(g=0.1, kappa=1e-3, gamma=1e-3)
        ramp = DriveRamp(0.3, 2.0, 8.0)
        squeezed = simulate_adiabatic(params, ramp, 12, 1.0)
        for frame, fock_cutoff in (("lab", 30), ("displaced", 12)):
            other = simulate_adiabatic(params, ramp, fock_cutoff, 1.0, frame=frame)
            for name in ("F", "E_N", "n_squeezed", "n_lab"):
                assert np.max(np.abs(squeezed.series[name] - other.series[name])) < 1e-3

    def test_displaced_frame_agrees_at_larger_gain(self):
        params = ModelParams(g=0.1, kappa=1e-3, gamma=1e-3)
        ramp = DriveRamp(r_from_gain_db(8.0), 3.0, 12.0)
        squeezed = simulate_adiabatic(params, ramp, 36, 1.0)
        displaced = simulate_adiabatic(params, ramp, 24, 1.0, frame="displaced")
        assert displaced.frame_state.dim == 48
        for name in ("F", "E_N"):
            assert np.max(np.abs(squeezed.series[name] - displaced.series[name])) < 1e-3
        for name in ("n_squeezed", "n_lab"):
            relative = np.abs(squeezed.series[name] - displaced.series[name]) / \
                       np.maximum(1, np.abs(squeezed.series[name]))
            assert np.max(relative) < 1e-3
        # The final state is handed out in the squeezed frame
        assert displaced.final_state.space.fock_cutoff > 24
        assert displaced.final_state.trace() == pytest.approx(1.0, abs=1e-6)


class TestQuenchOverlap:
    """The error term matters less as the enhancement grows."""

    def test_overlap_improves_with_enhancement(self):
        params = ModelParams(delta_q=0.1, g=0.05)
        means = []
        for target in (0.5, 1.0, 2.0):
            curve, _ = simulate_quench(params, r_for_enhancement(target, params), 40, 10.0, 201)
            means.append(curve.mean_overlap)
        assert min(means) >= 0.9
        assert means[0] < means[1] < means[2]


class TestCommandLine:
    """Exit codes and files of synthcoupling.py."""

    def test_config_error(self, tmp_path, capsys):
        assert main(["spectrum", "-o", str(tmp_path), "--hparams", "bogus=1"]) == 2
        captured = capsys.readouterr()
        assert "bogus" in captured.err
        # Arguments are echoed in parser order
        lines = captured.out.splitlines()
        assert lines[0] == "Arguments:"
        assert lines[1].split(":")[0].strip() == "experiment"

    def test_small_cutoff(self, tmp_path):
        assert main(["adiabatic", "-o", str(tmp_path), "-q", "--cutoff", "4"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["adiabatic", "-o", str(tmp_path), "-q", "-c",
                     str(tmp_path.joinpath("missing.txt"))]) == 2

    def test_numerical_failure(self, tmp_path):
        # Without any loss the stationary state is not unique
        code = main(["spectrum", "-o", str(tmp_path), "-q", "--cutoff", "8", "--hparams",
                     "kappa=0.0, gamma=0.0, g=1e-4, spectrum_gains_db=[0.0]"])
        assert code == 3
        diagnostics = tmp_path.joinpath("diagnostics.txt").read_text()
        assert diagnostics.startswith("SteadyStateError")
        assert "Parameter values:" in diagnostics

    def test_quench(self, tmp_path):
        code = main(["quench", "-o", str(tmp_path), "-q", "-c",
                     str(CONFIGS.joinpath("quench.txt")), "--cutoff", "8", "--hparams",
                     "quench_targets=[0.5], quench_samples=21, quench_omega_t_max=2.0"])
        assert code == 0
        header, rows = read_csv(tmp_path.joinpath("quench.csv"))
        assert header == ["g_tilde_over_omega_c", "t", "omega_c_t", "overlap"]
        assert len(rows) == 21
        assert verify_manifest(tmp_path.joinpath("manifest.txt")) == []


@pytest.mark.slow
class TestAdiabaticPreparation:
    """Desk-scale runs of the ramped preparation."""

    def test_entangled_cat(self, usc_params):
        ramp = DriveRamp(r_from_gain_db(10.86), 10.0, 50.0)
        run = simulate_adiabatic(usc_params, ramp, 20, 1.0)
        assert run.scalars["F_final"] >= 0.9
        assert run.scalars["EN_final"] >= 0.9
        alpha = complex(run.alpha_traj.alphas[-1])
        assert abs(alpha) == pytest.approx(1.0, abs=0.1)

        maxima = find_wigner_maxima(wigner(partial_trace(run.final_state, CAVITY)))
        assert len(maxima) == 2
        for beta, _ in maxima:
            assert abs(beta.real) == pytest.approx(abs(alpha.real), rel=0.1)

    def test_undriven_control_stays_near_vacuum(self, usc_params):
        run = simulate_adiabatic(usc_params, DriveRamp(0.0, 10.0, 50.0), 12, 1.0)
        grid = wigner(partial_trace(run.final_state, CAVITY))
        assert grid.at(0j) == pytest.approx(2 / math.pi, rel=0.02)

    def test_closed_system(self, closed_params):
        ramp = DriveRamp(r_from_gain_db(10.86), 20.0, 100.0)
        run = simulate_adiabatic(closed_params, ramp, 20, 1.0)
        assert run.scalars["F_final"] >= 0.99
        assert np.allclose(run.series["purity"], 1, atol=1e-6)

    def test_frames_agree_along_preparation(self, usc_params, short_ramp):
        # The lab-frame cat sits e^r alpha ~ 3.5 out along the antisqueezed quadrature, whose
        # photon tail needs about 120 levels to stay below 1e-3
        squeezed = simulate_adiabatic(usc_params, short_ramp, 24, 1.0)
        lab = simulate_adiabatic(usc_params, short_ramp, 120, 1.0, frame="lab")
        displaced = simulate_adiabatic(usc_params, short_ramp, 16, 1.0, frame="displaced")
        for other in (lab, displaced):
            for name in ("F", "E_N"):
                assert np.max(np.abs(squeezed.series[name] - other.series[name])) < 1e-3

    def test_high_gain_loses_to_squeezed_noise(self, tmp_path):
        hp = hparams.copy().load(CONFIGS.joinpath("sweep.txt"))
        config = ExperimentConfig.from_hparams(hp, "sweep", tmp_path)
        cells = {gain: runners._sweep_cell((gain, 100.0), config) for gain in (10.86, 20.0)}
        assert all(cell[5] == "ok" for cell in cells.values()), cells
        _, _, f_usc, en_usc, _, _, _ = cells[10.86]
        _, _, f_high, en_high, _, _, _ = cells[20.0]
        assert f_usc == pytest.approx(0.864, abs=0.01)
        assert en_usc == pytest.approx(0.690, abs=0.01)
        assert f_high < f_usc
        assert en_high < en_usc
