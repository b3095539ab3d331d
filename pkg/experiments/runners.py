"""
Experiment runners. Each runner takes a validated ExperimentConfig, writes its CSV files and a
manifest into config.out_dir and returns the paths of everything it wrote.
"""
from collections import OrderedDict
from dataclasses import dataclass, replace
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Tuple
import math
import warnings

import numpy as np
import scipy.integrate
from tqdm import tqdm

from cqed.analysis import (DisplacementTrajectory, alpha_trajectory, cat_target, coupling_regime,
                           error_norm_estimates, expect, fidelity, ideal_rabi_ground_state,
                           log_negativity, overlap)
from cqed.dynamics import (TimeGrid, evolve_lindblad, evolve_schrodinger, lindblad_lab_frame_spec,
                           lindblad_squeezed_frame_spec)
from cqed.displaced import DisplacedFrame, displaced_to_squeezed
from cqed.exceptions import CutoffWarning, NumericalError
from cqed.model import (DriveRamp, ModelParams, gain_db, hamiltonian_squeezed_parts,
                        lab_photon_number, lambda_from_r, r_for_enhancement, r_from_gain_db,
                        ramp_r, snapshot_from_r, squeezed_vacuum_tail, squeeze_tail_tolerance,
                        to_squeezed_frame)
from cqed.operators import (CAVITY, DensityMatrix, HilbertSpec, composite_operators, ground_state,
                            partial_trace)
from cqed.spectrum import SpectrumSettings, absorption_spectrum, find_peaks
from cqed.wigner import default_axes, find_wigner_maxima, wigner
from experiments.cutoff import CutoffRun, adaptive_cutoff
from experiments.hparams import ExperimentConfig
from experiments.manifest import RunManifest
from experiments.outputs import write_csv, write_wigner_csv
from utils.profiler import Profiler


## Adiabatic preparation
# Scores a preparation has to reach at t_f
preparation_threshold = 0.9


@dataclass
class AdiabaticRun:
    times: np.ndarray
    # Columns of adiabatic.csv, in order
    series: Dict[str, np.ndarray]
    # State at t_f in the frame of the master equation, squeezed frame for the lab frame runs
    frame_state: DensityMatrix
    alpha_traj: DisplacementTrajectory
    fock_cutoff: int
    frame: str = "squeezed"

    @property
    def final_state(self) -> DensityMatrix:
        """ Squeezed-frame state at t_f, on a padded Fock space for displaced-frame runs. """
        if self.frame == "displaced":
            return displaced_to_squeezed(self.frame_state, complex(self.alpha_traj.alphas[-1]))
        return self.frame_state

    @property
    def scalars(self) -> Dict[str, float]:
        return {
            "F_final": float(self.series["F"][-1]),
            "EN_final": float(self.series["E_N"][-1]),
            "n_squeezed_final": float(self.series["n_squeezed"][-1]),
        }


def simulate_adiabatic(params: ModelParams, ramp: DriveRamp, fock_cutoff: int, dt_out: float,
                       tolerance=1e-9, frame="squeezed") -> AdiabaticRun:
    """
    Evolves |0,-z> under the master equation along the ramp and scores every sample against the
    cat built from the displacement reached at t_f. In the lab frame each sample is moved to the
    squeezed frame before it is scored; in the displaced frame the scores are those of the
    squeezed-frame state, computed from the frame state (cqed.displaced).
    """
    space = HilbertSpec(fock_cutoff)
    grid = TimeGrid(0.0, ramp.t_f, dt_out, rtol=tolerance)
    times = grid.times()
    alpha_traj = alpha_trajectory(params, ramp, times)
    alpha_final = complex(alpha_traj.alphas[-1])
    rho0 = ground_state(space).to_density_matrix()
    r = np.array([ramp_r(t, ramp)[0] for t in times])

    if frame == "displaced":
        displaced = DisplacedFrame(params, ramp, space, alpha_traj)
        trajectory = evolve_lindblad(displaced.lindblad_spec(), rho0, grid)
        states = trajectory.states
        scores = [displaced.scores(rho, t, alpha_final) for rho, t in zip(states, times)]
    else:
        if frame == "squeezed":
            trajectory = evolve_lindblad(lindblad_squeezed_frame_spec(params, ramp, space), rho0,
                                         grid)
            states = trajectory.states
        else:
            trajectory = evolve_lindblad(lindblad_lab_frame_spec(params, ramp, space), rho0, grid)
            tail = squeezed_vacuum_tail(ramp.r_max, fock_cutoff)
            if tail >= squeeze_tail_tolerance:
                warnings.warn(CutoffWarning("Squeezed vacuum weight %.2e beyond N_F=%d at r_max=%g"
                                            % (tail, fock_cutoff, ramp.r_max), tail=tail,
                                            fock_cutoff=fock_cutoff, r=ramp.r_max))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CutoffWarning)
                states = [to_squeezed_frame(rho, x) for rho, x in zip(trajectory.states, r)]
        target = cat_target(alpha_final, space)
        n_op = composite_operators(space)["n"]
        scores = [(fidelity(rho, target), log_negativity(rho), expect(n_op, rho).real,
                   lab_photon_number(rho, x)) for rho, x in zip(states, r)]

    f, en, n_squeezed, n_lab = (np.array(column) for column in zip(*scores))
    series = OrderedDict([
        ("F", f),
        ("E_N", en),
        ("lambda", np.array([lambda_from_r(x, params.delta_c) for x in r])),
        ("re_alpha", alpha_traj.alphas.real),
        ("im_alpha", alpha_traj.alphas.imag),
        ("trace", trajectory.scalars["trace"]),
        ("purity", trajectory.scalars["purity"]),
        ("n_squeezed", n_squeezed),
        ("n_lab", n_lab),
    ])
    return AdiabaticRun(times, series, states[-1], alpha_traj, fock_cutoff, frame)


def _adiabatic_cutoff_run(config: ExperimentConfig, ramp: DriveRamp, fock_cutoff: int):
    run = simulate_adiabatic(config.params, ramp, fock_cutoff, config.dt_out, config.tolerance,
                             config.frame)
    return CutoffRun(run, run.scalars)


def run_adiabatic(config: ExperimentConfig, quiet=False) -> List[Path]:
    out_dir = _prepare(config)
    profiler = Profiler()
    manifest = RunManifest(out_dir, config.experiment, config.values)
    params, ramp = config.params, config.ramp

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if not quiet:
            print("Adiabatic preparation: r_max=%g (%.2f dB), tau=%g, t_f=%g, %s frame" %
                  (ramp.r_max, gain_db(ramp.r_max), ramp.tau, ramp.t_f, config.frame))
        ladder = adaptive_cutoff(partial(_adiabatic_cutoff_run, config, ramp), config.cutoff,
                                 verbose=not quiet)
        run = ladder.result
        profiler.tick("evolution")

        bounds = [error_norm_estimates(t, params, ramp, run.alpha_traj) for t in run.times]
        profiler.tick("error bounds")

        axes = default_axes(config.wigner_extent, config.wigner_points)
        final_grid = wigner(partial_trace(run.final_state, CAVITY), *axes)
        maxima = find_wigner_maxima(final_grid)
        control_grid = None
        if config.control_run:
            control = simulate_adiabatic(params, replace(ramp, r_max=0.0), config.cutoff.initial,
                                         config.dt_out, config.tolerance, config.frame)
            control_grid = wigner(partial_trace(control.final_state, CAVITY), *axes)
        profiler.tick("wigner")

    files = [write_csv(out_dir.joinpath("adiabatic.csv"), ["t"] + list(run.series.keys()),
                       zip(run.times, *run.series.values()))]
    files.append(write_csv(
        out_dir.joinpath("adiabatic_bounds.csv"),
        ["t", "err_rabi_bound", "da_rabi_bound", "err_ok", "da_ok"],
        ((t, b.err_rabi_bound, b.da_rabi_bound, b.err_ok, b.da_ok) for t, b in zip(run.times, bounds))))
    files.append(write_wigner_csv(out_dir.joinpath("wigner_final.csv"), final_grid))
    if control_grid is not None:
        files.append(write_wigner_csv(out_dir.joinpath("wigner_nodrive.csv"), control_grid))

    r_final = ramp_r(ramp.t_f, ramp)[0]
    alpha_final = complex(run.alpha_traj.alphas[-1])
    results = OrderedDict([
        ("F_final", repr(run.scalars["F_final"])),
        ("EN_final", repr(run.scalars["EN_final"])),
        ("alpha_final", repr(alpha_final)),
        ("r_final", repr(r_final)),
        ("gain_db_final", repr(gain_db(r_final))),
        ("regime", coupling_regime(params, r_final)),
        ("frame", config.frame),
        ("error_bounds_ok", str(all(b.err_ok and b.da_ok for b in bounds))),
    ])
    met = min(run.scalars["F_final"], run.scalars["EN_final"]) >= preparation_threshold
    results["threshold_met"] = "%s (F and E_N >= %g)" % (met, preparation_threshold)
    if not met:
        results["threshold_note"] = (
            "the shipped tau = 10 ramp (configs/adiabatic_fast.txt) meets both thresholds; slower "
            "ramps such as tau = 100 (configs/adiabatic.txt) spend longer under the squeezed cavity "
            "loss and end below them")
    manifest.add_section("Results", results)
    manifest.add_section("Cutoff", ladder.describe())
    manifest.add_section("Wigner maxima (final state)", OrderedDict(
        ("maximum_%d" % i, "beta=%r W=%r" % (beta, value)) for i, (beta, value) in enumerate(maxima)))
    if control_grid is not None:
        manifest.add_section("Control run (r_max = 0)", {"W_origin": repr(control_grid.at(0j))})
    manifest.add_section("Wigner convention", {"convention": final_grid.convention})
    manifest.add_warnings(caught)
    _report(caught, quiet)

    if not quiet:
        print("F(t_f) = %.5f, E_N(t_f) = %.5f, alpha(t_f) = %.5f%+.5fj, converged at N_F=%d" %
              (run.scalars["F_final"], run.scalars["EN_final"], alpha_final.real,
               alpha_final.imag, ladder.fock_cutoff))
    return _finalize(manifest, files, profiler)


## Absorption spectrum
def _spectrum_cutoff_run(params, snap, settings, prominence, fock_cutoff):
    result = absorption_spectrum(params, snap, HilbertSpec(fock_cutoff), settings)
    peaks = find_peaks(result, prominence)
    scalars = {"n_peaks": float(len(peaks))}
    for i, peak in enumerate(peaks):
        scalars["peak_%d_position" % i] = peak.position
        scalars["peak_%d_height" % i] = peak.height
    return CutoffRun((result, peaks), scalars)


def run_spectrum(config: ExperimentConfig, quiet=False) -> List[Path]:
    out_dir = _prepare(config)
    profiler = Profiler()
    manifest = RunManifest(out_dir, config.experiment, config.values)
    settings = SpectrumSettings(span=config.spectrum_span, t_max=config.spectrum_t_max,
                                decay_ratio=config.spectrum_decay_ratio,
                                padding=config.spectrum_padding)

    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for gain in tqdm(config.spectrum_gains_db, "Spectra", unit="drives", disable=quiet):
            r = r_from_gain_db(gain)
            snap = snapshot_from_r(r, 0.0, config.params)
            params = config.params
            if config.spectrum_resonant:
                params = replace(params, delta_q=snap.omega_c_eff)
            ladder = adaptive_cutoff(
                partial(_spectrum_cutoff_run, params, snap, settings, config.peak_prominence),
                config.cutoff, verbose=not quiet)
            result, peaks = ladder.result
            values = result.normalized()
            rows.extend((gain, omega, abs(v), v.real, v.imag)
                        for omega, v in zip(result.omegas, values))

            section = OrderedDict([
                ("r", repr(r)),
                ("delta_q", repr(params.delta_q)),
                ("omega_c", repr(snap.omega_c_eff)),
                ("g_tilde", repr(snap.g_tilde)),
                ("regime", coupling_regime(config.params, r)),
                ("achieved_decay", "%.3e" % result.achieved_decay),
                ("correlation_time", repr(result.correlation_time)),
            ])
            section.update(ladder.describe())
            for i, peak in enumerate(peaks):
                section["peak_%d" % i] = "omega=%r height=%r fwhm=%r" % \
                                         (peak.position, peak.height, peak.fwhm)
            manifest.add_section("Spectrum at %g dB" % gain, section)
            profiler.tick("spectrum %g dB" % gain)
            if not quiet:
                print("%g dB: %d peak(s) at %s" % (gain, len(peaks),
                                                   ", ".join("%.6g" % p.position for p in peaks)))
    manifest.add_warnings(caught)
    _report(caught, quiet)

    files = [write_csv(out_dir.joinpath("spectrum.csv"),
                       ["gain_db", "omega", "abs_S", "re_S", "im_S"], rows)]
    return _finalize(manifest, files, profiler)


## Quench
@dataclass
class QuenchCurve:
    r: float
    omega_c: float
    times: np.ndarray
    omega_t: np.ndarray
    overlaps: np.ndarray

    @property
    def mean_overlap(self) -> float:
        span = self.omega_t[-1] - self.omega_t[0]
        return float(scipy.integrate.trapezoid(self.overlaps, self.omega_t) / span)


def simulate_quench(params: ModelParams, r: float, fock_cutoff: int, omega_t_max: float,
                    samples: int) -> Tuple[QuenchCurve, Dict[str, float]]:
    """
    Sudden switch-on of a static drive: |0,-z> evolves under H_Rabi + H_Err and, in parallel, under
    H_Rabi alone. The overlap of the two states measures how well the ideal Rabi dynamics is
    realized.
    """
    space = HilbertSpec(fock_cutoff)
    snap = snapshot_from_r(r, 0.0, params)
    t_end = omega_t_max / snap.omega_c_eff
    grid = TimeGrid(0.0, t_end, t_end / (samples - 1))
    h_rabi, h_err, _ = hamiltonian_squeezed_parts(snap, params, space)
    psi0 = ground_state(space)

    full = evolve_schrodinger(h_rabi + h_err, psi0, grid)
    ideal = evolve_schrodinger(h_rabi, psi0, grid)
    overlaps = np.array([overlap(a, b) for a, b in zip(ideal.states, full.states)])
    n_op = composite_operators(space)["n"]
    curve = QuenchCurve(r, snap.omega_c_eff, full.times, full.times * snap.omega_c_eff, overlaps)
    scalars = {
        "mean_overlap": curve.mean_overlap,
        "final_overlap": float(overlaps[-1]),
        "max_photons": max(expect(n_op, psi).real for psi in ideal.states),
    }
    return curve, scalars


def _quench_cutoff_run(params, r, omega_t_max, samples, fock_cutoff):
    return CutoffRun(*simulate_quench(params, r, fock_cutoff, omega_t_max, samples))


def run_quench(config: ExperimentConfig, quiet=False) -> List[Path]:
    out_dir = _prepare(config)
    profiler = Profiler()
    manifest = RunManifest(out_dir, config.experiment, config.values)

    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for target in tqdm(config.quench_targets, "Quench curves", unit="curves", disable=quiet):
            r = r_for_enhancement(target, config.params)
            ladder = adaptive_cutoff(
                partial(_quench_cutoff_run, config.params, r, config.quench_omega_t_max,
                        config.quench_samples), config.cutoff, verbose=not quiet)
            curve = ladder.result
            rows.extend((target, t, wt, value)
                        for t, wt, value in zip(curve.times, curve.omega_t, curve.overlaps))

            section = OrderedDict([
                ("r", repr(r)),
                ("gain_db", repr(gain_db(r))),
                ("omega_c", repr(curve.omega_c)),
                ("mean_overlap", repr(curve.mean_overlap)),
                ("min_overlap", repr(float(curve.overlaps.min()))),
            ])
            section.update(ladder.describe())
            manifest.add_section("Quench at g_tilde/Omega_c = %g" % target, section)
            profiler.tick("quench %g" % target)
            if not quiet:
                print("g_tilde/Omega_c = %g: r = %.5f, time-averaged overlap %.5f" %
                      (target, r, curve.mean_overlap))
    manifest.add_warnings(caught)
    _report(caught, quiet)

    files = [write_csv(out_dir.joinpath("quench.csv"),
                       ["g_tilde_over_omega_c", "t", "omega_c_t", "overlap"], rows)]
    return _finalize(manifest, files, profiler)


## Sweep
def _sweep_cell(cell, config: ExperimentConfig):
    gain, tau = cell
    ramp = DriveRamp(r_from_gain_db(gain), tau, config.t_f_over_tau * tau)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            ladder = adaptive_cutoff(partial(_adiabatic_cutoff_run, config, ramp), config.cutoff,
                                     verbose=False)
        except NumericalError as e:
            return (gain, tau, math.nan, math.nan, 0, "failed", "%s: %s" % (type(e).__name__, e))
    scalars = ladder.result.scalars
    message = "; ".join(sorted(set(str(w.message) for w in caught)))
    return (gain, tau, scalars["F_final"], scalars["EN_final"], ladder.fock_cutoff, "ok", message)


def ideal_entanglement(params: ModelParams, r: float) -> Tuple[float, float, int]:
    """
    E_N of the ideal Rabi ground state at a static squeeze parameter r.

    :return: E_N, g_tilde / Omega_c and the cutoff used
    """
    snap = snapshot_from_r(r, 0.0, params)
    ratio = snap.g_tilde / snap.omega_c_eff
    fock_cutoff = max(8, int(math.ceil(ratio ** 2 + 8 * ratio + 20)))
    psi = ideal_rabi_ground_state(snap.g_tilde, snap.omega_c_eff, params.delta_q,
                                  HilbertSpec(fock_cutoff))
    return log_negativity(psi.to_density_matrix()), ratio, fock_cutoff


def run_sweep(config: ExperimentConfig, quiet=False) -> List[Path]:
    out_dir = _prepare(config)
    profiler = Profiler()
    manifest = RunManifest(out_dir, config.experiment, config.values)

    cells = [(gain, tau) for tau in config.sweep_taus for gain in config.sweep_gains_db]
    work_fn = partial(_sweep_cell, config=config)
    if config.workers > 1:
        with Pool(config.workers) as pool:
            tasks = pool.imap(work_fn, cells)
            rows = list(tqdm(tasks, "Sweep", len(cells), unit="runs", disable=quiet))
    else:
        rows = [work_fn(cell) for cell in tqdm(cells, "Sweep", unit="runs", disable=quiet)]
    profiler.tick("sweep")

    ideal_gains = sorted(set(np.linspace(min(0.0, min(config.sweep_gains_db)),
                                         max(config.sweep_gains_db),
                                         config.sweep_ideal_points).tolist())
                         | set(config.sweep_gains_db))
    ideal_rows = []
    for gain in tqdm(ideal_gains, "Ideal ground states", unit="gains", disable=quiet):
        r = r_from_gain_db(gain)
        entanglement, ratio, fock_cutoff = ideal_entanglement(config.params, r)
        ideal_rows.append((gain, r, ratio, entanglement, fock_cutoff))
    profiler.tick("ideal ground states")

    failed = [row for row in rows if row[5] != "ok"]
    manifest.add_section("Sweep", OrderedDict([
        ("cells", str(len(rows))),
        ("failed", str(len(failed))),
        ("workers", str(config.workers)),
    ]))
    for gain, tau, _, _, _, _, message in failed:
        manifest.write_line("\tfailed cell %g dB, tau=%g: %s" % (gain, tau, message))
    if not quiet and failed:
        print("%d of %d sweep cells failed, see %s" % (len(failed), len(rows),
                                                      out_dir.joinpath(RunManifest.file_name)))

    files = [
        write_csv(out_dir.joinpath("sweep.csv"),
                  ["r_max_db", "tau", "F_final", "EN_final", "fock_cutoff", "status", "message"],
                  rows),
        write_csv(out_dir.joinpath("sweep_ideal.csv"),
                  ["gain_db", "r_max", "g_tilde_over_omega_c", "EN_ideal", "fock_cutoff"],
                  ideal_rows),
    ]
    return _finalize(manifest, files, profiler)


RUNNERS = {
    "spectrum": run_spectrum,
    "quench": run_quench,
    "adiabatic": run_adiabatic,
    "sweep": run_sweep,
}


def _prepare(config: ExperimentConfig) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return config.out_dir


def _report(caught, quiet):
    if quiet:
        return
    for message in sorted(set("%s: %s" % (w.category.__name__, w.message) for w in caught)):
        print("Warning: %s" % message)


def _finalize(manifest: RunManifest, files: List[Path], profiler: Profiler) -> List[Path]:
    for fpath in files:
        manifest.add_file(fpath)
    return files + [manifest.finalize(profiler)]
