import ast
import pprint
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from cqed.exceptions import ConfigError, InstabilityError
from cqed.model import DriveRamp, ModelParams, r_from_gain_db, snapshot_from_r
from experiments.cutoff import CutoffPolicy

EXPERIMENTS = ("spectrum", "quench", "adiabatic", "sweep")
FRAMES = ("squeezed", "lab", "displaced")


class HParams(object):
    def __init__(self, **kwargs): self.__dict__.update(kwargs)
    def __setitem__(self, key, value): setattr(self, key, value)
    def __getitem__(self, key): return getattr(self, key)
    def __repr__(self): return pprint.pformat(self.__dict__)

    def copy(self):
        return HParams(**self.__dict__)

    def _set(self, key, value, where):
        if key not in self.__dict__:
            raise ConfigError("Unknown parameter %r (%s)" % (key, where), key=key)
        try:
            self.__dict__[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            raise ConfigError("Cannot read the value of %r (%s): %r" % (key, where, value),
                              key=key)

    def parse(self, string):
        # Overrides hparams from a comma-separated string of name=value pairs. Values may be lists:
        # a comma only separates pairs when it is followed by "name=".
        if len(string) > 0:
            for pair in re.split(r",\s*(?=[A-Za-z_]\w*\s*=)", string):
                if "=" not in pair:
                    raise ConfigError("Expected name=value, got %r" % pair)
                key, value = pair.split("=", 1)
                self._set(key.strip(), value.strip(), "--hparams")
        return self

    def load(self, fpath: Path):
        """
        Applies a config file: one "name = value" per line, values are Python literals, "#" starts
        a comment and blank lines are ignored.
        """
        fpath = Path(fpath)
        if not fpath.exists():
            raise ConfigError("Config file %s does not exist" % fpath)
        with fpath.open("r") as config_file:
            for lineno, line in enumerate(config_file, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("%s:%d: expected name = value" % (fpath, lineno))
                key, value = line.split("=", 1)
                self._set(key.strip(), value.strip(), "%s:%d" % (fpath, lineno))
        return self


hparams = HParams(
        ### Physical parameters, in units of delta_c
        delta_c = 1.0,
        delta_q = 0.0,
        g = 0.1,
        kappa = 1e-4,
        gamma = 5e-5,

        ### Parametric drive r(t) = r_max tanh(t / 2 tau)
        gain_db = 10.86,                            # Final gain e^{2 r_max} in dB
        r_max = None,                               # Takes precedence over gain_db when set
        tau = 100.0,
        t_f = None,                                 # Defaults to t_f_over_tau * tau
        t_f_over_tau = 5.0,

        ### Integration
        dt_out = 1.0,                               # Sampling step of the stored trajectory
        tolerance = 1e-9,                           # Relative tolerance of the integrator
        frame = "squeezed",                         # "squeezed", "lab" or "displaced" master equation

        ### Adaptive Fock cutoff
        cutoff = 12,                                # Initial N_F of the ladder (>= 8)
        cutoff_growth = 1.5,
        cutoff_threshold = 1e-4,                    # Max relative change between two rungs
        cutoff_max_escalations = 5,

        ### Absorption spectrum
        spectrum_gains_db = [0.0, 20.0],
        spectrum_resonant = True,                   # Sets delta_q = Omega_c[r] for every gain
        spectrum_span = None,                       # Half window, 20 max(kappa, gamma, g_tilde) if None
        spectrum_t_max = None,
        spectrum_decay_ratio = 1e-6,
        spectrum_padding = 4,
        peak_prominence = 0.05,

        ### Quench
        quench_targets = [0.5, 1.0, 2.0],           # g_tilde / Omega_c of each curve
        quench_omega_t_max = 10.0,                  # Curves run over Omega_c t in [0, quench_omega_t_max]
        quench_samples = 201,

        ### Sweep
        sweep_gains_db = [4.0, 6.0, 8.0, 10.86, 14.0, 20.0],
        sweep_taus = [25.0, 50.0, 100.0, 200.0],
        sweep_ideal_points = 41,                    # Gains of the ideal ground-state reference curve
        workers = 4,

        ### Wigner grids
        wigner_extent = 3.5,
        wigner_points = 71,
        control_run = True,                         # Also evolve without drive (r_max = 0)
)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated, immutable view of the hyperparameters of one run. Build it with from_hparams().
    """
    experiment: str
    out_dir: Path
    params: ModelParams
    ramp: DriveRamp
    dt_out: float
    tolerance: float
    frame: str
    cutoff: CutoffPolicy
    spectrum_gains_db: Tuple[float, ...]
    spectrum_resonant: bool
    spectrum_span: Optional[float]
    spectrum_t_max: Optional[float]
    spectrum_decay_ratio: float
    spectrum_padding: int
    peak_prominence: float
    quench_targets: Tuple[float, ...]
    quench_omega_t_max: float
    quench_samples: int
    sweep_gains_db: Tuple[float, ...]
    sweep_taus: Tuple[float, ...]
    t_f_over_tau: float
    sweep_ideal_points: int
    workers: int
    wigner_extent: float
    wigner_points: int
    control_run: bool
    # Resolved hyperparameters, as recorded in the manifest
    values: Tuple[Tuple[str, object], ...]

    @staticmethod
    def from_hparams(hp: HParams, experiment: str, out_dir: Path) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError("Unknown experiment %r, expected one of %s" %
                              (experiment, ", ".join(EXPERIMENTS)))
        if hp.frame not in FRAMES:
            raise ConfigError("frame must be one of %s, got %r" % (FRAMES, hp.frame), key="frame")

        params = ModelParams(hp.delta_c, hp.delta_q, hp.g, hp.kappa, hp.gamma)
        r_max = hp.r_max if hp.r_max is not None else r_from_gain_db(hp.gain_db)
        _check_stable(r_max, params, "r_max" if hp.r_max is not None else "gain_db")
        if not hp.t_f_over_tau > 0:
            raise ConfigError("t_f_over_tau must be positive, got %r" % hp.t_f_over_tau,
                              key="t_f_over_tau")
        t_f = hp.t_f if hp.t_f is not None else hp.t_f_over_tau * hp.tau
        ramp = DriveRamp(r_max, hp.tau, t_f)

        for key in ("dt_out", "tolerance", "quench_omega_t_max", "wigner_extent",
                    "spectrum_decay_ratio", "peak_prominence"):
            if not hp[key] > 0:
                raise ConfigError("%s must be positive, got %r" % (key, hp[key]), key=key)
        if not hp.tolerance < 1:
            raise ConfigError("tolerance must be < 1, got %r" % hp.tolerance, key="tolerance")
        for key in ("quench_samples", "wigner_points", "sweep_ideal_points", "workers",
                    "spectrum_padding"):
            if int(hp[key]) != hp[key] or hp[key] < 1:
                raise ConfigError("%s must be a positive integer, got %r" % (key, hp[key]), key=key)
        if hp.quench_samples < 2 or hp.wigner_points < 3:
            raise ConfigError("quench_samples >= 2 and wigner_points >= 3 are required")

        gains = _float_list(hp, "spectrum_gains_db")
        sweep_gains = _float_list(hp, "sweep_gains_db")
        sweep_taus = _float_list(hp, "sweep_taus")
        targets = _float_list(hp, "quench_targets")
        for gain in gains + sweep_gains:
            _check_stable(r_from_gain_db(gain), params, "gain %r dB" % gain)
        if any(tau <= 0 for tau in sweep_taus):
            raise ConfigError("sweep_taus must be positive", key="sweep_taus")
        if experiment == "quench" and params.g <= 0:
            raise ConfigError("The quench targets g_tilde/Omega_c need g > 0", key="g")

        cutoff = CutoffPolicy(hp.cutoff, hp.cutoff_growth, hp.cutoff_threshold,
                              hp.cutoff_max_escalations)

        return ExperimentConfig(
            experiment=experiment,
            out_dir=Path(out_dir),
            params=params,
            ramp=ramp,
            dt_out=float(hp.dt_out),
            tolerance=float(hp.tolerance),
            frame=hp.frame,
            cutoff=cutoff,
            spectrum_gains_db=tuple(gains),
            spectrum_resonant=bool(hp.spectrum_resonant),
            spectrum_span=hp.spectrum_span,
            spectrum_t_max=hp.spectrum_t_max,
            spectrum_decay_ratio=float(hp.spectrum_decay_ratio),
            spectrum_padding=int(hp.spectrum_padding),
            peak_prominence=float(hp.peak_prominence),
            quench_targets=tuple(targets),
            quench_omega_t_max=float(hp.quench_omega_t_max),
            quench_samples=int(hp.quench_samples),
            sweep_gains_db=tuple(sweep_gains),
            sweep_taus=tuple(sweep_taus),
            t_f_over_tau=float(hp.t_f_over_tau),
            sweep_ideal_points=int(hp.sweep_ideal_points),
            workers=int(hp.workers),
            wigner_extent=float(hp.wigner_extent),
            wigner_points=int(hp.wigner_points),
            control_run=bool(hp.control_run),
            values=tuple(sorted(hp.__dict__.items())),
        )


def _float_list(hp: HParams, key: str):
    values = hp[key]
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ConfigError("%s must be a non-empty list, got %r" % (key, values), key=key)
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError("%s must only contain numbers, got %r" % (key, values), key=key)


def _check_stable(r: float, params: ModelParams, what: str):
    try:
        snapshot_from_r(r, 0.0, params)
    except InstabilityError as e:
        raise ConfigError("%s is at or beyond the parametric instability: %s" % (what, e))
    except (ValueError, OverflowError):
        raise ConfigError("%s gives an invalid squeeze parameter %r" % (what, r))
