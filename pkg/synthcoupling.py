from pathlib import Path
import argparse
import sys
import traceback

from cqed.exceptions import ConfigError, NumericalError
from experiments.hparams import EXPERIMENTS, FRAMES, ExperimentConfig, hparams
from experiments.runners import RUNNERS
from utils.argutils import format_params, print_args


def write_diagnostics(out_dir: Path, error: NumericalError, values):
    out_dir.mkdir(parents=True, exist_ok=True)
    fpath = out_dir.joinpath("diagnostics.txt")
    with fpath.open("w") as f:
        f.write("%s: %s\n" % (type(error).__name__, error))
        f.write("-----\nDetails:\n")
        for line in format_params({k: repr(v) for k, v in error.details.items()}, indent="\t"):
            f.write(line + "\n")
        f.write("-----\nParameter values:\n")
        for name, value in values:
            f.write("\t%s: %r\n" % (name, value))
        f.write("-----\n")
        f.write("".join(traceback.format_exception(type(error), error, error.__traceback__)))
    return fpath


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Simulates a cavity QED system whose coupling is enhanced by a parametric "
                    "(two-photon) drive on the cavity. Each experiment writes CSV files and a "
                    "manifest into the output directory.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help=\
        "spectrum: qubit absorption spectrum with and without drive. quench: sudden switch-on of "
        "the enhanced coupling. adiabatic: ramped preparation of the entangled ground state. "
        "sweep: final fidelity and entanglement over a grid of gains and ramp times.")
    parser.add_argument("-c", "--config", type=Path, default=None, help=\
        "Path to a key = value config file, see configs/. Defaults apply to missing keys.")
    parser.add_argument("-o", "--out", type=Path, required=True, help=\
        "Output directory for the CSV files and the manifest.")
    parser.add_argument("--cutoff", type=int, default=None, help=\
        "Initial Fock cutoff N_F of the adaptive cutoff ladder (>= 8).")
    parser.add_argument("--tolerance", type=float, default=None, help=\
        "Relative tolerance of the time integrator.")
    parser.add_argument("--frame", choices=list(FRAMES), default=None, help=\
        "Frame in which the adiabatic master equation is integrated.")
    parser.add_argument("--hparams", type=str, default="", help=\
        "Hyperparameter overrides as a comma-separated list of name=value pairs")
    parser.add_argument("-q", "--quiet", action="store_true", help=\
        "Disable progress bars and console reports.")
    args = parser.parse_args(argv)
    if not args.quiet:
        print_args(args, parser)

    hp = hparams.copy()
    try:
        if args.config is not None:
            hp.load(args.config)
        hp.parse(args.hparams)
        for key, value in (("cutoff", args.cutoff), ("tolerance", args.tolerance),
                           ("frame", args.frame)):
            if value is not None:
                hp[key] = value
        config = ExperimentConfig.from_hparams(hp, args.experiment, args.out)
    except ConfigError as e:
        print("Configuration error: %s" % e, file=sys.stderr)
        return 2

    try:
        RUNNERS[config.experiment](config, quiet=args.quiet)
    except ConfigError as e:
        print("Configuration error: %s" % e, file=sys.stderr)
        return 2
    except NumericalError as e:
        fpath = write_diagnostics(config.out_dir, e, config.values)
        print("Numerical failure (%s): %s\nDiagnostics written to %s" %
              (type(e).__name__, e, fpath), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
