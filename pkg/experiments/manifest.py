from collections import OrderedDict
from datetime import datetime
from pathlib import Path
import hashlib
import os

from cqed import __version__
from utils.argutils import format_params


def sha256sum(fpath: Path) -> str:
    digest = hashlib.sha256()
    with Path(fpath).open("rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class RunManifest:
    """
    Registers metadata about a run in <out_dir>/manifest.txt: the resolved parameters, results,
    cutoff ladders, warnings, stage timings and a checksum for every output file. Nothing is
    written until finalize(), which replaces the file atomically.
    """
    file_name = "manifest.txt"

    def __init__(self, out_dir, experiment, values):
        self.out_dir = Path(out_dir)
        self.lines = []
        self.files = OrderedDict()

        start_time = str(datetime.now().strftime("%A %d %B %Y at %H:%M"))
        self.write_line("Running experiment %s with synthcoupling %s on %s" %
                        (experiment, __version__, start_time))
        self.write_line("-----")
        self._log_params(values)

    def _log_params(self, values):
        self.write_line("Parameter values:")
        for param_name, value in values:
            self.write_line("\t%s: %r" % (param_name, value))
        self.write_line("-----")

    def write_line(self, line):
        self.lines.append(line)

    def add_section(self, title, entries):
        self.write_line("%s:" % title)
        for line in format_params(OrderedDict((k, v) for k, v in entries.items()),
                                  order=list(entries.keys()), indent="\t"):
            self.write_line(line)
        self.write_line("-----")

    def add_warnings(self, caught):
        if not caught:
            return
        self.write_line("Warnings:")
        for w in caught:
            details = getattr(w.message, "details", {})
            suffix = " (%s)" % ", ".join("%s=%r" % kv for kv in sorted(details.items())) \
                if details else ""
            self.write_line("\t%s: %s%s" % (w.category.__name__, w.message, suffix))
        self.write_line("-----")

    def add_file(self, fpath):
        fpath = Path(fpath)
        name = fpath.relative_to(self.out_dir).as_posix()
        if name in self.files:
            raise ValueError("%s is already registered in the manifest" % name)
        self.files[name] = sha256sum(fpath)
        return fpath

    def finalize(self, profiler=None):
        if profiler is not None and profiler.logs:
            self.write_line("Wall-clock time:")
            for name, total in profiler.totals().items():
                self.write_line("\t%s: %.3fs" % (name, total))
            self.write_line("\ttotal: %.3fs" % profiler.elapsed())
            self.write_line("-----")
        self.write_line("Files:")
        for name, checksum in self.files.items():
            self.write_line("\t%s  sha256=%s" % (name, checksum))
        self.write_line("-----")
        end_time = str(datetime.now().strftime("%A %d %B %Y at %H:%M"))
        self.write_line("Finished on %s" % end_time)

        fpath = self.out_dir.joinpath(self.file_name)
        tmp_fpath = self.out_dir.joinpath(self.file_name + ".tmp")
        with tmp_fpath.open("w") as f:
            f.write("\n".join(self.lines) + "\n")
        os.replace(tmp_fpath, fpath)
        return fpath


def read_manifest_files(fpath):
    """ The {file name: checksum} inventory of a finalized manifest. """
    files = OrderedDict()
    in_files = False
    for line in Path(fpath).read_text().splitlines():
        if line == "Files:":
            in_files = True
        elif line == "-----":
            in_files = False
        elif in_files:
            name, checksum = line.strip().rsplit("  sha256=", 1)
            files[name] = checksum
    return files


def verify_manifest(fpath):
    """ Names of the files whose checksum does not match the manifest (empty when all match). """
    out_dir = Path(fpath).parent
    return [name for name, checksum in read_manifest_files(fpath).items()
            if not out_dir.joinpath(name).exists()
            or sha256sum(out_dir.joinpath(name)) != checksum]
