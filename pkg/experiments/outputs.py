"""
CSV writers. Floats are written with repr() so that every value reads back bit-identical; the same
config therefore always produces byte-identical files.
"""
from pathlib import Path
from typing import Iterable, List, Sequence
import csv

import numpy as np

from cqed.wigner import WignerGrid


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(fpath: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    fpath = Path(fpath)
    with fpath.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("Row %r does not match the header %r" % (row, header))
            writer.writerow([format_value(v) for v in row])
    return fpath


def write_wigner_csv(fpath: Path, grid: WignerGrid) -> Path:
    """
    The grid as a matrix: the header row holds Re(beta), the first column Im(beta), and
    cell (i, j) the value W(re_j + i im_i).
    """
    header = ["im\\re"] + [format_value(x) for x in grid.re_axis]
    rows = ([y] + list(grid.values[i]) for i, y in enumerate(grid.im_axis))
    return write_csv(fpath, header, rows)


def read_csv(fpath: Path):
    """ :return: the header and the rows as lists of strings """
    with Path(fpath).open("r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows: List[List[str]] = [row for row in reader]
    return header, rows
