"""
Wigner function of a cavity state by displaced parity: W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dag],
with P = exp(i pi a^dag a). With this convention the integral of W over the complex plane is 1 and
the vacuum gives W(0) = 2/pi.

For beta = x + iy, D(beta) = D(x) D(iy) up to a phase that cancels in D P D^dag, so
W(beta) = (2/pi) Tr[rho_x P_y] with rho_x = D(x)^dag rho D(x) and P_y = D(iy) P D(iy)^dag. Each
column and each row of the grid costs one displacement. Displacements are evaluated in a padded
Fock space, large enough that displacing the retained levels does not reach the padded cutoff.
"""
import math
import warnings
from multiprocessing.pool import ThreadPool
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate
import scipy.ndimage

from cqed.exceptions import CutoffWarning, DimensionError
from cqed.operators import CAVITY, DensityMatrix


# Allowed deviation of the grid integral of W from 1
normalization_tolerance = 1e-2
convention = "W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dag], integral = 1"


@dataclass
class WignerGrid:
    re_axis: np.ndarray
    im_axis: np.ndarray
    # values[i, j] = W(re_axis[j] + 1j * im_axis[i])
    values: np.ndarray
    convention: str = convention

    def integral(self) -> float:
        inner = scipy.integrate.trapezoid(self.values, self.re_axis, axis=1)
        return float(scipy.integrate.trapezoid(inner, self.im_axis))

    def at(self, beta: complex) -> float:
        """ Value at the grid point nearest to beta. """
        j = int(np.argmin(np.abs(self.re_axis - beta.real)))
        i = int(np.argmin(np.abs(self.im_axis - beta.imag)))
        return float(self.values[i, j])


def default_axes(extent=3.5, points=71) -> Tuple[np.ndarray, np.ndarray]:
    axis = np.linspace(-extent, extent, points)
    return axis, axis.copy()


def _padded_cutoff(fock_cutoff: int, max_shift: float) -> int:
    return int(math.ceil((math.sqrt(fock_cutoff) + max_shift + 5) ** 2))


def wigner(rho_cavity: DensityMatrix, re_axis: Optional[Sequence[float]] = None,
           im_axis: Optional[Sequence[float]] = None, workers=4) -> WignerGrid:
    """
    :param rho_cavity: a cavity-only density matrix, e.g. partial_trace(rho, CAVITY)
    :param re_axis, im_axis: grid axes over Re(beta) and Im(beta), see default_axes()
    :param workers: rows of the grid are evaluated concurrently on this many threads
    """
    if rho_cavity.factor != CAVITY:
        raise DimensionError("The Wigner function needs a cavity state, got a %s state" %
                             rho_cavity.factor)
    default_re, default_im = default_axes()
    re_axis = default_re if re_axis is None else np.asarray(re_axis, dtype=float)
    im_axis = default_im if im_axis is None else np.asarray(im_axis, dtype=float)

    n_keep = rho_cavity.dim
    n_pad = _padded_cutoff(n_keep, np.max(np.abs(re_axis)) + np.max(np.abs(im_axis)))
    rho = np.zeros((n_pad, n_pad), dtype=complex)
    rho[:n_keep, :n_keep] = rho_cavity.entries
    parity = (-1.0) ** np.arange(n_pad)

    a = np.diag(np.sqrt(np.arange(1, n_pad)), 1)
    # D(x) = V exp(-i x mu) V^dag with i (a^dag - a) = V mu V^dag
    mu, v = np.linalg.eigh(1j * (a.T - a))
    # D(iy) = U exp(i y nu) U^T with a^dag + a = U nu U^T
    nu, u = np.linalg.eigh(a.T + a)

    def displaced_state(x):
        d = (v * np.exp(-1j * x * mu)) @ v.conj().T
        return d.conj().T @ rho @ d

    rho_x = np.stack([displaced_state(x) for x in re_axis]).reshape(len(re_axis), -1)

    def row(y):
        d = (u * np.exp(1j * y * nu)) @ u.T
        parity_y = (d * parity) @ d.conj().T
        # Tr[rho_x P_y] = sum_kl rho_x[k, l] P_y[l, k]
        return 2 / math.pi * np.real(rho_x @ parity_y.T.reshape(-1))

    with ThreadPool(workers) as pool:
        values = np.array(pool.map(row, im_axis))

    grid = WignerGrid(re_axis, im_axis, values)
    integral = grid.integral()
    if abs(integral - 1) > normalization_tolerance:
        warnings.warn(CutoffWarning("The Wigner grid integrates to %.4f; widen or refine the grid"
                                    % integral, integral=integral), stacklevel=2)
    return grid


def find_wigner_maxima(grid: WignerGrid, min_relative_height=0.1) -> List[Tuple[complex, float]]:
    """
    Local maxima of W above min_relative_height * max(W), highest first. Each position is refined
    with a parabola through the neighbouring samples along both axes.
    """
    values = grid.values
    is_max = values == scipy.ndimage.maximum_filter(values, size=3, mode="nearest")
    is_max &= values >= min_relative_height * values.max()

    maxima = []
    for i, j in zip(*np.nonzero(is_max)):
        re = _refine(grid.re_axis, values[i, :], j)
        im = _refine(grid.im_axis, values[:, j], i)
        maxima.append((complex(re, im), float(values[i, j])))
    return sorted(maxima, key=lambda m: -m[1])


def _refine(axis, samples, index) -> float:
    if not 0 < index < len(samples) - 1:
        return float(axis[index])
    left, mid, right = samples[index - 1: index + 2]
    curvature = left - 2 * mid + right
    if curvature == 0:
        return float(axis[index])
    return float(axis[index] + 0.5 * (left - right) / curvature * (axis[1] - axis[0]))
