"""
Target states, closed-form oracles and observables of the squeezed-frame dynamics.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.integrate
import scipy.special
import scipy.stats

from cqed.dynamics import TimeGrid
from cqed.exceptions import CutoffError, CutoffWarning, DimensionError, QuadratureError
from cqed.model import Drive, ModelParams, enhancement_ratio, ramp_r, snapshot, snapshot_from_r
from cqed.operators import (CAVITY, MINUS_Z, PLUS_Z, DensityMatrix, HilbertSpec, Operator,
                            StateVector, composite_operators, matrix_exponential,
                            partial_transpose, trace_norm)


# Coherent-state weight allowed beyond the Fock cutoff
coherent_tail_tolerance = 1e-8

# "x << y" is read as x <= much_less_factor * y
much_less_factor = 0.1

WEAK, STRONG, ULTRASTRONG = "weak", "strong", "ultrastrong"


def coherent_tail(alpha: complex, fock_cutoff: int) -> float:
    """ Weight of the coherent state |alpha> on Fock levels n >= fock_cutoff. """
    return float(scipy.stats.poisson.sf(fock_cutoff - 1, abs(alpha) ** 2))


@dataclass(frozen=True)
class CatParams:
    alpha: complex
    space: HilbertSpec

    @property
    def tail(self) -> float:
        return coherent_tail(self.alpha, self.space.fock_cutoff)

    def check(self):
        if self.tail >= coherent_tail_tolerance:
            raise CutoffError("|alpha| = %.4g does not fit below N_F=%d (tail weight %.2e)" %
                              (abs(self.alpha), self.space.fock_cutoff, self.tail),
                              alpha=abs(self.alpha), fock_cutoff=self.space.fock_cutoff,
                              tail=self.tail)


@dataclass
class DisplacementTrajectory:
    times: np.ndarray
    alphas: np.ndarray
    lambda_c: np.ndarray
    # alpha(t) from the integrator's dense output, when available
    dense: Optional[Callable[[float], complex]] = field(default=None, repr=False)

    def at(self, t: float) -> complex:
        """
        alpha(t) anywhere between the first and the last sample: from the dense output when the
        trajectory carries one, by linear interpolation between the stored samples otherwise.
        """
        if not self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12:
            raise ValueError("t=%g lies outside the trajectory [%g, %g]" %
                             (t, self.times[0], self.times[-1]))
        if self.dense is not None:
            return self.dense(min(max(t, self.times[0]), self.times[-1]))
        return complex(np.interp(t, self.times, self.alphas.real),
                       np.interp(t, self.times, self.alphas.imag))


@dataclass(frozen=True)
class ErrorNormEstimate:
    err_rabi_bound: float
    da_rabi_bound: float
    err_ok: bool
    da_ok: bool


## States
def coherent_state(alpha: complex, space: HilbertSpec) -> StateVector:
    """ Truncated coherent state on the cavity factor, renormalized on the retained levels. """
    n = np.arange(space.fock_cutoff)
    if alpha == 0:
        amplitudes = (n == 0).astype(complex)
    else:
        log_magnitudes = n * math.log(abs(alpha)) - 0.5 * scipy.special.gammaln(n + 1)
        amplitudes = np.exp(log_magnitudes - abs(alpha) ** 2 / 2 + 1j * n * np.angle(alpha))
    return StateVector(amplitudes, space, CAVITY).normalized()


def _qubit_x(sign: int) -> np.ndarray:
    x = np.zeros(2, dtype=complex)
    x[PLUS_Z] = 1 / math.sqrt(2)
    x[MINUS_Z] = sign / math.sqrt(2)
    return x


def cat_target(alpha: complex, space: HilbertSpec) -> StateVector:
    """
    The entangled cat (|alpha>|+x> - |-alpha>|-x>) / sqrt(2), the ground state of the ideal Rabi
    model reached from |0,-z> at displacement alpha.
    """
    CatParams(alpha, space).check()
    plus = np.kron(coherent_state(alpha, space).amplitudes, _qubit_x(+1))
    minus = np.kron(coherent_state(-alpha, space).amplitudes, _qubit_x(-1))
    return StateVector((plus - minus) / math.sqrt(2), space).normalized()


def projected_cat(alpha: complex, space: HilbertSpec) -> StateVector:
    """
    The cat of cat_target() restricted to the retained Fock levels, without renormalization.
    Overlaps with states living on those levels are therefore exact, however large |alpha| is.
    """
    n = np.arange(space.fock_cutoff)
    if alpha == 0:
        amplitudes = (n == 0).astype(complex)
    else:
        log_magnitudes = (n * math.log(abs(alpha)) - 0.5 * scipy.special.gammaln(n + 1)
                          - abs(alpha) ** 2 / 2)
        amplitudes = np.exp(log_magnitudes + 1j * n * np.angle(alpha))
    # |-alpha> has the amplitudes of |alpha> times (-1)^n
    sign = (-1.0) ** n
    psi = (np.kron(amplitudes, _qubit_x(+1)) - np.kron(sign * amplitudes, _qubit_x(-1)))
    return StateVector(psi / math.sqrt(2), space)


def ideal_rabi_ground_state(g_tilde: float, omega_c: float, delta_q: float,
                            space: HilbertSpec) -> StateVector:
    """
    Ground state of H_Rabi = Omega_c a^dag a + delta_q sigma_z / 2 + g_tilde (a + a^dag) sigma_x in
    the parity sector of |0,-z>, P = exp(i pi a^dag a) (-sigma_z) = +1. Restricting to the sector
    lifts the exact degeneracy of the two displaced branches at delta_q = 0.
    """
    ops = composite_operators(space)
    hamiltonian = (omega_c * ops["n"].entries + delta_q / 2 * ops["sigma_z"].entries
                   + g_tilde * (ops["a"].entries + ops["a_dag"].entries) @ ops["sigma_x"].entries)
    n = np.repeat(np.arange(space.fock_cutoff), 2)
    sigma_z = np.tile([1, -1], space.fock_cutoff)
    sector = np.flatnonzero((-1.0) ** n * -sigma_z == 1)

    energies, vectors = np.linalg.eigh(hamiltonian[np.ix_(sector, sector)])
    amplitudes = np.zeros(space.dim, dtype=complex)
    amplitudes[sector] = vectors[:, 0]
    return StateVector(amplitudes, space)


## Displacement trajectory and Rabi propagator
def alpha_trajectory(params: ModelParams, ramp: Drive,
                     grid: Union[TimeGrid, Sequence[float]]) -> DisplacementTrajectory:
    """
    alpha(t) = (g / 2i) int_0^t exp(r(t') - i Lambda_c(t, t')) dt', with
    Lambda_c(t, t') = int_t'^t Omega_c. Written as
    alpha(t) = (g / 2i) exp(-i Lambda_c(t, 0)) I(t), I(t) = int_0^t exp(r + i Lambda_c(t', 0)) dt',
    so that Lambda_c(t, 0) and I(t) are accumulated together by one adaptive integration.
    """
    times = grid.times() if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("alpha_trajectory needs increasing times >= 0")

    def rhs(t, y):
        r = ramp_r(t, ramp)[0]
        omega_c = params.delta_c / math.cosh(2 * r)
        weight = math.exp(r)
        return [omega_c, weight * math.cos(y[0]), weight * math.sin(y[0])]

    def to_alpha(values):
        return params.g / 2j * np.exp(-1j * values[0]) * (values[1] + 1j * values[2])

    dense = None
    if times[-1] == 0:
        values = np.zeros((3, times.size))
    else:
        solution = scipy.integrate.solve_ivp(rhs, (0.0, times[-1]), [0.0, 0.0, 0.0],
                                             method="DOP853", t_eval=times, dense_output=True,
                                             rtol=1e-12, atol=1e-14)
        if not solution.success:
            raise QuadratureError("Displacement quadrature failed: %s" % solution.message)
        values = solution.y
        dense = lambda t: complex(to_alpha(solution.sol(t)))

    return DisplacementTrajectory(times, to_alpha(values), values[0], dense)


def magnus_propagator(t: float, params: ModelParams, ramp: Drive, space: HilbertSpec) -> Operator:
    """
    Exact Rabi propagator for delta_q = 0 (up to a global phase):
    K(t) = exp((alpha a^dag - alpha^* a) sigma_x) exp(-i Lambda_c(t, 0) a^dag a).
    """
    if params.delta_q != 0:
        raise ValueError("The Magnus form of the Rabi propagator needs delta_q = 0, got %r" %
                         params.delta_q)
    ops = composite_operators(space)
    if t == 0:
        return ops["identity"]
    trajectory = alpha_trajectory(params, ramp, [0.0, t])
    alpha, lambda_c = complex(trajectory.alphas[-1]), float(trajectory.lambda_c[-1])
    tail = coherent_tail(alpha, space.fock_cutoff)
    if tail >= coherent_tail_tolerance:
        warnings.warn(CutoffWarning("Displacement |alpha|=%.3g leaves weight %.2e beyond N_F=%d" %
                                    (abs(alpha), tail, space.fock_cutoff), alpha=abs(alpha),
                                    tail=tail, fock_cutoff=space.fock_cutoff), stacklevel=2)
    displacement = matrix_exponential((alpha * ops["a_dag"] - alpha.conjugate() * ops["a"])
                                      @ ops["sigma_x"])
    rotation = matrix_exponential(-1j * lambda_c * ops["n"])
    return displacement @ rotation


## Observables
def _check_same_space(dim_a: int, dim_b: int):
    if dim_a != dim_b:
        raise DimensionError("Dimension mismatch: %d vs %d" % (dim_a, dim_b))


def fidelity(rho_s: DensityMatrix, target: StateVector) -> float:
    """ F = sqrt(<target| rho |target>), clipped to [0, 1]. """
    _check_same_space(rho_s.dim, target.dim)
    psi = target.amplitudes
    value = float(np.real(psi.conj() @ rho_s.entries @ psi))
    return math.sqrt(min(max(value, 0.0), 1.0))


def log_negativity(rho: DensityMatrix) -> float:
    """ E_N = log2 || rho^{T_q} ||_1, with the partial transpose taken on the qubit. """
    error = rho.hermiticity_error()
    if error > 1e-8:
        raise ValueError("log_negativity needs a Hermitian density matrix (error %.3e)" % error)
    return math.log2(trace_norm(partial_transpose(rho)))


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.einsum("ij,ji->", rho.entries, rho.entries)))


def expect(op: Operator, state: Union[StateVector, DensityMatrix]) -> complex:
    _check_same_space(op.dim, state.dim)
    if isinstance(state, StateVector):
        return complex(state.amplitudes.conj() @ op.entries @ state.amplitudes)
    return complex(np.einsum("ij,ji->", op.entries, state.entries))


def overlap(psi: StateVector, phi: StateVector) -> float:
    """ |<psi|phi>|, insensitive to global phases. """
    _check_same_space(psi.dim, phi.dim)
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)))


## Diagnostics
def error_norm_estimates(t: float, params: ModelParams, ramp: Drive,
                         alpha_traj: DisplacementTrajectory) -> ErrorNormEstimate:
    """
    Size of the terms neglected by the ideal Rabi evolution, projected onto the cat manifold:
    ||H_Err|| ~ g e^{-r} |Im alpha| / 2, harmless while Re alpha >> Im alpha, and
    ||H_DA|| ~ |r_dot alpha|, harmless while |r_dot| << Omega_c.
    """
    snap = snapshot(t, params, ramp)
    alpha = alpha_traj.at(t)
    err_bound = params.g / 2 * math.exp(-snap.r) * abs(alpha.imag)
    da_bound = abs(snap.r_dot * alpha)
    err_ok = abs(alpha.imag) <= much_less_factor * abs(alpha.real) if alpha != 0 else True
    da_ok = abs(snap.r_dot) <= much_less_factor * snap.omega_c_eff
    return ErrorNormEstimate(err_bound, da_bound, bool(err_ok), bool(da_ok))


def coupling_regime(params: ModelParams, r: float) -> str:
    """
    weak: g_tilde below the largest loss rate; ultrastrong: g_tilde / Omega_c >= 0.1; strong
    otherwise.
    """
    snap = snapshot_from_r(r, 0.0, params)
    if enhancement_ratio(r, params) >= 0.1:
        return ULTRASTRONG
    if snap.g_tilde < max(params.kappa, params.gamma):
        return WEAK
    return STRONG
