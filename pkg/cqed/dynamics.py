"""
Time evolution of states and density matrices.

Time-dependent generators are integrated with an adaptive embedded Runge-Kutta pair (DOP853 from
scipy) whose right-hand side evaluates the Hamiltonian at every internal stage time. Static
Hamiltonians are propagated exactly through their eigendecomposition instead.

Superoperators act on row-major vectorized density matrices: vec(rho)[i * d + j] = rho[i, j], so
that vec(A rho B) = (A (x) B^T) vec(rho).
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
import scipy.linalg

from cqed.exceptions import (ConfigError, DimensionError, IntegrationError, PositivityError,
                             SteadyStateError)
from cqed.model import (Drive, ModelParams, TimeDependentOperator, hamiltonian_squeezed_parts,
                        lab_frame_hamiltonian, ramp_r, snapshot, squeezed_frame_hamiltonian)
from cqed.operators import (COMPOSITE, DensityMatrix, HilbertSpec, Operator, StateVector,
                            composite_operators)


# Tolerances of the runtime invariant checks
norm_tolerance = 1e-8
trace_tolerance = 1e-6
hermiticity_tolerance = 1e-8
positivity_tolerance = 1e-6

OperatorSource = Union[Operator, TimeDependentOperator, Callable[[float], Operator]]
Observable = Callable[[float, Union[StateVector, DensityMatrix]], float]


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt_out: float
    rtol: float = 1e-9
    atol: float = 1e-12

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ConfigError("The time grid needs t_end > t_start, got [%r, %r]" %
                              (self.t_start, self.t_end))
        if not self.dt_out > 0:
            raise ConfigError("dt_out must be positive, got %r" % self.dt_out)
        if not 0 < self.rtol < 1:
            raise ConfigError("The integrator tolerance must lie in (0, 1), got %r" % self.rtol)

    def times(self) -> np.ndarray:
        n_steps = int(math.ceil((self.t_end - self.t_start) / self.dt_out - 1e-9))
        times = self.t_start + self.dt_out * np.arange(n_steps + 1)
        times[-1] = self.t_end
        return times

    def with_tolerance(self, rtol: float) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.dt_out, rtol, self.atol * rtol / self.rtol)


@dataclass(frozen=True)
class LindbladSpec:
    """
    Generator of rho_dot = -i[H(t), rho] + sum_k rate_k D[L_k(t)] rho, with
    D[x] rho = x rho x^dag - {x^dag x, rho} / 2. Jump operators may be static or time-dependent.
    """
    hamiltonian: OperatorSource
    jumps: Tuple[Tuple[OperatorSource, float], ...] = ()

    def __post_init__(self):
        jumps = tuple((op, float(rate)) for op, rate in self.jumps)
        for _, rate in jumps:
            if rate < 0:
                raise ConfigError("Dissipation rates must be non-negative, got %r" % rate)
        object.__setattr__(self, "jumps", jumps)


@dataclass
class Trajectory:
    times: np.ndarray
    states: List[Union[StateVector, DensityMatrix]]
    scalars: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise DimensionError("A trajectory needs one state per time")
        for name, values in self.scalars.items():
            self._check_length(name, values)

    def _check_length(self, name, values):
        if len(values) != len(self.times):
            raise DimensionError("Series %r has %d values for %d times" %
                                 (name, len(values), len(self.times)))

    def add_series(self, name: str, values):
        values = np.asarray(values)
        self._check_length(name, values)
        self.scalars[name] = values

    @property
    def final_state(self):
        return self.states[-1]


def _matrix_source(source: OperatorSource) -> Callable[[float], np.ndarray]:
    if isinstance(source, Operator):
        entries = source.entries
        return lambda t: entries
    if isinstance(source, TimeDependentOperator) or hasattr(source, "matrix"):
        return source.matrix
    return lambda t: source(t).entries


def _observe(trajectory: Trajectory, observables: Optional[Dict[str, Observable]]):
    for name, observable in (observables or {}).items():
        trajectory.add_series(name, [observable(t, state) for t, state in
                                     zip(trajectory.times, trajectory.states)])
    return trajectory


## Pure states
def evolve_schrodinger(hamiltonian: OperatorSource, psi0: StateVector, grid: TimeGrid,
                       observables: Dict[str, Observable] = None) -> Trajectory:
    """
    Integrates i psi_dot = H(t) psi and samples the state every grid.dt_out.

    :param observables: optional named functions of (t, state) evaluated at every sample and
    stored as scalar series of the trajectory
    """
    if abs(psi0.norm() - 1) > 1e-10:
        raise ValueError("The initial state must be normalized, got norm %r" % psi0.norm())
    times = grid.times()

    if isinstance(hamiltonian, Operator):
        # Exact propagation: psi(t) = V exp(-i E t) V^dag psi0
        energies, vectors = np.linalg.eigh((hamiltonian.entries + hamiltonian.entries.conj().T) / 2)
        coefficients = vectors.conj().T @ psi0.amplitudes
        phases = np.exp(-1j * np.outer(times - grid.t_start, energies))
        amplitudes = (phases * coefficients) @ vectors.T
    else:
        h = _matrix_source(hamiltonian)
        solution = scipy.integrate.solve_ivp(
            lambda t, y: -1j * (h(t) @ y), (grid.t_start, grid.t_end), psi0.amplitudes,
            method="DOP853", t_eval=times, rtol=grid.rtol, atol=grid.atol)
        if not solution.success:
            raise IntegrationError("Schrodinger integration failed: %s" % solution.message,
                                   t_reached=float(solution.t[-1]) if solution.t.size else None,
                                   rtol=grid.rtol)
        amplitudes = solution.y.T

    norms = np.linalg.norm(amplitudes, axis=1)
    drift = float(np.max(np.abs(norms - 1)))
    if drift > norm_tolerance:
        raise IntegrationError("The state norm drifted by %.3e (tolerance %.0e); tighten the "
                               "integrator tolerance" % (drift, norm_tolerance),
                               norm_drift=drift, rtol=grid.rtol)

    states = [StateVector(psi, psi0.space, psi0.factor) for psi in amplitudes]
    trajectory = Trajectory(times, states, {"norm": norms})
    return _observe(trajectory, observables)


## Density matrices
def _lindblad_rhs(spec: LindbladSpec, dim: int):
    h = _matrix_source(spec.hamiltonian)
    jumps = [(_matrix_source(op), rate) for op, rate in spec.jumps if rate > 0]

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        hamiltonian = h(t)
        rho_dot = -1j * (hamiltonian @ rho - rho @ hamiltonian)
        for jump, rate in jumps:
            x = jump(t)
            x_dag = x.conj().T
            x_dag_x = x_dag @ x
            rho_dot += rate * (x @ rho @ x_dag - 0.5 * (x_dag_x @ rho + rho @ x_dag_x))
        return rho_dot.reshape(-1)

    return rhs


def _check_density_matrices(times, matrices):
    for t, rho in zip(times, matrices):
        trace_error = abs(np.trace(rho) - 1)
        if trace_error > trace_tolerance:
            raise IntegrationError("Trace drifted by %.3e at t=%g" % (trace_error, t),
                                   t=float(t), trace_error=float(trace_error))
        hermiticity = np.max(np.abs(rho - rho.conj().T))
        if hermiticity > hermiticity_tolerance:
            raise IntegrationError("Density matrix lost Hermiticity (%.3e) at t=%g" %
                                   (hermiticity, t), t=float(t), hermiticity=float(hermiticity))
        min_eig = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
        if min_eig < -positivity_tolerance:
            raise PositivityError("Density matrix eigenvalue %.3e < 0 at t=%g" % (min_eig, t),
                                  t=float(t), min_eigenvalue=float(min_eig))


def evolve_lindblad(spec: LindbladSpec, rho0: DensityMatrix, grid: TimeGrid,
                    observables: Dict[str, Observable] = None, check=True) -> Trajectory:
    """
    Integrates the master equation and samples rho every grid.dt_out. The trace, Hermiticity and
    positivity of every sample are asserted unless check is False (the spectrum pseudo-states are
    not density matrices).
    """
    dim = rho0.dim
    times = grid.times()
    solution = scipy.integrate.solve_ivp(
        _lindblad_rhs(spec, dim), (grid.t_start, grid.t_end), np.array(rho0.entries).reshape(-1),
        method="DOP853", t_eval=times, rtol=grid.rtol, atol=grid.atol)
    if not solution.success:
        raise IntegrationError("Master equation integration failed: %s" % solution.message,
                               t_reached=float(solution.t[-1]) if solution.t.size else None,
                               rtol=grid.rtol)

    matrices = solution.y.T.reshape(-1, dim, dim)
    if check:
        _check_density_matrices(times, matrices)

    states = [DensityMatrix(rho, rho0.space, rho0.factor) for rho in matrices]
    trajectory = Trajectory(times, states, {
        "trace": np.real(np.einsum("kii->k", matrices)),
        "purity": np.real(np.einsum("kij,kji->k", matrices, matrices)),
    })
    return _observe(trajectory, observables)


## Superoperators
@dataclass(frozen=True, eq=False)
class Liouvillian:
    matrix: np.ndarray
    space: Optional[HilbertSpec]
    factor: str = COMPOSITE

    @property
    def dim(self) -> int:
        """ Dimension of the underlying Hilbert space (the matrix is dim^2 x dim^2). """
        return int(round(math.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ rho.reshape(-1)).reshape(rho.shape)


def build_liouvillian(hamiltonian: Operator, jumps: Sequence[Tuple[Operator, float]]) -> Liouvillian:
    dim = hamiltonian.dim
    eye = np.eye(dim)
    h = hamiltonian.entries
    matrix = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for jump, rate in jumps:
        if jump.dim != dim:
            raise DimensionError("Jump operator of dimension %d on a %d-dim system" %
                                 (jump.dim, dim))
        if rate < 0:
            raise ConfigError("Dissipation rates must be non-negative, got %r" % rate)
        x = jump.entries
        x_dag_x = x.conj().T @ x
        matrix += rate * (np.kron(x, x.conj()) - 0.5 * np.kron(x_dag_x, eye)
                          - 0.5 * np.kron(eye, x_dag_x.T))
    return Liouvillian(matrix, hamiltonian.space, hamiltonian.factor)


def steady_state(liouvillian: Liouvillian, uniqueness_gap=1e-8) -> DensityMatrix:
    """
    Unique stationary state of a Liouvillian: the null vector normalized to unit trace. The
    spectrum is checked first; a second eigenvalue within uniqueness_gap of zero means the
    stationary state is not unique.
    """
    dim = liouvillian.dim
    eigenvalues = scipy.linalg.eigvals(liouvillian.matrix)
    smallest = eigenvalues[np.argsort(np.abs(eigenvalues))[:4]]
    if abs(smallest[0]) > uniqueness_gap:
        raise SteadyStateError("The Liouvillian has no null vector", smallest=smallest.tolist())
    if abs(smallest[1]) <= uniqueness_gap:
        raise SteadyStateError("The stationary state is not unique (second eigenvalue %.2e)" %
                               abs(smallest[1]), smallest=smallest.tolist())

    # L vec(rho) = 0 bordered with Tr(rho) = 1
    trace_row = np.eye(dim).reshape(1, -1)
    system = np.vstack([liouvillian.matrix, trace_row])
    rhs = np.zeros(dim ** 2 + 1, dtype=complex)
    rhs[-1] = 1
    solution = scipy.linalg.lstsq(system, rhs)[0]
    rho = solution.reshape(dim, dim)
    rho = (rho + rho.conj().T) / 2
    rho /= np.trace(rho)

    residual = float(np.max(np.abs(liouvillian.matrix @ rho.reshape(-1))))
    if residual > 1e-10:
        raise SteadyStateError("Steady state residual %.2e exceeds 1e-10" % residual,
                               residual=residual)
    state = DensityMatrix(rho, liouvillian.space, liouvillian.factor)
    min_eig = state.min_eigenvalue()
    if min_eig < -1e-8:
        raise PositivityError("Steady state has a negative eigenvalue %.2e" % min_eig,
                              min_eigenvalue=min_eig)
    return state


## Squeezed-frame and lab-frame master equations
def lindblad_lab_frame_spec(params: ModelParams, ramp: Drive, space: HilbertSpec) -> LindbladSpec:
    ops = composite_operators(space)
    jumps = tuple((op, rate) for op, rate in ((ops["a"], params.kappa),
                                              (ops["sigma_minus"], params.gamma)) if rate > 0)
    return LindbladSpec(lab_frame_hamiltonian(params, ramp, space), jumps)


def lindblad_squeezed_frame_spec(params: ModelParams, ramp: Drive, space: HilbertSpec,
                                 t: Optional[float] = None) -> LindbladSpec:
    """
    The lab-frame master equation rewritten in the squeezed frame U_S[r(t)]. The Hamiltonian
    becomes H_Rabi + H_Err + H_DA and the cavity jump operator its Bogoliubov image
    cosh(r) a + sinh(r) a^dag, i.e. lab-frame vacuum noise appears squeezed in this frame.

    :param t: if given, the generator frozen at time t (static operators); otherwise the full
    time-dependent generator along the ramp
    """
    ops = composite_operators(space)
    jumps = []
    if t is not None:
        snap = snapshot(t, params, ramp)
        h_rabi, h_err, h_da = hamiltonian_squeezed_parts(snap, params, space)
        hamiltonian = h_rabi + h_err + h_da
        if params.kappa > 0:
            jumps.append((math.cosh(snap.r) * ops["a"] + math.sinh(snap.r) * ops["a_dag"],
                          params.kappa))
    else:
        hamiltonian = squeezed_frame_hamiltonian(params, ramp, space)
        if params.kappa > 0:
            bogoliubov = TimeDependentOperator([
                (lambda s: math.cosh(ramp_r(s, ramp)[0]), ops["a"]),
                (lambda s: math.sinh(ramp_r(s, ramp)[0]), ops["a_dag"]),
            ])
            jumps.append((bogoliubov, params.kappa))
    if params.gamma > 0:
        jumps.append((ops["sigma_minus"], params.gamma))
    return LindbladSpec(hamiltonian, tuple(jumps))
