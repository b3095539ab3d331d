"""
Dense linear algebra on the truncated cavity (x) qubit Hilbert space.

Ordering convention (used everywhere in this project): the composite space is cavity-major, i.e.
the basis state |n, q> has composite index n * 2 + q, with n the Fock level (0 .. N_F - 1) and q
the qubit level. The qubit basis is (|+z>, |-z>), so q = 0 is the excited state and q = 1 the
ground state.

All containers are immutable after construction: the underlying numpy arrays are flagged
read-only, so that values can be shared freely between threads.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from cqed.exceptions import ConfigError, DimensionError, NumericalError


CAVITY = "cavity"
QUBIT = "qubit"
COMPOSITE = "composite"

PLUS_Z = 0
MINUS_Z = 1

_HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class HilbertSpec:
    fock_cutoff: int
    qubit_dim: int = 2

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ConfigError("The Fock cutoff must be an integer >= 2, got %r" % self.fock_cutoff,
                              fock_cutoff=self.fock_cutoff)
        if self.qubit_dim != 2:
            raise ConfigError("The qubit dimension is always 2, got %r" % self.qubit_dim)

    @property
    def dim(self) -> int:
        return self.fock_cutoff * self.qubit_dim

    def factor_dim(self, factor: str) -> int:
        if factor == CAVITY:
            return self.fock_cutoff
        if factor == QUBIT:
            return self.qubit_dim
        if factor == COMPOSITE:
            return self.dim
        raise ValueError("Unknown factor %r" % factor)

    def index(self, n: int, q: int) -> int:
        return n * self.qubit_dim + q


def _frozen(array, dtype=complex):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


def _expected_dim(space: Optional[HilbertSpec], factor: str) -> Optional[int]:
    if factor == QUBIT:
        return 2
    if space is None:
        return None
    return space.factor_dim(factor)


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray
    space: Optional[HilbertSpec] = None
    factor: str = COMPOSITE

    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError("Operators must be square, got shape %s" % (entries.shape,))
        expected = _expected_dim(self.space, self.factor)
        if expected is not None and entries.shape[0] != expected:
            raise DimensionError("A %s operator on %s must have dimension %d, got %d" %
                                 (self.factor, self.space, expected, entries.shape[0]))
        if not np.all(np.isfinite(entries)):
            raise NumericalError("Operator entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.space, self.factor)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def is_hermitian(self, tol=_HERMITIAN_TOL) -> bool:
        return self.hermiticity_error() <= tol

    def _like(self, entries):
        return Operator(entries, self.space, self.factor)

    def _check_compatible(self, other: "Operator"):
        if self.dim != other.dim or self.factor != other.factor:
            raise DimensionError("Incompatible operators: %s(%d) and %s(%d)" %
                                 (self.factor, self.dim, other.factor, other.dim))

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check_compatible(other)
            return self._like(self.entries @ other.entries)
        if isinstance(other, StateVector):
            if other.dim != self.dim:
                raise DimensionError("Cannot apply a %d-dim operator to a %d-dim state" %
                                     (self.dim, other.dim))
            return StateVector(self.entries @ other.amplitudes, other.space, other.factor)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check_compatible(other)
            return self._like(self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check_compatible(other)
            return self._like(self.entries - other.entries)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self._like(self.entries * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.entries)


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    space: Optional[HilbertSpec] = None
    factor: str = COMPOSITE

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes)
        if amplitudes.ndim != 1:
            raise DimensionError("State vectors must be one-dimensional")
        expected = _expected_dim(self.space, self.factor)
        if expected is not None and amplitudes.shape[0] != expected:
            raise DimensionError("A %s state on %s must have dimension %d, got %d" %
                                 (self.factor, self.space, expected, amplitudes.shape[0]))
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        norm = self.norm()
        if norm == 0:
            raise NumericalError("Cannot normalize the zero vector")
        return StateVector(self.amplitudes / norm, self.space, self.factor)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.space,
                             self.factor)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    space: Optional[HilbertSpec] = None
    factor: str = COMPOSITE

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError("Density matrices must be square, got shape %s" % (entries.shape,))
        expected = _expected_dim(self.space, self.factor)
        if expected is not None and entries.shape[0] != expected:
            raise DimensionError("A %s density matrix on %s must have dimension %d, got %d" %
                                 (self.factor, self.space, expected, entries.shape[0]))
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        hermitian = (self.entries + self.entries.conj().T) / 2
        return float(np.linalg.eigvalsh(hermitian)[0])

    def violations(self, trace_tol=1e-8, hermitian_tol=1e-10, positivity_tol=1e-8) -> dict:
        """
        Returns the subset of {"trace", "hermiticity", "positivity"} that exceed their tolerance,
        mapped to the offending value. An empty dict means the matrix is a valid state.
        """
        found = {}
        trace_error = abs(self.trace() - 1)
        if trace_error > trace_tol:
            found["trace"] = trace_error
        hermiticity = self.hermiticity_error()
        if hermiticity > hermitian_tol:
            found["hermiticity"] = hermiticity
        min_eig = self.min_eigenvalue()
        if min_eig < -positivity_tol:
            found["positivity"] = min_eig
        return found

    def as_operator(self) -> Operator:
        return Operator(self.entries, self.space, self.factor)


## Elementary operators
def annihilation(space: HilbertSpec) -> Operator:
    """
    Cavity annihilation operator on the Fock factor only, <n-1|a|n> = sqrt(n). Use embed() to
    lift it to the composite space.
    """
    n = space.fock_cutoff
    return Operator(np.diag(np.sqrt(np.arange(1, n)), 1), space, CAVITY)


def number(space: HilbertSpec) -> Operator:
    return Operator(np.diag(np.arange(space.fock_cutoff, dtype=float)), space, CAVITY)


def identity(space: Optional[HilbertSpec], factor=COMPOSITE) -> Operator:
    dim = _expected_dim(space, factor)
    return Operator(np.eye(dim), space, factor)


def qubit_operators() -> Tuple[Operator, Operator, Operator, Operator]:
    """
    :return: (sigma_minus, sigma_plus, sigma_z, sigma_x) on the qubit factor, in the
    (|+z>, |-z>) basis.
    """
    sigma_minus = Operator([[0, 0], [1, 0]], None, QUBIT)
    sigma_plus = sigma_minus.dag()
    sigma_z = Operator([[1, 0], [0, -1]], None, QUBIT)
    sigma_x = sigma_plus + sigma_minus
    return sigma_minus, sigma_plus, sigma_z, sigma_x


def embed(op: Operator, which: str, space: HilbertSpec) -> Operator:
    """
    Lifts a single-factor operator to the composite space, acting as the identity on the other
    factor.
    """
    if which not in (CAVITY, QUBIT):
        raise ValueError("Can only embed cavity or qubit operators, got %r" % which)
    if op.dim != space.factor_dim(which):
        raise DimensionError("Cannot embed a %d-dim operator as the %s factor of %s" %
                             (op.dim, which, space))
    if which == CAVITY:
        entries = np.kron(op.entries, np.eye(space.qubit_dim))
    else:
        entries = np.kron(np.eye(space.fock_cutoff), op.entries)
    return Operator(entries, space, COMPOSITE)


def composite_operators(space: HilbertSpec) -> dict:
    """
    The composite-space building blocks used by every Hamiltonian: a, a^dag, sigma_-, sigma_+,
    sigma_z, sigma_x and the identity, keyed by name.
    """
    a = annihilation(space)
    sigma_minus, sigma_plus, sigma_z, sigma_x = qubit_operators()
    return {
        "a": embed(a, CAVITY, space),
        "a_dag": embed(a.dag(), CAVITY, space),
        "n": embed(number(space), CAVITY, space),
        "sigma_minus": embed(sigma_minus, QUBIT, space),
        "sigma_plus": embed(sigma_plus, QUBIT, space),
        "sigma_z": embed(sigma_z, QUBIT, space),
        "sigma_x": embed(sigma_x, QUBIT, space),
        "identity": identity(space),
    }


def basis_state(space: HilbertSpec, n: int, q: int) -> StateVector:
    if not 0 <= n < space.fock_cutoff or q not in (PLUS_Z, MINUS_Z):
        raise DimensionError("Basis state |%d, %d> is outside of %s" % (n, q, space))
    amplitudes = np.zeros(space.dim, dtype=complex)
    amplitudes[space.index(n, q)] = 1
    return StateVector(amplitudes, space)


def ground_state(space: HilbertSpec) -> StateVector:
    """ |0, -z>, the uncoupled ground state every protocol starts from. """
    return basis_state(space, 0, MINUS_Z)


## Matrix functions
def matrix_exponential(A: Operator) -> Operator:
    if not np.all(np.isfinite(A.entries)):
        raise NumericalError("Cannot exponentiate a matrix with non-finite entries")
    return Operator(scipy.linalg.expm(A.entries), A.space, A.factor)


def _bipartite(rho: DensityMatrix) -> np.ndarray:
    if rho.factor != COMPOSITE or rho.space is None or rho.dim != rho.space.dim:
        raise DimensionError("Expected a composite state, got a %s state of dimension %d" %
                             (rho.factor, rho.dim))
    n, d = rho.space.fock_cutoff, rho.space.qubit_dim
    return rho.entries.reshape(n, d, n, d)


def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    tensor = _bipartite(rho)
    if keep == CAVITY:
        return DensityMatrix(np.einsum("iaja->ij", tensor), rho.space, CAVITY)
    if keep == QUBIT:
        return DensityMatrix(np.einsum("aiaj->ij", tensor), rho.space, QUBIT)
    raise ValueError("Can only keep the cavity or the qubit, got %r" % keep)


def partial_transpose(rho: DensityMatrix, which: str = QUBIT) -> Operator:
    if which != QUBIT:
        raise ValueError("Only the qubit factor can be partially transposed, got %r" % which)
    tensor = _bipartite(rho)
    transposed = tensor.transpose(0, 3, 2, 1).reshape(rho.dim, rho.dim)
    return Operator(transposed, rho.space, COMPOSITE)


def trace_norm(A: Operator) -> float:
    """ Sum of the absolute eigenvalues of a Hermitian matrix. """
    error = A.hermiticity_error()
    if error > _HERMITIAN_TOL:
        raise NumericalError("trace_norm needs a Hermitian matrix (max|A - A^dag| = %.3e)" % error,
                             hermiticity_error=error)
    hermitian = (A.entries + A.entries.conj().T) / 2
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian))))


def commutator(A: Operator, B: Operator) -> Operator:
    return A @ B - B @ A
