"""
Hamiltonians of the parametrically driven cavity QED system, the squeeze transformation that maps
it onto an enhanced-coupling Rabi model, and the tanh drive ramp.

Units: every frequency is expressed in units of the cavity detuning delta_c (delta_c = 1 in all
shipped configurations) and every time in units of 1 / delta_c.
"""
import math
import warnings
from dataclasses import dataclass
from typing import Callable, List, Tuple, Union

import numpy as np
import scipy.optimize
from scipy.special import gammaln

from cqed.exceptions import ConfigError, CutoffWarning, InstabilityError
from cqed.operators import (CAVITY, COMPOSITE, DensityMatrix, HilbertSpec, Operator, StateVector,
                            annihilation, composite_operators, embed, matrix_exponential)


# Squeezed vacuum weight allowed in the two topmost retained Fock levels
squeeze_tail_tolerance = 1e-8


@dataclass(frozen=True)
class ModelParams:
    delta_c: float = 1.0
    delta_q: float = 0.0
    g: float = 0.0
    kappa: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.delta_c > 0:
            raise ConfigError("delta_c must be positive, got %r (negative detunings are not "
                              "sign-flipped)" % self.delta_c, delta_c=self.delta_c)
        for name in ("g", "kappa", "gamma"):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigError("%s must be non-negative, got %r" % (name, value),
                                  **{name: value})


@dataclass(frozen=True)
class DriveRamp:
    """ Squeeze schedule r(t) = r_max tanh(t / 2 tau), run from t = 0 to t = t_f. """
    r_max: float
    tau: float
    t_f: float

    def __post_init__(self):
        if not self.r_max >= 0:
            raise ConfigError("r_max must be non-negative, got %r" % self.r_max, r_max=self.r_max)
        if not self.tau > 0:
            raise ConfigError("tau must be positive, got %r" % self.tau, tau=self.tau)
        if not self.t_f >= 0:
            raise ConfigError("t_f must be non-negative, got %r" % self.t_f, t_f=self.t_f)


@dataclass(frozen=True)
class StaticDrive:
    """ Constant squeeze parameter, as used by the spectrum and quench experiments. """
    r: float
    t_f: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0:
            raise ConfigError("The static squeeze parameter must be finite and >= 0, got %r"
                              % self.r, r=self.r)


Drive = Union[DriveRamp, StaticDrive]


@dataclass(frozen=True)
class FrameSnapshot:
    r: float
    r_dot: float
    lambda_: float
    omega_c_eff: float
    g_tilde: float


## Squeeze parameter and gain conversions
def r_from_lambda(lambda_: float, delta_c: float) -> float:
    if abs(lambda_) >= delta_c:
        raise InstabilityError("The parametric drive |lambda| = %g reaches the instability "
                               "threshold delta_c = %g" % (abs(lambda_), delta_c),
                               lambda_=lambda_, delta_c=delta_c)
    return 0.5 * math.atanh(lambda_ / delta_c)


def lambda_from_r(r: float, delta_c: float) -> float:
    return delta_c * math.tanh(2 * r)


def gain_db(r: float) -> float:
    """ Parametric gain e^{2r} expressed in dB: 10 log10(e^{2r}). """
    return 20 * r / math.log(10)


def r_from_gain_db(db: float) -> float:
    return db * math.log(10) / 20


def ramp_r(t: float, ramp: Drive) -> Tuple[float, float]:
    """
    :return: the squeeze parameter r(t) and its derivative r_dot(t)
    """
    if t < 0:
        raise ValueError("The ramp is only defined for t >= 0, got t=%r" % t)
    if isinstance(ramp, StaticDrive):
        return ramp.r, 0.0
    x = t / (2 * ramp.tau)
    if x > 350:
        return ramp.r_max, 0.0
    sech = 1 / math.cosh(x)
    return ramp.r_max * math.tanh(x), ramp.r_max / (2 * ramp.tau) * sech ** 2


def snapshot_from_r(r: float, r_dot: float, params: ModelParams) -> FrameSnapshot:
    lambda_ = lambda_from_r(r, params.delta_c)
    if abs(lambda_) >= params.delta_c:
        # tanh(2r) rounds to 1 for r ~> 9
        raise InstabilityError("Squeeze parameter r = %g puts the drive at the instability "
                               "threshold" % r, r=r)
    return FrameSnapshot(
        r=r,
        r_dot=r_dot,
        lambda_=lambda_,
        omega_c_eff=params.delta_c / math.cosh(2 * r),
        g_tilde=params.g * math.exp(r) / 2,
    )


def snapshot(t: float, params: ModelParams, ramp: Drive) -> FrameSnapshot:
    r, r_dot = ramp_r(t, ramp)
    return snapshot_from_r(r, r_dot, params)


def frame_offset(snap: FrameSnapshot, params: ModelParams) -> float:
    """
    The c-number left over when the lab-frame Hamiltonian is conjugated into the squeezed frame:
    U_S H_lab U_S^dag = H_Rabi + H_Err + frame_offset * I (for r_dot = 0).
    """
    return (snap.omega_c_eff - params.delta_c) / 2


def enhancement_ratio(r: float, params: ModelParams) -> float:
    """ Dimensionless enhanced coupling g_tilde / Omega_c at squeeze parameter r. """
    return params.g * math.exp(r) / 2 * math.cosh(2 * r) / params.delta_c


def r_for_enhancement(target: float, params: ModelParams, r_upper=8.0) -> float:
    """
    Solves enhancement_ratio(r) = target for r >= 0. The ratio is strictly increasing in r, so the
    root is unique whenever it exists.
    """
    if params.g <= 0:
        raise ConfigError("An enhancement target needs g > 0")
    low = enhancement_ratio(0.0, params)
    if target < low:
        raise ConfigError("g_tilde/Omega_c = %g is below the undriven value %g" % (target, low),
                          target=target)
    if target == low:
        return 0.0
    if enhancement_ratio(r_upper, params) < target:
        raise ConfigError("g_tilde/Omega_c = %g needs r > %g" % (target, r_upper), target=target)
    return scipy.optimize.brentq(lambda r: enhancement_ratio(r, params) - target, 0.0, r_upper,
                                 xtol=1e-14, rtol=1e-14)


## Hamiltonians
class TimeDependentOperator:
    """
    A(t) = sum_k c_k(t) A_k with fixed operators A_k (Hamiltonians, time-dependent jump
    operators). Calling the object returns an Operator; matrix(t) returns the bare array and is what
    the integrators use at every stage.
    """
    def __init__(self, terms: List[Tuple[Callable[[float], complex], Operator]]):
        if not terms:
            raise ValueError("A time-dependent operator needs at least one term")
        self.space = terms[0][1].space
        self.factor = terms[0][1].factor
        self._coefficients = [c for c, _ in terms]
        self._matrices = np.stack([op.entries for _, op in terms])

    def matrix(self, t: float) -> np.ndarray:
        coefficients = np.array([c(t) for c in self._coefficients], dtype=complex)
        return np.tensordot(coefficients, self._matrices, axes=1)

    def __call__(self, t: float) -> Operator:
        return Operator(self.matrix(t), self.space, self.factor)


def hamiltonian_lab(snap: FrameSnapshot, params: ModelParams, space: HilbertSpec) -> Operator:
    ops = composite_operators(space)
    a, a_dag = ops["a"], ops["a_dag"]
    return (params.delta_c * ops["n"]
            + params.delta_q / 2 * ops["sigma_z"]
            - snap.lambda_ / 2 * (a_dag @ a_dag + a @ a)
            + params.g * (a_dag @ ops["sigma_minus"] + ops["sigma_plus"] @ a))


def _squeezed_frame_terms(space: HilbertSpec) -> dict:
    ops = composite_operators(space)
    a, a_dag = ops["a"], ops["a_dag"]
    return {
        "n": ops["n"],
        "sigma_z": ops["sigma_z"],
        "rabi": (a_dag + a) @ (ops["sigma_plus"] + ops["sigma_minus"]),
        "err": (a_dag - a) @ (ops["sigma_plus"] - ops["sigma_minus"]),
        "da": 1j * (a_dag @ a_dag - a @ a),
    }


def hamiltonian_squeezed_parts(snap: FrameSnapshot, params: ModelParams,
                               space: HilbertSpec) -> Tuple[Operator, Operator, Operator]:
    """
    Squeezed-frame Hamiltonian split as H_S = H_Rabi + H_Err + H_DA.

    :return: H_Rabi, the ideal Rabi Hamiltonian with coupling g_tilde and cavity frequency
    Omega_c; H_Err, the counter-term suppressed by e^{-r}; H_DA, the non-adiabatic term driven by
    r_dot (exactly zero for a static drive).
    """
    terms = _squeezed_frame_terms(space)
    h_rabi = (snap.omega_c_eff * terms["n"] + params.delta_q / 2 * terms["sigma_z"]
              + snap.g_tilde * terms["rabi"])
    h_err = -params.g / 2 * math.exp(-snap.r) * terms["err"]
    h_da = -snap.r_dot / 2 * terms["da"]
    return h_rabi, h_err, h_da


def squeezed_frame_hamiltonian(params: ModelParams, ramp: Drive, space: HilbertSpec,
                               include_error=True, include_da=True) -> TimeDependentOperator:
    """ Time-dependent H_S(t) along the ramp, optionally dropping H_Err and/or H_DA. """
    terms = _squeezed_frame_terms(space)

    def r_of(t):
        return ramp_r(t, ramp)[0]

    h = [
        (lambda t: params.delta_c / math.cosh(2 * r_of(t)), terms["n"]),
        (lambda t: params.delta_q / 2, terms["sigma_z"]),
        (lambda t: params.g * math.exp(r_of(t)) / 2, terms["rabi"]),
    ]
    if include_error:
        h.append((lambda t: -params.g / 2 * math.exp(-r_of(t)), terms["err"]))
    if include_da:
        h.append((lambda t: -ramp_r(t, ramp)[1] / 2, terms["da"]))
    return TimeDependentOperator(h)


def lab_frame_hamiltonian(params: ModelParams, ramp: Drive,
                          space: HilbertSpec) -> TimeDependentOperator:
    ops = composite_operators(space)
    a, a_dag = ops["a"], ops["a_dag"]
    static = (params.delta_c * ops["n"] + params.delta_q / 2 * ops["sigma_z"]
              + params.g * (a_dag @ ops["sigma_minus"] + ops["sigma_plus"] @ a))
    pump = a_dag @ a_dag + a @ a
    return TimeDependentOperator([
        (lambda t: 1.0, static),
        (lambda t: -lambda_from_r(ramp_r(t, ramp)[0], params.delta_c) / 2, pump),
    ])


## Squeeze transformation
def squeezed_vacuum_tail(r: float, fock_cutoff: int) -> float:
    """
    Weight of the exact squeezed vacuum S(r)|0> on Fock levels n >= fock_cutoff - 2. Only even
    levels are populated: |<2m|S|0>|^2 = tanh(r)^{2m} (2m)! / (4^m m!^2 cosh r).
    """
    if r == 0:
        return 0.0
    m = np.arange(0, (fock_cutoff - 2 + 1) // 2)
    log_weights = (2 * m * math.log(abs(math.tanh(r))) + gammaln(2 * m + 1)
                   - 2 * m * math.log(2) - 2 * gammaln(m + 1) - math.log(math.cosh(r)))
    return max(0.0, 1.0 - float(np.sum(np.exp(log_weights))))


def squeeze_generator(space: HilbertSpec) -> Operator:
    """ (a^2 - a^dag^2) / 2 on the cavity factor. """
    a = annihilation(space)
    return 0.5 * (a @ a - a.dag() @ a.dag())


def squeeze_unitary(r: float, space: HilbertSpec) -> Operator:
    """
    U_S[r] = exp[r (a^2 - a^dag^2) / 2] on the composite space. Emits a CutoffWarning when the
    squeezed vacuum does not fit in the truncated space; escalating the cutoff is up to the caller.
    """
    if not math.isfinite(r):
        raise ValueError("The squeeze parameter must be finite, got %r" % r)
    tail = squeezed_vacuum_tail(r, space.fock_cutoff)
    if tail >= squeeze_tail_tolerance:
        warnings.warn(CutoffWarning("Squeezed vacuum weight %.2e beyond N_F=%d at r=%g" %
                                    (tail, space.fock_cutoff, r),
                                    tail=tail, fock_cutoff=space.fock_cutoff, r=r), stacklevel=2)
    u_cavity = matrix_exponential(r * squeeze_generator(space))
    return embed(u_cavity, CAVITY, space)


def to_squeezed_frame(state: Union[StateVector, DensityMatrix], r: float):
    """ psi_S = U_S psi, rho_S = U_S rho U_S^dag. Use -r to go back to the lab frame. """
    if state.factor != COMPOSITE or state.space is None:
        raise ValueError("Frame changes act on composite states")
    u = squeeze_unitary(r, state.space)
    if isinstance(state, StateVector):
        return u @ state
    return DensityMatrix(u.entries @ state.entries @ u.entries.conj().T, state.space)


def lab_photon_number(rho_s: DensityMatrix, r: float) -> float:
    """
    Lab-frame <a^dag a> of a squeezed-frame state, using
    U_S a^dag a U_S^dag = cosh(2r) a^dag a + sinh(r)^2 + sinh(2r) (a^2 + a^dag^2) / 2.
    """
    ops = composite_operators(rho_s.space)
    a, a_dag = ops["a"].entries, ops["a_dag"].entries
    transformed = (math.cosh(2 * r) * ops["n"].entries + math.sinh(r) ** 2 * np.eye(rho_s.dim)
                   + math.sinh(2 * r) / 2 * (a @ a + a_dag @ a_dag))
    return float(np.real(np.trace(rho_s.entries @ transformed)))
