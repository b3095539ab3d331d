"""
Master equation in the frame that follows the displacement of the cat.

The squeezed-frame state is written rho_S = T rho_D T^dag with the conditional displacement
T(t) = exp[(alpha a^dag - alpha^* a) sigma_x] = D(alpha) P_+ + D(-alpha) P_-, where P_s projects
on sigma_x = s and alpha(t) is the displacement of analysis.alpha_trajectory, which obeys
alpha_dot = -i (Omega_c alpha + g_tilde). Conjugating H_S with T and adding -i T^dag T_dot removes
the Rabi coupling exactly:
    H_D = Omega_c a^dag a + T^dag (delta_q sigma_z / 2 + H_Err + H_DA) T     (up to c-numbers)
The ideal cat is |0,-z> in this frame and the state stays close to the cavity vacuum, so a dozen
Fock levels hold drives whose cat would need hundreds of levels in the squeezed frame.

For a cavity operator C and a qubit operator Q:
    T^dag (C P_s Q P_s) T  = C(a -> a + s alpha) P_s Q P_s
    T^dag (C P_s Q P_-s) T = D(-2 s alpha) C(a -> a - s alpha) P_s Q P_-s
Terms that flip sigma_x (sigma_z, H_Err, sigma_-) carry D(-2 s alpha), whose matrix elements between
retained levels are evaluated in closed form: nothing is displaced inside the truncated space.
What these terms reach beyond the cutoff is dropped, as for any truncation. For |alpha| well above
sqrt(N_F) that is the far-displaced branch left behind by a qubit flip.
"""
import math
from typing import Dict, Tuple

import numpy as np
import scipy.special

from cqed.analysis import DisplacementTrajectory, fidelity, projected_cat
from cqed.dynamics import LindbladSpec
from cqed.model import Drive, ModelParams, ramp_r
from cqed.operators import (DensityMatrix, HilbertSpec, Operator,
                            composite_operators, matrix_exponential, qubit_operators, trace_norm)


# Past |beta| = 2 sqrt(levels) + far_margin every retained element of D(beta) is below 1e-300
far_margin = 40.0


def displacement_matrix(beta: complex, rows: int, cols: int) -> np.ndarray:
    """
    <m|D(beta)|n> for m < rows and n < cols, with D(beta) = exp(beta a^dag - beta^* a):
        <m|D|n> = sqrt(n!/m!) beta^(m-n) e^{-|beta|^2/2} L_n^(m-n)(|beta|^2)        m >= n
        <m|D|n> = sqrt(m!/n!) (-beta^*)^(n-m) e^{-|beta|^2/2} L_m^(n-m)(|beta|^2)   m < n
    Magnitudes are combined in logarithms.
    """
    if beta == 0:
        return np.eye(rows, cols, dtype=complex)
    size = abs(beta)
    if size > 2 * math.sqrt(max(rows, cols)) + far_margin:
        return np.zeros((rows, cols), dtype=complex)

    m, n = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    low, high = np.minimum(m, n), np.maximum(m, n)
    k = high - low
    laguerre = scipy.special.eval_genlaguerre(low, k, size ** 2)
    with np.errstate(divide="ignore"):
        log_magnitude = (0.5 * (scipy.special.gammaln(low + 1) - scipy.special.gammaln(high + 1))
                         + k * math.log(size) - size ** 2 / 2 + np.log(np.abs(laguerre)))
    unit = np.where(m >= n, beta / size, -np.conj(beta) / size) ** k
    return np.sign(laguerre) * np.exp(log_magnitude) * unit


def _flip_parts(q: np.ndarray) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    """ Splits a qubit operator into its sigma_x-diagonal part and the parts P_s Q P_-s. """
    sigma_x = qubit_operators()[3].entries
    p = {+1: (np.eye(2) + sigma_x) / 2, -1: (np.eye(2) - sigma_x) / 2}
    diagonal = p[+1] @ q @ p[+1] + p[-1] @ q @ p[-1]
    return diagonal, {s: p[s] @ q @ p[-s] for s in (+1, -1)}


class _FrameTerm:
    """ One operator of the displaced-frame generator, as the integrators consume it. """
    def __init__(self, frame: "DisplacedFrame", name: str):
        self.frame = frame
        self.name = name

    def matrix(self, t: float) -> np.ndarray:
        return self.frame.terms(t)[self.name]


class DisplacedFrame:
    """
    Generator and observables of the displaced frame along one drive.

    :param alpha_traj: the displacement alpha(t), with its dense output (alpha_trajectory over a
    non-empty time interval)
    """
    def __init__(self, params: ModelParams, ramp: Drive, space: HilbertSpec,
                 alpha_traj: DisplacementTrajectory):
        if alpha_traj.dense is None:
            raise ValueError("The displaced frame needs alpha(t) between samples, got a trajectory "
                             "without dense output")
        self.params = params
        self.ramp = ramp
        self.space = space
        self.alpha_traj = alpha_traj

        fock_cutoff = space.fock_cutoff
        ops = composite_operators(space)
        self._a = ops["a"].entries
        self._n = ops["n"].entries
        self._sigma_x = ops["sigma_x"].entries
        self._eye_cavity = np.eye(fock_cutoff)
        # a^dag - a from the retained levels into one more level
        a_wide = np.diag(np.sqrt(np.arange(1, fock_cutoff + 1)), 1)[:, :fock_cutoff]
        a_dag_wide = np.diag(np.sqrt(np.arange(1, fock_cutoff + 1)), -1)[:, :fock_cutoff]
        self._quadrature_wide = a_dag_wide - a_wide

        sigma_minus, sigma_plus, sigma_z, _ = (op.entries for op in qubit_operators())
        _, self._sigma_z_flip = _flip_parts(sigma_z)
        _, self._err_flip = _flip_parts(sigma_plus - sigma_minus)
        self._sigma_minus_diagonal, self._sigma_minus_flip = _flip_parts(sigma_minus)
        # Columns: |+x>, |-x> in the (|+z>, |-z>) basis
        self._to_x_basis = np.kron(self._eye_cavity, np.array([[1, 1], [1, -1]]) / math.sqrt(2))

        self._cached_t = None
        self._cached = None

    ## Generator
    def terms(self, t: float) -> Dict[str, np.ndarray]:
        """ Hamiltonian, jump operators and the shifted ladder operator at time t. """
        if t == self._cached_t:
            return self._cached
        params = self.params
        fock_cutoff = self.space.fock_cutoff
        r, r_dot = ramp_r(t, self.ramp)
        alpha = self.alpha_traj.at(t)

        # flip[s] = <m|D(-2 s alpha)|n>, m < N_F, n <= N_F; D(2 alpha) = D(-2 alpha)^dag
        wide = displacement_matrix(-2 * alpha, fock_cutoff + 1, fock_cutoff + 1)
        flip = {+1: wide[:fock_cutoff, :], -1: wide[:, :fock_cutoff].conj().T}

        a_shifted = self._a + alpha * self._sigma_x
        a_shifted_dag = a_shifted.conj().T

        hamiltonian = params.delta_c / math.cosh(2 * r) * self._n
        if params.delta_q != 0:
            hamiltonian = hamiltonian + params.delta_q / 2 * sum(
                np.kron(flip[s][:, :fock_cutoff], self._sigma_z_flip[s]) for s in (+1, -1))
        # The s = -1 half of H_Err is the adjoint of the s = +1 half; adding it as such keeps the
        # truncated generator Hermitian
        err_half = np.kron(flip[+1] @ self._quadrature_wide
                           + (alpha - np.conj(alpha)) * flip[+1][:, :fock_cutoff], self._err_flip[+1])
        hamiltonian = hamiltonian - params.g / 2 * math.exp(-r) * (err_half + err_half.conj().T)
        if r_dot != 0:
            hamiltonian = hamiltonian - r_dot / 2 * 1j * (a_shifted_dag @ a_shifted_dag
                                                          - a_shifted @ a_shifted)

        terms = {
            "hamiltonian": hamiltonian,
            "a_shifted": a_shifted,
            "cavity_jump": math.cosh(r) * a_shifted + math.sinh(r) * a_shifted_dag,
            "qubit_jump": np.kron(self._eye_cavity, self._sigma_minus_diagonal) + sum(
                np.kron(flip[s][:, :fock_cutoff], self._sigma_minus_flip[s]) for s in (+1, -1)),
        }
        self._cached_t, self._cached = t, terms
        return terms

    def lindblad_spec(self) -> LindbladSpec:
        """ The squeezed-frame master equation (lindblad_squeezed_frame_spec) conjugated by T. """
        jumps = []
        if self.params.kappa > 0:
            jumps.append((_FrameTerm(self, "cavity_jump"), self.params.kappa))
        if self.params.gamma > 0:
            jumps.append((_FrameTerm(self, "qubit_jump"), self.params.gamma))
        return LindbladSpec(_FrameTerm(self, "hamiltonian"), tuple(jumps))

    ## Observables of the squeezed-frame state T rho T^dag
    def fidelity(self, rho: DensityMatrix, t: float, alpha_final: complex) -> float:
        """ Fidelity with cat_target(alpha_final), which is the cat of alpha_final - alpha(t) here. """
        return fidelity(rho, projected_cat(alpha_final - self.alpha_traj.at(t), self.space))

    def log_negativity(self, rho: DensityMatrix, t: float) -> float:
        """
        E_N of T rho T^dag. With rho_jk the cavity blocks of rho between sigma_x eigenstates,
        T rho T^dag = sum_jk |j><k| (x) W_j rho_jk W_k^dag, W_j = D(s_j alpha) on the retained levels.
        Its partial transpose (taken in the sigma_x basis, which leaves the trace norm unchanged) is
        W Y W^dag for a 4 N_F dimensional Y and W = [W_+, W_-]; with the Gram matrix G = W^dag W,
        ||W Y W^dag||_1 = ||G^{1/2} Y G^{1/2}||_1.
        """
        fock_cutoff = self.space.fock_cutoff
        alpha = self.alpha_traj.at(t)
        blocks = (self._to_x_basis.conj().T @ rho.entries @ self._to_x_basis).reshape(
            fock_cutoff, 2, fock_cutoff, 2)

        # <W_+ m|W_- n> = <m|D(-2 alpha)|n>
        cross = displacement_matrix(-2 * alpha, fock_cutoff, fock_cutoff)
        gram = np.block([[self._eye_cavity, cross], [cross.conj().T, self._eye_cavity]])
        eigenvalues, vectors = np.linalg.eigh(gram)
        root = (vectors * np.sqrt(np.clip(eigenvalues, 0, None))) @ vectors.conj().T

        transposed = np.zeros((2, 2, fock_cutoff, 2, 2, fock_cutoff), dtype=complex)
        for j in range(2):
            for k in range(2):
                transposed[k, j, :, j, k, :] = blocks[:, j, :, k]
        transposed = transposed.reshape(4 * fock_cutoff, 4 * fock_cutoff)
        congruence = np.kron(np.eye(2), root)
        return math.log2(trace_norm(Operator(congruence @ transposed @ congruence)))

    def photon_number(self, rho: DensityMatrix, t: float) -> float:
        """ Squeezed-frame <a^dag a>, from a -> a + alpha sigma_x. """
        a_shifted = self.terms(t)["a_shifted"]
        return float(np.real(np.trace(rho.entries @ a_shifted.conj().T @ a_shifted)))

    def lab_photon_number(self, rho: DensityMatrix, t: float) -> float:
        """ Lab-frame <a^dag a>, as model.lab_photon_number with a -> a + alpha sigma_x. """
        r = ramp_r(t, self.ramp)[0]
        a_shifted = self.terms(t)["a_shifted"]
        a_shifted_dag = a_shifted.conj().T
        transformed = (math.cosh(2 * r) * a_shifted_dag @ a_shifted
                       + math.sinh(r) ** 2 * np.eye(self.space.dim)
                       + math.sinh(2 * r) / 2 * (a_shifted @ a_shifted
                                                 + a_shifted_dag @ a_shifted_dag))
        return float(np.real(np.trace(rho.entries @ transformed)))

    def scores(self, rho: DensityMatrix, t: float, alpha_final: complex):
        """ :return: F, E_N, squeezed-frame and lab-frame photon numbers """
        return (self.fidelity(rho, t, alpha_final), self.log_negativity(rho, t),
                self.photon_number(rho, t), self.lab_photon_number(rho, t))


def displaced_to_squeezed(rho: DensityMatrix, alpha: complex) -> DensityMatrix:
    """
    T rho T^dag, on a Fock space padded so that displacing the retained levels by alpha stays
    well inside it.
    """
    fock_cutoff = rho.space.fock_cutoff
    padded = HilbertSpec(max(fock_cutoff,
                             int(math.ceil((math.sqrt(fock_cutoff) + abs(alpha) + 6) ** 2))))
    entries = np.zeros((padded.dim, padded.dim), dtype=complex)
    # Cavity-major indices: the retained levels come first
    entries[:rho.dim, :rho.dim] = rho.entries

    ops = composite_operators(padded)
    alpha = complex(alpha)
    generator = (alpha * ops["a_dag"] - alpha.conjugate() * ops["a"]) @ ops["sigma_x"]
    conditional = matrix_exponential(generator).entries
    return DensityMatrix(conditional @ entries @ conditional.conj().T, padded)
