"""
Unit tests for the displaced frame: the closed-form displacement matrix, the conjugated generator
and the squeezed-frame scores computed from displaced-frame states.
"""
import math

import numpy as np
import pytest

from cqed.analysis import (DisplacementTrajectory, alpha_trajectory, cat_target, fidelity,
                           log_negativity)
from cqed.displaced import DisplacedFrame, displaced_to_squeezed, displacement_matrix
from cqed.model import (DriveRamp, ModelParams, StaticDrive, lab_photon_number, r_from_gain_db,
                        ramp_r, snapshot, squeezed_frame_hamiltonian)
from cqed.operators import (MINUS_Z, DensityMatrix, HilbertSpec, annihilation,
                            basis_state, composite_operators, matrix_exponential)


def fixed_displacement(alpha):
    return DisplacementTrajectory(np.array([0.0, 1.0]), np.array([alpha, alpha]), np.zeros(2),
                                  lambda t: alpha)


@pytest.fixture
def mixed_state(random_state, rng):
    """Draws a rank-3 density matrix on the given space"""
    def draw(space):
        weights = rng.uniform(size=3)
        rho = sum(w * np.outer(psi, psi.conj()) for w, psi in
                  zip(weights / weights.sum(), (random_state(space.dim) for _ in range(3))))
        return DensityMatrix(rho, space)
    return draw


class TestDisplacementMatrix:
    """<m|D(beta)|n> against the exponential on a much larger space."""

    @pytest.mark.parametrize("beta", [0.8 - 0.5j, 2.0, -1.5j])
    @pytest.mark.parametrize("rows, cols", [(8, 8), (9, 8), (6, 10)])
    def test_matches_exponential(self, beta, rows, cols):
        a = annihilation(HilbertSpec(80))
        exact = matrix_exponential(beta * a.dag() - np.conj(beta) * a).entries
        assert np.allclose(displacement_matrix(beta, rows, cols), exact[:rows, :cols], atol=1e-10)

    def test_adjoint(self):
        beta = 1.2 + 0.7j
        assert np.allclose(displacement_matrix(-beta, 10, 10),
                           displacement_matrix(beta, 10, 10).conj().T, atol=1e-14)

    def test_limits(self):
        assert np.array_equal(displacement_matrix(0.0, 4, 5), np.eye(4, 5))
        assert not np.any(displacement_matrix(100.0, 10, 10))
        # Far displacements underflow smoothly instead of overflowing
        far = displacement_matrix(30.0 - 20.0j, 12, 12)
        assert np.all(np.isfinite(far)) and np.max(np.abs(far)) < 1e-100


class TestGenerator:
    """The displaced-frame generator is T^dag (squeezed-frame generator) T."""

    fock_cutoff = 10

    @pytest.fixture
    def setup(self):
        params = ModelParams(delta_q=0.3, g=0.1, kappa=1e-3, gamma=1e-3)
        ramp = DriveRamp(1.0, 5.0, 25.0)
        frame = DisplacedFrame(params, ramp, HilbertSpec(self.fock_cutoff),
                               alpha_trajectory(params, ramp, [0.0, 25.0]))
        t = 7.3
        alpha = frame.alpha_traj.at(t)
        ops = composite_operators(HilbertSpec(70))
        conditional = matrix_exponential((alpha * ops["a_dag"] - np.conj(alpha) * ops["a"])
                                         @ ops["sigma_x"]).entries
        return params, ramp, frame, t, alpha, ops, conditional

    def conjugate(self, conditional, matrix):
        low = 2 * self.fock_cutoff
        return (conditional.conj().T @ matrix @ conditional)[:low, :low]

    def test_hamiltonian(self, setup):
        params, ramp, frame, t, alpha, ops, conditional = setup
        snap = snapshot(t, params, ramp)
        alpha_dot = -1j * (snap.omega_c_eff * alpha + snap.g_tilde)
        # -i T^dag T_dot, up to a c-number
        frame_motion = -1j * ((alpha_dot * ops["a_dag"] - np.conj(alpha_dot) * ops["a"])
                              @ ops["sigma_x"]).entries
        h_squeezed = squeezed_frame_hamiltonian(params, ramp, HilbertSpec(70)).matrix(t)
        expected = self.conjugate(conditional, h_squeezed) + frame_motion[:20, :20]

        difference = expected - frame.terms(t)["hamiltonian"]
        assert np.allclose(difference, difference[0, 0] * np.eye(20), atol=1e-8)
        assert abs(difference[0, 0].imag) < 1e-8

    def test_jumps(self, setup):
        params, ramp, frame, t, alpha, ops, conditional = setup
        r = ramp_r(t, ramp)[0]
        bogoliubov = (math.cosh(r) * ops["a"] + math.sinh(r) * ops["a_dag"]).entries
        terms = frame.terms(t)
        assert np.allclose(terms["cavity_jump"], self.conjugate(conditional, bogoliubov), atol=1e-8)
        assert np.allclose(terms["qubit_jump"],
                           self.conjugate(conditional, ops["sigma_minus"].entries), atol=1e-8)

    def test_hermitian_at_high_gain(self, usc_params):
        ramp = DriveRamp(r_from_gain_db(20.0), 100.0, 500.0)
        frame = DisplacedFrame(usc_params, ramp, HilbertSpec(12),
                               alpha_trajectory(usc_params, ramp, [0.0, 500.0]))
        assert abs(frame.alpha_traj.at(500.0)) > 15
        for t in (50.0, 250.0, 500.0):
            h = frame.terms(t)["hamiltonian"]
            assert np.all(np.isfinite(h))
            assert np.max(np.abs(h - h.conj().T)) < 1e-12

    def test_lindblad_spec(self, usc_params, short_ramp):
        frame = DisplacedFrame(usc_params, short_ramp, HilbertSpec(8),
                               alpha_trajectory(usc_params, short_ramp, [0.0, 50.0]))
        spec = frame.lindblad_spec()
        assert [rate for _, rate in spec.jumps] == [usc_params.kappa, usc_params.gamma]
        assert spec.hamiltonian.matrix(10.0).shape == (16, 16)

    def test_needs_dense_output(self, usc_params, short_ramp):
        bare = DisplacementTrajectory(np.array([0.0, 1.0]), np.zeros(2, dtype=complex), np.zeros(2))
        with pytest.raises(ValueError):
            DisplacedFrame(usc_params, short_ramp, HilbertSpec(8), bare)


class TestScores:
    """Squeezed-frame fidelity, entanglement and photon numbers of displaced-frame states."""

    alpha = -1.3 + 0.4j
    r = 0.8

    @pytest.fixture
    def frame(self, usc_params):
        return DisplacedFrame(usc_params, StaticDrive(self.r), HilbertSpec(12),
                              fixed_displacement(self.alpha))

    def test_vacuum_is_the_cat(self, frame):
        rho = basis_state(frame.space, 0, MINUS_Z).to_density_matrix()
        cat = cat_target(self.alpha, HilbertSpec(40)).to_density_matrix()
        assert frame.fidelity(rho, 0.5, self.alpha) == pytest.approx(1.0, abs=1e-12)
        assert frame.log_negativity(rho, 0.5) == pytest.approx(log_negativity(cat), abs=1e-8)
        assert frame.photon_number(rho, 0.5) == pytest.approx(abs(self.alpha) ** 2, abs=1e-12)
        assert frame.lab_photon_number(rho, 0.5) == pytest.approx(lab_photon_number(cat, self.r),
                                                                  abs=1e-8)

    def test_mixed_state(self, frame, mixed_state):
        rho = mixed_state(frame.space)
        squeezed = displaced_to_squeezed(rho, self.alpha)
        target = cat_target(2.0 + 0.5j, squeezed.space)
        assert frame.fidelity(rho, 0.5, 2.0 + 0.5j) == pytest.approx(fidelity(squeezed, target),
                                                                    abs=1e-8)
        assert frame.log_negativity(rho, 0.5) == pytest.approx(log_negativity(squeezed), abs=1e-8)
        assert frame.lab_photon_number(rho, 0.5) == pytest.approx(
            lab_photon_number(squeezed, self.r), abs=1e-8)

    def test_undisplaced(self, usc_params, mixed_state):
        frame = DisplacedFrame(usc_params, StaticDrive(self.r), HilbertSpec(8),
                               fixed_displacement(0j))
        rho = mixed_state(frame.space)
        assert frame.log_negativity(rho, 0.0) == pytest.approx(log_negativity(rho), abs=1e-10)

    def test_dephased_cat_is_separable(self, frame):
        # Equal mixture of the two branches |0, +x> and |0, -x>
        plus = np.zeros(frame.space.dim, dtype=complex)
        plus[:2] = [1, 1]
        minus = np.zeros(frame.space.dim, dtype=complex)
        minus[:2] = [1, -1]
        rho = DensityMatrix((np.outer(plus, plus) + np.outer(minus, minus)) / 4, frame.space)
        assert frame.log_negativity(rho, 0.5) == pytest.approx(0.0, abs=1e-10)

    def test_back_to_squeezed_frame(self):
        space = HilbertSpec(10)
        rho = basis_state(space, 0, MINUS_Z).to_density_matrix()
        squeezed = displaced_to_squeezed(rho, 3.0 - 2.0j)
        assert squeezed.space.fock_cutoff > 50
        assert squeezed.trace() == pytest.approx(1.0, abs=1e-10)
        assert fidelity(squeezed, cat_target(3.0 - 2.0j, squeezed.space)) == pytest.approx(
            1.0, abs=1e-10)
