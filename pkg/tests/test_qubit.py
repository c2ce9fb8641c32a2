import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxproc import qubit
from fluxproc.qubit import FluxoniumParams, spectrum

REFERENCE = FluxoniumParams(4.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def eig411():
    return spectrum(REFERENCE)


class TestHamiltonian:
    def test_pure_oscillator_ladder(self):
        params = FluxoniumParams(1e-300, 1.0, 0.7)
        vals = np.linalg.eigvalsh(qubit.build_hamiltonian(params, 60))
        assert np.allclose(np.diff(vals[:20]), np.sqrt(8 * 0.7 * 1.0), atol=1e-9)

    def test_flux_periodicity(self):
        a = np.linalg.eigvalsh(qubit.build_hamiltonian(REFERENCE.with_flux(0.0), 80))
        b = np.linalg.eigvalsh(qubit.build_hamiltonian(REFERENCE.with_flux(2 * np.pi), 80))
        assert np.abs(a - b)[:30].max() < 1e-10

    def test_basis_doubling_converges(self):
        small = spectrum(REFERENCE, basis_size=60, check_convergence=False)
        big = spectrum(REFERENCE, basis_size=120, check_convergence=False)
        assert abs(small.transition(0, 1) - big.transition(0, 1)) < 1e-6

    def test_hermitian(self):
        h = qubit.build_hamiltonian(REFERENCE.with_flux(1.3), 40)
        assert np.abs(h - h.conj().T).max() < 1e-12

    def test_rejects_small_basis(self):
        with pytest.raises(ValueError):
            qubit.build_hamiltonian(REFERENCE, 10)

    def test_rejects_nonpositive_energy(self):
        with pytest.raises(ValueError):
            FluxoniumParams(4, 0, 1)


class TestSpectrum:
    def test_qubit_frequency(self, eig411):
        assert eig411.transition(0, 1) == pytest.approx(0.58, abs=2e-3)

    def test_second_transition(self, eig411):
        assert eig411.transition(1, 2) == pytest.approx(3.39, abs=10e-3)

    @pytest.mark.parametrize("e_l,freq_mhz", [(0.5, 237.0), (1.6, 1163.0)])
    def test_band_endpoints(self, e_l, freq_mhz):
        eig = spectrum(FluxoniumParams(4, 1, e_l))
        assert eig.transition(0, 1) * 1e3 == pytest.approx(freq_mhz, abs=3.0)

    def test_ground_reference_and_order(self, eig411):
        assert eig411.energies[0] == 0
        assert np.all(np.diff(eig411.energies) > 0)

    def test_telescoping(self, eig411):
        assert eig411.transition(0, 2) == pytest.approx(eig411.transition(0, 1) + eig411.transition(1, 2), abs=1e-14)

    def test_anharmonicity(self, eig411):
        alpha = eig411.transition(1, 2) - eig411.transition(0, 1)
        assert alpha == pytest.approx(3.39 - 0.58, abs=0.012)

    def test_transition_index_checks(self, eig411):
        with pytest.raises(IndexError):
            eig411.transition(0, 0)
        with pytest.raises(IndexError):
            eig411.transition(3, 12)

    def test_level_count_guard(self):
        with pytest.raises(ValueError):
            spectrum(REFERENCE, basis_size=40, level_count=21)

    def test_convergence_failure_reported(self):
        with pytest.raises(qubit.ConvergenceError):
            spectrum(FluxoniumParams(4, 1, 0.3), basis_size=24, level_count=12)

    def test_regime_warning(self):
        with pytest.warns(UserWarning):
            spectrum(FluxoniumParams(20, 1, 1), level_count=4, check_convergence=False)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            spectrum(REFERENCE, level_count=4, check_convergence=False)


class TestMatrixElements:
    def test_phase_element_of_reference_qubit(self, eig411):
        # Frozen from this diagonalization (see the decisions ledger for the
        # comparison with the rounded value quoted for the design).
        assert qubit.matrix_element(eig411, "phase", 0, 1) == pytest.approx(2.131, abs=2e-3)

    def test_phase_element_of_low_frequency_qubit(self):
        eig = spectrum(FluxoniumParams(4, 1, 0.5))
        assert qubit.matrix_element(eig, "phase", 0, 1) == pytest.approx(2.5, abs=0.1)

    def test_parity_forbidden_charge(self, eig411):
        assert qubit.matrix_element(eig411, "charge", 0, 2) < 1e-8

    def test_charge_grows_with_level(self, eig411):
        assert qubit.matrix_element(eig411, "charge", 0, 1) < qubit.matrix_element(eig411, "charge", 1, 2)

    def test_phase_larger_than_charge(self, eig411):
        assert qubit.matrix_element(eig411, "phase", 0, 1) > qubit.matrix_element(eig411, "charge", 0, 1)

    def test_symmetric_magnitudes(self, eig411):
        for name in ("charge", "phase", "sin_half_phase"):
            m = np.abs(eig411.operator(name))
            assert np.allclose(m, m.T, atol=1e-12)

    def test_parity_selection_everywhere(self, eig411):
        i, j = np.indices(eig411.n_elements.shape)
        even = (i + j) % 2 == 0
        assert np.abs(eig411.n_elements[even]).max() < 1e-8
        assert np.abs(eig411.phi_elements[even]).max() < 1e-8

    def test_index_check(self, eig411):
        with pytest.raises(IndexError):
            qubit.matrix_element(eig411, "charge", 0, 12)


class TestInvariants:
    @settings(max_examples=8, deadline=None)
    @given(delta=st.floats(0.01, 1.0))
    def test_sweet_spot_symmetry(self, delta):
        up = spectrum(REFERENCE.with_flux(np.pi + delta), level_count=6, check_convergence=False)
        down = spectrum(REFERENCE.with_flux(np.pi - delta), level_count=6, check_convergence=False)
        assert np.abs(up.energies - down.energies).max() < 1e-9

    def test_first_order_flux_insensitivity(self):
        f = lambda phi: spectrum(REFERENCE.with_flux(phi), level_count=4, check_convergence=False).transition(0, 1)  # noqa: E731
        slope = (f(np.pi + 1e-4) - f(np.pi - 1e-4)) / 2e-4
        assert abs(slope) < 1e-6  # GHz per radian, i.e. below 1 kHz/rad

    @settings(max_examples=10, deadline=None)
    @given(e_j=st.floats(2, 6), e_c=st.floats(0.5, 2), e_l=st.floats(0.3, 2))
    def test_default_basis_converged_across_design_box(self, e_j, e_c, e_l):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spectrum(FluxoniumParams(e_j, e_c, e_l))  # raises ConvergenceError otherwise
