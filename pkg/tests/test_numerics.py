import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxproc import numerics
from fluxproc.numerics import OptimizerConfig, TimeGrid

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


class TestEigh:
    def test_identity(self):
        vals, vecs = numerics.eigh(np.eye(2))
        np.testing.assert_allclose(vals, [1, 1])
        np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(2), atol=1e-14)

    def test_diagonal_sorted(self):
        vals, vecs = numerics.eigh(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(vals, [1, 2, 3])
        np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])

    def test_pauli_x(self):
        vals, vecs = numerics.eigh(SX)
        np.testing.assert_allclose(vals, [-1, 1])
        np.testing.assert_allclose(np.abs(vecs), np.full((2, 2), 2 ** -0.5))
        # largest component real positive
        for k in range(2):
            pivot = vecs[np.argmax(np.abs(vecs[:, k])), k]
            assert pivot.real > 0 and abs(pivot.imag) < 1e-14

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match=r"\(0, 1\)|\(1, 0\)"):
            numerics.eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))

    @settings(max_examples=15, deadline=None)
    @given(dim=st.integers(2, 300), seed=st.integers(0, 2**31))
    def test_reconstruction(self, dim, seed):
        h = random_hermitian(np.random.default_rng(seed), dim)
        vals, vecs = numerics.eigh(h)
        norm = np.linalg.norm(h, 2)
        assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.conj().T - h) <= 1e-9 * norm * dim
        assert np.all(np.diff(vals) >= 0)
        residual = np.linalg.norm(h @ vecs - vecs * vals, axis=0)
        assert residual.max() <= 1e-10 * norm * np.sqrt(dim)


class TestSchrodinger:
    def test_zero_hamiltonian(self):
        psi0 = np.array([0.6, 0.8j])
        states = numerics.evolve_schrodinger(np.zeros((2, 2)), psi0, TimeGrid(0, 5, 7))
        np.testing.assert_allclose(states, np.tile(psi0, (7, 1)), atol=1e-12)

    def test_sigma_z_rotation(self):
        omega = 2.3
        psi0 = np.array([1, 1]) / np.sqrt(2)
        grid = TimeGrid(0, 4, 9)
        states = numerics.evolve_schrodinger(0.5 * omega * SZ, psi0, grid)
        t = grid.times
        expected = np.stack([np.exp(-0.5j * omega * t), np.exp(0.5j * omega * t)], axis=1) / np.sqrt(2)
        np.testing.assert_allclose(states, expected, atol=1e-9)

    def test_resonant_rabi_transfer(self):
        # Lab-frame drive on a two-level system; in the rotating-wave limit
        # the analytic Rabi formula predicts full transfer after pi/Omega.
        # Rotating frame keeps the test exact: H = (Omega/2) sigma_x.
        rabi = 0.7
        states = numerics.evolve_schrodinger(0.5 * rabi * SX, np.array([1, 0]),
                                             [0, np.pi / rabi])
        assert abs(states[-1, 1]) ** 2 == pytest.approx(1.0, abs=1e-6)

    def test_unitarity_of_driven_evolution(self):
        rng = np.random.default_rng(3)
        h0 = random_hermitian(rng, 4)
        v = random_hermitian(rng, 4)
        h = lambda t: h0 + np.cos(3 * t) * v  # noqa: E731
        psi = np.linalg.qr(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))[0]
        states = numerics.evolve_schrodinger(h, psi, TimeGrid(0, 6, 13))
        overlaps = np.einsum("ti,ti->t", states[:, :, 0].conj(), states[:, :, 1])
        norms = np.linalg.norm(states, axis=1)
        assert np.abs(overlaps - overlaps[0]).max() < 1e-7
        assert np.abs(norms - 1).max() < 1e-8

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            numerics.evolve_schrodinger(SZ, np.array([1.0, 1.0]), [0, 1])


class TestLindblad:
    def test_closed_system_matches_schrodinger(self):
        rng = np.random.default_rng(7)
        h = random_hermitian(rng, 3)
        psi0 = np.array([1, 1j, 0]) / np.sqrt(2)
        grid = TimeGrid(0, 3, 5)
        psi = numerics.evolve_schrodinger(h, psi0, grid)
        rho = numerics.evolve_lindblad(h, [], np.outer(psi0, psi0.conj()), grid)
        expected = np.einsum("ti,tj->tij", psi, psi.conj())
        np.testing.assert_allclose(rho, expected, atol=1e-8)

    def test_amplitude_decay(self):
        gamma = 0.8
        lower = np.sqrt(gamma) * np.array([[0, 1], [0, 0]])
        grid = TimeGrid(0, 5, 11)
        rho = numerics.evolve_lindblad(np.zeros((2, 2)), [lower], np.diag([0.0, 1.0]), grid)
        np.testing.assert_allclose(rho[:, 1, 1].real, np.exp(-gamma * grid.times), rtol=1e-6, atol=1e-12)
        assert np.abs(np.trace(rho, axis1=1, axis2=2) - 1).max() < 1e-8
        assert np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))).max() < 1e-10

    def test_pure_dephasing(self):
        gamma_phi = 0.3
        dephase = np.sqrt(gamma_phi / 2) * SZ
        plus = np.full((2, 2), 0.5)
        grid = TimeGrid(0, 4, 9)
        rho = numerics.evolve_lindblad(np.zeros((2, 2)), [dephase], plus, grid)
        np.testing.assert_allclose(rho[:, 0, 1].real, 0.5 * np.exp(-gamma_phi * grid.times), rtol=1e-6)

    def test_rejects_unphysical(self):
        with pytest.raises(ValueError):
            numerics.evolve_lindblad(np.zeros((2, 2)), [], np.diag([1.5, -0.5]), [0, 1])


class TestNelderMead:
    def test_quadratic(self):
        res = numerics.nelder_mead(lambda x: (x[0] - 3) ** 2, [0.0],
                                   OptimizerConfig(initial_simplex_scale=1.0))
        assert res.x[0] == pytest.approx(3, abs=1e-4)

    def test_bowl(self):
        res = numerics.nelder_mead(lambda x: x @ x, [1.0, 1.0], OptimizerConfig(f_tolerance=1e-14))
        assert res.fun < 1e-8

    def test_rosenbrock(self):
        rosen = lambda p: (1 - p[0]) ** 2 + 100 * (p[1] - p[0] ** 2) ** 2  # noqa: E731
        res = numerics.nelder_mead(rosen, [-1.2, 1.0], OptimizerConfig(max_evaluations=2000))
        assert res.fun < 1e-3
        assert res.evaluations <= 2000

    def test_non_finite_vertices_are_skipped(self):
        f = lambda x: np.nan if x[0] < 0 else (x[0] - 1) ** 2  # noqa: E731
        res = numerics.nelder_mead(f, [0.5], OptimizerConfig(initial_simplex_scale=-0.7))
        assert res.x[0] == pytest.approx(1, abs=1e-3)

    def test_all_infinite_start_fails(self):
        with pytest.raises(numerics.NumericsError):
            numerics.nelder_mead(lambda x: np.inf, [0.0])

    @settings(max_examples=20, deadline=None)
    @given(x0=st.lists(st.floats(-3, 3), min_size=1, max_size=3), budget=st.integers(1, 40))
    def test_never_worse_than_start(self, x0, budget):
        f = lambda x: float(np.sum(np.sin(3 * x) + 0.1 * x**2))  # noqa: E731
        res = numerics.nelder_mead(f, x0, OptimizerConfig(max_evaluations=budget))
        assert res.fun <= f(np.asarray(x0))


class TestLinearFit:
    def test_exact_line(self):
        t = np.linspace(0, 1, 5)
        slope, intercept, rms = numerics.linear_fit(t, 2 * t + 1)
        assert (slope, intercept) == (pytest.approx(2), pytest.approx(1))
        assert rms < 1e-12

    def test_constant(self):
        slope, intercept, rms = numerics.linear_fit([0, 1, 2], [5, 5, 5])
        assert slope == pytest.approx(0, abs=1e-12) and intercept == pytest.approx(5)
        assert rms < 1e-12

    def test_alternating_noise(self):
        t = np.arange(10.0)
        y = 3 * t + 0.1 * (-1) ** np.arange(10)
        slope, _, rms = numerics.linear_fit(t, y)
        assert abs(slope - 3) < 0.05
        assert rms > 0

    def test_degenerate_abscissae(self):
        with pytest.raises(ValueError):
            numerics.linear_fit([1, 1, 1], [0, 1, 2])
