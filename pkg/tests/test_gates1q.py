import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from fluxproc import gates1q as g1
from fluxproc.dynamics import average_gate_fidelity
from fluxproc.qubit import FluxoniumParams, spectrum


@pytest.fixture(scope="module")
def eig411():
    return spectrum(FluxoniumParams(4, 1, 1))


def rz(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def brute_force_z_fidelity(u, target):
    # Numerical maximization over Z rotations before and after the gate.
    def loss(v):
        return -average_gate_fidelity(rz(v[0]) @ u @ rz(v[1]), target)
    best = min((minimize(loss, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
                for x0 in ([0, 0], [1, 2], [3, -1], [-2, 0.5])), key=lambda r: r.fun)
    return -best.fun


def random_su2(a, b, c):
    return rz(a) @ np.array([[np.cos(b / 2), -1j * np.sin(b / 2)], [-1j * np.sin(b / 2), np.cos(b / 2)]]) @ rz(c)


class TestAmplitudes:
    def test_seed_follows_area_rule(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 10.0)
        eta = abs(eig411.phi_elements[0, 1])
        assert g1.seed_amplitude(spec) * 1e-3 * eta * 10.0 == pytest.approx(0.25)
        assert g1.full_scale_amplitude(spec) == pytest.approx(8 * g1.seed_amplitude(spec))

    def test_nominal_pulse_area_gives_pi_rotation(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 10.0)
        pulse = g1.make_pulse(spec)
        # Rabi angle 2 pi * eta * area = pi for a two-level system.
        assert 2 * np.pi * spec.eta01 * pulse.area() == pytest.approx(np.pi)

    @pytest.mark.parametrize("kwargs", [dict(tau_g=0), dict(channel="voltage"), dict(target_rotation="Z_pi")])
    def test_spec_validation(self, eig411, kwargs):
        with pytest.raises(ValueError):
            g1.SingleQubitGateSpec(eig411, **kwargs)


class TestCorrectedFidelity:
    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(0, np.pi), c=st.floats(-3, 3))
    def test_closed_form_matches_frame_search(self, a, b, c):
        u = random_su2(a, b, c)
        target = g1.TARGETS["X_pi"]
        assert g1.z_corrected_fidelity(u, "X_pi") == pytest.approx(brute_force_z_fidelity(u, target), abs=1e-8)

    def test_perfect_gate_and_identity(self):
        assert g1.z_corrected_fidelity(g1.TARGETS["X_pi"]) == pytest.approx(1.0)
        assert g1.z_corrected_fidelity(np.eye(2)) == pytest.approx(1 / 3)

    @settings(max_examples=20, deadline=None)
    @given(pre=st.floats(-3, 3), post=st.floats(-3, 3))
    def test_invariant_under_frame_phases(self, pre, post):
        u = random_su2(0.3, 2.9, -0.4)
        assert g1.z_corrected_fidelity(rz(pre) @ u @ rz(post)) == pytest.approx(g1.z_corrected_fidelity(u), abs=1e-12)


class TestSimulation:
    def test_nominal_flux_pulse_is_close(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 25.0)
        res = g1.simulate_pi_gate(spec, g1.make_pulse(spec))
        assert res.error < 1e-2
        assert res.leakage < 1e-3

    def test_drive_phase_aligns_charge_axis(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "charge", 25.0)
        res = g1.simulate_pi_gate(spec, g1.make_pulse(spec))
        # The rotation axis lies along X, so the raw fidelity matches the corrected one.
        assert res.raw_fidelity == pytest.approx(res.fidelity, abs=5e-3)

    def test_amplitude_sensitivity_minimum_near_nominal(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 25.0)
        errs = g1.parameter_sensitivity(spec, "amplitude", [0.4, 0.5, 0.6])
        assert errs[1] < errs[0] and errs[1] < errs[2]
        with pytest.raises(ValueError):
            g1.parameter_sensitivity(spec, "width", [1.0])

    def test_pulse_duration_must_match(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 10.0)
        with pytest.raises(ValueError):
            g1.simulate_pi_gate(spec, g1.make_pulse(g1.SingleQubitGateSpec(eig411, "flux", 12.0)))

    def test_optimizer_improves_on_nominal(self, eig411):
        spec = g1.SingleQubitGateSpec(eig411, "flux", 10.0)
        nominal = g1.simulate_pi_gate(spec, g1.make_pulse(spec)).error
        res = g1.optimize_gate(spec)
        assert res.error < min(nominal, 1e-6)
        assert res.optimizer_trace and res.parameters["amplitude_factor"] == pytest.approx(0.5, abs=0.05)
