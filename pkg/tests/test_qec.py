import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxproc import qec
from fluxproc.decoherence import NoiseBudget


@pytest.fixture(scope="module")
def code3():
    return qec.build_code(3)


def single_pauli(code, q, pauli):
    x = np.zeros(code.n_data, dtype=np.uint8)
    z = np.zeros(code.n_data, dtype=np.uint8)
    (x if pauli == "X" else z)[q] = 1
    return x, z


def only_readout(p):
    return NoiseBudget(cz=0.0, single_qubit=0.0, readout=p, reset=0.0, idle_2q=0.0, idle_1q=0.0, idle_readout=0.0)


def uniform_noise(p):
    return NoiseBudget(cz=p, single_qubit=p, readout=p, reset=p, idle_2q=p, idle_1q=p, idle_readout=p)


class TestLayout:
    @pytest.mark.parametrize("d", [3, 5, 7])
    def test_counts(self, d):
        code = qec.build_code(d)
        assert code.n_data == d * d
        assert code.n_stabilizers == d * d - 1

    @pytest.mark.parametrize("d", [3, 5, 7])
    def test_stabilizers_commute_pairwise(self, d):
        code = qec.build_code(d)
        assert not np.any(qec.symplectic_product(code.stab_x, code.stab_z, code.stab_x, code.stab_z))

    def test_bulk_and_boundary_weights(self):
        code = qec.build_code(5)
        for stab in code.stabilizers:
            assert stab.weight == (4 if stab.kind == "bulk" else 2)
            paulis = "".join(p for _, p, _ in sorted(stab.legs, key=lambda leg: qec.CORNERS.index(leg[2])))
            if stab.kind == "bulk":
                assert paulis == "XZZX"

    @pytest.mark.parametrize("d", [3, 5])
    def test_logicals(self, d):
        code = qec.build_code(d)
        (hx, hz), (vx, vz) = code.logicals["horizontal"], code.logicals["vertical"]
        assert qec.symplectic_product(hx[None], hz[None], vx[None], vz[None])[0, 0] == 1
        for lx, lz in (code.logicals["horizontal"], code.logicals["vertical"]):
            assert not np.any(qec.symplectic_product(code.stab_x, code.stab_z, lx[None], lz[None]))
            assert np.count_nonzero(lx | lz) == d

    @pytest.mark.parametrize("d", [1, 2, 4])
    def test_rejects_invalid_distance(self, d):
        with pytest.raises(ValueError):
            qec.build_code(d)

    def test_single_x_flips_its_z_leg_faces(self):
        code = qec.build_code(5)
        faces = {st.face: s for s, st in enumerate(code.stabilizers)}
        for q, (r, c) in enumerate(code.data_positions):
            # A data qubit is the SW corner of face (r-1, c) and the NE corner of face (r, c-1).
            expected = {faces[f] for f in ((r - 1, c), (r, c - 1)) if f in faces}
            flipped = set(np.nonzero(code.syndrome(*single_pauli(code, q, "X")))[0].tolist())
            assert flipped == expected

    def test_single_z_flips_its_x_leg_faces(self):
        code = qec.build_code(5)
        faces = {st.face: s for s, st in enumerate(code.stabilizers)}
        for q, (r, c) in enumerate(code.data_positions):
            expected = {faces[f] for f in ((r, c), (r - 1, c - 1)) if f in faces}
            flipped = set(np.nonzero(code.syndrome(*single_pauli(code, q, "Z")))[0].tolist())
            assert flipped == expected


def apply_pauli_string(psi, n, xs, zs):
    """Apply prod X^x Z^z (Z first) to a statevector with qubit 0 as the most significant bit."""
    psi = psi.reshape((2,) * n)
    for q in np.nonzero(zs)[0]:
        idx = [slice(None)] * n
        idx[q] = 1
        psi = psi.copy()
        psi[tuple(idx)] *= -1
    for q in np.nonzero(xs)[0]:
        psi = np.flip(psi, axis=q)
    return psi.reshape(-1)


def run_noiseless_statevector(code, circuit):
    """Exact statevector of one syndrome round; returns <X> of every ancilla."""
    n = code.n_qubits
    rng = np.random.default_rng(0)
    data = rng.normal(size=2 ** code.n_data) + 1j * rng.normal(size=2 ** code.n_data)
    for sx, sz in zip(code.stab_x, code.stab_z):
        # project onto the +1 eigenspace of every stabilizer
        data = 0.5 * (data + apply_pauli_string(data, code.n_data, sx, sz) * (-1) ** int(np.sum(sx & sz)))
    data /= np.linalg.norm(data)
    for sx, sz in zip(code.stab_x, code.stab_z):
        assert np.allclose(apply_pauli_string(data, code.n_data, sx, sz) * (-1) ** int(np.sum(sx & sz)), data)
    plus = np.full(2, 1 / np.sqrt(2))
    psi = data
    for _ in range(code.n_stabilizers):
        psi = np.kron(psi, plus)
    psi = psi.reshape((2,) * n)
    hmat = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    for ins in circuit:
        if ins.op == "H":
            for q in ins.a:
                psi = np.moveaxis(np.tensordot(hmat, psi, axes=([1], [q])), 0, q)
        elif ins.op == "CZ":
            for a, b in zip(ins.a, ins.b):
                idx = [slice(None)] * n
                idx[a] = 1
                idx[b] = 1
                psi[tuple(idx)] *= -1
    flat = psi.reshape(-1)
    out = []
    for s in range(code.n_stabilizers):
        xs = np.zeros(n, dtype=np.uint8)
        xs[code.ancilla(s)] = 1
        out.append(np.vdot(flat, apply_pauli_string(flat, n, xs, np.zeros(n, dtype=np.uint8))).real)
    return np.array(out)


class TestCircuitSimulation:
    def test_round_measures_stabilizers_exactly(self, code3):
        # An independent statevector run: every ancilla must read +1 with certainty.
        circuit = qec.build_round_circuit(code3)
        assert run_noiseless_statevector(code3, circuit) == pytest.approx(np.ones(code3.n_stabilizers), abs=1e-10)


    def test_noiseless_runs_are_silent(self, code3):
        hist = qec.sample_run(code3, qec.zero_noise(), 200, np.random.default_rng(0))
        assert not hist.detection_events.any()
        assert not hist.data_x.any() and not hist.data_z.any()

    def test_every_readout_flipped(self, code3):
        hist = qec.sample_run(code3, only_readout(1.0), 10, np.random.default_rng(0), rounds=4)
        det = hist.detection_events
        assert det.shape == (10, 5, code3.n_stabilizers)
        assert det[:, 0].all()
        assert not det[:, 1:4].any()
        assert det[:, 4].all()
        assert not hist.data_x.any() and not hist.data_z.any()

    def test_fixed_seed_is_reproducible(self, code3):
        noise = uniform_noise(0.01)
        a = qec.sample_run(code3, noise, 500, np.random.default_rng(42))
        b = qec.sample_run(code3, noise, 500, np.random.default_rng(42))
        assert np.array_equal(a.detection_events, b.detection_events)
        assert np.array_equal(a.data_x, b.data_x) and np.array_equal(a.data_z, b.data_z)

    def test_single_location_marginals(self):
        n = 100_000
        rng = np.random.default_rng(3)
        for op, p, high in (("DEP1", 0.02, 3), ("DEP2", 0.05, 15), ("MX", 0.03, 1)):
            ins = qec.Instruction(op, (0, 1, 2), (3, 4, 5) if op == "DEP2" else (), p=p)
            faults = qec._sample_faults(rng, ins, n)
            hits = np.count_nonzero(faults.slot == 1)
            assert abs(hits - n * p) < 3 * np.sqrt(n * p * (1 - p))
            counts = np.bincount(faults.code, minlength=high + 1)[1:]
            assert counts.size == high
            share = len(faults.code) / high
            assert np.all(np.abs(counts - share) < 4 * np.sqrt(share))

    def test_cnot_schedule_has_no_conflicts(self):
        for d in (3, 5, 7):
            circuit = qec.build_round_circuit(qec.build_code(d), uniform_noise(1e-3))
            assert [ins.op for ins in circuit].count("CZ") == 4
            assert circuit[-1].op == "MX"


class TestDecoding:
    def test_every_single_fault_is_corrected(self, code3):
        noise = uniform_noise(1e-3)
        circuit = qec.build_round_circuit(code3, noise)
        for sector in qec.SECTORS:
            graph = qec.build_matching_graph(code3, noise, 3, sector)
            dets, obs, _ = qec.fault_signatures(code3, circuit, 3, sector)
            predicted = graph.decode_batch(dets.astype(np.uint8))
            assert np.array_equal(predicted, obs), sector

    def test_every_single_fault_is_corrected_at_distance_five(self):
        code = qec.build_code(5)
        noise = uniform_noise(1e-3)
        circuit = qec.build_round_circuit(code, noise)
        for sector in qec.SECTORS:
            graph = qec.build_matching_graph(code, noise, 2, sector)
            dets, obs, _ = qec.fault_signatures(code, circuit, 2, sector)
            assert np.array_equal(graph.decode_batch(dets.astype(np.uint8)), obs), sector

    def test_matching_agrees_with_coset_decoder_on_single_errors(self, code3):
        matching, rep = qec.code_capacity_graph(code3)
        ml = qec.CosetDecoder(code3)
        for q in range(code3.n_data):
            for pauli in ("X", "Z", "Y"):
                x = np.zeros(code3.n_data, dtype=np.uint8)
                z = np.zeros(code3.n_data, dtype=np.uint8)
                x[q] = pauli in "XY"
                z[q] = pauli in "ZY"
                syn = code3.syndrome(x, z)
                cx, cz = qec.correction_frame(code3, matching, rep, syn)
                assert np.array_equal(code3.syndrome(cx, cz), syn)
                # both decoders land in the coset of the injected error
                assert np.array_equal(qec.coset_class(code3, cx, cz), qec.coset_class(code3, x, z))
                assert np.array_equal(ml.decode(syn), qec.coset_class(code3, x, z))

    def test_double_errors_get_valid_corrections(self, code3):
        # Beyond (d - 1) / 2 errors matching carries no guarantee; it must still clear the syndrome.
        matching, rep = qec.code_capacity_graph(code3)
        ml = qec.CosetDecoder(code3)
        cases = 0
        for (q1, p1), (q2, p2) in itertools.combinations(itertools.product(range(code3.n_data), "XZ"), 2):
            x1, z1 = single_pauli(code3, q1, p1)
            x2, z2 = single_pauli(code3, q2, p2)
            syn = code3.syndrome(x1 ^ x2, z1 ^ z2)
            cx, cz = qec.correction_frame(code3, matching, rep, syn)
            assert np.array_equal(code3.syndrome(cx, cz), syn)
            assert ml.decode(syn).shape == (2,)
            cases += 1
        assert cases == 153

    def test_zero_noise_has_no_failures(self):
        est = qec.logical_error_rate(3, qec.zero_noise(), 2000, 0)
        assert est.failures == 0 and est.rate == 0.0

    def test_parallel_map_gives_same_count(self):
        from concurrent.futures import ThreadPoolExecutor
        noise = uniform_noise(5e-3)
        serial = qec.logical_error_rate(3, noise, 4000, 9, batch=1000)
        with ThreadPoolExecutor(2) as pool:
            threaded = qec.logical_error_rate(3, noise, 4000, 9, batch=1000, pmap=pool.map)
        assert serial.failures == threaded.failures
        assert serial.ci_low <= serial.rate <= serial.ci_high

    def test_rejects_too_few_shots(self):
        with pytest.raises(ValueError):
            qec.logical_error_rate(3, qec.zero_noise(), 10, 0)


class TestSuppressionFit:
    def test_recovers_synthetic_lambda(self):
        d = np.array([3, 5, 7])
        rates = 0.1 / 10.0 ** ((d + 1) / 2)
        lam, c = qec.fit_suppression(d, rates)
        assert lam == pytest.approx(10.0)
        assert c == pytest.approx(0.1)

    def test_flat_rates_give_unit_lambda(self):
        assert qec.fit_suppression([3, 5, 7], [1e-3] * 3)[0] == pytest.approx(1.0)

    def test_needs_two_positive_rates(self):
        with pytest.raises(ValueError):
            qec.fit_suppression([3, 5], [1e-3, 0.0])

    @settings(max_examples=30, deadline=None)
    @given(lam=st.floats(1.5, 50), c=st.floats(1e-3, 1.0))
    def test_fit_is_exact_on_noiseless_model(self, lam, c):
        d = np.array([3, 5, 7, 9])
        lam_fit, c_fit = qec.fit_suppression(d, c / lam ** ((d + 1) / 2))
        assert lam_fit == pytest.approx(lam, rel=1e-9)
        assert c_fit == pytest.approx(c, rel=1e-8)
