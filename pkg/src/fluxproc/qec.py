"""XZZX surface code memory experiment with circuit-level Pauli noise.

Layout: data qubits on a ``d x d`` grid, one ancilla per face of the rotated
lattice.  A bulk face with corners NW, NE, SW, SE measures
``X_NW Z_NE Z_SW X_SE``; boundary faces keep the two legs that lie inside the
grid.  Ancillas start in |+>, couple to their data qubits in the order given
by ``COUPLING_ORDER`` (CZ for Z legs, CNOT compiled as H CZ H for X legs) and
are measured in the X basis.

Noise is simulated with a vectorized Pauli frame.  The decoder graph is built
by injecting every single fault component once, recording the detection
events it causes, and merging identical signatures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pymatching

from .decoherence import NoiseBudget, noise_budget
from .numerics import linear_fit, wilson_interval

CORNERS = ("NW", "NE", "SW", "SE")
CORNER_OFFSETS = {"NW": (0, 0), "NE": (0, 1), "SW": (1, 0), "SE": (1, 1)}
CORNER_PAULI = {"NW": "X", "NE": "Z", "SW": "Z", "SE": "X"}
# Coupling order per face colour.  Seen as a diamond, even faces run N, W, E, S
# and odd faces the mirror image N, E, W, S.  Hook errors (an ancilla fault
# spreading onto the last two legs) then lie across the logical they could
# otherwise shorten; with one order for every face, one logical sector loses a
# unit of circuit distance.
COUPLING_ORDER = {0: ("NW", "SW", "NE", "SE"), 1: ("NW", "NE", "SW", "SE")}
T1_COLUMNS = (300e-6, 700e-6, 1e-3)
SECTORS = ("horizontal", "vertical")


# ---------------------------------------------------------------------------
# GF(2) helpers


def _gf2_rank(m: np.ndarray) -> int:
    a = (np.asarray(m, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        pivot = np.nonzero(a[rank:, c])[0]
        if pivot.size == 0:
            continue
        p = rank + pivot[0]
        a[[rank, p]] = a[[p, rank]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        a[others] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_nullspace(m: np.ndarray) -> np.ndarray:
    """Basis of ``{v : m v = 0 (mod 2)}`` as rows."""
    a = (np.asarray(m, dtype=np.uint8) & 1).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hit = np.nonzero(a[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for row, pc in enumerate(pivots):
            v[pc] = a[row, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def symplectic_product(x1, z1, x2, z2) -> np.ndarray:
    """Commutation parity (1 = anticommute) of Paulis given by X and Z bit vectors along the last axis."""
    x1, z1, x2, z2 = (np.asarray(v, dtype=np.uint8) for v in (x1, z1, x2, z2))
    return ((x1 @ z2.T) + (z1 @ x2.T)) % 2


# ---------------------------------------------------------------------------
# code layout


@dataclass(frozen=True)
class Stabilizer:
    face: tuple[int, int]
    kind: str
    legs: tuple  # ((data index, "X" | "Z", corner), ...)

    @property
    def weight(self) -> int:
        return len(self.legs)


@dataclass
class XzzxCode:
    distance: int
    data_positions: list
    stabilizers: list
    stab_x: np.ndarray = field(repr=False)
    stab_z: np.ndarray = field(repr=False)
    logicals: dict = field(repr=False)

    @property
    def n_data(self) -> int:
        return len(self.data_positions)

    @property
    def n_stabilizers(self) -> int:
        return len(self.stabilizers)

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_stabilizers

    def ancilla(self, s: int) -> int:
        return self.n_data + s

    def syndrome(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Stabilizer parities for data frames ``x, z`` shaped ``(..., n_data)``."""
        return symplectic_product(x, z, self.stab_x, self.stab_z)

    def logical_flip(self, x: np.ndarray, z: np.ndarray, sector: str = "horizontal") -> np.ndarray:
        lx, lz = self.logicals[sector]
        return symplectic_product(x, z, lx[None], lz[None])[..., 0]


def _include_face(i: int, j: int, d: int) -> str | None:
    bulk_i, bulk_j = 0 <= i < d - 1, 0 <= j < d - 1
    if bulk_i and bulk_j:
        return "bulk"
    parity = (i + j) % 2
    if bulk_j and i in (-1, d - 1):
        # horizontal boundaries hold one colour of the checkerboard ...
        return ("top" if i == -1 else "bottom") if parity == 1 else None
    if bulk_i and j in (-1, d - 1):
        # ... and vertical boundaries the other
        return ("left" if j == -1 else "right") if parity == 0 else None
    return None


def build_code(d: int) -> XzzxCode:
    """Rotated XZZX code of odd distance ``d`` with verified commuting stabilizers."""
    if d < 3 or d % 2 == 0:
        raise ValueError("distance must be an odd integer >= 3")
    positions = [(r, c) for r in range(d) for c in range(d)]
    index = {p: k for k, p in enumerate(positions)}
    stabilizers = []
    for i in range(-1, d):
        for j in range(-1, d):
            kind = _include_face(i, j, d)
            if kind is None:
                continue
            legs = []
            for corner in CORNERS:
                di, dj = CORNER_OFFSETS[corner]
                q = index.get((i + di, j + dj))
                if q is not None:
                    legs.append((q, CORNER_PAULI[corner], corner))
            stabilizers.append(Stabilizer((i, j), kind, tuple(legs)))
    n = len(positions)
    sx = np.zeros((len(stabilizers), n), dtype=np.uint8)
    sz = np.zeros_like(sx)
    for s, stab in enumerate(stabilizers):
        for q, p, _ in stab.legs:
            (sx if p == "X" else sz)[s, q] = 1
    if np.any(symplectic_product(sx, sz, sx, sz)):
        raise RuntimeError("stabilizers do not commute")
    if len(stabilizers) != n - 1 or _gf2_rank(np.hstack([sx, sz])) != n - 1:
        raise RuntimeError("stabilizers are not n - 1 independent generators")
    code = XzzxCode(d, positions, stabilizers, sx, sz, {})
    code.logicals = _find_logicals(code)
    return code


def _logical_on(code: XzzxCode, support: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """A logical operator supported on ``support`` (commutes with all stabilizers, not in the group)."""
    n = code.n_data
    k = len(support)
    # unknowns: x bits then z bits on the support
    a = np.hstack([code.stab_z[:, support], code.stab_x[:, support]])
    null = _gf2_nullspace(a)
    base = np.hstack([code.stab_x, code.stab_z])
    base_rank = _gf2_rank(base)
    best = None
    for mask in range(1, 2 ** len(null)):
        v = np.zeros(2 * k, dtype=np.uint8)
        for b in range(len(null)):
            if mask >> b & 1:
                v ^= null[b]
        x = np.zeros(n, dtype=np.uint8)
        z = np.zeros(n, dtype=np.uint8)
        x[support], z[support] = v[:k], v[k:]
        if _gf2_rank(np.vstack([base, np.concatenate([x, z])])) == base_rank:
            continue
        weight = int(np.count_nonzero(x | z))
        if best is None or weight < best[0]:
            best = (weight, x, z)
    if best is None:
        raise RuntimeError("no logical operator on the requested support")
    return best[1], best[2]


def _find_logicals(code: XzzxCode) -> dict:
    d = code.distance
    row = [k for k, (r, c) in enumerate(code.data_positions) if r == 0]
    col = [k for k, (r, c) in enumerate(code.data_positions) if c == 0]
    horizontal = _logical_on(code, row)
    vertical = _logical_on(code, col)
    if symplectic_product(horizontal[0][None], horizontal[1][None], vertical[0][None], vertical[1][None])[0, 0] != 1:
        raise RuntimeError("logical representatives must anticommute")
    for lx, lz in (horizontal, vertical):
        if int(np.count_nonzero(lx | lz)) != d:
            raise RuntimeError("logical weight differs from the code distance")
    return {"horizontal": horizontal, "vertical": vertical}


# ---------------------------------------------------------------------------
# circuit


@dataclass(frozen=True)
class Instruction:
    """One layer of the round circuit.

    ``op`` is one of ``RESET``, ``DEP1`` (single-qubit depolarizing with total
    probability ``p``), ``DEP2`` (two-qubit depolarizing on pairs), ``H``,
    ``CZ`` or ``MX`` (X-basis measurement of ancillas with classical flip
    probability ``p``).  ``a`` and ``b`` are qubit index tuples.
    """

    op: str
    a: tuple
    b: tuple = ()
    p: float = 0.0
    label: str = ""


def face_colour(stab: Stabilizer) -> int:
    """Checkerboard colour of a stabilizer's face (0 or 1)."""
    return (stab.face[0] + stab.face[1]) % 2


def build_round_circuit(code: XzzxCode, noise: NoiseBudget | None = None) -> list[Instruction]:
    """Gate schedule of one syndrome-extraction round, with noise layers interleaved.

    Errors act after preparation, before every gate, before readout and on
    every qubit idle during a layer.
    """
    noise = noise or zero_noise()
    n = code.n_qubits
    ancillas = tuple(code.ancilla(s) for s in range(code.n_stabilizers))
    data = tuple(range(code.n_data))
    out = [Instruction("RESET", ancillas), Instruction("DEP1", ancillas, p=noise.reset, label="reset")]

    for step in range(4):
        pairs = [(code.ancilla(s), q, p) for s, stab in enumerate(code.stabilizers) for q, p, c in stab.legs
                 if c == COUPLING_ORDER[face_colour(stab)][step]]
        used = [a for a, _, _ in pairs] + [q for _, q, _ in pairs]
        if len(set(used)) != len(used):
            raise RuntimeError(f"schedule conflict in coupling step {step}")
        x_targets = tuple(q for _, q, p in pairs if p == "X")
        anc = tuple(a for a, _, _ in pairs)
        dat = tuple(q for _, q, _ in pairs)

        def hadamard_layer():
            if not x_targets:
                return []
            idle = tuple(sorted(set(range(n)) - set(x_targets)))
            return [Instruction("DEP1", x_targets, p=noise.single_qubit, label="h"),
                    Instruction("DEP1", idle, p=noise.idle_1q, label="idle_1q"),
                    Instruction("H", x_targets)]

        out += hadamard_layer()
        idle = tuple(sorted(set(range(n)) - set(used)))
        out += [Instruction("DEP2", anc, dat, p=noise.cz, label="cz"),
                Instruction("DEP1", idle, p=noise.idle_2q, label="idle_2q"),
                Instruction("CZ", anc, dat)]
        out += hadamard_layer()

    out += [Instruction("DEP1", data, p=noise.idle_readout, label="idle_readout"),
            Instruction("MX", ancillas, p=noise.readout, label="readout")]
    return out


def zero_noise() -> NoiseBudget:
    return NoiseBudget(cz=0.0, single_qubit=0.0, readout=0.0, reset=0.0, idle_2q=0.0, idle_1q=0.0, idle_readout=0.0)


def coherence_noise(t1: float) -> NoiseBudget:
    """Pauli error budget for one T1 column (seconds) of the decoherence model."""
    return noise_budget(t1)


# ---------------------------------------------------------------------------
# Pauli frame simulation


def _bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices of successes among ``n`` Bernoulli(p) trials."""
    if p <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    expected = n * p
    chunk = int(expected + 6 * np.sqrt(expected) + 16)
    pos = np.cumsum(rng.geometric(p, size=chunk)) - 1
    while pos[-1] < n:
        more = np.cumsum(rng.geometric(p, size=chunk)) + pos[-1]
        pos = np.concatenate([pos, more])
    return pos[pos < n]


class _Faults:
    """Where to apply Paulis in one noise layer: (qubit slot, shot, code)."""

    def __init__(self, slot, shot, code):
        self.slot, self.shot, self.code = slot, shot, code


def _apply_layer_faults(x, z, ins: Instruction, f: _Faults):
    if ins.op == "DEP1":
        q = np.asarray(ins.a)[f.slot]
        x[q, f.shot] ^= (f.code & 1).astype(bool)
        z[q, f.shot] ^= (f.code >> 1 & 1).astype(bool)
    elif ins.op == "DEP2":
        qa, qb = np.asarray(ins.a)[f.slot], np.asarray(ins.b)[f.slot]
        x[qa, f.shot] ^= (f.code & 1).astype(bool)
        z[qa, f.shot] ^= (f.code >> 1 & 1).astype(bool)
        x[qb, f.shot] ^= (f.code >> 2 & 1).astype(bool)
        z[qb, f.shot] ^= (f.code >> 3 & 1).astype(bool)


def _sample_faults(rng, ins: Instruction, shots: int) -> _Faults | None:
    k = len(ins.a)
    pos = _bernoulli_positions(rng, k * shots, ins.p)
    if pos.size == 0:
        return None
    high = 4 if ins.op == "DEP1" else 16
    if ins.op == "MX":
        high = 2
    return _Faults(pos // shots, pos % shots, rng.integers(1, high, size=pos.size))


@dataclass
class SyndromeHistory:
    """Outcome of a batch of memory runs.

    ``measurement_flips`` has shape ``(shots, rounds, n_stab)`` and holds the
    ancilla results relative to the noiseless reference; ``detection_events``
    has shape ``(shots, rounds + 1, n_stab)`` including the final perfect
    readout; ``data_x``/``data_z`` is the final data frame ``(shots, n_data)``.
    """

    measurement_flips: np.ndarray
    detection_events: np.ndarray
    data_x: np.ndarray
    data_z: np.ndarray

    @property
    def shots(self) -> int:
        return self.measurement_flips.shape[0]

    def flat_detectors(self) -> np.ndarray:
        return self.detection_events.reshape(self.shots, -1).astype(np.uint8)


def _run(code: XzzxCode, circuit: list[Instruction], rounds: int, shots: int, fault_source) -> SyndromeHistory:
    n = code.n_qubits
    x = np.zeros((n, shots), dtype=bool)
    z = np.zeros((n, shots), dtype=bool)
    flips = np.zeros((rounds, code.n_stabilizers, shots), dtype=bool)
    for r in range(rounds):
        for k, ins in enumerate(circuit):
            if ins.op == "RESET":
                idx = list(ins.a)
                x[idx] = False
                z[idx] = False
            elif ins.op == "H":
                idx = list(ins.a)
                x[idx], z[idx] = z[idx].copy(), x[idx].copy()
            elif ins.op == "CZ":
                a, b = list(ins.a), list(ins.b)
                xa, xb = x[a].copy(), x[b].copy()
                z[a] ^= xb
                z[b] ^= xa
            elif ins.op in ("DEP1", "DEP2"):
                f = fault_source(r, k, ins)
                if f is not None:
                    _apply_layer_faults(x, z, ins, f)
            elif ins.op == "MX":
                result = z[list(ins.a)].copy()
                f = fault_source(r, k, ins)
                if f is not None:
                    result[f.slot, f.shot] ^= True
                flips[r] = result
    data_x = x[: code.n_data].T.astype(np.uint8)
    data_z = z[: code.n_data].T.astype(np.uint8)
    final = code.syndrome(data_x, data_z).astype(bool)
    m = flips.transpose(2, 0, 1)
    det = np.empty((shots, rounds + 1, code.n_stabilizers), dtype=bool)
    det[:, 0] = m[:, 0]
    det[:, 1:rounds] = m[:, 1:] ^ m[:, :-1]
    det[:, rounds] = final ^ m[:, -1]
    return SyndromeHistory(m, det, data_x, data_z)


def sample_run(code: XzzxCode, noise: NoiseBudget, shots: int, rng: np.random.Generator,
               rounds: int | None = None, circuit: list[Instruction] | None = None) -> SyndromeHistory:
    """Monte Carlo memory runs starting from a perfectly encoded logical state.

    ``rounds`` (default ``d``) noisy syndrome rounds are followed by one
    perfect stabilizer readout of the data frame.
    """
    rounds = code.distance if rounds is None else rounds
    circuit = circuit or build_round_circuit(code, noise)
    return _run(code, circuit, rounds, shots, lambda r, k, ins: _sample_faults(rng, ins, shots))


# ---------------------------------------------------------------------------
# decoder graph


@dataclass
class MatchingGraph:
    """pymatching graph plus the merged fault mechanisms it was built from."""

    matching: pymatching.Matching
    n_detectors: int
    mechanisms: list  # (detector tuple, observable flip, probability)
    sector: str
    dropped: int = 0

    def decode_batch(self, detectors: np.ndarray) -> np.ndarray:
        """Predicted logical flip per shot; ``detectors`` is ``(shots, n_detectors)``."""
        detectors = np.asarray(detectors, dtype=np.uint8)
        if detectors.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        width = self.matching.num_detectors
        if np.any(detectors[:, width:]):
            raise RuntimeError("detection event on a detector no fault can reach")
        out = self.matching.decode_batch(detectors[:, :width])
        if out.shape[1] == 0:
            # no mechanism touches the observable, so no correction can flip it
            return np.zeros(detectors.shape[0], dtype=bool)
        return out[:, 0].astype(bool)


def _enumerate_faults(circuit: list[Instruction], rounds: int):
    """One entry (round, layer, slot, code, probability) per elementary fault component."""
    entries = []
    for r in range(rounds):
        for k, ins in enumerate(circuit):
            if ins.p <= 0:
                continue
            if ins.op == "DEP1":
                codes, prob = range(1, 4), ins.p / 3
            elif ins.op == "DEP2":
                codes, prob = range(1, 16), ins.p / 15
            elif ins.op == "MX":
                codes, prob = (1,), ins.p
            else:
                continue
            for slot in range(len(ins.a)):
                for c in codes:
                    entries.append((r, k, slot, c, prob))
    return entries


def fault_signatures(code: XzzxCode, circuit: list[Instruction], rounds: int, sector: str = "horizontal"):
    """Detector and observable effect of every single fault component.

    Returns ``(detectors[n_faults, n_det], observable[n_faults], probability[n_faults])``.
    """
    entries = _enumerate_faults(circuit, rounds)
    shots = len(entries)
    by_layer: dict = {}
    for shot, (r, k, slot, c, _) in enumerate(entries):
        by_layer.setdefault((r, k), []).append((slot, shot, c))
    grouped = {key: _Faults(*(np.array(v) for v in zip(*items))) for key, items in by_layer.items()}
    hist = _run(code, circuit, rounds, shots, lambda r, k, ins: grouped.get((r, k)))
    obs = code.logical_flip(hist.data_x, hist.data_z, sector).astype(bool)
    probs = np.array([e[4] for e in entries])
    return hist.flat_detectors().astype(bool), obs, probs


def _xor_combine(ps) -> float:
    """Probability that an odd number of independent events fire."""
    return float(0.5 * (1 - np.prod([1 - 2 * p for p in ps])))


def detector_classes(code: XzzxCode, rounds: int) -> np.ndarray:
    """Checkerboard class (face parity) of every detector.

    A single-qubit X or Z error only ever flips faces of one parity, so the
    decoder graph splits into two independent sublattices.
    """
    parity = np.array([face_colour(st) for st in code.stabilizers], dtype=np.uint8)
    return np.tile(parity, rounds + 1)


def observable_class(code: XzzxCode, sector: str) -> int:
    """Face parity of the detectors flipped by errors that anticommute with the tracked logical."""
    lx, lz = code.logicals[sector]
    q = int(np.nonzero(lx | lz)[0][0])
    for pauli in ("X", "Z"):
        x = np.zeros(code.n_data, dtype=np.uint8)
        z = np.zeros(code.n_data, dtype=np.uint8)
        (x if pauli == "X" else z)[q] = 1
        if code.logical_flip(x, z, sector):
            s = int(np.nonzero(code.syndrome(x, z))[0][0])
            return face_colour(code.stabilizers[s])
    raise RuntimeError("logical operator has no anticommuting single-qubit error")


def _decompose(dets: tuple, known: dict, depth: int = 3):
    """Split a detector set into parts that are each an existing graphlike signature."""
    if dets in known:
        return [dets]
    if depth == 0:
        return None
    for part in known:
        if set(part) <= set(dets):
            rest = tuple(sorted(set(dets) - set(part)))
            if not rest:
                continue
            sub = _decompose(rest, known, depth - 1)
            if sub is not None:
                return [part] + sub
    return None


def build_matching_graph(code: XzzxCode, noise: NoiseBudget, rounds: int | None = None,
                         sector: str = "horizontal", uniform_weights: bool = False) -> MatchingGraph:
    """Decoder graph with edge weights ``log((1 - p) / p)`` from the merged fault mechanisms."""
    rounds = code.distance if rounds is None else rounds
    circuit = build_round_circuit(code, noise)
    n_det = (rounds + 1) * code.n_stabilizers
    dets, obs, probs = fault_signatures(code, circuit, rounds, sector)
    classes = detector_classes(code, rounds)
    return _graph_from_signatures(dets, obs, probs, n_det, sector, classes, observable_class(code, sector),
                                  uniform_weights)


def _graph_from_signatures(dets, obs, probs, n_det, sector, classes, obs_class, uniform_weights=False) -> MatchingGraph:
    # split every mechanism along the two sublattices; the logical flip rides on the observable one
    pieces: dict = {}
    for row, o, p in zip(dets, obs, probs):
        hit = np.nonzero(row)[0]
        if hit.size == 0:
            continue
        for cls in (0, 1):
            part = tuple(int(h) for h in hit if classes[h] == cls)
            if part:
                flip = bool(o) and cls == obs_class
                pieces.setdefault(part, {}).setdefault(flip, []).append(p)
    merged = {}
    for key, by_obs in pieces.items():
        # keep the dominant observable effect for this signature
        o, ps = max(by_obs.items(), key=lambda kv: _xor_combine(kv[1]))
        merged[key] = (o, _xor_combine(ps))
    graphlike = {k: v for k, v in merged.items() if len(k) <= 2}
    edges: dict = dict(graphlike)
    dropped = 0
    for key, (o, p) in merged.items():
        if len(key) <= 2:
            continue
        parts = _decompose(key, graphlike)
        if parts is None:
            dropped += 1
            continue
        for part in parts:
            po, pp = edges[part]
            edges[part] = (po, _xor_combine([pp, p]))
    matching = pymatching.Matching()
    mechanisms = []
    for key, (o, p) in edges.items():
        p = min(max(p, 1e-15), 0.5 - 1e-12)
        w = 1.0 if uniform_weights else float(np.log((1 - p) / p))
        fault_ids = {0} if o else set()
        if len(key) == 1:
            matching.add_boundary_edge(key[0], fault_ids=fault_ids, weight=w, error_probability=p,
                                       merge_strategy="smallest-weight")
        else:
            matching.add_edge(key[0], key[1], fault_ids=fault_ids, weight=w, error_probability=p,
                              merge_strategy="smallest-weight")
        mechanisms.append((key, o, p))
    return MatchingGraph(matching, n_det, mechanisms, sector, dropped)


def decode(history: SyndromeHistory, graph: MatchingGraph, code: XzzxCode) -> tuple[np.ndarray, np.ndarray]:
    """Predicted and actual logical flips per shot; a shot fails where they differ."""
    dets = history.flat_detectors()
    if dets.shape[1] != graph.n_detectors:
        raise ValueError("history and graph disagree on the number of detectors")
    predicted = graph.decode_batch(dets)
    actual = code.logical_flip(history.data_x, history.data_z, graph.sector).astype(bool)
    return predicted, actual


# ---------------------------------------------------------------------------
# code-capacity decoders used as cross-checks


def code_capacity_graph(code: XzzxCode, p: float = 0.01) -> tuple[pymatching.Matching, dict]:
    """Perfect-measurement graph for independent depolarizing data errors, tracking both logical sectors.

    Returns the matching object and a map from detector signature to the
    representative single-qubit Pauli ``(qubit, "X" | "Z")``.
    """
    n = code.n_data
    matching = pymatching.Matching()
    representative = {}
    for q in range(n):
        for pauli in ("X", "Z"):
            x = np.zeros(n, dtype=np.uint8)
            z = np.zeros(n, dtype=np.uint8)
            (x if pauli == "X" else z)[q] = 1
            s = tuple(np.nonzero(code.syndrome(x, z))[0].tolist())
            flips = {i for i, sec in enumerate(SECTORS) if code.logical_flip(x, z, sec)}
            w = float(np.log((1 - 2 * p / 3) / (2 * p / 3)))
            if len(s) == 1:
                matching.add_boundary_edge(s[0], fault_ids=flips, weight=w, merge_strategy="smallest-weight")
            elif len(s) == 2:
                matching.add_edge(s[0], s[1], fault_ids=flips, weight=w, merge_strategy="smallest-weight")
            else:
                raise RuntimeError("single-qubit X or Z must flip one or two stabilizers")
            representative.setdefault(s, (q, pauli))
    return matching, representative


def correction_frame(code: XzzxCode, matching: pymatching.Matching, representative: dict,
                     syndrome: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Data Pauli frame returned by matching a perfect syndrome."""
    n = code.n_data
    x = np.zeros(n, dtype=np.uint8)
    z = np.zeros(n, dtype=np.uint8)
    if not np.any(syndrome):
        return x, z
    for a, b in matching.decode_to_edges_array(np.asarray(syndrome, dtype=np.uint8)):
        key = (int(a),) if b < 0 else tuple(sorted((int(a), int(b))))
        if a < 0:
            key = (int(b),)
        q, pauli = representative[key]
        (x if pauli == "X" else z)[q] ^= 1
    return x, z


def coset_class(code: XzzxCode, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Two-bit logical class (flip of the horizontal and vertical logicals) for frames ``(..., n)``."""
    return np.stack([code.logical_flip(x, z, s) for s in SECTORS], axis=-1).astype(np.uint8)


class CosetDecoder:
    """Exhaustive maximum-likelihood decoder over logical cosets for small codes.

    Every Pauli on the data qubits is enumerated once; for each syndrome the
    total probability of each of the four logical classes is tabulated under
    independent depolarizing noise of strength ``p``.
    """

    def __init__(self, code: XzzxCode, p: float = 0.01, max_qubits: int = 9):
        n = code.n_data
        if n > max_qubits:
            raise ValueError("exhaustive enumeration is limited to small codes")
        self.code = code
        codes = np.arange(4 ** n)
        digits = (codes[:, None] // 4 ** np.arange(n)[None]) % 4  # 0=I, 1=X, 2=Z, 3=Y
        x = (digits & 1).astype(np.uint8)
        z = (digits >> 1 & 1).astype(np.uint8)
        weight = np.count_nonzero(digits, axis=1)
        logp = weight * np.log(p / 3) + (n - weight) * np.log(1 - p)
        synd = code.syndrome(x, z)
        key = synd @ (1 << np.arange(synd.shape[1]))
        cls = coset_class(code, x, z)
        cls_key = cls[:, 0] + 2 * cls[:, 1]
        self.table = np.zeros((2 ** code.n_stabilizers, 4))
        np.add.at(self.table, (key, cls_key), np.exp(logp))

    def decode(self, syndrome: np.ndarray) -> np.ndarray:
        """Most likely logical class (two bits) for a perfect syndrome."""
        key = int(np.asarray(syndrome, dtype=np.int64) @ (1 << np.arange(len(syndrome))))
        best = int(np.argmax(self.table[key]))
        return np.array([best & 1, best >> 1], dtype=np.uint8)


# ---------------------------------------------------------------------------
# logical error rate


@dataclass(frozen=True)
class LogicalErrorEstimate:
    distance: int
    shots: int
    failures: int
    rate: float
    ci_low: float
    ci_high: float
    sector: str = "horizontal"


@lru_cache(maxsize=8)
def _decoder_setup(d: int, noise: NoiseBudget, rounds: int, sector: str):
    code = build_code(d)
    circuit = build_round_circuit(code, noise)
    graph = build_matching_graph(code, noise, rounds, sector) if any(ins.p > 0 for ins in circuit) else None
    return code, circuit, graph


def _batch_failures(d: int, noise: NoiseBudget, rounds: int, sector: str, n: int, seed) -> int:
    code, circuit, graph = _decoder_setup(d, noise, rounds, sector)
    rng = np.random.default_rng(seed)
    hist = _run(code, circuit, rounds, n, lambda r, k, ins: _sample_faults(rng, ins, n))
    actual = code.logical_flip(hist.data_x, hist.data_z, sector).astype(bool)
    predicted = np.zeros(n, dtype=bool) if graph is None else graph.decode_batch(hist.flat_detectors())
    return int(np.count_nonzero(predicted != actual))


def logical_error_rate(d: int, noise: NoiseBudget, shots: int, rng_seed: int, sector: str = "horizontal",
                       batch: int = 50000, rounds: int | None = None, pmap=map) -> LogicalErrorEstimate:
    """Fraction of memory runs whose decoded logical observable is wrong, with a Wilson interval.

    Shots are split into batches with seeds spawned from ``rng_seed``; the
    batches may be evaluated by any ``map``-like ``pmap`` without changing
    the result.
    """
    if shots < 1000:
        raise ValueError("need at least 1000 shots")
    rounds = d if rounds is None else rounds
    sizes = [batch] * (shots // batch) + ([shots % batch] if shots % batch else [])
    seeds = np.random.SeedSequence(rng_seed).spawn(len(sizes))
    k = len(sizes)
    failures = sum(pmap(_batch_failures, [d] * k, [noise] * k, [rounds] * k, [sector] * k, sizes, seeds))
    lo, hi = wilson_interval(failures, shots)
    return LogicalErrorEstimate(d, shots, failures, failures / shots, lo, hi, sector)


def fit_suppression(distances, rates) -> tuple[float, float]:
    """Fit ``eps_L = C / Lambda^((d + 1) / 2)``; non-positive rates are excluded."""
    d = np.asarray(distances, dtype=float)
    r = np.asarray(rates, dtype=float)
    keep = r > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive rates")
    slope, intercept, _ = linear_fit((d[keep] + 1) / 2, np.log(r[keep]))
    return float(np.exp(-slope)), float(np.exp(intercept))


__all__ = [
    "CosetDecoder", "Instruction", "LogicalErrorEstimate", "MatchingGraph", "NoiseBudget", "SECTORS",
    "Stabilizer", "SyndromeHistory", "T1_COLUMNS", "XzzxCode", "build_code", "build_matching_graph",
    "build_round_circuit", "code_capacity_graph", "correction_frame", "coset_class", "decode", "face_colour",
    "fault_signatures", "fit_suppression", "logical_error_rate", "sample_run", "symplectic_product",
    "coherence_noise", "zero_noise",
]
