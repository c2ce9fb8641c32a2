"""Frequency-collision constraints, allocation and fabrication yield on a square lattice.

Frequencies are stored in GHz on the public types and handled in MHz
internally.  A constraint is satisfied when its *slack* is non-negative;
the slack is the distance (MHz) by which the relevant frequency
difference clears its threshold.

Two evaluation routes exist on purpose.  :func:`check_constraints` walks
the constraint rules pair by pair and is the reference.  The allocator
and the Monte Carlo use a compiled linear table (every constraint is a
linear form in the node frequencies and CZ drive offsets) so that many
samples can be scored at once; the tests assert that both routes agree.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .numerics import wilson_interval
from .qubit import FluxoniumParams, spectrum

GATE_TYPES = ("CR", "CZ")
ORIENTATIONS = ("checkerboard", "index")
GRID_STEP_MHZ = 1.0
LOCAL_STEPS_MHZ = (32.0, 16.0, 8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125)
SOFTMIN_TEMPERATURE_MHZ = 3.0
MC_CHUNK = 5000


class AllocationError(RuntimeError):
    """No allocation with non-negative margin was found within the restart budget."""

    def __init__(self, message: str, best: "Allocation"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class LatticeGraph:
    """Square lattice with directed edges ``(control, target)``.

    Nodes are numbered row-major.  With ``orientation="checkerboard"`` the
    nodes with even ``row + col`` drive their neighbors; on a periodic
    lattice of odd size the wrap-around edges join equal parities and fall
    back to the lower index as control.
    """

    rows: int
    cols: int
    periodic: bool = False
    orientation: str = "checkerboard"
    nodes: tuple = field(init=False, repr=False)
    edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("rows and cols must be non-negative")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        if self.periodic and (self.rows == 2 or self.cols == 2):
            raise ValueError("a periodic dimension of length 2 would double its edges")
        pairs = set()
        for r in range(self.rows):
            for c in range(self.cols):
                for dr, dc in ((0, 1), (1, 0)):
                    rr, cc = r + dr, c + dc
                    if self.periodic:
                        rr, cc = rr % self.rows, cc % self.cols
                    if rr >= self.rows or cc >= self.cols or (rr, cc) == (r, c):
                        continue
                    pairs.add(tuple(sorted((r * self.cols + c, rr * self.cols + cc))))
        edges = tuple(self._orient(a, b) for a, b in sorted(pairs))
        object.__setattr__(self, "nodes", tuple(range(self.rows * self.cols)))
        object.__setattr__(self, "edges", edges)

    def _orient(self, a: int, b: int) -> tuple[int, int]:
        if self.orientation == "checkerboard":
            pa, pb = sum(divmod(a, self.cols)) % 2, sum(divmod(b, self.cols)) % 2
            if pa != pb:
                return (a, b) if pa == 0 else (b, a)
        return (a, b)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, node: int) -> list[int]:
        out = [b for a, b in self.edges if a == node] + [a for a, b in self.edges if b == node]
        return sorted(set(out))

    def degree(self, node: int) -> int:
        return len(self.neighbors(node))


@dataclass(frozen=True)
class ConstraintSet:
    """Collision thresholds; band edges in GHz, separations in MHz."""

    freq_min: float = 0.2
    freq_max: float = 1.2
    addressability_min: float = 20.0
    two_photon_min: float = 10.0
    gate_detuning_min: float = 20.0
    gate_detuning_max: float = 1000.0
    cz_midpoint_exclusion: float = 10.0
    spectator_min: float = 20.0
    spectator_two_photon_min: float = 10.0
    gate_type: str = "CZ"

    def __post_init__(self):
        values = [self.freq_min, self.freq_max, self.addressability_min, self.two_photon_min,
                  self.gate_detuning_min, self.gate_detuning_max, self.cz_midpoint_exclusion,
                  self.spectator_min, self.spectator_two_photon_min]
        if min(values) <= 0:
            raise ValueError("all thresholds must be positive")
        if self.freq_min >= self.freq_max or self.gate_detuning_min >= self.gate_detuning_max:
            raise ValueError("lower bounds must be below upper bounds")
        if self.gate_type not in GATE_TYPES:
            raise ValueError(f"gate_type must be one of {GATE_TYPES}")


@dataclass
class Allocation:
    """Node frequencies and per-edge drive frequencies (GHz, aligned with ``graph.edges``)."""

    node_freqs: np.ndarray
    drive_freqs: np.ndarray
    margin: float = math.inf

    def drive_offsets_mhz(self, graph: LatticeGraph) -> np.ndarray:
        targets = np.array([b for _, b in graph.edges], dtype=int)
        if not len(targets):
            return np.zeros(0)
        return (np.asarray(self.drive_freqs) - np.asarray(self.node_freqs)[targets]) * 1e3


@dataclass(frozen=True)
class Violation:
    rule: str
    nodes: tuple
    value_mhz: float
    slack_mhz: float


@dataclass(frozen=True)
class YieldEstimate:
    samples: int
    passes: int
    fraction: float
    confidence_interval_95: tuple[float, float]
    sigma_f: float
    rng_seed: int


# ----------------------------------------------------------------------------
# reference evaluation


def _validated(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(alloc.node_freqs, dtype=float)
    if f.shape != (graph.n_nodes,) or not np.all(np.isfinite(f)):
        raise ValueError("every node needs a finite frequency")
    d = np.asarray(alloc.drive_freqs, dtype=float)
    if cs.gate_type == "CZ" and (d.shape != (len(graph.edges),) or not np.all(np.isfinite(d))):
        raise ValueError("every CZ edge needs a finite drive frequency")
    return f * 1e3, d * 1e3


def constraint_slacks(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet) -> list[Violation]:
    """Every constraint with its value and slack (MHz), violated or not."""
    f, d = _validated(alloc, graph, cs)
    out = []

    def need_at_least(rule, nodes, value, threshold):
        out.append(Violation(rule, nodes, float(value), float(value - threshold)))

    def need_at_most(rule, nodes, value, threshold):
        out.append(Violation(rule, nodes, float(value), float(threshold - value)))

    for i in graph.nodes:
        need_at_least("band_low", (i,), f[i], cs.freq_min * 1e3)
        need_at_most("band_high", (i,), f[i], cs.freq_max * 1e3)
    for e, (i, j) in enumerate(graph.edges):
        need_at_least("addressability", (i, j), abs(f[i] - f[j]), cs.addressability_min)
        need_at_least("two_photon", (i, j), abs(2 * f[i] - f[j]), cs.two_photon_min)
        need_at_least("two_photon", (j, i), abs(2 * f[j] - f[i]), cs.two_photon_min)
        need_at_least("gate_detuning_low", (i, j), abs(f[i] - f[j]), cs.gate_detuning_min)
        need_at_most("gate_detuning_high", (i, j), abs(f[i] - f[j]), cs.gate_detuning_max)
        drive = d[e] if cs.gate_type == "CZ" else f[j]
        if cs.gate_type == "CZ":
            need_at_least("cz_midpoint", (i, j), abs(drive - 0.5 * (f[i] + f[j])), cs.cz_midpoint_exclusion)
        spectators = (set(graph.neighbors(i)) | set(graph.neighbors(j))) - {i, j}
        for k in sorted(spectators):
            need_at_least("spectator", (i, j, k), abs(drive - f[k]), cs.spectator_min)
            need_at_least("spectator_two_photon", (i, j, k), abs(2 * drive - f[k]), cs.spectator_two_photon_min)
    return out


def check_constraints(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet) -> list[Violation]:
    """All violated constraints (negative slack)."""
    return [v for v in constraint_slacks(alloc, graph, cs) if v.slack_mhz < 0]


def audited_margin(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet) -> float:
    """Minimum slack over every constraint (``inf`` for an empty graph)."""
    slacks = [v.slack_mhz for v in constraint_slacks(alloc, graph, cs)]
    return min(slacks) if slacks else math.inf


# ----------------------------------------------------------------------------
# compiled linear table: variables are node frequencies then CZ drive offsets (MHz)


@dataclass
class _Table:
    coeffs: np.ndarray      # (rows, vars)
    threshold: np.ndarray   # (rows,)
    absolute: np.ndarray    # bool: constraint on |form|
    upper: np.ndarray       # bool: form (or |form|) must stay below threshold
    n_nodes: int

    def slacks(self, x: np.ndarray) -> np.ndarray:
        v = x @ self.coeffs.T
        v = np.where(self.absolute, np.abs(v), v)
        return np.where(self.upper, self.threshold - v, v - self.threshold)

    def rows_within(self, known: np.ndarray) -> np.ndarray:
        """Rows whose variables are all marked known."""
        return ~np.any((self.coeffs != 0) & ~known, axis=1)


def _compile(graph: LatticeGraph, cs: ConstraintSet) -> _Table:
    n = graph.n_nodes
    n_var = n + (len(graph.edges) if cs.gate_type == "CZ" else 0)
    rows, thr, absolute, upper = [], [], [], []

    def add(terms, threshold, is_abs, is_upper):
        row = np.zeros(n_var)
        for var, c in terms:
            row[var] += c
        rows.append(row)
        thr.append(threshold)
        absolute.append(is_abs)
        upper.append(is_upper)

    for i in graph.nodes:
        add([(i, 1)], cs.freq_min * 1e3, False, False)
        add([(i, 1)], cs.freq_max * 1e3, False, True)
    for e, (i, j) in enumerate(graph.edges):
        add([(i, 1), (j, -1)], cs.addressability_min, True, False)
        add([(i, 2), (j, -1)], cs.two_photon_min, True, False)
        add([(j, 2), (i, -1)], cs.two_photon_min, True, False)
        add([(i, 1), (j, -1)], cs.gate_detuning_min, True, False)
        add([(i, 1), (j, -1)], cs.gate_detuning_max, True, True)
        drive = [(j, 1)] + ([(n + e, 1)] if cs.gate_type == "CZ" else [])
        if cs.gate_type == "CZ":
            add(drive + [(i, -0.5), (j, -0.5)], cs.cz_midpoint_exclusion, True, False)
        for k in sorted((set(graph.neighbors(i)) | set(graph.neighbors(j))) - {i, j}):
            add(drive + [(k, -1)], cs.spectator_min, True, False)
            add([(v, 2 * c) for v, c in drive] + [(k, -1)], cs.spectator_two_photon_min, True, False)
    return _Table(np.array(rows).reshape(-1, n_var), np.array(thr), np.array(absolute, dtype=bool),
                  np.array(upper, dtype=bool), n)


def _to_vector(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet) -> np.ndarray:
    x = np.asarray(alloc.node_freqs, dtype=float) * 1e3
    if cs.gate_type == "CZ":
        x = np.concatenate([x, alloc.drive_offsets_mhz(graph)])
    return x


def _from_vector(x: np.ndarray, graph: LatticeGraph, cs: ConstraintSet) -> Allocation:
    n = graph.n_nodes
    f = x[:n] / 1e3
    targets = np.array([b for _, b in graph.edges], dtype=int)
    if cs.gate_type == "CZ":
        drives = f[targets] + x[n:] / 1e3
    else:
        drives = f[targets] if len(targets) else np.zeros(0)
    return Allocation(f.copy(), np.asarray(drives, dtype=float))


# ----------------------------------------------------------------------------
# allocation


def _bfs_order(graph: LatticeGraph, rng: np.random.Generator) -> list[int]:
    start = int(rng.integers(graph.n_nodes))
    seen, order, queue = {start}, [], deque([start])
    while queue:
        node = queue.popleft()
        order.append(node)
        nbrs = graph.neighbors(node)
        rng.shuffle(nbrs)
        for k in nbrs:
            if k not in seen:
                seen.add(k)
                queue.append(k)
    order += [k for k in graph.nodes if k not in seen]
    return order


def _greedy(table: _Table, graph: LatticeGraph, cs: ConstraintSet, rng: np.random.Generator,
            offset_range: tuple[float, float]) -> np.ndarray:
    n_var = table.coeffs.shape[1]
    x = np.zeros(n_var)
    known = np.zeros(n_var, dtype=bool)
    node_grid = np.arange(cs.freq_min * 1e3, cs.freq_max * 1e3 + 0.5 * GRID_STEP_MHZ, GRID_STEP_MHZ)
    offset_grid = np.arange(offset_range[0], offset_range[1] + 0.5 * GRID_STEP_MHZ, GRID_STEP_MHZ)
    order = _bfs_order(graph, rng) + list(range(table.n_nodes, n_var))
    for var in order:
        grid = node_grid if var < table.n_nodes else offset_grid
        known[var] = True
        rows = table.rows_within(known) & (table.coeffs[:, var] != 0)
        trial = np.repeat(x[np.newaxis, :], len(grid), axis=0)
        trial[:, var] = grid
        sub = _Table(table.coeffs[rows], table.threshold[rows], table.absolute[rows], table.upper[rows],
                     table.n_nodes)
        score = sub.slacks(trial).min(axis=1) if rows.any() else np.zeros(len(grid))
        best = np.flatnonzero(score >= score.max() - 1e-9)
        x[var] = grid[int(rng.choice(best))]
    return x


def _softmin(table: _Table, x: np.ndarray) -> float:
    s = table.slacks(x)
    return float(-SOFTMIN_TEMPERATURE_MHZ * logsumexp(-s / SOFTMIN_TEMPERATURE_MHZ))


def _local_search(table: _Table, x: np.ndarray, max_sweeps: int = 50) -> np.ndarray:
    """Coordinate ascent on a soft minimum of the slacks with shrinking steps."""
    x = x.copy()
    best = _softmin(table, x)
    for step in LOCAL_STEPS_MHZ:
        for _ in range(max_sweeps):
            improved = False
            for var in range(len(x)):
                for move in (step, -step):
                    x[var] += move
                    value = _softmin(table, x)
                    if value > best + 1e-12:
                        best, improved = value, True
                        break
                    x[var] -= move
            if not improved:
                break
    return x


def allocate(graph: LatticeGraph, cs: ConstraintSet, rng_seed: int = 0, restarts: int = 12,
             polish: int = 3, offset_range: tuple[float, float] = (-300.0, 300.0)) -> Allocation:
    """Max-margin frequencies from randomized greedy restarts plus local search.

    Greedy places nodes in random breadth-first order on a 1 MHz grid, each
    at the grid point maximizing the worst slack of the constraints already
    determined; CZ drive offsets (relative to the edge's target qubit,
    limited to ``offset_range`` MHz) are placed afterwards the same way.
    The ``polish`` best greedy solutions are refined by continuous
    coordinate search and the best audited margin wins.
    """
    if graph.n_nodes == 0:
        return Allocation(np.zeros(0), np.zeros(0), math.inf)
    table = _compile(graph, cs)
    rng = np.random.default_rng(rng_seed)
    starts = [_greedy(table, graph, cs, rng, offset_range) for _ in range(restarts)]
    starts.sort(key=lambda v: -table.slacks(v).min())
    best, best_margin = None, -math.inf
    for x in starts[:max(polish, 1)]:
        x = _local_search(table, x)
        alloc = _from_vector(x, graph, cs)
        margin = audited_margin(alloc, graph, cs)
        if margin > best_margin:
            best, best_margin = alloc, margin
    best.margin = best_margin
    if best_margin < 0:
        raise AllocationError(f"no feasible allocation found; best margin {best_margin:.2f} MHz", best)
    return best


# ----------------------------------------------------------------------------
# yield


def _count_passes(table: _Table, center: np.ndarray, sigma_mhz: float, n: int, seed) -> int:
    rng = np.random.default_rng(seed)
    x = np.repeat(center[np.newaxis, :], n, axis=0)
    x[:, :table.n_nodes] += rng.normal(0.0, sigma_mhz, size=(n, table.n_nodes))
    return int(np.count_nonzero(np.all(table.slacks(x) >= 0, axis=1)))


def yield_mc(alloc: Allocation, graph: LatticeGraph, cs: ConstraintSet, sigma_f: float,
             samples: int = 10000, rng_seed: int = 0, pmap=map) -> YieldEstimate:
    """Fraction of fabricated chips with no collision under Gaussian frequency dispersion.

    Every qubit frequency receives independent ``N(0, sigma_f^2)`` noise
    (``sigma_f`` in MHz).  CZ drives keep their designed offset from the
    edge's target qubit.  Samples are split into fixed chunks with spawned
    seeds, so the estimate does not depend on how ``pmap`` (any
    ``map``-like callable, such as a process pool's) schedules them.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    if sigma_f < 0:
        raise ValueError("sigma_f must be non-negative")
    if audited_margin(alloc, graph, cs) < 0:
        raise ValueError("allocation violates the constraints at zero dispersion")
    table = _compile(graph, cs)
    center = _to_vector(alloc, graph, cs)
    sizes = [MC_CHUNK] * (samples // MC_CHUNK) + ([samples % MC_CHUNK] if samples % MC_CHUNK else [])
    seeds = np.random.SeedSequence(rng_seed).spawn(len(sizes))
    n = len(sizes)
    passes = sum(pmap(_count_passes, [table] * n, [center] * n, [float(sigma_f)] * n, sizes, seeds))
    return YieldEstimate(samples, passes, passes / samples, wilson_interval(passes, samples), float(sigma_f),
                         rng_seed)


def tile_yield(y_cell: float, n_device: int, n_cell: int) -> float:
    """Yield of a device tiled from identical cells: ``y_cell ** (n_device / n_cell)``."""
    if not 0 <= y_cell <= 1:
        raise ValueError("y_cell must lie in [0, 1]")
    if n_device <= 0 or n_cell <= 0:
        raise ValueError("qubit counts must be positive")
    return float(y_cell ** (n_device / n_cell))


def dispersion_model(params: FluxoniumParams, delta_ej_rel: float, delta_el_rel: float) -> float:
    """Shift (MHz) of the 0-1 frequency under relative changes of E_J and E_L."""
    if abs(delta_ej_rel) > 0.1 or abs(delta_el_rel) > 0.1:
        raise ValueError("relative perturbations must not exceed 10%")
    nominal = spectrum(params).transition(0, 1)
    shifted = spectrum(params.scaled(e_j=1 + delta_ej_rel, e_l=1 + delta_el_rel)).transition(0, 1)
    return float((shifted - nominal) * 1e3)


__all__ = [
    "Allocation", "AllocationError", "ConstraintSet", "LatticeGraph", "Violation", "YieldEstimate",
    "allocate", "audited_margin", "check_constraints", "constraint_slacks", "dispersion_model", "tile_yield",
    "yield_mc",
]
