"""Pulse envelopes and lab-frame propagation of driven multilevel systems.

Frequencies are in GHz and times in ns; the propagator multiplies the
Hamiltonian by 2 pi internally.  A drive couples through an unnormalized
charge or phase operator,

    H(t) = sum_k E_k |k><k| + sum_drives E(t) O,
    E(t) = E_I(t) cos(w_d t + phase) + E_Q(t) sin(w_d t + phase),

with no rotating-wave approximation.  When every drive has a constant
plateau at a common carrier frequency, the plateau is propagated with the
one-period propagator raised to the required power, which is exact up to
integrator tolerance and much cheaper than integrating the whole plateau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import polar

from .numerics import ODE_ATOL, ODE_RTOL, evolve_driven
from .qubit import EigenSystem

TWO_PI = 2 * np.pi
CHANNEL_OPERATORS = {"charge": "charge", "flux": "phase"}
MIN_LEVELS = 3


@dataclass(frozen=True)
class PulseEnvelope:
    """Envelope of one microwave tone.

    ``epsilon_d`` (MHz) is the peak in-phase amplitude.  ``shape`` is
    ``"cosine"`` (a single raised-cosine bump over ``tau_g``) or
    ``"flat_top_cosine"`` (raised-cosine ramps of length ``tau_ramp`` around a
    plateau).  The DRAG quadrature is ``E_Q = drag_lambda * dE_I/dt`` so
    ``drag_lambda`` is measured in ns.  ``detuning_delta`` (MHz) shifts the
    carrier of the drive that uses this envelope.
    """

    epsilon_d: float
    tau_g: float
    shape: str = "cosine"
    tau_ramp: float = 0.0
    drag_lambda: float = 0.0
    detuning_delta: float = 0.0

    def __post_init__(self):
        if self.tau_g <= 0:
            raise ValueError("tau_g must be positive")
        if self.shape not in ("cosine", "flat_top_cosine"):
            raise ValueError(f"unknown envelope shape {self.shape!r}")
        if self.shape == "flat_top_cosine" and not 0 <= 2 * self.tau_ramp <= self.tau_g * (1 + 1e-12):
            raise ValueError("flat-top envelope needs 0 <= 2 tau_ramp <= tau_g")

    @property
    def amplitude_ghz(self) -> float:
        return self.epsilon_d * 1e-3

    @property
    def plateau(self) -> tuple[float, float] | None:
        """Start and stop of the constant-amplitude segment, if any."""
        if self.shape != "flat_top_cosine" or 2 * self.tau_ramp >= self.tau_g:
            return None
        return self.tau_ramp, self.tau_g - self.tau_ramp

    def scalar_functions(self):
        """Plain-float ``(E_I(t), E_Q(t))`` evaluator in GHz, for integrator callbacks."""
        eps, tau, lam = self.amplitude_ghz, self.tau_g, self.drag_lambda
        if self.shape == "cosine":
            w = TWO_PI / tau

            def values(t):
                if t <= 0.0 or t >= tau:
                    return 0.0, 0.0
                return 0.5 * eps * (1 - math.cos(w * t)), lam * 0.5 * eps * w * math.sin(w * t)
            return values

        ramp = self.tau_ramp
        w = math.pi / ramp if ramp > 0 else 0.0

        def values(t):
            if t <= 0.0 or t >= tau:
                return 0.0, 0.0
            if t < ramp:
                return 0.5 * eps * (1 - math.cos(w * t)), lam * 0.5 * eps * w * math.sin(w * t)
            if t > tau - ramp:
                s = tau - t
                return 0.5 * eps * (1 - math.cos(w * s)), -lam * 0.5 * eps * w * math.sin(w * s)
            return eps, 0.0
        return values

    def in_phase(self, t) -> np.ndarray:
        """E_I(t) in GHz (vectorized)."""
        f = self.scalar_functions()
        return np.vectorize(lambda s: f(s)[0], otypes=[float])(t)

    def quadrature(self, t) -> np.ndarray:
        """E_Q(t) = drag_lambda * dE_I/dt in GHz (vectorized)."""
        f = self.scalar_functions()
        return np.vectorize(lambda s: f(s)[1], otypes=[float])(t)

    def area(self) -> float:
        """Integral of E_I over the pulse (GHz ns)."""
        if self.shape == "cosine":
            return 0.5 * self.amplitude_ghz * self.tau_g
        return self.amplitude_ghz * (self.tau_g - self.tau_ramp)


@dataclass(frozen=True)
class DriveSpec:
    """One microwave drive: carrier ``omega_d`` in GHz (ordinary frequency)."""

    channel: str
    omega_d: float
    envelope: PulseEnvelope
    phase: float = 0.0
    target_qubit: int = 0

    def __post_init__(self):
        if self.channel not in CHANNEL_OPERATORS:
            raise ValueError(f"channel must be one of {sorted(CHANNEL_OPERATORS)}")
        if self.omega_d <= 0:
            raise ValueError("omega_d must be positive")

    @property
    def carrier(self) -> float:
        """Carrier frequency in GHz including the envelope detuning."""
        return self.omega_d + self.envelope.detuning_delta * 1e-3

    def coefficient_function(self):
        """Plain-float E(t) in GHz."""
        env = self.envelope.scalar_functions()
        w, ph = TWO_PI * self.carrier, self.phase

        def value(t):
            e_i, e_q = env(t)
            if e_i == 0.0 and e_q == 0.0:
                return 0.0
            arg = w * t + ph
            return e_i * math.cos(arg) + e_q * math.sin(arg)
        return value


@dataclass(frozen=True)
class DrivenSystem:
    """Static Hamiltonian (diagonal, GHz) plus the operators drives can couple to.

    ``operators`` maps ``(channel, qubit)`` to a matrix in the same basis as
    ``energies``; ``computational`` lists the basis indices of the
    computational states in the order used for gate matrices.  ``rtol`` and
    ``atol`` are the integrator tolerances used for this system.
    """

    energies: np.ndarray
    operators: dict = field(repr=False)
    computational: tuple
    rtol: float = ODE_RTOL
    atol: float = ODE_ATOL

    def __post_init__(self):
        if self.dimension < MIN_LEVELS:
            raise ValueError("need at least three levels so leakage is measurable")

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def operator(self, channel: str, qubit: int = 0) -> np.ndarray:
        key = (channel, qubit)
        if key not in self.operators:
            raise KeyError(f"no {channel} operator for qubit {qubit}")
        return self.operators[key]

    @classmethod
    def from_eigensystem(cls, eigsys: EigenSystem, levels: int = 6) -> "DrivenSystem":
        if levels < MIN_LEVELS:
            raise ValueError("truncation below three levels leaves leakage unmeasurable")
        if levels > eigsys.level_count:
            raise ValueError(f"only {eigsys.level_count} levels available")
        e = eigsys.truncated(levels)
        ops = {(ch, 0): e.operator(name) for ch, name in CHANNEL_OPERATORS.items()}
        return cls(np.asarray(e.energies, dtype=float), ops, (0, 1))


def assemble_drive_hamiltonian(system: DrivenSystem, drives: list[DriveSpec]):
    """Return ``H(t)`` (GHz) as a callable producing a dense matrix."""
    static = np.diag(system.energies).astype(complex)
    terms = [(d.coefficient_function(), system.operator(d.channel, d.target_qubit)) for d in drives]

    def hamiltonian(t: float) -> np.ndarray:
        h = static.copy()
        for coeff, op in terms:
            c = coeff(float(t))
            if c:
                h = h + c * op
        return h
    return hamiltonian


def _integrate(system: DrivenSystem, drives: list[DriveSpec], psi: np.ndarray, t0: float, t1: float) -> np.ndarray:
    if t1 <= t0:
        return psi
    # Silent drives are dropped: with no drive the free phase is exact, and
    # the adaptive integrator would otherwise take steps long enough to lose
    # norm on the fast-rotating levels.
    drives = [d for d in drives if d.envelope.epsilon_d != 0]
    coeffs = [d.coefficient_function() for d in drives]
    ops = [TWO_PI * system.operator(d.channel, d.target_qubit) for d in drives]
    if not ops:
        phase = np.exp(-1j * TWO_PI * system.energies * (t1 - t0))
        return phase[:, None] * psi if psi.ndim == 2 else phase * psi

    def coefficients(t):
        return [f(t) for f in coeffs]

    states = evolve_driven(TWO_PI * system.energies, ops, coefficients, psi, [t0, t1],
                           rtol=system.rtol, atol=system.atol)
    return states[-1]


def common_plateau(drives: list[DriveSpec]) -> tuple[float, float, float] | None:
    """``(start, stop, period)`` when every drive is constant over one window at one carrier."""
    if not drives:
        return None
    windows = {d.envelope.plateau for d in drives}
    carriers = {round(d.carrier, 15) for d in drives}
    if len(windows) != 1 or None in windows or len(carriers) != 1:
        return None
    start, stop = windows.pop()
    return start, stop, 1.0 / drives[0].carrier


def period_propagator(system: DrivenSystem, drives: list[DriveSpec], t0: float, period: float) -> np.ndarray:
    """Full propagator over one carrier period starting at ``t0``.

    The integrated matrix is replaced by its unitary polar factor so that
    integrator error does not compound in norm when it is raised to a power.
    """
    u = _integrate(system, drives, np.eye(system.dimension, dtype=complex), t0, t0 + period)
    return polar(u)[0]


def propagate(
    system: DrivenSystem,
    drives: list[DriveSpec],
    t_end: float,
    inputs: np.ndarray | None = None,
    use_floquet: bool = True,
) -> np.ndarray:
    """Propagate input columns (default: computational basis states) from 0 to ``t_end``."""
    if inputs is None:
        inputs = np.eye(system.dimension, dtype=complex)[:, list(system.computational)]
    psi = np.asarray(inputs, dtype=complex)
    window = common_plateau(drives) if use_floquet else None
    if window is not None:
        start, stop, period = window
        stop = min(stop, t_end)
        cycles = int((stop - start) // period)
        if cycles >= 2:
            psi = _integrate(system, drives, psi, 0.0, start)
            u_period = period_propagator(system, drives, start, period)
            psi = np.linalg.matrix_power(u_period, cycles) @ psi
            return _integrate(system, drives, psi, start + cycles * period, t_end)
    return _integrate(system, drives, psi, 0.0, t_end)


def propagate_basis(system: DrivenSystem, drives: list[DriveSpec], t_end: float, **kwargs) -> np.ndarray:
    """Final states (columns) for every computational basis input."""
    return propagate(system, drives, t_end, **kwargs)


def stroboscopic_states(
    system: DrivenSystem,
    drives: list[DriveSpec],
    inputs: np.ndarray,
    t_start: float,
    cycles: int,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """States at ``t_start + k * stride * period`` for ``k = 0..cycles`` inside a common plateau.

    Returns ``(times, states)`` with states shaped ``(cycles + 1, dim, n_inputs)``.
    """
    window = common_plateau(drives)
    if window is None:
        raise ValueError("drives do not share a constant plateau at one carrier")
    start, stop, period = window
    if t_start < start - 1e-9 or t_start + cycles * stride * period > stop + 1e-9:
        raise ValueError("requested samples leave the plateau window")
    psi = propagate(system, drives, t_start, inputs)
    step = np.linalg.matrix_power(period_propagator(system, drives, t_start, period), stride)
    out = [psi]
    for _ in range(cycles):
        psi = step @ psi
        out.append(psi)
    times = t_start + stride * period * np.arange(cycles + 1)
    return times, np.array(out)


def rotating_frame(system: DrivenSystem, states: np.ndarray, t: float, indices=None) -> np.ndarray:
    """Undo the free phase ``exp(-2 pi i E_k t)`` on the selected rows."""
    indices = list(system.computational if indices is None else indices)
    phase = np.exp(1j * TWO_PI * system.energies[indices] * t)
    return phase[:, None] * states[indices]


def remove_global_phase(u: np.ndarray) -> np.ndarray:
    """Rotate ``u`` so its (0, 0) element (or largest element if tiny) is real positive."""
    pivot = u[0, 0]
    if abs(pivot) < 1e-6:
        pivot = u.flat[np.argmax(np.abs(u))]
    if abs(pivot) == 0:
        return u
    return u * (abs(pivot) / pivot)


def leakage(system: DrivenSystem, final_states: np.ndarray) -> float:
    """One minus the computational population, averaged over the input columns."""
    comp = np.abs(final_states[list(system.computational)]) ** 2
    value = 1.0 - float(np.mean(comp.sum(axis=0)))
    return min(max(value, 0.0), 1.0)


def extract_computational_unitary(system: DrivenSystem, final_states: np.ndarray, t: float) -> tuple[np.ndarray, float]:
    """Computational block in the frame rotating with the static energies, and leakage."""
    u = rotating_frame(system, final_states, t)
    return remove_global_phase(u), leakage(system, final_states)


def average_gate_fidelity(u: np.ndarray, ideal: np.ndarray) -> float:
    """``[Tr(U^dag U) + |Tr(U^dag U_ideal)|^2] / (d (d + 1))`` for a possibly non-unitary ``U``."""
    d = u.shape[0]
    overlap = np.trace(u.conj().T @ ideal)
    return float((np.trace(u.conj().T @ u).real + abs(overlap) ** 2) / (d * (d + 1)))


@dataclass
class GateResult:
    """Outcome of a simulated or calibrated gate."""

    u_comp: np.ndarray
    leakage: float
    fidelity: float
    raw_fidelity: float | None = None
    parameters: dict = field(default_factory=dict)
    optimizer_trace: list = field(default_factory=list)
    converged: bool = True

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity

    @property
    def raw_error(self) -> float | None:
        return None if self.raw_fidelity is None else 1.0 - self.raw_fidelity


__all__ = [
    "DriveSpec", "DrivenSystem", "GateResult", "PulseEnvelope", "assemble_drive_hamiltonian",
    "average_gate_fidelity", "common_plateau", "extract_computational_unitary", "leakage",
    "period_propagator", "propagate", "propagate_basis", "remove_global_phase",
    "rotating_frame", "stroboscopic_states",
]
