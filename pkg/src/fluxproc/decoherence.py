"""Relaxation budgets, thermal-photon dephasing and decoherence-limited fidelity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import constants as sc

from .numerics import evolve_lindblad
from .qubit import EigenSystem

T1_SENTINEL = 1e6  # seconds; reported when a channel does not couple
REFERENCE_FREQ_GHZ = 5.0


@dataclass(frozen=True)
class NoiseEnvironment:
    """Loss parameters of the qubit environment.

    ``delta_Al`` is the aluminium gap expressed as a frequency in GHz.
    ``diel_freq_exponent`` lets the dielectric quality factor scale as
    ``(f / 5 GHz) ** exponent``; zero keeps it frequency independent.
    """

    tan_delta_diel: float = 2e-7
    x_qp: float = 5e-9
    delta_Al: float = 0.182e-3 * sc.e / sc.h / 1e9
    temperature_qubit: float = 0.020
    temperature_resonator: float = 0.050
    diel_freq_exponent: float = 0.0

    def __post_init__(self):
        if min(self.tan_delta_diel, self.delta_Al) <= 0:
            raise ValueError("loss tangent and gap must be positive")
        if min(self.x_qp, self.temperature_qubit, self.temperature_resonator) < 0:
            raise ValueError("densities and temperatures must be non-negative")

    def quality_factor(self, freq_ghz: float) -> float:
        return (freq_ghz / REFERENCE_FREQ_GHZ) ** self.diel_freq_exponent / self.tan_delta_diel


@dataclass(frozen=True)
class CoherenceRates:
    """Relaxation and pure-dephasing rates in 1/s."""

    gamma_1: float
    gamma_phi: float = 0.0

    def __post_init__(self):
        if self.gamma_1 < 0 or self.gamma_phi < 0:
            raise ValueError("rates must be non-negative")

    @classmethod
    def from_times(cls, t1: float, t2: float | None = None) -> "CoherenceRates":
        """Rates from T1 and T2 (T2 defaults to the relaxation limit 2 T1)."""
        t2 = 2 * t1 if t2 is None else t2
        return cls(1 / t1, max(1 / t2 - 0.5 / t1, 0.0))

    @property
    def t2(self) -> float:
        return 1 / (self.gamma_1 / 2 + self.gamma_phi)


def _coth(x: float) -> float:
    return np.inf if x == 0 else 1 / np.tanh(x)


def _thermal_ratio(freq_ghz: float, temperature: float) -> float:
    """hbar omega / (k_B T); infinite at zero temperature."""
    if temperature == 0:
        return np.inf
    return sc.h * freq_ghz * 1e9 / (sc.k * temperature)


def _rate_to_t1(rate: float) -> float:
    return T1_SENTINEL if rate <= 0 else min(1 / rate, T1_SENTINEL)


def dielectric_rate(freq_ghz: float, phi01: float, e_c_ghz: float, env: NoiseEnvironment) -> float:
    """Capacitive-loss relaxation rate (1/s) for a transition of given phase element."""
    omega = 2 * np.pi * freq_ghz * 1e9
    e_c = sc.h * e_c_ghz * 1e9
    q = env.quality_factor(freq_ghz)
    thermal = 1.0 + _coth(_thermal_ratio(freq_ghz, env.temperature_qubit) / 2)
    return sc.hbar * omega**2 / (4 * e_c * q) * abs(phi01) ** 2 * thermal


def quasiparticle_rate(freq_ghz: float, phi01: float, e_l_ghz: float, env: NoiseEnvironment) -> float:
    """Relaxation rate (1/s) from quasiparticles tunnelling across the inductor array."""
    omega = 2 * np.pi * freq_ghz * 1e9
    e_l = sc.h * e_l_ghz * 1e9
    gap = sc.h * env.delta_Al * 1e9
    base = abs(phi01 / 2) ** 2 * 8 * e_l / (np.pi * sc.hbar) * env.x_qp * np.sqrt(2 * gap / (sc.hbar * omega))
    return base * _coth(_thermal_ratio(freq_ghz, env.temperature_qubit) / 2)


def t1_dielectric(eigsys: EigenSystem, env: NoiseEnvironment | None = None) -> float:
    env = env or NoiseEnvironment()
    if eigsys.level_count < 2:
        raise ValueError("need at least two levels")
    rate = dielectric_rate(eigsys.transition(0, 1), eigsys.phi_elements[0, 1], eigsys.params.E_C, env)
    return _rate_to_t1(rate)


def t1_quasiparticle(eigsys: EigenSystem, env: NoiseEnvironment | None = None) -> float:
    env = env or NoiseEnvironment()
    if eigsys.level_count < 2:
        raise ValueError("need at least two levels")
    rate = quasiparticle_rate(eigsys.transition(0, 1), eigsys.phi_elements[0, 1], eigsys.params.E_L, env)
    return _rate_to_t1(rate)


def combine_t1(*t1s: float) -> float:
    """Harmonic sum of independent channel lifetimes; sentinels count as no decay."""
    rate = sum(0.0 if t >= T1_SENTINEL else 1 / t for t in t1s)
    return _rate_to_t1(rate)


def t1_total(eigsys: EigenSystem, env: NoiseEnvironment | None = None) -> float:
    return combine_t1(t1_dielectric(eigsys, env), t1_quasiparticle(eigsys, env))


def t1_quality_limit(quality: float, freq_ghz: float) -> float:
    """Relaxation time Q / omega of a lossy mode with quality factor ``quality``."""
    return quality / (2 * np.pi * freq_ghz * 1e9)


def thermal_photons(freq_ghz: float, temperature: float) -> float:
    x = _thermal_ratio(freq_ghz, temperature)
    return 0.0 if np.isinf(x) else 1 / np.expm1(x)


def thermal_dephasing(chi01_mhz: float, kappa_mhz: float, omega_r_ghz: float, t_res: float) -> float:
    """Dephasing rate (1/s) from thermal photons in the readout resonator.

    ``chi01_mhz`` and ``kappa_mhz`` are ordinary frequencies; they are
    converted to angular rates internally.
    """
    if kappa_mhz <= 0:
        raise ValueError("kappa must be positive")
    n_th = thermal_photons(omega_r_ghz, t_res)
    if chi01_mhz == 0 or n_th == 0:
        return 0.0
    kappa = 2 * np.pi * kappa_mhz * 1e6
    chi = 2 * np.pi * chi01_mhz * 1e6
    root = np.sqrt((1 + 1j * chi / kappa) ** 2 + 4j * chi * n_th / kappa)
    return float(kappa / 2 * (root - 1).real)


def _per_qubit(rates: CoherenceRates | Sequence[CoherenceRates], qubit_count: int) -> list[CoherenceRates]:
    if isinstance(rates, CoherenceRates):
        return [rates] * qubit_count
    rates = list(rates)
    if len(rates) != qubit_count:
        raise ValueError("need one CoherenceRates entry per qubit")
    return rates


def process_to_gate_fidelity(f_process: float, qubit_count: int) -> float:
    dim = 2**qubit_count
    return (dim * f_process + 1) / (dim + 1)


def decoherence_fidelity(qubit_count: int, rates: CoherenceRates | Sequence[CoherenceRates], tau: float) -> float:
    """Average gate fidelity of an identity gate of length ``tau`` under T1/Tphi.

    The process fidelity is the normalized trace of the Pauli transfer
    matrix, which factorizes over qubits.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    f_process = 1.0
    for r in _per_qubit(rates, qubit_count):
        f_process *= (1 + np.exp(-r.gamma_1 * tau) + 2 * np.exp(-(r.gamma_1 / 2 + r.gamma_phi) * tau)) / 4
    return float(process_to_gate_fidelity(f_process, qubit_count))


_PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
_INPUT_STATES = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1]) / np.sqrt(2), np.array([1, 1j]) / np.sqrt(2)]


def _kron_all(ops):
    return reduce(np.kron, ops)


def _embed(op: np.ndarray, site: int, qubit_count: int) -> np.ndarray:
    return _kron_all([op if k == site else np.eye(2) for k in range(qubit_count)])


class UnphysicalChannelError(RuntimeError):
    pass


def pauli_transfer_matrix(outputs: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Reconstruct the PTM from input/output density matrices by linear inversion."""
    qubit_count = int(np.log2(inputs.shape[1]))
    dim = 2**qubit_count
    paulis = [_kron_all(p) for p in itertools.product(_PAULIS, repeat=qubit_count)]
    vec = lambda rho: np.array([np.trace(p @ rho).real for p in paulis])  # noqa: E731
    a_in = np.array([vec(r) for r in inputs]).T / np.sqrt(dim)
    a_out = np.array([vec(r) for r in outputs]).T / np.sqrt(dim)
    return a_out @ np.linalg.inv(a_in)


def _choi_from_ptm(ptm: np.ndarray, qubit_count: int) -> np.ndarray:
    dim = 2**qubit_count
    paulis = [_kron_all(p) for p in itertools.product(_PAULIS, repeat=qubit_count)]
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i, pi in enumerate(paulis):
        for j, pj in enumerate(paulis):
            if abs(ptm[i, j]) > 0:
                choi += ptm[i, j] * np.kron(pj.T, pi)
    return choi / dim**2


def decoherence_fidelity_lindblad(
    qubit_count: int,
    rates: CoherenceRates | Sequence[CoherenceRates],
    tau: float,
    hamiltonian: np.ndarray | None = None,
) -> float:
    """Gate fidelity from simulated process tomography under the Lindblad equation.

    Each of the ``4**N`` product input states is propagated, the PTM is
    reconstructed by linear inversion and compared with the ideal PTM of
    ``exp(-i H tau)`` (identity when no Hamiltonian is given).  Rates are in
    1/s and ``tau`` in seconds; ``hamiltonian`` is in rad/s.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    rates = _per_qubit(rates, qubit_count)
    dim = 2**qubit_count
    h = np.zeros((dim, dim), dtype=complex) if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    cops = []
    for k, r in enumerate(rates):
        if r.gamma_1 > 0:
            cops.append(np.sqrt(r.gamma_1) * _embed(lower, k, qubit_count))
        if r.gamma_phi > 0:
            cops.append(np.sqrt(r.gamma_phi / 2) * _embed(_PAULIS[3], k, qubit_count))
    inputs, outputs = [], []
    for combo in itertools.product(_INPUT_STATES, repeat=qubit_count):
        psi = _kron_all(combo)
        rho0 = np.outer(psi, psi.conj())
        inputs.append(rho0)
        if tau == 0:
            outputs.append(rho0)
        else:
            outputs.append(evolve_lindblad(h, cops, rho0, [0.0, tau])[-1])
    inputs, outputs = np.array(inputs), np.array(outputs)
    ptm = pauli_transfer_matrix(outputs, inputs)
    choi_eigs = np.linalg.eigvalsh(_choi_from_ptm(ptm, qubit_count))
    if choi_eigs.min() < -1e-8:
        raise UnphysicalChannelError(f"reconstructed channel is not completely positive: eigenvalues {choi_eigs}")
    u = _expm_hermitian(h, tau)
    ideal_outputs = np.array([u @ r @ u.conj().T for r in inputs])
    ptm_ideal = pauli_transfer_matrix(ideal_outputs, inputs)
    f_process = np.trace(ptm_ideal.T @ ptm) / dim**2
    return process_to_gate_fidelity(float(f_process.real), qubit_count)


def _expm_hermitian(h: np.ndarray, tau: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * vals * tau)) @ vecs.conj().T


# Table of per-operation durations used to build the Pauli error budget.
OPERATION_DURATIONS = {
    "cz": (2, 200e-9),
    "single_qubit": (1, 10e-9),
    "idle_2q": (1, 200e-9),
    "idle_1q": (1, 10e-9),
    "idle_readout": (1, 200e-9),
}
READOUT_ERROR = 1e-2
RESET_ERROR = 1e-2


@dataclass(frozen=True)
class NoiseBudget:
    """Per-operation Pauli error rates for the surface-code simulation."""

    cz: float
    single_qubit: float
    readout: float
    reset: float
    idle_2q: float
    idle_1q: float
    idle_readout: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def noise_budget(t1: float, t2: float | None = None, readout: float = READOUT_ERROR,
                 reset: float = RESET_ERROR) -> NoiseBudget:
    """Decoherence-limited error per operation for a given T1 (and T2, default 2 T1)."""
    rates = CoherenceRates.from_times(t1, t2)
    errors = {name: 1.0 - decoherence_fidelity(n, rates, tau) for name, (n, tau) in OPERATION_DURATIONS.items()}
    return NoiseBudget(readout=readout, reset=reset, **errors)
