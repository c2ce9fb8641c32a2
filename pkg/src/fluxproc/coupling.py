"""Two fluxoniums with combined capacitive and inductive coupling.

The coupled Hamiltonian is built in the product of the single-qubit
eigenbases,

    H / h = H_A + H_B + J_C n_A n_B - J_L phi_A phi_B,

with ``J_C`` and ``J_L`` given in MHz.  Dressed states are labelled by their
largest overlap with bare product states.  A four-level coupled-spin model
with ``J_eff X_A X_B`` exchange serves as the reference for the amount of
hybridization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .dynamics import DrivenSystem
from .numerics import eigh
from .qubit import EigenSystem, FluxoniumParams, spectrum
from .readout import LabelingError, label_dressed_states

COMPUTATIONAL_LABELS = ((0, 0), (0, 1), (1, 0), (1, 1))
TRUNCATION_TOL_GHZ = 1e-6  # 1 kHz
ZZ_NULL_TOL_KHZ = 0.1


# Two-qubit propagation tolerances: unitary entries move by < 1e-8 relative to
# rtol 1e-10 at half the cost.
COUPLED_RTOL = 1e-8
COUPLED_ATOL = 1e-10


class NoSignChangeError(ValueError):
    """The static ZZ rate does not change sign over the requested bracket."""


@dataclass(frozen=True)
class CoupledSystem:
    """Two fluxoniums; coupling coefficients ``j_c`` and ``j_l`` in MHz."""

    qubit_a: FluxoniumParams
    qubit_b: FluxoniumParams
    j_c: float = 0.0
    j_l: float = 0.0
    per_qubit_levels: int = 5

    def __post_init__(self):
        if self.per_qubit_levels < 3:
            raise ValueError("per_qubit_levels must be at least 3")
        if self.j_l < 0:
            raise ValueError("j_l is a non-negative magnitude; the minus sign is part of the coupling term")

    def with_coupling(self, j_c: float | None = None, j_l: float | None = None) -> "CoupledSystem":
        return replace(self, j_c=self.j_c if j_c is None else j_c, j_l=self.j_l if j_l is None else j_l)

    def swapped(self) -> "CoupledSystem":
        return replace(self, qubit_a=self.qubit_b, qubit_b=self.qubit_a)


REFERENCE_PAIR = CoupledSystem(FluxoniumParams(4.0, 1.0, 0.9), FluxoniumParams(4.0, 1.0, 1.0),
                               j_c=11.5, j_l=2.0)


def detuning_sweep_system(e_l_b: float, j_c: float = 0.0, j_l: float = 2.0) -> CoupledSystem:
    """Qubit A fixed at E_L = 0.5 GHz, qubit B tuned through its inductive energy."""
    return CoupledSystem(FluxoniumParams(4.0, 1.0, 0.5), FluxoniumParams(4.0, 1.0, e_l_b), j_c=j_c, j_l=j_l)


@dataclass(frozen=True)
class SpinPair:
    """Coupled-spin reference model; all quantities in MHz."""

    omega_a: float
    omega_b: float
    j_eff: float

    def __post_init__(self):
        if self.omega_a <= 0 or self.omega_b <= 0:
            raise ValueError("spin frequencies must be positive")

    @property
    def delta(self) -> float:
        return self.omega_b - self.omega_a


@lru_cache(maxsize=64)
def _single(params: FluxoniumParams, levels: int) -> EigenSystem:
    return spectrum(params, level_count=max(levels, 12), check_convergence=False).truncated(levels)


def single_qubit_eigensystems(cs: CoupledSystem, levels: int | None = None) -> tuple[EigenSystem, EigenSystem]:
    levels = levels or cs.per_qubit_levels
    return _single(cs.qubit_a, levels), _single(cs.qubit_b, levels)


def _product_operators(a: EigenSystem, b: EigenSystem) -> dict:
    ia, ib = np.eye(a.level_count), np.eye(b.level_count)
    return {
        ("flux", 0): np.kron(a.phi_elements, ib), ("flux", 1): np.kron(ia, b.phi_elements),
        ("charge", 0): np.kron(a.n_elements, ib), ("charge", 1): np.kron(ia, b.n_elements),
    }


def build_coupled(cs: CoupledSystem, levels: int | None = None) -> tuple[np.ndarray, dict]:
    """Coupled Hamiltonian (GHz) in the bare product basis and its drive operators."""
    a, b = single_qubit_eigensystems(cs, levels)
    ops = _product_operators(a, b)
    h = np.diag(np.add.outer(a.energies, b.energies).ravel()).astype(complex)
    h += cs.j_c * 1e-3 * np.kron(a.n_elements, b.n_elements)
    h -= cs.j_l * 1e-3 * np.kron(a.phi_elements, b.phi_elements)
    return 0.5 * (h + h.conj().T), ops


@dataclass(frozen=True)
class DressedSpectrum:
    """Dressed eigenenergies (GHz, ground state at zero) and vectors in the product basis."""

    system: CoupledSystem
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    labels: dict
    overlaps: dict
    operators: dict = field(repr=False)

    def index(self, k: int, l: int) -> int:
        return self.labels[(k, l)]

    def energy(self, k: int, l: int) -> float:
        return float(self.energies[self.labels[(k, l)]])

    def dressed_operator(self, channel: str, qubit: int) -> np.ndarray:
        op = self.operators[(channel, qubit)]
        return self.vectors.conj().T @ op @ self.vectors

    def element(self, channel: str, qubit: int, left: tuple, right: tuple) -> complex:
        bra = self.vectors[:, self.labels[left]]
        ket = self.vectors[:, self.labels[right]]
        return complex(bra.conj() @ self.operators[(channel, qubit)] @ ket)


def _diagonalize(cs: CoupledSystem, levels: int) -> DressedSpectrum:
    h, ops = build_coupled(cs, levels)
    vals, vecs = eigh(h)
    wanted = [k * levels + l for k, l in COMPUTATIONAL_LABELS]
    found = label_dressed_states(vecs, wanted)
    labels = {lab: found[lab[0] * levels + lab[1]] for lab in COMPUTATIONAL_LABELS}
    overlaps = {lab: float(abs(vecs[lab[0] * levels + lab[1], labels[lab]]) ** 2) for lab in COMPUTATIONAL_LABELS}
    return DressedSpectrum(cs, vals - vals[0], vecs, labels, overlaps, ops)


def dressed_spectrum(cs: CoupledSystem, check_truncation: bool = False) -> DressedSpectrum:
    """Diagonalize and label the computational states.

    With ``check_truncation`` the calculation is repeated with two more
    levels per qubit and a warning is issued if a computational energy moves
    by more than 1 kHz.
    """
    ds = _diagonalize(cs, cs.per_qubit_levels)
    if check_truncation:
        big = _diagonalize(cs, cs.per_qubit_levels + 2)
        shift = max(abs(ds.energy(*lab) - big.energy(*lab)) for lab in COMPUTATIONAL_LABELS)
        if shift > TRUNCATION_TOL_GHZ:
            warnings.warn(f"per_qubit_levels={cs.per_qubit_levels} moves a computational level "
                          f"by {shift * 1e6:.2f} kHz", stacklevel=2)
    return ds


def mu_phi(cs: CoupledSystem, channel: str = "flux", ds: DressedSpectrum | None = None) -> float:
    """Normalized cross matrix element ``|<00|O_A|01>| / |<00|O_A|10>|``.

    ``channel`` selects the phase operator (``"flux"``) or the charge
    operator (``"charge"``) of qubit A.
    """
    ds = ds or dressed_spectrum(cs)
    cross = abs(ds.element(channel, 0, (0, 0), (0, 1)))
    direct = abs(ds.element(channel, 0, (0, 0), (1, 0)))
    return float(cross / direct)


def _zeta_from_subspace(cs: CoupledSystem) -> float:
    """ZZ rate when |01> and |10> are too mixed to label one by one.

    Only the sum ``w01 + w10`` enters, so the two dressed states with the
    largest weight in the bare {|01>, |10>} subspace are taken together.
    """
    levels = cs.per_qubit_levels
    h, _ = build_coupled(cs, levels)
    vals, vecs = eigh(h)
    ends = label_dressed_states(vecs, [0, levels + 1])
    pair = [1, levels]
    weight = (np.abs(vecs[pair, :]) ** 2).sum(axis=0)
    weight[list(ends.values())] = -1
    top = np.argsort(-weight)[:2]
    if weight[top].min() < 0.5:
        raise LabelingError("no pair of dressed states spans the bare |01>, |10> subspace")
    return float(vals[ends[0]] + vals[ends[levels + 1]] - vals[top].sum())


def zeta_zz_static(cs: CoupledSystem, ds: DressedSpectrum | None = None) -> float:
    """Signed static ZZ rate ``w00 + w11 - w10 - w01`` in kHz.

    Falls back to treating |01> and |10> as a pair when the two qubits are
    nearly degenerate and the states cannot be labelled individually.
    """
    if ds is None:
        try:
            ds = dressed_spectrum(cs)
        except LabelingError:
            return _zeta_from_subspace(cs) * 1e6
    zeta = ds.energy(0, 0) + ds.energy(1, 1) - ds.energy(1, 0) - ds.energy(0, 1)
    return float(zeta * 1e6)


def find_zz_null(cs: CoupledSystem, bracket: tuple[float, float] = (0.0, 30.0),
                 tol_khz: float = ZZ_NULL_TOL_KHZ) -> float:
    """Capacitive coefficient (MHz) in ``bracket`` at which the static ZZ vanishes."""
    lo, hi = bracket
    f = lambda j_c: zeta_zz_static(cs.with_coupling(j_c=j_c))  # noqa: E731
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) < tol_khz:
        return float(lo)
    if abs(f_hi) < tol_khz:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChangeError(f"zeta_ZZ has one sign on [{lo}, {hi}] MHz: "
                                f"{f_lo:.4g} kHz and {f_hi:.4g} kHz")
    root = brentq(f, lo, hi, xtol=1e-9, rtol=1e-12)
    if abs(f(root)) > tol_khz:
        raise RuntimeError(f"root search stalled with |zeta_ZZ| = {abs(f(root)):.3g} kHz")
    return float(root)


def spin_model_hamiltonian(sp: SpinPair) -> np.ndarray:
    """``w_A Z_A / 2 + w_B Z_B / 2 + J_eff X_A X_B`` in MHz with basis |0> = spin up."""
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    i2 = np.eye(2)
    # |0> is the lower level, so the qubit term is -w Z / 2 in the |0>, |1> ordering.
    return (-0.5 * sp.omega_a * np.kron(z, i2) - 0.5 * sp.omega_b * np.kron(i2, z)
            + sp.j_eff * np.kron(x, x))


def spin_model_mu_x(sp: SpinPair) -> float:
    """Normalized cross matrix element of ``X_A`` in the dressed coupled-spin basis."""
    vals, vecs = eigh(spin_model_hamiltonian(sp).astype(complex))
    labels = label_dressed_states(vecs, [0, 1, 2, 3])
    x_a = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2))
    v = lambda k: vecs[:, labels[k]]  # noqa: E731
    cross = abs(v(0).conj() @ x_a @ v(1))
    direct = abs(v(0).conj() @ x_a @ v(2))
    return float(cross / direct)


def map_jl_to_jeff(cs: CoupledSystem) -> float:
    """Spin-model exchange (MHz) matching the inductive coupling: ``J_L |phi01^A| |phi01^B|``."""
    a, b = single_qubit_eigensystems(cs)
    return float(cs.j_l * abs(a.phi_elements[0, 1]) * abs(b.phi_elements[0, 1]))


def bare_frequencies(cs: CoupledSystem) -> tuple[float, float]:
    a, b = single_qubit_eigensystems(cs)
    return float(a.energies[1]), float(b.energies[1])


def driven_system(cs: CoupledSystem, ds: DressedSpectrum | None = None) -> DrivenSystem:
    """Dressed-basis static Hamiltonian with the per-qubit drive operators."""
    ds = ds or dressed_spectrum(cs)
    ops = {key: ds.vectors.conj().T @ op @ ds.vectors for key, op in ds.operators.items()}
    comp = tuple(ds.labels[lab] for lab in COMPUTATIONAL_LABELS)
    return DrivenSystem(np.asarray(ds.energies, dtype=float), ops, comp,
                        rtol=COUPLED_RTOL, atol=COUPLED_ATOL)


__all__ = [
    "COMPUTATIONAL_LABELS", "CoupledSystem", "DressedSpectrum", "NoSignChangeError", "SpinPair",
    "REFERENCE_PAIR", "bare_frequencies", "build_coupled", "detuning_sweep_system", "driven_system",
    "dressed_spectrum", "find_zz_null", "map_jl_to_jeff", "mu_phi", "single_qubit_eigensystems",
    "spin_model_hamiltonian", "spin_model_mu_x", "zeta_zz_static",
]
