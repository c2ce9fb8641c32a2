"""Single fluxonium circuit in the harmonic-oscillator basis.

The Hamiltonian (in GHz, i.e. divided by Planck's constant) is

    H = 4 E_C n^2 - E_J cos(phi + phi_ext) + E_L phi^2 / 2

with ``phi`` and ``n`` written in terms of the ladder operators of the
inductive oscillator.  The oscillator part is diagonal in that basis; the
junction term is built from ``cos(phi)`` and ``sin(phi)`` evaluated by
diagonalizing the truncated phase operator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numerics import eigh, matrix_function

DEFAULT_BASIS_SIZE = 110
DEFAULT_LEVEL_COUNT = 12
CONVERGENCE_TOL_GHZ = 1e-5  # 10 kHz


class ConvergenceError(RuntimeError):
    """The harmonic basis is too small for the requested levels."""


@dataclass(frozen=True)
class FluxoniumParams:
    """Circuit energies in GHz and the reduced external flux in radians."""

    E_J: float
    E_C: float
    E_L: float
    phi_ext: float = np.pi

    def __post_init__(self):
        if min(self.E_J, self.E_C, self.E_L) <= 0:
            raise ValueError("E_J, E_C and E_L must all be strictly positive")

    @property
    def in_fluxonium_regime(self) -> bool:
        return 2 <= self.E_J / self.E_L <= 10 and 2 <= self.E_J / self.E_C <= 10

    def with_flux(self, phi_ext: float) -> "FluxoniumParams":
        return FluxoniumParams(self.E_J, self.E_C, self.E_L, phi_ext)

    def scaled(self, e_j: float = 1.0, e_c: float = 1.0, e_l: float = 1.0) -> "FluxoniumParams":
        return FluxoniumParams(self.E_J * e_j, self.E_C * e_c, self.E_L * e_l, self.phi_ext)


@lru_cache(maxsize=8)
def _ladder(basis_size: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, basis_size, dtype=float)), k=1)


def oscillator_operators(params: FluxoniumParams, basis_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated phase and charge operators in the oscillator basis."""
    b = _ladder(basis_size)
    ratio = 8 * params.E_C / params.E_L
    phi = (ratio ** 0.25 / np.sqrt(2)) * (b.T + b)
    n = 1j * (ratio ** -0.25 / np.sqrt(2)) * (b.T - b)
    return phi, n


def _trig_of_phase(params: FluxoniumParams, basis_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi, _ = oscillator_operators(params, basis_size)
    vals, vecs = np.linalg.eigh(phi)
    rot = lambda f: (vecs * f(vals)) @ vecs.T  # noqa: E731
    return rot(np.cos), rot(np.sin), rot(lambda x: np.sin(x / 2))


def build_hamiltonian(params: FluxoniumParams, basis_size: int = DEFAULT_BASIS_SIZE) -> np.ndarray:
    """Dense Hamiltonian matrix (GHz) in the oscillator basis."""
    if basis_size < 20:
        raise ValueError("basis_size must be at least 20")
    plasma = np.sqrt(8 * params.E_L * params.E_C)
    h = np.diag(plasma * (np.arange(basis_size) + 0.5))
    cos_phi, sin_phi, _ = _trig_of_phase(params, basis_size)
    h = h - params.E_J * (np.cos(params.phi_ext) * cos_phi - np.sin(params.phi_ext) * sin_phi)
    return h.astype(complex)


@dataclass(frozen=True)
class EigenSystem:
    """Truncated spectrum of a fluxonium with matrix elements in its eigenbasis.

    Energies are referenced to the ground state.  ``n_elements`` and
    ``phi_elements`` hold the charge and phase operators, and
    ``sin_half_phi_elements`` the operator ``sin(phi / 2)``.
    """

    params: FluxoniumParams
    basis_size: int
    level_count: int
    energies: np.ndarray
    n_elements: np.ndarray
    phi_elements: np.ndarray
    sin_half_phi_elements: np.ndarray = field(repr=False)

    def transition(self, i: int, j: int) -> float:
        return transition(self, i, j)

    def operator(self, name: str) -> np.ndarray:
        return {"charge": self.n_elements, "phase": self.phi_elements,
                "sin_half_phase": self.sin_half_phi_elements}[name]

    def truncated(self, levels: int) -> "EigenSystem":
        if levels > self.level_count:
            raise ValueError("cannot truncate to more levels than stored")
        s = slice(0, levels)
        return EigenSystem(self.params, self.basis_size, levels, self.energies[s],
                           self.n_elements[s, s], self.phi_elements[s, s],
                           self.sin_half_phi_elements[s, s])


def _diagonalize(params: FluxoniumParams, basis_size: int, level_count: int) -> EigenSystem:
    h = build_hamiltonian(params, basis_size)
    vals, vecs = eigh(h)
    vecs = vecs[:, :level_count]
    phi, n = oscillator_operators(params, basis_size)
    _, _, sin_half = _trig_of_phase(params, basis_size)
    project = lambda op: vecs.conj().T @ op @ vecs  # noqa: E731
    energies = vals[:level_count] - vals[0]
    return EigenSystem(params, basis_size, level_count, energies,
                       project(n), project(phi), project(sin_half))


def spectrum(
    params: FluxoniumParams,
    basis_size: int = DEFAULT_BASIS_SIZE,
    level_count: int = DEFAULT_LEVEL_COUNT,
    check_convergence: bool = True,
) -> EigenSystem:
    """Diagonalize the fluxonium and keep the lowest ``level_count`` levels.

    With ``check_convergence`` the calculation is repeated at twice the basis
    size and a :class:`ConvergenceError` is raised if any retained
    transition frequency moves by more than 10 kHz.
    """
    if level_count > basis_size // 2:
        raise ValueError("level_count must not exceed basis_size / 2")
    if not params.in_fluxonium_regime:
        warnings.warn(f"{params} lies outside the usual fluxonium design window", stacklevel=2)
    eig = _diagonalize(params, basis_size, level_count)
    if check_convergence:
        big = _diagonalize(params, 2 * basis_size, level_count)
        shift = np.abs(big.energies - eig.energies).max()
        if shift > CONVERGENCE_TOL_GHZ:
            raise ConvergenceError(
                f"basis_size={basis_size} not converged: doubling shifts a level by {shift * 1e6:.1f} kHz")
    return eig


def transition(eigsys: EigenSystem, i: int, j: int) -> float:
    """Transition frequency ``E_j - E_i`` in GHz."""
    if not 0 <= i < j < eigsys.level_count:
        raise IndexError(f"need 0 <= i < j < {eigsys.level_count}, got ({i}, {j})")
    return float(eigsys.energies[j] - eigsys.energies[i])


def matrix_element(eigsys: EigenSystem, op: str, i: int, j: int) -> float:
    """Magnitude of ``<i|O|j>`` for ``op`` in {'charge', 'phase', 'sin_half_phase'}."""
    if not (0 <= i < eigsys.level_count and 0 <= j < eigsys.level_count):
        raise IndexError(f"level index out of range 0..{eigsys.level_count - 1}")
    return float(abs(eigsys.operator(op)[i, j]))


def summary(eigsys: EigenSystem, levels: int = 4) -> dict:
    """Plain-dict summary used by the command-line front end."""
    levels = min(levels, eigsys.level_count)
    out = {"E_J": eigsys.params.E_J, "E_C": eigsys.params.E_C, "E_L": eigsys.params.E_L,
           "phi_ext": eigsys.params.phi_ext}
    for k in range(1, levels):
        out[f"f0{k}_GHz"] = transition(eigsys, 0, k)
    for a, b in [(0, 1), (1, 2), (0, 3)][: levels - 1]:
        out[f"n{a}{b}"] = matrix_element(eigsys, "charge", a, b)
        out[f"phi{a}{b}"] = matrix_element(eigsys, "phase", a, b)
    return out


__all__ = [
    "ConvergenceError", "EigenSystem", "FluxoniumParams", "build_hamiltonian",
    "matrix_element", "matrix_function", "spectrum", "summary", "transition",
]
