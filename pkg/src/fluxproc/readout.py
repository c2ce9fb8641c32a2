"""Dispersive shift of a fluxonium coupled to a readout resonator.

Two routes are provided: the second-order perturbative sum over virtual
transitions, and exact diagonalization of the joint fluxonium-resonator
Hamiltonian ``sum_l w_l |l><l| + w_R a^dag a + g O (a + a^dag)`` with
dressed states labelled by maximum overlap with the bare product states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import eigh
from .qubit import EigenSystem, FluxoniumParams, spectrum

JOINT_FLUXONIUM_LEVELS = 8
DISPERSIVE_MARGIN = 3.0


class LabelingError(RuntimeError):
    """A dressed state could not be matched unambiguously to a bare state."""


@dataclass(frozen=True)
class ReadoutConfig:
    """Resonator frequency in GHz, couplings and linewidth in MHz."""

    omega_R: float
    g: float = 100.0
    coupling_kind: str = "charge"
    resonator_levels: int = 16
    kappa: float = 2.0

    def __post_init__(self):
        if self.resonator_levels < 3:
            raise ValueError("resonator_levels must be at least 3")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.coupling_kind not in ("charge", "phase"):
            raise ValueError("coupling_kind must be 'charge' or 'phase'")

    @property
    def operator_name(self) -> str:
        return self.coupling_kind


@dataclass(frozen=True)
class DispersiveShift:
    """Dispersive shift in MHz; ``dispersive`` is False when a virtual
    transition lies within three coupling strengths of the resonator."""

    chi_mhz: float
    dispersive: bool = True

    def __float__(self):
        return self.chi_mhz


def virtual_detunings(eigsys: EigenSystem, omega_r: float, levels: int | None = None) -> np.ndarray:
    """|w_0l - w_R| and |w_1l - w_R| (GHz) for every virtual transition out of 0 and 1."""
    levels = levels or eigsys.level_count
    e = eigsys.energies[:levels]
    out = []
    for k in (0, 1):
        for l in range(levels):
            if l != k:
                out.append(abs(abs(e[l] - e[k]) - omega_r))
    return np.array(out)


def chi01_perturbative(eigsys: EigenSystem, cfg: ReadoutConfig) -> DispersiveShift:
    """Second-order dispersive shift including counter-rotating terms."""
    if eigsys.level_count < JOINT_FLUXONIUM_LEVELS:
        raise ValueError("need at least eight fluxonium levels for the virtual-transition sum")
    g = cfg.g * 1e-3
    op = eigsys.operator(cfg.operator_name)
    e = eigsys.energies
    w_r = cfg.omega_R

    def branch(k):
        total = 0.0
        for l in range(eigsys.level_count):
            if l == k:
                continue
            w = e[l] - e[k]
            total += abs(op[k, l]) ** 2 * 2 * w / (w * w - w_r * w_r)
        return total

    chi = g * g * (branch(0) - branch(1)) * 1e3
    ok = bool(np.all(virtual_detunings(eigsys, w_r) >= DISPERSIVE_MARGIN * g)) if g > 0 else True
    return DispersiveShift(float(chi), ok)


def joint_hamiltonian(eigsys: EigenSystem, cfg: ReadoutConfig) -> np.ndarray:
    """Fluxonium (truncated eigenbasis) plus one resonator mode, in GHz."""
    nq, nr = eigsys.level_count, cfg.resonator_levels
    a = np.diag(np.sqrt(np.arange(1, nr)), k=1)
    h = np.kron(np.diag(eigsys.energies), np.eye(nr))
    h = h + np.kron(np.eye(nq), cfg.omega_R * np.diag(np.arange(nr)))
    h = h + cfg.g * 1e-3 * np.kron(eigsys.operator(cfg.operator_name), a + a.T)
    return h


def label_dressed_states(vecs: np.ndarray, wanted: list[int]) -> dict[int, int]:
    """Map bare basis indices to dressed eigenvector indices by maximum overlap.

    Bare states are assigned greedily in order of decreasing best overlap;
    a dressed state already taken is not reused.
    """
    weights = np.abs(vecs[wanted, :]) ** 2
    order = np.argsort(-weights.max(axis=1))
    taken: set[int] = set()
    out = {}
    for row in order:
        ranked = np.argsort(-weights[row])
        pick = next(int(c) for c in ranked if int(c) not in taken)
        if weights[row, pick] < 0.5:
            raise LabelingError(
                f"bare state {wanted[row]} has maximum dressed overlap {weights[row, pick]:.3f} < 0.5")
        taken.add(pick)
        out[wanted[row]] = pick
    return out


def chi01_exact_from_eigsys(eigsys: EigenSystem, cfg: ReadoutConfig, p: int) -> float:
    if cfg.resonator_levels < p + 3:
        raise ValueError("resonator_levels must be at least p + 3")
    nq, nr = eigsys.level_count, cfg.resonator_levels
    if nq * nr > 2000:
        raise ValueError("joint Hilbert space exceeds 2000 states")
    vals, vecs = eigh(joint_hamiltonian(eigsys, cfg))
    idx = lambda l, m: l * nr + m  # noqa: E731
    wanted = [idx(l, m) for l in (0, 1) for m in (p, p + 1)]
    lab = label_dressed_states(vecs, wanted)
    energy = lambda l, m: vals[lab[idx(l, m)]]  # noqa: E731
    chi = (energy(1, p + 1) - energy(1, p)) - (energy(0, p + 1) - energy(0, p))
    return float(chi * 1e3)


def chi01_exact(params: FluxoniumParams, cfg: ReadoutConfig, p: int = 1,
                fluxonium_levels: int = JOINT_FLUXONIUM_LEVELS) -> float:
    """Photon-number-resolved dispersive shift (MHz) from the joint spectrum."""
    eigsys = spectrum(params, level_count=max(fluxonium_levels, 12), check_convergence=False)
    return chi01_exact_from_eigsys(eigsys.truncated(fluxonium_levels), cfg, p)
