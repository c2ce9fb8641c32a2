"""Shared numerical kernels.

Dense Hermitian diagonalization, Schrodinger and Lindblad propagation,
Nelder-Mead minimization and straight-line least squares.  Every physics
module in the package goes through these helpers so that tolerances are
set in one place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.optimize
from scipy.integrate import solve_ivp

HERMITIAN_ATOL = 1e-12
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


class NumericsError(RuntimeError):
    """Raised when a numerical kernel cannot honour its contract."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniformly spaced sample times ``t_start .. t_end`` (inclusive)."""

    t_start: float
    t_end: float
    sample_count: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.sample_count)


@dataclass(frozen=True)
class OptimizerConfig:
    """Nelder-Mead settings.

    ``initial_simplex_scale`` is either a scalar or one step per parameter;
    the starting simplex is ``x0`` plus one vertex displaced along each axis.
    """

    initial_simplex_scale: float | Sequence[float] = 0.1
    f_tolerance: float = 1e-10
    x_tolerance: float = 1e-8
    max_evaluations: int = 2000

    def __post_init__(self):
        scales = np.atleast_1d(np.asarray(self.initial_simplex_scale, dtype=float))
        if np.any(scales == 0) or self.f_tolerance <= 0 or self.x_tolerance <= 0:
            raise ValueError("tolerances and simplex scales must be non-zero and positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")


def check_hermitian(h: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Return ``h`` as a complex array, raising if it is not Hermitian."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    diff = np.abs(h - h.conj().T)
    if diff.size and diff.max() > atol * max(1.0, np.abs(h).max()):
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        raise ValueError(f"matrix is not Hermitian at entry ({i}, {j})")
    return h


def fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive."""
    vecs = np.array(vecs, dtype=complex)
    idx = np.argmax(np.abs(vecs), axis=0)
    cols = np.arange(vecs.shape[1])
    pivot = vecs[idx, cols]
    vecs *= (np.abs(pivot) / pivot)[np.newaxis, :]
    return vecs


def eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors (columns)."""
    h = check_hermitian(h)
    vals, vecs = np.linalg.eigh(h)
    return vals, fix_phases(vecs)


def matrix_function(h: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix by spectral calculus."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * func(vals)) @ vecs.conj().T


def _sample_times(grid: TimeGrid | Sequence[float]) -> np.ndarray:
    times = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing with at least two entries")
    return times


def evolve_schrodinger(
    hamiltonian: Callable[[float], np.ndarray] | np.ndarray,
    psi0: np.ndarray,
    grid: TimeGrid | Sequence[float],
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
) -> np.ndarray:
    """Integrate ``i dpsi/dt = H(t) psi`` with an adaptive 8th-order Runge-Kutta.

    ``hamiltonian`` is a constant matrix or a callable returning the matrix
    at time ``t`` (in angular-frequency units of the inverse time unit).
    ``psi0`` may be a single state or a matrix whose columns are states; all
    columns are propagated together.  Returns an array with the sample axis
    first.
    """
    times = _sample_times(grid)
    psi0 = np.asarray(psi0, dtype=complex)
    norms = np.linalg.norm(psi0, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise ValueError("initial states must be normalized")
    shape = psi0.shape
    if callable(hamiltonian):
        h_of_t = hamiltonian
    else:
        h_const = np.asarray(hamiltonian, dtype=complex)
        h_of_t = lambda t: h_const  # noqa: E731

    def rhs(t, y):
        return (-1j * (h_of_t(t) @ y.reshape(shape))).ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), psi0.ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if sol.status != 0:
        failed = sol.t[-1] if sol.t.size else times[0]
        raise NumericsError(f"integration failed at t={failed}: {sol.message}")
    return sol.y.T.reshape((times.size,) + shape)


def evolve_driven(
    diagonal: np.ndarray,
    operators: Sequence[np.ndarray],
    coefficients: Callable[[float], Sequence[float]],
    psi0: np.ndarray,
    grid: TimeGrid | Sequence[float],
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
) -> np.ndarray:
    """Same contract as :func:`evolve_schrodinger` for ``H(t) = diag + sum_k c_k(t) O_k``.

    Keeping the static part diagonal and the drive as scalar coefficients
    times fixed matrices avoids rebuilding ``H(t)`` at every stage of the
    integrator, which dominates the cost for small systems.
    """
    times = _sample_times(grid)
    psi0 = np.asarray(psi0, dtype=complex)
    # Chained segments inherit the integrator's own norm error, so the
    # tolerance follows rtol rather than a fixed constant.
    if np.any(np.abs(np.linalg.norm(psi0, axis=0) - 1.0) > max(1e-8, 100 * rtol)):
        raise ValueError("initial states must be normalized")
    shape = psi0.shape
    diag = -1j * np.asarray(diagonal, dtype=float)
    if psi0.ndim == 2:
        diag = diag[:, np.newaxis]
    ops = [-1j * np.asarray(o, dtype=complex) for o in operators]
    for o in ops:
        check_hermitian(1j * o)

    def rhs(t, y):
        y = y.reshape(shape)
        out = diag * y
        for c, o in zip(coefficients(t), ops):
            if c:
                out = out + c * (o @ y)
        return out.ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), psi0.ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if sol.status != 0:
        failed = sol.t[-1] if sol.t.size else times[0]
        raise NumericsError(f"integration failed at t={failed}: {sol.message}")
    return sol.y.T.reshape((times.size,) + shape)


def lindblad_rhs(h: np.ndarray, collapse_ops: Sequence[np.ndarray]) -> Callable:
    """Right-hand side of the Lindblad equation acting on a flattened density matrix."""
    dim = h.shape[0]
    cops = [np.asarray(c, dtype=complex) for c in collapse_ops]
    damp = sum((c.conj().T @ c for c in cops), np.zeros((dim, dim), dtype=complex))
    heff = h - 0.5j * damp

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = -1j * (heff @ rho - rho @ heff.conj().T)
        for c in cops:
            out += c @ rho @ c.conj().T
        return out.ravel()

    return rhs


def evolve_lindblad(
    hamiltonian: np.ndarray,
    collapse_ops: Sequence[np.ndarray],
    rho0: np.ndarray,
    grid: TimeGrid | Sequence[float],
    rtol: float = ODE_RTOL,
    atol: float = ODE_ATOL,
) -> np.ndarray:
    """Integrate the Lindblad master equation for a time-independent generator."""
    times = _sample_times(grid)
    h = check_hermitian(np.asarray(hamiltonian, dtype=complex))
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != h.shape:
        raise ValueError("density matrix and Hamiltonian dimensions differ")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise ValueError("initial density matrix is not Hermitian")
    if abs(np.trace(rho0) - 1) > 1e-10:
        raise ValueError("initial density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho0).min() < -1e-10:
        raise ValueError("initial density matrix is not positive semidefinite")
    rhs = lindblad_rhs(h, collapse_ops)
    sol = solve_ivp(rhs, (times[0], times[-1]), rho0.ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise NumericsError(f"Lindblad integration failed: {sol.message}")
    rhos = sol.y.T.reshape((times.size,) + h.shape)
    return 0.5 * (rhos + np.conj(np.swapaxes(rhos, 1, 2)))


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    cfg: OptimizerConfig | None = None,
) -> OptimizeResult:
    """Minimize ``objective`` with the Nelder-Mead simplex method.

    Non-finite objective values are treated as +inf.  The returned point is
    never worse than ``x0``.
    """
    cfg = cfg or OptimizerConfig()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    count = 0

    def safe(x):
        nonlocal count
        count += 1
        value = float(objective(np.asarray(x, dtype=float)))
        return value if np.isfinite(value) else np.inf

    f0 = safe(x0)
    if not np.isfinite(f0):
        raise NumericsError("objective is not finite at the starting point")
    scale = np.broadcast_to(np.asarray(cfg.initial_simplex_scale, dtype=float), x0.shape)
    simplex = np.vstack([x0] + [x0 + np.eye(x0.size)[k] * scale[k] for k in range(x0.size)])
    budget = max(cfg.max_evaluations - 1, 1)
    res = scipy.optimize.minimize(
        safe, x0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": cfg.x_tolerance,
                 "fatol": cfg.f_tolerance, "maxfev": budget},
    )
    if not np.isfinite(res.fun):
        raise NumericsError("every simplex vertex evaluated to a non-finite value")
    if res.fun <= f0:
        return OptimizeResult(np.asarray(res.x), float(res.fun), count, bool(res.success))
    return OptimizeResult(x0, f0, count, bool(res.success))


def linear_fit(t: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through ``(t, y)``; returns slope, intercept and rms residual."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.size < 2:
        raise ValueError("need at least two matching samples")
    if np.ptp(t) == 0:
        raise ValueError("abscissae are degenerate")
    a = np.vstack([t, np.ones_like(t)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    rms = float(np.sqrt(np.mean((a @ np.array([slope, intercept]) - y) ** 2)))
    return float(slope), float(intercept), rms


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))
