"""Diagonalization of the charge-basis Hamiltonian.

The convergence loop in :func:`qubit_frequency` only needs the two lowest
eigenvalues at each trial cutoff and evaluates them with LAPACK's banded
Hermitian solver; the final spectrum is always obtained from a dense
``eigh`` of the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .circuit import (
    ChargeBasisOperator,
    DeviceParams,
    FluxBias,
    build_hamiltonian,
    hamiltonian_bands,
)

RESOLUTION_FLOOR_GHZ = 1e-7
# multiple of eps*max|H| below which two f01 values are indistinguishable
_NOISE_ULPS = 100.0


class SolverError(RuntimeError):
    """Raised when a diagonalization fails or does not converge."""

    def __init__(self, message: str, residual: float | None = None, cutoff: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.cutoff = cutoff


@dataclass(frozen=True)
class SolveOptions:
    f01_rel_tol: float = 1e-8
    initial_cutoff: int = 15
    max_cutoff: int = 200
    n_levels: int = 5

    def __post_init__(self) -> None:
        if not 0 < self.f01_rel_tol < 1:
            raise ValueError(f"f01_rel_tol must lie in (0, 1), got {self.f01_rel_tol}")
        if self.initial_cutoff < 2:
            raise ValueError(f"initial_cutoff must be >= 2, got {self.initial_cutoff}")
        if self.max_cutoff < self.initial_cutoff:
            raise ValueError("max_cutoff must be >= initial_cutoff")
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2 to define f01")

    def schedule(self) -> list[int]:
        """Cutoffs tried in order: doubling from ``initial_cutoff``, capped."""
        cutoffs = [self.initial_cutoff]
        while cutoffs[-1] < self.max_cutoff:
            cutoffs.append(min(2 * cutoffs[-1], self.max_cutoff))
        return cutoffs


@dataclass
class SpectrumResult:
    """Lowest eigenpairs at one bias point.

    ``states[:, k]`` is the eigenvector of ``levels[k]`` in the charge basis
    ``n = -cutoff_used .. cutoff_used``. ``resolution_limited`` marks results
    whose f01 stopped changing only at the floating-point noise level
    (exponentially small tunnel splittings); ``below_resolution`` marks
    ``f01 < RESOLUTION_FLOOR_GHZ``.
    """

    levels: np.ndarray
    states: np.ndarray = field(repr=False)
    cutoff_used: int
    converged: bool = True
    residual: float = 0.0
    resolution_limited: bool = False
    below_resolution: bool = False

    @property
    def f01(self) -> float:
        return float(self.levels[1] - self.levels[0])

    @property
    def charges(self) -> np.ndarray:
        return np.arange(-self.cutoff_used, self.cutoff_used + 1)

    def transition(self, i: int, j: int) -> float:
        return float(self.levels[j] - self.levels[i])


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component made real positive; first index wins ties
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivots) / pivots)[None, :]


def eigensolve(h: ChargeBasisOperator, n_levels: int) -> SpectrumResult:
    """Lowest ``n_levels`` eigenpairs of ``h`` by dense Hermitian diagonalization."""
    matrix = h.entries
    dim = matrix.shape[0]
    if not 1 <= n_levels <= dim:
        raise ValueError(f"n_levels={n_levels} outside [1, {dim}]")
    if not np.all(np.isfinite(matrix)):
        raise SolverError("Hamiltonian contains non-finite entries")
    try:
        vals, vecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigh failed to converge: {exc}") from exc
    vals = vals[:n_levels]
    vecs = _fix_phases(vecs[:, :n_levels])
    return SpectrumResult(levels=vals, states=vecs, cutoff_used=h.cutoff_n)


def lowest_two_levels(params: DeviceParams, bias: FluxBias, cutoff_n: int) -> tuple[float, float, float]:
    """Two lowest eigenvalues and ``max|H|`` from the banded solver."""
    bands = hamiltonian_bands(params, bias, cutoff_n)
    try:
        vals = scipy.linalg.eigvals_banded(
            bands, lower=True, select="i", select_range=(0, 1), check_finite=False
        )
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"banded eigensolver failed: {exc}", cutoff=cutoff_n) from exc
    return float(vals[0]), float(vals[1]), float(np.max(np.abs(bands)))


def converge_f01(
    params: DeviceParams, bias: FluxBias, opts: SolveOptions
) -> tuple[float, int, float, bool]:
    """Run the cutoff-doubling loop.

    Returns ``(f01, cutoff, residual, resolution_limited)``. Raises
    :class:`SolverError` if ``max_cutoff`` is reached without convergence.
    """
    previous = None
    residual = np.inf
    for cutoff in opts.schedule():
        e0, e1, norm = lowest_two_levels(params, bias, cutoff)
        f01 = e1 - e0
        if previous is not None:
            change = abs(f01 - previous)
            residual = change / abs(f01) if f01 != 0 else np.inf
            if residual < opts.f01_rel_tol:
                return f01, cutoff, residual, False
            if change <= _NOISE_ULPS * np.finfo(float).eps * norm:
                return f01, cutoff, residual, True
        previous = f01
    raise SolverError(
        f"f01 not converged at max_cutoff={opts.max_cutoff} "
        f"(relative change {residual:.3g} > {opts.f01_rel_tol:g})",
        residual=residual,
        cutoff=opts.max_cutoff,
    )


def solve_spectrum(
    params: DeviceParams, bias: FluxBias, opts: SolveOptions | None = None
) -> SpectrumResult:
    """Converged spectrum with eigenvectors at the bias point."""
    opts = opts or SolveOptions()
    _, cutoff, residual, limited = converge_f01(params, bias, opts)
    h = build_hamiltonian(params, bias, cutoff)
    result = eigensolve(h, min(opts.n_levels, h.dimension))
    result.residual = residual
    result.resolution_limited = limited
    result.below_resolution = result.f01 < RESOLUTION_FLOOR_GHZ
    return result


def qubit_frequency(
    params: DeviceParams, bias: FluxBias, opts: SolveOptions | None = None
) -> tuple[float, SpectrumResult]:
    """Converged qubit transition frequency ``f01`` in GHz and its spectrum."""
    result = solve_spectrum(params, bias, opts)
    return result.f01, result


def f01_only(params: DeviceParams, bias: FluxBias, opts: SolveOptions | None = None) -> float:
    """Converged f01 without eigenvectors; what grid sweeps call per cell."""
    return converge_f01(params, bias, opts or SolveOptions())[0]


def charge_matrix_element(
    params: DeviceParams, bias: FluxBias, opts: SolveOptions | None = None
) -> float:
    """``|<1|n|0>|`` between the two lowest eigenstates (dimensionless)."""
    result = solve_spectrum(params, bias, opts)
    return matrix_element(result, 0, 1)


def matrix_element(result: SpectrumResult, i: int, j: int) -> float:
    n = result.charges.astype(float)
    return float(abs(np.vdot(result.states[:, j], n * result.states[:, i])))


def wavefunction_phase_basis(state: np.ndarray, phase_grid) -> np.ndarray:
    """Phase-space amplitudes ``psi(phi) = sum_n c_n exp(i n phi) / sqrt(2 pi)``."""
    phase = np.asarray(phase_grid, dtype=float)
    if phase.size == 0:
        raise ValueError("phase_grid is empty")
    state = np.asarray(state)
    cutoff = (state.shape[0] - 1) // 2
    n = np.arange(-cutoff, cutoff + 1)
    return np.exp(1j * np.outer(phase, n)) @ state / np.sqrt(2.0 * np.pi)


def harmonic_f01(params: DeviceParams, alpha: float = 0.0) -> float:
    """Small-oscillation frequency of the single well at ``phi = 0`` (``phi_t = 0``).

    Curvature of the potential is ``E_J (2 + 4 alpha)``, against the
    kinetic term ``E_C n^2 / 2``.
    """
    curvature = params.ej_ghz * (2.0 + 4.0 * alpha)
    return float(np.sqrt(params.ec_ghz * curvature))
