"""Qubit-frequency maps over the (phi_t, phi_b) plane."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ..circuit import DeviceParams, FluxBias
from ..eigensolver import SolveOptions, SolverError, f01_only
from .fluxmap import Axis, FluxMap

MAX_FAILED_FRACTION = 0.01


class SweepError(RuntimeError):
    pass


def default_threads() -> int:
    return os.cpu_count() or 1


def f01_row(
    params: DeviceParams, phi_b: float, phi_t_values: Sequence[float], opts: SolveOptions
) -> np.ndarray:
    """Converged f01 along one row; NaN where the cutoff loop did not converge."""
    out = np.empty(len(phi_t_values))
    for j, phi_t in enumerate(phi_t_values):
        try:
            out[j] = f01_only(params, FluxBias(float(phi_t), float(phi_b)), opts)
        except SolverError:
            out[j] = np.nan
    return out


def sweep_frequency(
    params: DeviceParams,
    phi_t_axis: Axis,
    phi_b_axis: Axis,
    opts: SolveOptions | None = None,
    threads: int | None = None,
    row_source: Callable[[int], np.ndarray | None] | None = None,
    on_row: Callable[[int, np.ndarray], None] | None = None,
) -> FluxMap:
    """f01 map with rows along ``phi_b`` and columns along ``phi_t``.

    ``row_source(i)`` may return a previously computed row (checkpoint
    resume); ``on_row(i, values)`` is called once per freshly computed row.
    Rows are assembled in axis order whatever the thread count.
    """
    opts = opts or SolveOptions()
    threads = threads or default_threads()
    phi_t = phi_t_axis.values
    phi_b = phi_b_axis.values

    def work(i: int) -> np.ndarray:
        if row_source is not None:
            cached = row_source(i)
            if cached is not None:
                return np.asarray(cached, dtype=float)
        row = f01_row(params, phi_b[i], phi_t, opts)
        if on_row is not None:
            on_row(i, row)
        return row

    if threads == 1:
        rows = [work(i) for i in range(len(phi_b))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(len(phi_b))))
    values = np.vstack(rows)
    failed = int(np.count_nonzero(np.isnan(values)))
    if failed > MAX_FAILED_FRACTION * values.size:
        raise SweepError(f"{failed} of {values.size} cells failed to converge")
    meta = {
        "kind": "f01_sweep",
        "params": params.to_dict(),
        "solve": _opts_dict(opts),
        "n_failed": failed,
    }
    return FluxMap(phi_b_axis, phi_t_axis, values, "f01_ghz", meta)


def _opts_dict(opts: SolveOptions) -> dict:
    return {
        "f01_rel_tol": opts.f01_rel_tol,
        "initial_cutoff": opts.initial_cutoff,
        "max_cutoff": opts.max_cutoff,
        "n_levels": opts.n_levels,
    }


def symmetric_line(fmap: FluxMap, phi_t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """``(phi_b values, f01 values)`` along the column ``phi_t`` (default: zero tilt)."""
    if fmap.rows.name != "phi_b" or fmap.cols.name != "phi_t":
        raise ValueError("expected a map with rows phi_b and columns phi_t")
    j = fmap.col_index(phi_t, atol=1e-9 * max(1.0, abs(fmap.cols.step)))
    return fmap.rows.values, fmap.values[:, j]


def extremal_points_on_line(
    phi_b: Sequence[float], f01: Sequence[float]
) -> tuple[int, int]:
    """Indices of min and max f01; ties go to the larger ``phi_b``.

    The spectrum has period 2 in ``phi_b``, so on a full-period axis both
    ends attain the same value; the larger one is reported.
    """
    phi_b = np.asarray(phi_b, dtype=float)
    f01 = np.asarray(f01, dtype=float)
    valid = ~np.isnan(f01)
    if phi_b.size == 0 or not valid.any():
        raise ValueError("no valid points on the symmetric line")
    order = np.argsort(-phi_b, kind="stable")
    fv = np.where(valid, f01, np.nan)[order]
    return int(order[np.nanargmin(fv)]), int(order[np.nanargmax(fv)])


def find_extremal_points(fmap: FluxMap) -> tuple[FluxBias, FluxBias]:
    """Grid-resolution (star, triangle) biases: lowest and highest f01 at ``phi_t = 0``."""
    phi_b, line = symmetric_line(fmap)
    i_min, i_max = extremal_points_on_line(phi_b, line)
    return FluxBias(0.0, float(phi_b[i_min])), FluxBias(0.0, float(phi_b[i_max]))
