"""Dispersive readout and fixed-probe calibration maps.

Bias-line currents reach the loops through an affine crosstalk map; each
current pair is converted to (phi_t, phi_b), the qubit frequency shifts the
readout resonator dispersively, and a notch-type resonator response is
sampled at a fixed probe frequency.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..circuit import DeviceParams, FluxBias
from ..eigensolver import SolveOptions, SolverError, f01_only
from .fluxmap import Axis, FluxMap
from .sweep import default_threads

DISPERSIVE_GUARD = 10.0  # |f01 - f_res| must exceed this many g


class NonDispersiveError(ValueError):
    pass


@dataclass(frozen=True)
class ReadoutModel:
    f_res_ghz: float
    g_mhz: float
    kappa_mhz: float = 1.0
    kappa_ext_ratio: float = 1.0
    f_probe_ghz: float | None = None

    def __post_init__(self) -> None:
        if not self.kappa_mhz > 0:
            raise ValueError(f"kappa_mhz must be positive, got {self.kappa_mhz}")
        if not 0 < self.kappa_ext_ratio <= 1:
            raise ValueError(f"kappa_ext_ratio must lie in (0, 1], got {self.kappa_ext_ratio}")
        if self.g_mhz < 0:
            raise ValueError("g_mhz must be non-negative")

    @classmethod
    def from_device(cls, params: DeviceParams, **kwargs) -> "ReadoutModel":
        return cls(f_res_ghz=params.f_res_ghz, g_mhz=params.g_mhz, **kwargs)

    def probe_for_f01(self, f01_ghz: float) -> "ReadoutModel":
        """Copy whose probe sits on the shifted resonance for qubit frequency ``f01_ghz``."""
        f_probe = dispersive_resonator_frequency(f01_ghz, self)
        return ReadoutModel(self.f_res_ghz, self.g_mhz, self.kappa_mhz, self.kappa_ext_ratio, f_probe)

    def to_dict(self) -> dict:
        return {
            "f_res_ghz": self.f_res_ghz,
            "g_mhz": self.g_mhz,
            "kappa_mhz": self.kappa_mhz,
            "kappa_ext_ratio": self.kappa_ext_ratio,
            "f_probe_ghz": self.f_probe_ghz,
        }


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Affine map ``(phi_t, phi_b) = m @ (i_t, i_b) + offset``; currents in mA."""

    m: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float).reshape(2, 2)
        offset = np.array(self.offset, dtype=float).reshape(2)
        if abs(np.linalg.det(m)) <= 1e-9:
            raise ValueError("crosstalk matrix is singular")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls) -> "CrosstalkMatrix":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_vector(cls, p) -> "CrosstalkMatrix":
        p = np.asarray(p, dtype=float)
        return cls(p[:4].reshape(2, 2), p[4:6])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.m.ravel(), self.offset])

    def fluxes(self, i_t, i_b) -> tuple[np.ndarray, np.ndarray]:
        i_t = np.asarray(i_t, dtype=float)
        i_b = np.asarray(i_b, dtype=float)
        phi_t = self.m[0, 0] * i_t + self.m[0, 1] * i_b + self.offset[0]
        phi_b = self.m[1, 0] * i_t + self.m[1, 1] * i_b + self.offset[1]
        return phi_t, phi_b

    def currents(self, phi_t, phi_b) -> tuple[np.ndarray, np.ndarray]:
        inv = np.linalg.inv(self.m)
        dt = np.asarray(phi_t, dtype=float) - self.offset[0]
        db = np.asarray(phi_b, dtype=float) - self.offset[1]
        return inv[0, 0] * dt + inv[0, 1] * db, inv[1, 0] * dt + inv[1, 1] * db

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.m))

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "offset": self.offset.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CrosstalkMatrix":
        return cls(np.array(d["m"]), np.array(d.get("offset", [0.0, 0.0])))


def dispersive_resonator_frequency(
    f01_ghz: float, readout: ReadoutModel, guard: float = DISPERSIVE_GUARD
) -> float:
    """Resonator frequency with the qubit in its ground state, ``f_res - g^2 / (f01 - f_res)``."""
    g = readout.g_mhz * 1e-3
    detuning = f01_ghz - readout.f_res_ghz
    if g == 0:
        return readout.f_res_ghz
    if abs(detuning) <= guard * g:
        raise NonDispersiveError(
            f"non-dispersive regime: |f01 - f_res| = {abs(detuning):.4g} GHz <= {guard:g} g"
        )
    return readout.f_res_ghz - g * g / detuning


def notch_s21(f_probe_ghz, f_res_ghz, readout: ReadoutModel):
    """``|S21|`` of a side-coupled resonator of total linewidth kappa."""
    kappa = readout.kappa_mhz * 1e-3
    x = (np.asarray(f_probe_ghz) - np.asarray(f_res_ghz)) / kappa
    return np.abs(1.0 - readout.kappa_ext_ratio / (1.0 + 2j * x))


def s21_at_f01(f01_ghz: float, readout: ReadoutModel) -> float:
    if readout.f_probe_ghz is None:
        raise ValueError("readout model has no probe frequency")
    try:
        f_res = dispersive_resonator_frequency(f01_ghz, readout)
    except NonDispersiveError:
        return float("nan")
    return float(notch_s21(readout.f_probe_ghz, f_res, readout))


def fixed_probe_map(
    params: DeviceParams,
    readout: ReadoutModel,
    xtalk: CrosstalkMatrix,
    i_t_axis: Axis,
    i_b_axis: Axis,
    opts: SolveOptions | None = None,
    threads: int | None = None,
) -> FluxMap:
    """``|S21|`` at the fixed probe over a grid of bias-line currents.

    Rows run along ``i_b``, columns along ``i_t``. Guard-band cells and
    cells whose f01 did not converge are NaN.
    """
    opts = opts or SolveOptions()
    threads = threads or default_threads()
    i_t = i_t_axis.values
    i_b = i_b_axis.values

    def row(k: int) -> np.ndarray:
        phi_t, phi_b = xtalk.fluxes(i_t, np.full_like(i_t, i_b[k]))
        out = np.empty(len(i_t))
        for j in range(len(i_t)):
            try:
                f01 = f01_only(params, FluxBias(float(phi_t[j]), float(phi_b[j])), opts)
            except SolverError:
                out[j] = np.nan
                continue
            out[j] = s21_at_f01(f01, readout)
        return out

    if threads == 1:
        rows = [row(k) for k in range(len(i_b))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(len(i_b))))
    values = np.vstack(rows)
    meta = {
        "kind": "fixed_probe_map",
        "params": params.to_dict(),
        "readout": readout.to_dict(),
        "crosstalk": xtalk.to_dict(),
        "n_sentinel": int(np.count_nonzero(np.isnan(values))),
    }
    return FluxMap(i_b_axis, i_t_axis, values, "s21_abs", meta)


def calibration_probe(
    params: DeviceParams, readout: ReadoutModel, opts: SolveOptions | None = None
) -> ReadoutModel:
    """Readout with the probe on the shifted resonance of the highest qubit frequency.

    The highest f01 sits at zero tilt and full alpha (``phi_b = 0``); there
    the low-|S21| region is a set of smooth closed blobs around the
    single-well maxima, which is what :func:`infer_crosstalk` needs.
    """
    f_max = f01_only(params, FluxBias(0.0, 0.0), opts)
    return readout.probe_for_f01(f_max)


def current_window(
    xtalk: CrosstalkMatrix,
    phi_t_range: tuple[float, float],
    phi_b_range: tuple[float, float],
    counts: tuple[int, int],
) -> tuple[Axis, Axis]:
    """Current axes whose image under ``xtalk`` covers the given flux box."""
    corners_t = [phi_t_range[0], phi_t_range[0], phi_t_range[1], phi_t_range[1]]
    corners_b = [phi_b_range[0], phi_b_range[1], phi_b_range[0], phi_b_range[1]]
    i_t, i_b = xtalk.currents(corners_t, corners_b)
    return (
        Axis("i_t", float(np.min(i_t)), float(np.max(i_t)), counts[0]),
        Axis("i_b", float(np.min(i_b)), float(np.max(i_b)), counts[1]),
    )
