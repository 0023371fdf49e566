"""Energy-relaxation limits from Purcell decay and ohmic charge noise.

Every formula is evaluated in SI units (Hz, J, C, s); the GHz/MHz/fF
arguments are converted at the boundary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize

from .circuit import DeviceParams, FluxBias
from .constants import CONST, FF, GHZ, MHZ
from .eigensolver import SolveOptions, SolverError, charge_matrix_element, f01_only
from .landscape.readout import DISPERSIVE_GUARD, ReadoutModel

BIAS_SEARCH_RANGE = (0.5, 1.0)
BIAS_SEARCH_TOL_GHZ = 1e-4

T1_COLUMNS = ("f01_ghz", "t1_purcell_s", "t1_charge_s", "t1_total_s", "q_total")


@dataclass(frozen=True)
class NoiseEnvironment:
    temperature_k: float = 0.025
    re_z_ohm: float = 50.0
    c_g_ff: float = 0.22

    def __post_init__(self) -> None:
        if not self.temperature_k > 0:
            raise ValueError(f"temperature_k must be positive, got {self.temperature_k}")
        if self.re_z_ohm < 0:
            raise ValueError(f"re_z_ohm must be non-negative, got {self.re_z_ohm}")
        if self.c_g_ff < 0:
            raise ValueError(f"c_g_ff must be non-negative, got {self.c_g_ff}")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class T1Budget:
    f01_ghz: float
    t1_purcell_s: float
    t1_charge_s: float
    t1_total_s: float
    q_total: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def purcell_limit_si(detuning_hz: float, g_hz: float, kappa_hz: float) -> float:
    """``(2 pi)^2 Delta^2 / (g^2 kappa)``, all arguments in Hz."""
    if detuning_hz == 0:
        raise ValueError("on-resonance, Purcell formula invalid")
    if g_hz == 0:
        return math.inf
    return (2.0 * math.pi) ** 2 * detuning_hz**2 / (g_hz**2 * kappa_hz)


def purcell_limit(f01_ghz: float, readout: ReadoutModel) -> float:
    """Purcell-limited T1 in seconds."""
    return purcell_limit_si(
        (readout.f_res_ghz - f01_ghz) * GHZ, readout.g_mhz * MHZ, readout.kappa_mhz * MHZ
    )


def charge_noise_psd(f_hz, env: NoiseEnvironment):
    """``C_g^2 Re(Z) h f coth(h f / 2 k_B T)`` in C^2/Hz.

    Near ``f = 0`` the series ``2 k_B T (1 + x^2 / 3)`` with
    ``x = h f / 2 k_B T`` replaces the removable coth pole.
    """
    f = np.asarray(f_hz, dtype=float)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    kt2 = 2.0 * CONST.k_b * env.temperature_k
    x = CONST.h * f / kt2
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    energy = np.where(small, kt2 * (1.0 + x * x / 3.0), CONST.h * f / np.tanh(safe))
    out = (env.c_g_ff * FF) ** 2 * env.re_z_ohm * energy
    return float(out) if out.ndim == 0 else out


def analytic_charge_matrix_element(params: DeviceParams) -> float:
    """``n_z = (E_J / 4 E_C)^(1/4)``, the closed-form charge matrix element."""
    return (params.ej_ghz / (4.0 * params.ec_ghz)) ** 0.25


def charge_noise_limit(
    params: DeviceParams, f01_ghz: float, matrix_element: float, env: NoiseEnvironment
) -> float:
    """Golden-rule T1 for charge noise coupling through ``dH/dQ = n E_C / e``."""
    if not matrix_element > 0:
        raise ValueError(f"matrix_element must be positive, got {matrix_element}")
    ec_joule = params.ec_ghz * GHZ * CONST.h
    coupling = matrix_element * ec_joule / CONST.e  # J/C
    rate = coupling**2 * charge_noise_psd(f01_ghz * GHZ, env) / CONST.hbar**2
    return math.inf if rate == 0 else 1.0 / rate


def combine_limits(f01_ghz: float, t1_purcell_s: float, t1_charge_s: float) -> T1Budget:
    rate = 1.0 / t1_purcell_s + 1.0 / t1_charge_s
    total = 1.0 / rate
    return T1Budget(f01_ghz, t1_purcell_s, t1_charge_s, total, 2.0 * math.pi * f01_ghz * GHZ * total)


def total_t1(
    f01_ghz: float,
    params: DeviceParams,
    readout: ReadoutModel,
    env: NoiseEnvironment,
    matrix_element: float | None = None,
) -> T1Budget:
    """Purcell and charge-noise limits and their harmonic sum.

    ``matrix_element`` defaults to the analytic ``n_z``.
    """
    if matrix_element is None:
        matrix_element = analytic_charge_matrix_element(params)
    return combine_limits(
        f01_ghz,
        purcell_limit(f01_ghz, readout),
        charge_noise_limit(params, f01_ghz, matrix_element, env),
    )


def bias_for_frequency(
    params: DeviceParams,
    f01_ghz: float,
    opts: SolveOptions | None = None,
    search: tuple[float, float] = BIAS_SEARCH_RANGE,
    tol_ghz: float = BIAS_SEARCH_TOL_GHZ,
) -> FluxBias:
    """Bias on the ``phi_t = 0`` line realizing ``f01_ghz``, by bracketing root search in ``phi_b``.

    f01 falls monotonically from the single-well maximum towards the
    double-well point over the default range. Raises ``ValueError`` if the
    target is outside the bracket.
    """
    opts = opts or SolveOptions()

    def resid(phi_b: float) -> float:
        return f01_only(params, FluxBias(0.0, phi_b), opts) - f01_ghz

    lo, hi = search
    r_lo, r_hi = resid(lo), resid(hi)
    if r_lo * r_hi > 0:
        raise ValueError(
            f"f01={f01_ghz} GHz not reachable for phi_b in [{lo}, {hi}] "
            f"(range {r_lo + f01_ghz:.4g}..{r_hi + f01_ghz:.4g} GHz)"
        )
    phi_b = optimize.brentq(resid, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    if abs(resid(phi_b)) > tol_ghz:
        raise ValueError(f"root search for f01={f01_ghz} GHz did not reach {tol_ghz} GHz")
    return FluxBias(0.0, float(phi_b))


@dataclass
class T1Table:
    budgets: list[T1Budget]
    reachable: list[bool]
    dispersive: list[bool]
    metadata: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(b, name) for b in self.budgets], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# fluxq-t1 v1\n")
        buf.write("# metadata: " + json.dumps(self.metadata, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(T1_COLUMNS + ("reachable", "dispersive"))
        for b, ok, disp in zip(self.budgets, self.reachable, self.dispersive):
            w.writerow([repr(float(getattr(b, c))) for c in T1_COLUMNS] + [int(ok), int(disp)])
        return buf.getvalue()

    def to_json_dict(self) -> dict[str, Any]:
        rows = []
        for b, ok, disp in zip(self.budgets, self.reachable, self.dispersive):
            row = {c: _json_float(getattr(b, c)) for c in T1_COLUMNS}
            row["reachable"] = ok
            row["dispersive"] = disp
            rows.append(row)
        return {"format": "fluxq-t1", "version": 1, "rows": rows, "metadata": self.metadata}


def _json_float(v: float) -> float | None:
    return None if math.isnan(v) else float(v)


def t1_curve(
    params: DeviceParams,
    readout: ReadoutModel,
    env: NoiseEnvironment,
    f01_axis: Sequence[float],
    use_numeric_matrix_element: bool = False,
    opts: SolveOptions | None = None,
) -> T1Table:
    """T1 budget at each frequency of ``f01_axis`` (strictly monotone).

    With ``use_numeric_matrix_element`` the charge matrix element is
    ``|<1|n|0>|`` at the ``phi_t = 0`` bias realizing each frequency; points
    the root search cannot reach carry NaN charge and total limits and
    ``reachable = False``. Points within the readout guard band
    (``|f01 - f_res| <= 10 g``) are computed but marked
    ``dispersive = False``; exact resonance raises.
    """
    f = np.asarray(f01_axis, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("f01_axis must be a non-empty 1D sequence")
    if f.size > 1 and not (np.all(np.diff(f) > 0) or np.all(np.diff(f) < 0)):
        raise ValueError("f01_axis must be strictly monotone")
    guard = DISPERSIVE_GUARD * readout.g_mhz * 1e-3
    dispersive = [bool(v) for v in np.abs(f - readout.f_res_ghz) > guard]
    opts = opts or SolveOptions()
    analytic = analytic_charge_matrix_element(params)

    budgets, reachable = [], []
    for f01 in f:
        t_p = purcell_limit(float(f01), readout)
        m = analytic
        ok = True
        if use_numeric_matrix_element:
            try:
                bias = bias_for_frequency(params, float(f01), opts)
                m = charge_matrix_element(params, bias, opts)
            except (ValueError, SolverError):
                ok = False
        if ok:
            budgets.append(combine_limits(float(f01), t_p, charge_noise_limit(params, float(f01), m, env)))
        else:
            budgets.append(T1Budget(float(f01), t_p, math.nan, math.nan, math.nan))
        reachable.append(ok)
    meta = {
        "kind": "t1_curve",
        "params": params.to_dict(),
        "readout": readout.to_dict(),
        "env": env.to_dict(),
        "matrix_element": "numeric" if use_numeric_matrix_element else "analytic",
        "analytic_n_z": analytic,
    }
    return T1Table(budgets, reachable, dispersive, meta)
