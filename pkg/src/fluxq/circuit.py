"""Circuit model of the gap-tunable C-shunted flux qubit.

Energies are in GHz (E/h) throughout, fluxes in units of the flux quantum.

Phase convention
----------------
The charge basis is related to the phase representation by
``psi(phi) = sum_n c_n exp(i n phi) / sqrt(2 pi)``, so that ``exp(-2i phi)``
lowers the Cooper-pair number by two. With this choice the Hamiltonian
built here has the potential

    U(phi) = -2 E_J cos(phi) - alpha E_J cos(2 pi phi_t - 2 phi),

i.e. the ``cos(2 pi phi_t + 2 phi)`` form of the effective 1D Hamiltonian
after the relabeling ``phi -> -phi``. Spectra are identical under either
form; only plotted wavefunctions depend on the choice, and
:func:`fluxq.eigensolver.wavefunction_phase_basis` uses the same one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .constants import CONST, FF, GHZ

try:  # pragma: no cover - depends on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class DeviceParams:
    """Circuit constants of one qubit sample.

    ``c_total_ff`` is the capacitance entering the charging energy,
    ``C_sh + alpha_max*C + C/2``. When it is not supplied it is
    reconstructed from ``E_C = e^2 / C_total``; the single-junction
    capacitance ``C`` is not measured independently, so both derived
    capacitances are reconstructions.
    """

    ej_ghz: float
    ec_ghz: float
    alpha_max: float
    c_shunt_ff: float
    g_mhz: float
    f_res_ghz: float
    c_total_ff: float | None = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if not self.ej_ghz > 0:
            raise ValueError(f"ej_ghz must be positive, got {self.ej_ghz}")
        if not self.ec_ghz > 0:
            raise ValueError(f"ec_ghz must be positive, got {self.ec_ghz}")
        if not 0 < self.alpha_max < 1:
            raise ValueError(f"alpha_max must lie in (0, 1), got {self.alpha_max}")
        if not self.c_shunt_ff > 0:
            raise ValueError(f"c_shunt_ff must be positive, got {self.c_shunt_ff}")
        if not self.f_res_ghz > 0:
            raise ValueError(f"f_res_ghz must be positive, got {self.f_res_ghz}")
        if self.g_mhz < 0:
            raise ValueError(f"g_mhz must be non-negative, got {self.g_mhz}")
        if self.c_total_ff is None:
            c_total = CONST.e**2 / (CONST.h * self.ec_ghz * GHZ) / FF
            object.__setattr__(self, "c_total_ff", c_total)
        if self.c_total_ff <= self.c_shunt_ff:
            raise ValueError(
                f"c_total_ff={self.c_total_ff:.3f} fF does not exceed the shunt "
                f"capacitance {self.c_shunt_ff} fF"
            )

    @property
    def c_junction_ff(self) -> float:
        """Capacitance of one large junction, back-solved from ``c_total_ff``."""
        return (self.c_total_ff - self.c_shunt_ff) / (self.alpha_max + 0.5)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DeviceParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown device fields: {sorted(unknown)}")
        return cls(**dict(data))

    def with_(self, **changes: Any) -> "DeviceParams":
        if "ec_ghz" in changes and "c_total_ff" not in changes:
            changes["c_total_ff"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class FluxBias:
    phi_t: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi_t) and math.isfinite(self.phi_b)):
            raise ValueError(f"flux bias must be finite, got {self}")


@dataclass(frozen=True)
class ChargeBasisOperator:
    """Dense Hermitian matrix on charge states ``n = -cutoff_n .. cutoff_n``."""

    cutoff_n: int
    entries: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return 2 * self.cutoff_n + 1

    @property
    def charges(self) -> np.ndarray:
        return np.arange(-self.cutoff_n, self.cutoff_n + 1)

    def hermiticity_defect(self) -> float:
        """``max|H - H^dagger|`` relative to ``max|H|``."""
        scale = np.max(np.abs(self.entries))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.entries - self.entries.conj().T)) / scale)


_PRESET_FILE = "devices.toml"


def _preset_table() -> dict[str, dict[str, Any]]:
    text = resources.files("fluxq.data").joinpath(_PRESET_FILE).read_text()
    return tomllib.loads(text)


def preset_names() -> list[str]:
    return sorted(_preset_table())


def load_preset(name: str) -> DeviceParams:
    table = _preset_table()
    if name not in table:
        raise KeyError(f"unknown device preset {name!r}; available: {sorted(table)}")
    return DeviceParams(name=name, **table[name])


def load_device_file(path: str | Path, name: str) -> DeviceParams:
    """Load device ``name`` from a TOML file of the same layout as the presets."""
    with open(path, "rb") as fh:
        table = tomllib.load(fh)
    if name not in table:
        raise KeyError(f"device {name!r} not found in {path}")
    return DeviceParams(name=name, **table[name])


def alpha_of_flux(phi_b: float | np.ndarray, alpha_max: float) -> float | np.ndarray:
    """Effective junction ratio of the alpha-SQUID at barrier flux ``phi_b``.

    Negative values are returned unchanged; they are equivalent to a
    half-quantum shift of the tilt flux.
    """
    return alpha_max * np.cos(np.pi * phi_b)


def potential(
    phase: float | np.ndarray, bias: FluxBias, params: DeviceParams
) -> float | np.ndarray:
    """Qubit potential energy in GHz."""
    alpha = alpha_of_flux(bias.phi_b, params.alpha_max)
    ej = params.ej_ghz
    return -2.0 * ej * np.cos(phase) - alpha * ej * np.cos(
        2.0 * np.pi * bias.phi_t - 2.0 * phase
    )


def hamiltonian_bands(
    params: DeviceParams, bias: FluxBias, cutoff_n: int
) -> np.ndarray:
    """Lower-band storage (3 x dim) of the Hamiltonian, as used by LAPACK ``hbevx``.

    Row 0 is the diagonal, row 1 the first and row 2 the second
    subdiagonal ``H[i+1, i]`` / ``H[i+2, i]``.
    """
    if cutoff_n < 1:
        # a single charge state drops both tunnelling terms
        raise ValueError(f"cutoff_n must be >= 1, got {cutoff_n}")
    dim = 2 * cutoff_n + 1
    n = np.arange(-cutoff_n, cutoff_n + 1, dtype=float)
    alpha = alpha_of_flux(bias.phi_b, params.alpha_max)
    bands = np.zeros((3, dim), dtype=complex)
    bands[0] = 0.5 * params.ec_ghz * n**2
    bands[1, :-1] = -params.ej_ghz
    # H[i, i+2] = -(alpha E_J / 2) exp(+2 pi i phi_t); lower band holds its conjugate
    bands[2, :-2] = -0.5 * alpha * params.ej_ghz * np.exp(-2j * np.pi * bias.phi_t)
    return bands


def build_hamiltonian(
    params: DeviceParams, bias: FluxBias, cutoff_n: int
) -> ChargeBasisOperator:
    bands = hamiltonian_bands(params, bias, cutoff_n)
    dim = bands.shape[1]
    h = np.diag(bands[0])
    idx = np.arange(dim)
    h[idx[1:], idx[:-1]] = bands[1, :-1]
    h[idx[:-1], idx[1:]] = np.conj(bands[1, :-1])
    h[idx[2:], idx[:-2]] = bands[2, :-2]
    h[idx[:-2], idx[2:]] = np.conj(bands[2, :-2])
    return ChargeBasisOperator(cutoff_n=cutoff_n, entries=h)


def charge_operator(cutoff_n: int) -> np.ndarray:
    return np.diag(np.arange(-cutoff_n, cutoff_n + 1, dtype=float))


def potential_minimum(bias: FluxBias, params: DeviceParams, points: int = 20001) -> float:
    """Grid minimum of the potential over one period (GHz)."""
    phase = np.linspace(-np.pi, np.pi, points)
    return float(np.min(potential(phase, bias, params)))
