"""Strain-tuned two-level defects and synthetic swap-spectroscopy maps.

Each defect is a tunnelling two-level system with energy
``E = sqrt(eps^2 + Delta_0^2)``, ``eps = eps_0 + c * strain``. It couples
transversally to the qubit with ``g = g_ref * sqrt(f01 / f_ref) * Delta_0 / E``
and, in the weak-coupling limit, adds the Lorentzian energy-exchange rate
``2 g^2 gamma_2 / (gamma_2^2 + delta^2)`` (angular units) to the qubit decay.

Random ensembles use NumPy's ``PCG64`` bit generator, seeded directly with
the integer seed, so they are reproducible across platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .circuit import DeviceParams
from .constants import GHZ, MHZ
from .landscape.fluxmap import Axis, FluxMap

TWO_PI = 2.0 * math.pi
DEFAULT_F_REF_GHZ = 5.0


@dataclass(frozen=True)
class TLSDefect:
    asymmetry_0_ghz: float
    tunneling_ghz: float
    strain_coeff_ghz_per_unit: float
    dipole_coupling_mhz_at_ref: float
    gamma2_mhz: float

    def __post_init__(self) -> None:
        if not self.tunneling_ghz > 0:
            raise ValueError(f"tunneling_ghz must be positive, got {self.tunneling_ghz}")
        if not self.gamma2_mhz > 0:
            raise ValueError(f"gamma2_mhz must be positive, got {self.gamma2_mhz}")
        if self.dipole_coupling_mhz_at_ref < 0:
            raise ValueError("dipole coupling must be non-negative")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class SwapSpectrumConfig:
    strain_axis: Axis
    freq_axis: Axis
    t_swap_us: float = 5.0
    base_t1_s: float = 25e-6
    f_ref_ghz: float = DEFAULT_F_REF_GHZ

    def __post_init__(self) -> None:
        if not self.t_swap_us > 0:
            raise ValueError(f"t_swap_us must be positive, got {self.t_swap_us}")
        if not self.base_t1_s > 0:
            raise ValueError(f"base_t1_s must be positive, got {self.base_t1_s}")
        if not self.f_ref_ghz > 0:
            raise ValueError(f"f_ref_ghz must be positive, got {self.f_ref_ghz}")
        if self.freq_axis.start <= 0 or self.freq_axis.stop <= 0:
            raise ValueError("frequency axis must be positive")

    @property
    def background_survival(self) -> float:
        return math.exp(-self.t_swap_us * 1e-6 / self.base_t1_s)

    def to_dict(self) -> dict[str, Any]:
        return {
            "strain_axis": self.strain_axis.to_dict(),
            "freq_axis": self.freq_axis.to_dict(),
            "t_swap_us": self.t_swap_us,
            "base_t1_s": self.base_t1_s,
            "f_ref_ghz": self.f_ref_ghz,
        }


def tls_asymmetry(defect: TLSDefect, strain):
    return defect.asymmetry_0_ghz + defect.strain_coeff_ghz_per_unit * np.asarray(strain, dtype=float)


def tls_frequency(defect: TLSDefect, strain):
    """``sqrt(eps^2 + Delta_0^2)`` in GHz."""
    out = np.hypot(tls_asymmetry(defect, strain), defect.tunneling_ghz)
    return float(out) if out.ndim == 0 else out


def tls_coupling_at(f01_ghz, defect: TLSDefect, f_ref_ghz: float, strain=0.0):
    """Transverse qubit-defect coupling in MHz."""
    f01 = np.asarray(f01_ghz, dtype=float)
    if np.any(f01 <= 0):
        raise ValueError("f01 must be positive")
    energy = np.hypot(tls_asymmetry(defect, strain), defect.tunneling_ghz)
    out = defect.dipole_coupling_mhz_at_ref * np.sqrt(f01 / f_ref_ghz) * defect.tunneling_ghz / energy
    return float(out) if out.ndim == 0 else out


def lorentzian_rate(g_mhz, gamma2_mhz, detuning_ghz):
    """``2 g^2 gamma_2 / (gamma_2^2 + delta^2)`` with every input converted to rad/s."""
    g = TWO_PI * MHZ * np.asarray(g_mhz, dtype=float)
    gamma = TWO_PI * MHZ * np.asarray(gamma2_mhz, dtype=float)
    delta = TWO_PI * GHZ * np.asarray(detuning_ghz, dtype=float)
    return 2.0 * g * g * gamma / (gamma * gamma + delta * delta)


def swap_relaxation_rate(
    f01_ghz, ensemble: Sequence[TLSDefect], strain, f_ref_ghz: float = DEFAULT_F_REF_GHZ
):
    """Extra qubit decay rate (1/s) from all defects at the given strain."""
    f01 = np.asarray(f01_ghz, dtype=float)
    strain = np.asarray(strain, dtype=float)
    total = np.zeros(np.broadcast(f01, strain).shape)
    for d in ensemble:
        g = tls_coupling_at(f01, d, f_ref_ghz, strain)
        total = total + lorentzian_rate(g, d.gamma2_mhz, f01 - tls_frequency(d, strain))
    return float(total) if total.ndim == 0 else total


def survival_probability(gamma_extra, cfg: SwapSpectrumConfig):
    t = cfg.t_swap_us * 1e-6
    return np.exp(-t * (1.0 / cfg.base_t1_s + np.asarray(gamma_extra, dtype=float)))


def simulate_strain_spectrum(
    params: DeviceParams | None, ensemble: Sequence[TLSDefect], cfg: SwapSpectrumConfig
) -> FluxMap:
    """Excited-state survival after the swap pulse over (frequency, strain).

    Rows run along the qubit frequency, columns along strain. ``params``
    only enters the metadata: the background decay is ``cfg.base_t1_s``.
    """
    f = cfg.freq_axis.values[:, None]
    s = cfg.strain_axis.values[None, :]
    gamma = swap_relaxation_rate(f, list(ensemble), s, cfg.f_ref_ghz)
    p = survival_probability(gamma, cfg)
    meta = {
        "kind": "tls_strain_spectrum",
        "swap": cfg.to_dict(),
        "n_defects": len(ensemble),
        "params": params.to_dict() if params is not None else None,
    }
    if isinstance(ensemble, TLSEnsemble):
        meta["ensemble"] = ensemble.to_json_dict()
    return FluxMap(cfg.freq_axis.with_name("f01_ghz"), cfg.strain_axis.with_name("strain"), p, "survival", meta)


@dataclass
class TLSEnsemble:
    defects: list[TLSDefect]
    seed: int | None = None
    sampling: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.defects)

    def __iter__(self) -> Iterator[TLSDefect]:
        return iter(self.defects)

    def __getitem__(self, i: int) -> TLSDefect:
        return self.defects[i]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "format": "fluxq-tls-ensemble",
            "version": 1,
            "prng": "numpy.random.PCG64",
            "seed": self.seed,
            "sampling": self.sampling,
            "defects": [d.to_dict() for d in self.defects],
        }

    @classmethod
    def from_json_dict(cls, d: dict[str, Any]) -> "TLSEnsemble":
        if d.get("format") != "fluxq-tls-ensemble":
            raise ValueError("not a TLS ensemble document")
        return cls([TLSDefect(**x) for x in d["defects"]], d.get("seed"), d.get("sampling", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1, sort_keys=True) + "\n"


def sample_ensemble(
    density_per_ghz: float,
    freq_window: tuple[float, float],
    dipole_scale: float,
    gamma2_scale: float,
    seed: int,
    strain_scale: float = 1.0,
) -> TLSEnsemble:
    """Draw a defect ensemble with zero-strain frequencies uniform in ``freq_window``.

    The count is Poisson with mean ``density_per_ghz * bandwidth``. For each
    defect, in draw order: ``E`` uniform in the window; ``Delta_0``
    log-uniform in ``[E/10, E]`` (the ``1/Delta_0`` law, truncated);
    ``eps_0 = +-sqrt(E^2 - Delta_0^2)`` with a random sign; reference coupling
    log-uniform in ``[0.1, 1] * dipole_scale``; ``gamma_2`` uniform in
    ``[0.5, 1.5] * gamma2_scale``; strain coefficient of magnitude uniform
    in ``[0.5, 1.5] * strain_scale`` and random sign.
    """
    lo, hi = freq_window
    if not 0 < lo < hi:
        raise ValueError(f"invalid frequency window {freq_window}")
    if density_per_ghz < 0:
        raise ValueError("density must be non-negative")
    if dipole_scale < 0 or not gamma2_scale > 0:
        raise ValueError("dipole_scale must be >= 0 and gamma2_scale > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(rng.poisson(density_per_ghz * (hi - lo)))
    energy = rng.uniform(lo, hi, n)
    delta0 = energy * 10.0 ** rng.uniform(-1.0, 0.0, n)
    sign = rng.choice([-1.0, 1.0], n)
    eps0 = sign * np.sqrt(np.maximum(energy**2 - delta0**2, 0.0))
    g_ref = dipole_scale * 10.0 ** rng.uniform(-1.0, 0.0, n)
    gamma2 = gamma2_scale * rng.uniform(0.5, 1.5, n)
    coeff = strain_scale * rng.uniform(0.5, 1.5, n) * rng.choice([-1.0, 1.0], n)
    defects = [
        TLSDefect(float(eps0[k]), float(delta0[k]), float(coeff[k]), float(g_ref[k]), float(gamma2[k]))
        for k in range(n)
    ]
    sampling = {
        "density_per_ghz": density_per_ghz,
        "freq_window": [lo, hi],
        "dipole_scale": dipole_scale,
        "gamma2_scale": gamma2_scale,
        "strain_scale": strain_scale,
    }
    return TLSEnsemble(defects, seed, sampling)


def detectability_threshold(
    f01_ghz: float,
    base_t1_s: float,
    t_swap_us: float,
    min_contrast: float,
    gamma2_mhz: float = 1.0,
    f_ref_ghz: float | None = None,
) -> float:
    """Smallest on-resonance coupling (MHz) whose dip reaches ``min_contrast``.

    Contrast is the absolute survival drop ``P_bg - P`` with
    ``P_bg = exp(-t/T1)``; on resonance the extra rate is ``2 g^2 / gamma_2``,
    so ``g_min = sqrt(gamma_2 * ln(P_bg / (P_bg - c)) / (2 t))``. With
    ``f_ref_ghz`` the result is expressed as the reference coupling
    ``g_min / sqrt(f01 / f_ref)`` a defect needs to be seen at ``f01``.
    """
    if not 0 < min_contrast < 1:
        raise ValueError(f"min_contrast must lie in (0, 1), got {min_contrast}")
    if not (f01_ghz > 0 and base_t1_s > 0 and t_swap_us > 0 and gamma2_mhz > 0):
        raise ValueError("frequencies, times and gamma2 must be positive")
    t = t_swap_us * 1e-6
    p_bg = math.exp(-t / base_t1_s)
    if min_contrast >= p_bg:
        raise ValueError(
            f"contrast {min_contrast} unreachable: background survival is only {p_bg:.4g}"
        )
    rate = math.log(p_bg / (p_bg - min_contrast)) / t
    gamma = TWO_PI * MHZ * gamma2_mhz
    g = math.sqrt(0.5 * rate * gamma) / (TWO_PI * MHZ)
    if f_ref_ghz is not None:
        g /= math.sqrt(f01_ghz / f_ref_ghz)
    return g


def is_detectable(defect: TLSDefect, cfg: SwapSpectrumConfig, min_contrast: float) -> bool:
    """Whether the defect's dip reaches ``min_contrast`` anywhere on the swept strain range.

    The qubit is taken on resonance with the defect; only strain points
    where the defect lies inside the frequency window count.
    """
    strain = cfg.strain_axis.values
    energy = tls_frequency(defect, strain)
    f = cfg.freq_axis
    lo, hi = min(f.start, f.stop), max(f.start, f.stop)
    inside = (energy >= lo) & (energy <= hi)
    if not inside.any():
        return False
    g = tls_coupling_at(energy[inside], defect, cfg.f_ref_ghz, strain[inside])
    g_min = detectability_threshold(1.0, cfg.base_t1_s, cfg.t_swap_us, min_contrast, defect.gamma2_mhz)
    return bool(np.max(g) >= g_min)
