"""Run configuration: TOML file, environment default, command-line overrides.

Layout of a config file (every table optional)::

    seed = 0

    [device]            # preset name, optionally with field overrides
    preset = "sample_A"
    ej_ghz = 164.0

    [readout]           # kappa_mhz, kappa_ext_ratio, f_probe_ghz
    [env]               # temperature_k, re_z_ohm, c_g_ff
    [solve]             # f01_rel_tol, initial_cutoff, max_cutoff, n_levels
    [crosstalk]         # m = [[..], [..]], offset = [.., ..]
    [tls]               # ensemble and swap-pulse settings, see TLSSettings
    [output]            # dir, formats = ["csv", "json", "svg"], verbosity
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .circuit import DeviceParams, load_preset
from .decoherence import NoiseEnvironment
from .eigensolver import SolveOptions
from .landscape.readout import CrosstalkMatrix, ReadoutModel

try:  # pragma: no cover - depends on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

CONFIG_ENV_VAR = "FLUXQ_CONFIG"
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "."
    formats: tuple[str, ...] = ("csv", "json")
    verbosity: int = 1

    def __post_init__(self) -> None:
        formats = tuple(self.formats)
        if not formats:
            raise ConfigError("output formats must be non-empty")
        bad = [f for f in formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output formats {bad}; choose from {list(FORMATS)}")
        object.__setattr__(self, "formats", formats)


@dataclass(frozen=True)
class TLSSettings:
    density_per_ghz: float = 2.0
    freq_min_ghz: float = 3.0
    freq_max_ghz: float = 7.0
    dipole_scale_mhz: float = 0.2
    gamma2_scale_mhz: float = 1.0
    strain_scale_ghz: float = 1.0
    strain_min: float = -1.0
    strain_max: float = 1.0
    strain_count: int = 101
    freq_count: int = 401
    t_swap_us: float = 5.0
    base_t1_s: float = 25e-6
    f_ref_ghz: float = 5.0
    min_contrast: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams
    readout: ReadoutModel
    env: NoiseEnvironment = field(default_factory=NoiseEnvironment)
    solve: SolveOptions = field(default_factory=SolveOptions)
    crosstalk: CrosstalkMatrix = field(default_factory=CrosstalkMatrix.identity)
    tls: TLSSettings = field(default_factory=TLSSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "device": self.device.to_dict(),
            "readout": self.readout.to_dict(),
            "env": self.env.to_dict(),
            "solve": asdict(self.solve),
            "crosstalk": self.crosstalk.to_dict(),
            "tls": asdict(self.tls),
            "output": {**asdict(self.output), "formats": list(self.output.formats)},
            "seed": self.seed,
        }

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return replace(self, **changes)


def _build(cls, table: Mapping[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"[{section}]: unknown keys {sorted(unknown)}")
    try:
        return cls(**dict(table))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def device_from_table(table: Mapping[str, Any]) -> DeviceParams:
    table = dict(table)
    preset = table.pop("preset", None)
    try:
        if preset is None:
            return DeviceParams.from_dict(table)
        base = load_preset(preset)
        return base.with_(**table) if table else base
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[device]: {exc}") from exc


def config_from_dict(data: Mapping[str, Any], device_override: str | None = None) -> RunConfig:
    known = {"seed", "device", "readout", "env", "solve", "crosstalk", "tls", "output"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    dev_table = dict(data.get("device", {"preset": "sample_A"}))
    if device_override is not None:
        dev_table = {"preset": device_override}
    device = device_from_table(dev_table)
    readout_table = dict(data.get("readout", {}))
    try:
        readout = ReadoutModel.from_device(device, **readout_table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[readout]: {exc}") from exc
    xt = data.get("crosstalk")
    try:
        crosstalk = CrosstalkMatrix.from_dict(xt) if xt else CrosstalkMatrix.identity()
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"[crosstalk]: {exc}") from exc
    out_table = dict(data.get("output", {}))
    if "formats" in out_table:
        out_table["formats"] = tuple(out_table["formats"])
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return RunConfig(
        device=device,
        readout=readout,
        env=_build(NoiseEnvironment, data.get("env", {}), "env"),
        solve=_build(SolveOptions, data.get("solve", {}), "solve"),
        crosstalk=crosstalk,
        tls=_build(TLSSettings, data.get("tls", {}), "tls"),
        output=_build(OutputSettings, out_table, "output"),
        seed=seed,
    )


def default_config_path() -> Path | None:
    value = os.environ.get(CONFIG_ENV_VAR)
    return Path(value) if value else None


def load_config(path: str | Path | None = None, device_override: str | None = None) -> RunConfig:
    """Read ``path`` (or ``$FLUXQ_CONFIG``); with neither, built-in defaults for sample A."""
    path = Path(path) if path is not None else default_config_path()
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data, device_override)
