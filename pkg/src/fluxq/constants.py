"""CODATA 2018 physical constants (SI, exact where defined)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = 6.62607015e-34
    hbar: float = 6.62607015e-34 / (2.0 * 3.141592653589793)
    e: float = 1.602176634e-19
    k_b: float = 1.380649e-23
    phi_0: float = 6.62607015e-34 / (2.0 * 1.602176634e-19)


CONST = PhysicalConstants()

GHZ = 1e9
MHZ = 1e6
FF = 1e-15
