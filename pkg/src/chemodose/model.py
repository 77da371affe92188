"""Model constants and the two nonlinearities of the phase-field system.

The tumour fraction phi lives near [-1, 1] (phi = 1 tumour, phi = -1
healthy); sigma is a relative nutrient concentration in [0, 1]. The
interpolant h weights every reaction by the local tumour fraction and
must map into [0, 1] with h(-1) = 0 and h(1) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Rate and mobility constants of the state system.

    P      proliferation rate (nutrient-driven growth),
    Acal   apoptosis rate,
    Ccal   nutrient consumption rate,
    Bcal   nutrient supply rate toward sigma_S,
    alpha  drug kill rate (scales the control),
    A      double-well scale in the chemical potential,
    B      interface energy scale (diffuse-interface width ~ sqrt(B/A)).
    """

    P: float = 1.0
    Acal: float = 0.5
    Ccal: float = 1.0
    Bcal: float = 1.0
    alpha: float = 2.0
    A: float = 1.0
    B: float = 1e-3

    def __post_init__(self):
        for name in ("P", "Acal", "Ccal", "Bcal", "alpha"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for name in ("A", "B"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class DoubleWellPotential:
    """Smooth double-well psi with its first two derivatives.

    All three callables must accept and return float64 arrays
    elementwise. psi must be bounded below.
    """

    psi: Callable
    psi1: Callable
    psi2: Callable


@dataclass(frozen=True)
class Interpolant:
    """C^1 monotone interpolant h: R -> [0, 1] with derivative hprime."""

    hval: Callable
    hprime: Callable


def default_potential() -> DoubleWellPotential:
    """Quartic well psi(s) = (1 - s^2)^2 / 4 with minima at s = +-1."""
    return DoubleWellPotential(
        psi=lambda s: 0.25 * (1.0 - s * s) ** 2,
        psi1=lambda s: s * s * s - s,
        psi2=lambda s: 3.0 * s * s - 1.0,
    )


def _smoothstep(s):
    t = np.clip((np.asarray(s, dtype=np.float64) + 1.0) * 0.5, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_prime(s):
    t = np.clip((np.asarray(s, dtype=np.float64) + 1.0) * 0.5, 0.0, 1.0)
    # d/ds = dh/dt * dt/ds with dt/ds = 1/2; zero outside [-1, 1]
    return 15.0 * (t * (1.0 - t)) ** 2


def default_interpolant() -> Interpolant:
    """Clamped quintic smoothstep in t = (s+1)/2.

    C^2 on all of R: value and the first two derivatives vanish at s = -1
    and match {1, 0, 0} at s = +1, so the clamp introduces no kinks in h
    or h'. h(0) = 1/2, and the Lipschitz constant is h'(0) = 15/16.
    """
    return Interpolant(hval=_smoothstep, hprime=_smoothstep_prime)
