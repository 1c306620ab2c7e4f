"""Beta-distribution helpers and the homogeneous PBR material record.

A network elsewhere predicts Beta parameters over metallic and roughness;
here we only need the density (for diagnostics) and the mode (the value
actually exported).  Everything is closed form via log-gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not (math.isfinite(v) and v > 0.0):
                raise MaterialError(f"{name} must be positive and finite, got {v}")


def beta_log_likelihood(params: BetaParams, x: float) -> float:
    """log pdf of Beta(alpha, beta) at x in the open interval (0, 1)."""
    if not 0.0 < x < 1.0:
        raise MaterialError(f"boundary support: x must lie in (0, 1), got {x}")
    a, b = params.alpha, params.beta
    log_norm = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_norm


def beta_pdf(params: BetaParams, x: float) -> float:
    return math.exp(beta_log_likelihood(params, x))


def beta_mode(params: BetaParams) -> float:
    """Most likely value of Beta(alpha, beta), with total conventions.

    Interior mode (alpha-1)/(alpha+beta-2) when both parameters exceed 1;
    mass piles at 0 or 1 when exactly one does; the bathtub-shaped case
    (both <= 1) returns 0.5 by convention so the operation stays total.
    """
    a, b = params.alpha, params.beta
    if a > 1.0 and b > 1.0:
        return (a - 1.0) / (a + b - 2.0)
    if a <= 1.0 and b > 1.0:
        return 0.0
    if a > 1.0 and b <= 1.0:
        return 1.0
    return 0.5


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, float(v)))


@dataclass
class PbrMaterial:
    """Object-wide metallic-roughness material; scalars clamped to [0, 1]."""

    metallic: float = 0.0
    roughness: float = 0.5
    albedo_texture: Optional[str] = None
    normal_texture: Optional[str] = None

    def __post_init__(self):
        self.metallic = _clamp01(self.metallic)
        self.roughness = _clamp01(self.roughness)


def material_from_beta(metallic: BetaParams, roughness: BetaParams) -> PbrMaterial:
    """Collapse predicted distributions to their modes, as exported."""
    return PbrMaterial(metallic=beta_mode(metallic), roughness=beta_mode(roughness))
