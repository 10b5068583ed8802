from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .quadrature import ElementQuadrature, QuadratureError
from .singular_complement import AugmentedFunction

PointFunction = Callable[[np.ndarray], np.ndarray]

DEPTH_STABILITY_TOL = 1e-4


def l2_error(
    approx: AugmentedFunction,
    exact: PointFunction,
    singular_class: float = 0.0,
    depth_scale: float = 1.0,
) -> float:
    """||exact - approx||_{L2}, with the corner part recomputed at twice
    depth_scale; a relative change above DEPTH_STABILITY_TOL is a quadrature failure."""
    alpha = 2.0 * min(singular_class, -approx.domain.lam if approx.singular.coefficient else 0.0)
    plan = ElementQuadrature(approx.mesh, alpha, depth_scale=depth_scale)

    def _integrand(chunk) -> np.ndarray:
        diff = np.asarray(exact(chunk.points), dtype=float) - approx.values_at(chunk)
        return diff * diff

    regular, corner = plan.integrate_parts(_integrand)
    deeper = plan.with_depth(2.0 * depth_scale).integrate_corner(_integrand)
    total = regular + corner
    refined = regular + deeper
    scale = max(abs(refined), np.finfo(float).tiny)
    if abs(refined - total) > DEPTH_STABILITY_TOL * scale and abs(refined - total) > 1e-28:
        raise QuadratureError(
            f"L2 error integral unstable under depth doubling ({total!r} vs {refined!r})"
        )
    return math.sqrt(max(refined, 0.0))


def eoc(e_prev: float, e_next: float, h_prev: float, h_next: float) -> float:
    values = (e_prev, e_next, h_prev, h_next)
    if any(not (v > 0.0) for v in values):
        raise ValueError(f"eoc needs positive errors and mesh sizes, got {values}")
    if h_prev == h_next:
        raise ValueError("eoc needs two different mesh sizes")
    return math.log(e_prev / e_next) / math.log(h_prev / h_next)
