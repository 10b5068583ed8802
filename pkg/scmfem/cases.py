from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import PolygonalDomain, make_domain, polar_coordinates

PointFunction = Callable[[np.ndarray], np.ndarray]

PAPER_EXPONENT = -0.4999


@dataclass(frozen=True)
class Case:
    name: str
    u: PointFunction
    f: Optional[PointFunction] = None
    exact: Optional[PointFunction] = None
    singular_strength: float = 0.0


def _xy(points: np.ndarray) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, 2)


def corner_power(domain: PolygonalDomain, exponent: float) -> PointFunction:
    """r^a sin(a theta) in the corner's polar coordinates; harmonic for any a."""
    def _value(points: np.ndarray) -> np.ndarray:
        r, theta = polar_coordinates(domain, points)
        with np.errstate(divide="ignore", invalid="ignore"):
            return r**exponent * np.sin(exponent * theta)

    return _value


def paper_case(omega: float, exponent: float = PAPER_EXPONENT) -> Case:
    """Harmonic y = r^a sin(a theta) with f = 0 and u = y on the boundary."""
    if not (math.pi < omega < 2 * math.pi):
        raise ValueError(f"paper case needs a reentrant corner, omega in (pi, 2*pi), got {omega!r}")
    if not (-1.0 < exponent < 0.0):
        raise ValueError(f"data exponent must lie in (-1, 0), got {exponent!r}")
    y = corner_power(make_domain(omega), exponent)
    return Case(name="paper", u=y, f=None, exact=y, singular_strength=exponent)


def smooth_case(omega: float) -> Case:
    def y(points: np.ndarray) -> np.ndarray:
        xy = _xy(points)
        return xy[:, 0] * xy[:, 1]

    return Case(name="smooth", u=y, exact=y)


def linear_case(omega: float) -> Case:
    def y(points: np.ndarray) -> np.ndarray:
        return _xy(points)[:, 0].copy()

    return Case(name="linear", u=y, exact=y)


def zero_case(omega: float) -> Case:
    def y(points: np.ndarray) -> np.ndarray:
        return np.zeros(_xy(points).shape[0])

    return Case(name="zero", u=y, exact=y)


CASES: dict[str, Callable[[float], Case]] = {
    "paper": paper_case,
    "smooth": smooth_case,
    "linear": linear_case,
    "zero": zero_case,
}


def make_case(name: str, omega: float, exponent: Optional[float] = None) -> Case:
    try:
        factory = CASES[name]
    except KeyError:
        raise ValueError(f"Unknown case {name!r} (choose from {sorted(CASES)})") from None
    if name == "paper" and exponent is not None:
        return paper_case(omega, exponent)
    return factory(omega)
