"""Coordinates adapted to the Simons cone {s = t} in R^{2m}.

s = |x^1|, t = |x^2| for x = (x^1, x^2) in R^m x R^m, and the rotated pair
y = (s + t)/sqrt(2), z = (s - t)/sqrt(2); |z| is the distance to the cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConeCoords:
    m: int
    s: float
    t: float

    @property
    def y(self) -> float:
        return (self.s + self.t) / SQRT2

    @property
    def z(self) -> float:
        return (self.s - self.t) / SQRT2

    @property
    def on_cone(self) -> bool:
        return self.z == 0.0

    @classmethod
    def from_yz(cls, m: int, y: float, z: float) -> "ConeCoords":
        if abs(z) > y:
            raise ValueError("need |z| <= y")
        return cls(m, max((y + z) / SQRT2, 0.0), max((y - z) / SQRT2, 0.0))


def st_to_yz(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return (s + t) / SQRT2, (s - t) / SQRT2


def yz_to_st(y, z):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return (y + z) / SQRT2, (y - z) / SQRT2


def _split(m: int, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2 * m:
        raise ValueError(f"point has dimension {x.shape[-1]}, expected 2m = {2 * m}")
    return x[..., :m], x[..., m:]


def to_cone_coords(m: int, x) -> ConeCoords:
    x1, x2 = _split(m, x)
    return ConeCoords(m, float(np.linalg.norm(x1)), float(np.linalg.norm(x2)))


def dist_to_cone(c: ConeCoords) -> float:
    return abs(c.s - c.t) / SQRT2


def foot_point(m: int, x) -> np.ndarray:
    """Nearest point of the cone, (alpha x^1, beta x^2) with alpha s = beta t = (s + t)/2."""
    x1, x2 = _split(m, x)
    s, t = np.linalg.norm(x1), np.linalg.norm(x2)
    if s == 0.0 or t == 0.0:
        raise ValueError("foot point formula needs s > 0 and t > 0")
    r = 0.5 * (s + t)
    return np.concatenate([x1 * (r / s), x2 * (r / t)])
