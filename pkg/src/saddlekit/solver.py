"""Maximal and minimal saddle solutions on the triangle T_R = {0 <= t <= s <= R}.

Both are obtained by monotone iteration of the shifted problem
    (-Delta - f'(M)) u_{k+1} = g(u_k),   g(u) = f(u) - f'(M) u,
whose operator is an M-matrix for every grid, so each iterate exists and the
sequence is monotone when started from a super- or subsolution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .nonlinearity import NonlinearitySpec, g_extended, linear_growth_threshold
from .operators import (Assembled, FactorizedOperator, assemble,
                        check_diagonal_dominance)
from .profile1d import LatticeProfile, Profile1D, lattice_profile

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

INTERIOR, CONE_EDGE, OUTER_EDGE, AXIS, OUTSIDE = 0, 1, 2, 3, -1
TAG_NAMES = {INTERIOR: "interior", CONE_EDGE: "cone_edge", OUTER_EDGE: "outer_edge",
             AXIS: "axis"}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TriGrid:
    """Uniform lattice on T_R. Arrays are (n+1, n+1), index [i, j] <-> (s, t) = (i h, j h).

    Nodes with j > i lie outside the triangle and carry tag OUTSIDE. Each node
    of the triangle has one tag, assigned with priority cone_edge, outer_edge,
    axis: so (R, R) and the origin are cone_edge and (R, 0) is outer_edge.
    """

    m: int
    R: float
    h: float
    n: int

    @property
    def coords(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def s(self) -> np.ndarray:
        return np.broadcast_to(self.coords[:, None], (self.n + 1, self.n + 1))

    @property
    def t(self) -> np.ndarray:
        return np.broadcast_to(self.coords[None, :], (self.n + 1, self.n + 1))

    @property
    def y(self) -> np.ndarray:
        return (self.s + self.t) / SQRT2

    @property
    def z(self) -> np.ndarray:
        return (self.s - self.t) / SQRT2

    @property
    def tags(self) -> np.ndarray:
        i, j = np.indices((self.n + 1, self.n + 1))
        tags = np.full(i.shape, OUTSIDE, dtype=np.int8)
        tags[j <= i] = INTERIOR
        tags[(j == 0) & (i <= self.n)] = AXIS
        tags[i == self.n] = OUTER_EDGE
        tags[j == i] = CONE_EDGE
        return tags

    @property
    def inside(self) -> np.ndarray:
        return self.tags != OUTSIDE

    @property
    def unknown(self) -> np.ndarray:
        tags = self.tags
        return (tags == INTERIOR) | (tags == AXIS)

    @property
    def num_nodes(self) -> int:
        return (self.n + 1) * (self.n + 2) // 2


def make_grid(m: int, R: float, h: float) -> TriGrid:
    if m < 1:
        raise GridError("m must be >= 1")
    n_float = R / h
    n = int(round(n_float))
    if abs(n - n_float) > 1e-9 * max(1.0, n_float):
        raise GridError(f"h={h} does not divide R={R}")
    if n < 8:
        raise GridError("R/h must be at least 8")
    return TriGrid(m=m, R=float(R), h=float(h), n=n)


@dataclass
class Discretization:
    grid: TriGrid
    op: Assembled
    shift: float
    _factor: FactorizedOperator | None = None

    @property
    def factor(self) -> FactorizedOperator:
        if self._factor is None:
            self._factor = FactorizedOperator(self.op.A)
        return self._factor

    def apply(self, full: np.ndarray) -> np.ndarray:
        """L applied to a lattice field at the unknown nodes (boundary values included)."""
        v = np.where(np.isfinite(full), full, 0.0)
        return self.op.A @ v[self.op.unknown] + self.op.B @ v.ravel()


def discretize(m: int, R: float, h: float, shift: float) -> Discretization:
    """Grid plus the operator -Delta_h + shift (shift = -f'(M) > 0 for the iteration)."""
    grid = make_grid(m, R, h)
    op = assemble(grid.s, grid.t, grid.h, m, grid.unknown, diag_shift=shift)
    check_diagonal_dominance(op)
    return Discretization(grid=grid, op=op, shift=float(shift))


@dataclass
class IterationRecord:
    k: int
    update: float          # sup |u_k - u_{k-1}|
    residual: float        # relative residual of the linear solve
    increase: float        # max (u_k - u_{k-1}), signed monotonicity witness


@dataclass
class SaddleField:
    grid: TriGrid
    values: np.ndarray     # NaN outside the triangle
    kind: str
    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def final_update(self) -> float:
        return self.history[-1].update if self.history else 0.0

    @property
    def final_residual(self) -> float:
        return self.history[-1].residual if self.history else 0.0

    def metadata(self) -> dict:
        g = self.grid
        return {"m": g.m, "R": g.R, "h": g.h, "kind": self.kind,
                "iterations": self.iterations, "final_update": self.final_update,
                "final_residual": self.final_residual}


def envelope(profile: Profile1D, h: float, kind: str = "continuous"):
    """The function of z used as starting iterate and outer data of the maximal problem.

    ``continuous`` is u0 itself. ``lattice`` is the heteroclinic of the
    three-point scheme with step h/sqrt2, which is an exact discrete
    supersolution on the lattice (u0 is one only up to O(h^2)).
    """
    if kind == "continuous":
        return profile
    if kind == "lattice":
        return lattice_profile(profile, h / SQRT2)
    raise ValueError(f"unknown envelope {kind!r}; use 'continuous' or 'lattice'")


def profile_on_grid(grid: TriGrid, profile: Profile1D | LatticeProfile) -> np.ndarray:
    """u0((s - t)/sqrt 2) on the triangle, NaN outside; exactly 0 on the cone edge."""
    out = np.full((grid.n + 1, grid.n + 1), np.nan)
    inside = grid.inside
    out[inside] = profile.eval(grid.z[inside])
    out[grid.tags == CONE_EDGE] = 0.0
    return out


def _monotone_iteration(disc: Discretization, spec: NonlinearitySpec, start: np.ndarray,
                        tol: float, k_max: int, kind: str) -> SaddleField:
    op = disc.op
    bc = op.bc_rhs(start)
    u = op.gather(start)
    history: list[IterationRecord] = []
    converged = False
    for k in range(1, k_max + 1):
        u_new, res = disc.factor.solve(g_extended(spec, u) + bc)
        diff = u_new - u
        rec = IterationRecord(k=k, update=float(np.max(np.abs(diff))), residual=res,
                              increase=float(np.max(diff)))
        history.append(rec)
        u = u_new
        if rec.update <= tol:
            converged = True
            break
    if not converged:
        log.warning("%s iteration not converged after %d steps (update %.2e)",
                    kind, k_max, history[-1].update)
    values = op.scatter(u, start)
    return SaddleField(grid=disc.grid, values=values, kind=kind, history=history,
                       converged=converged)


def iterate_maximal(disc: Discretization, spec: NonlinearitySpec,
                    profile: Profile1D | LatticeProfile,
                    tol: float = 1e-10, k_max: int = 500) -> SaddleField:
    """Downward iteration from u0(z) with data 0 on the cone and u0(z) on {s = R}."""
    start = profile_on_grid(disc.grid, profile)
    field_ = _monotone_iteration(disc, spec, start, tol, k_max, "maximal")
    field_.meta["start"] = "lattice" if isinstance(profile, LatticeProfile) else "u0(z)"
    return field_


def subsolution_seed(disc: Discretization, spec: NonlinearitySpec) -> tuple[np.ndarray, float, float]:
    """eps * phi_1 on the unknown nodes, with phi_1 the principal Dirichlet eigenfunction.

    Returns (lattice array, lambda_1, eps). Requires lambda_1 < f'(0).
    """
    from .stability import principal_eigenpair

    grid = disc.grid
    lam, phi = principal_eigenpair(grid.s, grid.t, grid.h, grid.m, grid.unknown)
    fp0 = float(spec.f_prime(0.0))
    if not lam < fp0:
        raise GridError(f"lambda_1={lam:.4f} >= f'(0)={fp0}; enlarge R for a subsolution")
    # margin against the eigen-solver tolerance
    rho = linear_growth_threshold(spec, lam + 0.5 * (fp0 - lam))
    eps = 0.5 * rho
    seed = np.where(grid.unknown, eps * np.nan_to_num(phi), 0.0)
    seed[~grid.inside] = np.nan
    return seed, lam, eps


def iterate_minimal(disc: Discretization, spec: NonlinearitySpec, tol: float = 1e-10,
                    k_max: int = 500) -> SaddleField:
    """Positive solution with zero data on the whole boundary of T_R.

    Downward from the constant M and upward from eps * phi_1; the returned
    field is the downward limit, the upward one is kept in ``meta``.
    """
    grid = disc.grid
    inside = grid.inside
    top = np.where(inside, spec.M, np.nan)
    top[grid.tags == CONE_EDGE] = 0.0
    top[grid.tags == OUTER_EDGE] = 0.0
    down = _monotone_iteration(disc, spec, top, tol, k_max, "minimal")

    seed, lam, eps = subsolution_seed(disc, spec)
    up = _monotone_iteration(disc, spec, seed, tol, k_max, "minimal_upward")
    gap = float(np.nanmax(np.abs(down.values - up.values)))
    down.meta.update({"upward_values": up.values, "upward_history": up.history,
                      "upward_converged": up.converged, "gap": gap, "lambda1": lam,
                      "eps": eps, "uniqueness_warning": gap > 10.0 * grid.h**2,
                      "start": "M"})
    down.converged = down.converged and up.converged
    return down


def extend_odd(field_: SaddleField) -> np.ndarray:
    """Odd reflection across the cone: full (n+1)^2 array with u(t, s) = -u(s, t)."""
    v = field_.values
    out = np.where(np.isfinite(v), v, 0.0)
    lower = np.tril(out, -1)
    full = lower - lower.T
    return full


def solve_saddle(m: int, R: float, h: float, spec: NonlinearitySpec, profile: Profile1D,
                 tol: float = 1e-10, k_max: int = 500,
                 envelope_kind: str = "continuous") -> tuple[SaddleField, SaddleField]:
    """Maximal and minimal fields on one shared discretization."""
    disc = discretize(m, R, h, -spec.fprime_M)
    env = envelope(profile, disc.grid.h, envelope_kind)
    return (iterate_maximal(disc, spec, env, tol, k_max),
            iterate_minimal(disc, spec, tol, k_max))
