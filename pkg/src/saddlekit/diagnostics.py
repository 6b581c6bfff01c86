"""Checks on computed saddle fields: pointwise bound, energy growth, asymptotics, symmetry."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .nonlinearity import NonlinearitySpec
from .profile1d import Profile1D
from .solver import CONE_EDGE, INTERIOR, SaddleField, TriGrid, extend_odd

SQRT2 = math.sqrt(2.0)
BOUND_TOL = 1e-8
MONOTONE_TOL = 1e-8


@dataclass
class DiagnosticsReport:
    bound_violation: float
    energy_by_R: list = field(default_factory=list)     # [(R, E, E / R^(2m-1))]
    asym_sup_u: float = float("nan")
    asym_sup_grad: float = float("nan")
    monotonicity_minima: dict = field(default_factory=dict)
    symmetry_defect: float = float("nan")

    def to_json(self) -> dict:
        d = asdict(self)
        d["energy_by_R"] = [[float(x) for x in row] for row in self.energy_by_R]
        bad = [k for k, v in _flatten(d) if isinstance(v, float) and not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite diagnostics entries: {bad}")
        return d

    def passed(self) -> dict:
        mono = self.monotonicity_minima
        return {
            "bound": self.bound_violation <= BOUND_TOL,
            "monotonicity": all(v >= -MONOTONE_TOL for v in mono.values()),
            "symmetry": self.symmetry_defect == 0.0,
        }


def _flatten(d, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def profile_field(grid: TriGrid, profile: Profile1D) -> np.ndarray:
    """u0((s - t)/sqrt2) on the whole (n+1)^2 lattice (already odd across the cone)."""
    return profile.eval((grid.s - grid.t) / SQRT2)


def check_pointwise_bound(field_: SaddleField, profile: Profile1D) -> float:
    """max over triangle nodes of |u| - |u0(z)|; the bound holds when this is <= 1e-8."""
    g = field_.grid
    inside = g.inside
    u = field_.values[inside]
    env = np.abs(profile.eval(g.z[inside]))
    return float(np.max(np.abs(u) - env))


def _cell_energy(full: np.ndarray, h: float, m: int, spec: NonlinearitySpec, R_eval: float):
    n1 = full.shape[0]
    c = (np.arange(n1 - 1) + 0.5) * h
    S, T = np.meshgrid(c, c, indexing="ij")
    u00, u10, u01, u11 = full[:-1, :-1], full[1:, :-1], full[:-1, 1:], full[1:, 1:]
    uc = 0.25 * (u00 + u10 + u01 + u11)
    us = 0.5 * ((u10 + u11) - (u00 + u01)) / h
    ut = 0.5 * ((u01 + u11) - (u00 + u10)) / h
    dens = (S * T) ** (m - 1) * (0.5 * (us**2 + ut**2) + spec.G(uc))
    mask = S**2 + T**2 < R_eval**2
    return float(np.sum(dens[mask]) * h * h)


def energy(field_: SaddleField, R_eval: float, spec: NonlinearitySpec) -> float:
    """int s^(m-1) t^(m-1) ((u_s^2 + u_t^2)/2 + G(u)) over the quarter disc of radius R_eval.

    Midpoint rule per lattice cell on the odd extension; the dimensional
    constant in front is set to 1.
    """
    g = field_.grid
    if R_eval > g.R + 1e-12:
        raise ValueError(f"R_eval={R_eval} exceeds the grid radius {g.R}")
    return _cell_energy(extend_odd(field_), g.h, g.m, spec, R_eval)


def energy_of_profile(grid: TriGrid, profile: Profile1D, R_eval: float,
                      spec: NonlinearitySpec) -> float:
    """Energy of U = u0(z) with the same quadrature as :func:`energy`."""
    return _cell_energy(profile_field(grid, profile), grid.h, grid.m, spec, R_eval)


def energy_ladder(field_: SaddleField, radii, spec: NonlinearitySpec) -> list:
    m = field_.grid.m
    out = []
    for r in radii:
        e = energy(field_, r, spec)
        out.append((float(r), e, e / r ** (2 * m - 1)))
    return out


def energy_spread(ladder) -> float:
    """max/min - 1 of the normalised energies E / R^(2m-1)."""
    ratios = np.array([row[2] for row in ladder])
    return float(ratios.max() / ratios.min() - 1.0)


def _gradient(full: np.ndarray, h: float):
    # central inside, one-sided on the lattice edges
    gs, gt = np.gradient(full, h, h, edge_order=1)
    return gs, gt


def check_asymptotics(field_: SaddleField, profile: Profile1D, band) -> tuple[float, float]:
    """sup |u - u0(z)| and sup |grad_h u - grad U| over triangle nodes with y in ``band``."""
    g = field_.grid
    y_lo, y_hi = band
    sel = g.inside & (g.y >= y_lo) & (g.y <= y_hi)
    if not sel.any():
        raise ValueError(f"no grid nodes with y in [{y_lo}, {y_hi}]")
    full = extend_odd(field_)
    z = g.z[sel]
    gap_u = float(np.max(np.abs(full[sel] - profile.eval(z))))
    gs, gt = _gradient(full, g.h)
    du = profile.eval_deriv(z) / SQRT2
    gap_g = float(np.max(np.hypot(gs[sel] - du, gt[sel] + du)))
    return gap_u, gap_g


def check_symmetry(full: np.ndarray) -> float:
    """sup |u(s, t) + u(t, s)| of a field on the full lattice square."""
    return float(np.max(np.abs(full + full.T)))


def monotonicity_minima(field_: SaddleField) -> dict:
    """Minima over interior nodes of -D_t u, D_s u, D_y u and D_z u (forward differences).

    Each is >= -1e-8 for the maximal solution. D_y steps (s, t) -> (s+h, t+h),
    D_z steps (s, t+h) -> (s+h, t), i.e. along the two diagonals of a cell.
    """
    g = field_.grid
    u = field_.values
    n = g.n
    tags = g.tags
    ii, jj = np.nonzero(tags == INTERIOR)
    ok_s = ii + 1 <= n
    ii, jj = ii[ok_s], jj[ok_s]
    d_t = u[ii, jj + 1] - u[ii, jj]
    d_s = u[ii + 1, jj] - u[ii, jj]
    d_y = u[ii + 1, jj + 1] - u[ii, jj]
    d_z = u[ii + 1, jj] - u[ii, jj + 1]
    return {"minus_dt": float(np.min(-d_t)), "ds": float(np.min(d_s)),
            "dy": float(np.min(d_y)), "dz": float(np.min(d_z))}


def residual_field(field_: SaddleField, spec: NonlinearitySpec) -> np.ndarray:
    """-Delta u - (m-1)(u_s/s + u_t/t) - f(u) with fourth-order stencils, NaN where undefined.

    Evaluated on the odd extension, reflected evenly across s = 0 and t = 0;
    nodes within two cells of the outer edges and the axes are left NaN.
    Because the stencils differ from the solver's, this measures the
    truncation error of the computed field rather than the solve residual.
    """
    g = field_.grid
    h, m = g.h, g.m
    full = extend_odd(field_)
    p = np.pad(full, ((2, 0), (2, 0)), mode="reflect")
    core = p[2:-2, 2:-2]

    def d2(axis):
        sl = lambda k: np.roll(p, -k, axis=axis)[2:-2, 2:-2]  # noqa: E731
        return (-sl(2) + 16 * sl(1) - 30 * core + 16 * sl(-1) - sl(-2)) / (12 * h * h)

    def d1(axis):
        sl = lambda k: np.roll(p, -k, axis=axis)[2:-2, 2:-2]  # noqa: E731
        return (-sl(2) + 8 * sl(1) - 8 * sl(-1) + sl(-2)) / (12 * h)

    n = g.n
    S, T = g.s[: n - 1, : n - 1], g.t[: n - 1, : n - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        first = (m - 1) * (d1(0) / S + d1(1) / T) if m > 1 else 0.0
        res = -(d2(0) + d2(1)) - first - spec.f(core)
    out = np.full((n + 1, n + 1), np.nan)
    blk = out[: n - 1, : n - 1]
    blk[:] = res
    out[:, :2] = np.nan
    out[n - 1:, :] = np.nan
    out[~g.inside] = np.nan
    out[g.tags == CONE_EDGE] = np.nan
    return out


def residual_sup(field_: SaddleField, spec: NonlinearitySpec, r_min: float = 1.0,
                 edge: float = 1.0, h_coarse: float | None = None) -> float:
    """sup of |residual_field| over triangle nodes with |(s,t)| >= r_min and s <= R - edge.

    With ``h_coarse`` only nodes of the coarser lattice are used, so runs at
    different h are compared on the same point set.
    """
    g = field_.grid
    r = residual_field(field_, spec)
    sel = np.isfinite(r) & (np.hypot(g.s, g.t) >= r_min) & (g.s <= g.R - edge) & (g.t >= r_min)
    if h_coarse is not None:
        step = int(round(h_coarse / g.h))
        mask = np.zeros_like(sel)
        mask[::step, ::step] = True
        sel &= mask
    return float(np.max(np.abs(r[sel])))


def build_report(maximal: SaddleField, profile: Profile1D, spec: NonlinearitySpec,
                 energy_radii=None, band=None) -> DiagnosticsReport:
    """Full diagnostics for a maximal field (bound, energies, asymptotics, monotonicity)."""
    g = maximal.grid
    if energy_radii is None:
        energy_radii = [g.R / 2, 3 * g.R / 4, g.R]
    if band is None:
        band = (g.R / 2, 3 * g.R / 4)
    gap_u, gap_g = check_asymptotics(maximal, profile, band)
    return DiagnosticsReport(
        bound_violation=check_pointwise_bound(maximal, profile),
        energy_by_R=energy_ladder(maximal, energy_radii, spec),
        asym_sup_u=gap_u,
        asym_sup_grad=gap_g,
        monotonicity_minima=monotonicity_minima(maximal),
        symmetry_defect=check_symmetry(extend_odd(maximal)),
    )
