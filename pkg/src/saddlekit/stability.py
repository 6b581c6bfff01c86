"""Second variation of the energy at saddle solutions.

Contains the weighted quadratic form in (y, z) coordinates, the test
functions used to exhibit instability in dimension 6, the radial Hardy
functional, and a principal-eigenpair solver for the reduced operator.

All integrals carry the weight (y^2 - z^2)^(m-1) = (2 s t)^(m-1) and drop
the positive surface constant of the (s, t) reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .nonlinearity import NonlinearitySpec
from .operators import FactorizedOperator, assemble
from .profile1d import Profile1D, dissipation_integral
from .solver import SaddleField, extend_odd

SQRT2 = math.sqrt(2.0)
SUPPORT_MARGIN = 0.9


class EigenSolverError(RuntimeError):
    pass


class SupportError(ValueError):
    """A test function does not fit on the computed grid."""

    def __init__(self, message: str, required_R: float):
        super().__init__(message)
        self.required_R = required_R


# ---------------------------------------------------------------- radial part

def paper_eta(rho, rho1: float, rho2: float, alpha: float, strict: bool = True):
    """Lipschitz cut-off supported on [rho1, rho2].

    Linear ramp on [rho1, 2 rho1] up to 1 - rho2^-alpha, constant on
    [2 rho1, 1], then rho^-alpha - rho2^-alpha on [1, rho2]. With
    ``strict`` the admissible range 0 < 2 rho1 < 1 < rho2, 3/2 < alpha < 2 is
    enforced; ``strict=False`` only requires the ordering of the break points
    and alpha > 0 (used by parameter sweeps that leave the admissible range).
    """
    _check_eta_params(rho1, rho2, alpha, strict)
    r = np.asarray(rho, dtype=float)
    top = 1.0 - rho2 ** (-alpha)
    out = np.zeros_like(r)
    ramp = (r >= rho1) & (r < 2 * rho1)
    flat = (r >= 2 * rho1) & (r < 1.0)
    tail = (r >= 1.0) & (r <= rho2)
    out[ramp] = top * (r[ramp] - rho1) / rho1
    out[flat] = top
    out[tail] = r[tail] ** (-alpha) - rho2 ** (-alpha)
    return float(out) if out.ndim == 0 else out


def paper_eta_deriv(rho, rho1: float, rho2: float, alpha: float, strict: bool = True):
    """Derivative of :func:`paper_eta` (right derivative at the kinks)."""
    _check_eta_params(rho1, rho2, alpha, strict)
    r = np.asarray(rho, dtype=float)
    out = np.zeros_like(r)
    ramp = (r >= rho1) & (r < 2 * rho1)
    tail = (r >= 1.0) & (r < rho2)
    out[ramp] = (1.0 - rho2 ** (-alpha)) / rho1
    out[tail] = -alpha * r[tail] ** (-alpha - 1.0)
    return float(out) if out.ndim == 0 else out


def _check_eta_params(rho1, rho2, alpha, strict):
    if strict:
        if not (0.0 < 2.0 * rho1 < 1.0 < rho2):
            raise ValueError("need 0 < 2*rho1 < 1 < rho2")
        if not (1.5 < alpha < 2.0):
            raise ValueError("need 3/2 < alpha < 2")
    else:
        if not (0.0 < 2.0 * rho1 < 1.0 < rho2) or not alpha > 0.0:
            raise ValueError("need 0 < 2*rho1 < 1 < rho2 and alpha > 0")


@dataclass(frozen=True)
class Eta:
    """A compactly supported radial profile with its derivative and kinks."""

    func: Callable
    deriv: Callable
    support: tuple[float, float]
    kinks: tuple[float, ...] = ()

    @classmethod
    def paper(cls, rho1: float, rho2: float, alpha: float, strict: bool = True) -> "Eta":
        _check_eta_params(rho1, rho2, alpha, strict)
        return cls(func=lambda r: paper_eta(r, rho1, rho2, alpha, strict),
                   deriv=lambda r: paper_eta_deriv(r, rho1, rho2, alpha, strict),
                   support=(rho1, rho2), kinks=(2 * rho1, 1.0))


def rho_integral(m: int, eta: Eta, tol: float = 1e-11) -> float:
    """int rho^(2m-2) (eta'^2 - 2(m-1) eta^2 / rho^2) d rho over the support of eta.

    Adaptive quadrature on each smooth piece between the kink points.
    """
    lo, hi = eta.support
    if not 0.0 < lo < hi:
        raise ValueError("eta must be supported in (0, inf)")
    pts = sorted({lo, hi, *[k for k in eta.kinks if lo < k < hi]})
    c = 2.0 * (m - 1)

    def integrand(r):
        return r ** (2 * m - 2) * (float(eta.deriv(r)) ** 2 - c * float(eta.func(r)) ** 2 / r**2)

    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, err = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=200)
        if not err <= 100 * tol * max(1.0, abs(val)):
            raise RuntimeError(f"rho integral did not converge on [{a}, {b}] (err {err:.2e})")
        total += val
    return total


def hardy_margin(m: int) -> Fraction:
    """(2m-3)^2/4 - 2(m-1), exactly; equals (n^2 - 10 n + 17)/4 with n = 2m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Fraction((2 * m - 3) ** 2, 4) - 2 * (m - 1)


def eta_family_search(m: int, rho1_grid, rho2_grid, alpha_grid) -> tuple[float, tuple]:
    """Minimum of :func:`rho_integral` over a parameter grid of :func:`paper_eta`.

    The grids may leave the admissible alpha range; eta is then built with
    ``strict=False``. Returns (minimum, (rho1, rho2, alpha) attaining it).
    """
    best, arg = math.inf, None
    for r1 in rho1_grid:
        for r2 in rho2_grid:
            for al in alpha_grid:
                val = rho_integral(m, Eta.paper(r1, r2, al, strict=False))
                if val < best:
                    best, arg = val, (float(r1), float(r2), float(al))
    return best, arg


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """Perturbation of a saddle solution, as a function of (y, z).

    kind ``eta_uz``: xi = eta(y / a) * v_z for the field v being tested.
    kind ``cone_vanishing``: xi = z * bump(y, z), given by ``func``.
    kind ``explicit``: ``func(y, z)`` returns xi directly.
    ``y_support`` bounds the y-projection of the support.
    """

    __test__ = False  # not a pytest class

    kind: str
    y_support: tuple[float, float]
    a: float = 1.0
    eta: Eta | None = None
    func: Callable | None = None
    scale: float = 1.0
    params: dict = field(default_factory=dict)

    @classmethod
    def eta_uz(cls, a: float, eta: Eta) -> "TestFunction":
        if a < 1:
            raise ValueError("a must be >= 1")
        lo, hi = eta.support
        return cls(kind="eta_uz", y_support=(a * lo, a * hi), a=float(a), eta=eta)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.kind, self.y_support, self.a, self.eta, self.func,
                            self.scale * c, dict(self.params))


def _bump1d(x):
    """exp(-x^2/2) glued to zero at |x| = 4 by the factor (1 - (x/4)^2)^3."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 4.0
    return np.where(inside, np.exp(-0.5 * x**2) * np.clip(1.0 - (x / 4.0) ** 2, 0, None) ** 3, 0.0)


def cone_vanishing_bump(y0: float, z0: float, sy: float, sz: float) -> TestFunction:
    """xi = z * b((y - y0)/sy) * b((z - z0)/sz), vanishing on the cone z = 0."""
    def func(y, z):
        return z * _bump1d((y - y0) / sy) * _bump1d((z - z0) / sz)
    return TestFunction(kind="cone_vanishing", y_support=(y0 - 4 * sy, y0 + 4 * sy), func=func,
                        params={"y0": y0, "z0": z0, "sy": sy, "sz": sz})


# ---------------------------------------------------------------- quadrature raster

class YZSampler:
    """Bilinear access to the odd extension of a field, in (y, z) coordinates."""

    def __init__(self, field_: SaddleField):
        g = field_.grid
        self.grid = g
        self.m = g.m
        self.R = g.R
        self.h = g.h
        self.hr = g.h / SQRT2
        full = extend_odd(field_)
        self._interp = RegularGridInterpolator((g.coords, g.coords), full, method="linear",
                                               bounds_error=False, fill_value=np.nan)

    @property
    def y_limit(self) -> float:
        """Largest y whose full cross-section |z| < y lies in [0, R]^2."""
        return self.R / SQRT2

    def __call__(self, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        s = (y + z) / SQRT2
        t = (y - z) / SQRT2
        # even in s and t (a function of |x^1|, |x^2|)
        pts = np.stack([np.abs(s), np.abs(t)], axis=-1)
        out = self._interp(pts)
        if np.any(np.isnan(out)):
            need = float(np.nanmax(np.maximum(np.abs(s), np.abs(t))))
            raise SupportError(f"sample point outside the grid; need R >= {need:.4g}", need)
        return out

    def cells(self, y_lo: float, y_hi: float):
        """Cell centres (yc, zc) of the raster with spacing h/sqrt2 covering y in [y_lo, y_hi].

        Cells whose centre lies on or outside |z| < y are dropped, so the weight
        is never evaluated on the cone boundary lines z = +-y.
        """
        hr = self.hr
        k0 = max(int(math.floor(y_lo / hr)), 0)
        k1 = int(math.ceil(y_hi / hr))
        yc = (np.arange(k0, k1) + 0.5) * hr
        lmax = k1 + 1
        zc = (np.arange(-lmax, lmax) + 0.5) * hr
        Y, Z = np.meshgrid(yc, zc, indexing="ij")
        keep = np.abs(Z) < Y
        return Y, Z, keep


def _require_support(sampler: YZSampler, y_hi: float, margin: float = 1.0):
    limit = margin * sampler.y_limit
    if y_hi > limit + 1e-12:
        need = y_hi * SQRT2 / margin
        raise SupportError(f"test function reaches y = {y_hi:.4g} but the grid covers "
                           f"y <= {limit:.4g}; need R >= {need:.4g}", need)


def _weight(m, Y, Z):
    return (Y**2 - Z**2) ** (m - 1)


def _xi_values(sampler: YZSampler, xi: TestFunction, Y, Z):
    if xi.kind == "eta_uz":
        hr = sampler.hr
        uz = (sampler(Y, Z + hr) - sampler(Y, Z - hr)) / (2 * hr)
        return xi.scale * xi.eta.func(Y / xi.a) * uz
    return xi.scale * xi.func(Y, Z)


def quadratic_form(field_: SaddleField, xi: TestFunction, spec: NonlinearitySpec,
                   method: str = "direct", sampler: YZSampler | None = None) -> float:
    """Q_v(xi) = int (y^2 - z^2)^(m-1) (xi_y^2 + xi_z^2 - f'(v) xi^2) dy dz over |z| < y.

    ``method="direct"`` uses cell-centred midpoint quadrature with xi known at
    the cell corners (derivatives are centred differences across the cell).
    ``method="linearized"`` is only for kind ``eta_uz``: after integrating by
    parts against the z-derivative of the reduced equation the integrand
    involves first derivatives of v only, which avoids the cancellation
    between the gradient and potential terms of the direct form.
    """
    sampler = sampler or YZSampler(field_)
    m = sampler.m
    y_lo, y_hi = xi.y_support
    _require_support(sampler, y_hi)
    if method == "linearized":
        if xi.kind != "eta_uz":
            raise ValueError("linearized form needs an eta_uz test function")
        return _q_linearized(sampler, xi, m)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    hr = sampler.hr
    Y, Z, keep = sampler.cells(max(y_lo - hr, 0.0), y_hi + hr)
    Yk, Zk = Y[keep], Z[keep]
    # corners of every kept cell
    corners = [(Yk + dy * hr, Zk + dz * hr) for dy in (-0.5, 0.5) for dz in (-0.5, 0.5)]
    vals = [_xi_values(sampler, xi, cy, np.clip(cz, -cy, cy)) for cy, cz in corners]
    x_mm, x_mp, x_pm, x_pp = vals
    xi_c = 0.25 * (x_mm + x_mp + x_pm + x_pp)
    xi_y = 0.5 * ((x_pm + x_pp) - (x_mm + x_mp)) / hr
    xi_z = 0.5 * ((x_mp + x_pp) - (x_mm + x_pm)) / hr
    v = sampler(Yk, Zk)
    integrand = _weight(m, Yk, Zk) * (xi_y**2 + xi_z**2 - spec.f_prime(v) * xi_c**2)
    return float(np.sum(integrand) * hr * hr)


def _q_linearized(sampler: YZSampler, xi: TestFunction, m: int) -> float:
    hr = sampler.hr
    y_lo, y_hi = xi.y_support
    Y, Z, keep = sampler.cells(y_lo, y_hi)
    Yk, Zk = Y[keep], Z[keep]
    uz = (sampler(Yk, Zk + hr) - sampler(Yk, Zk - hr)) / (2 * hr)
    uy = (sampler(Yk + hr, Zk) - sampler(Yk - hr, Zk)) / (2 * hr)
    a = xi.a
    eta = xi.eta.func(Yk / a)
    eta_y = xi.eta.deriv(Yk / a) / a
    d = Yk**2 - Zk**2
    pot = 2 * (m - 1) * ((Yk**2 + Zk**2) * uz**2 - 2 * Zk * Yk * uy * uz) / d**2
    integrand = _weight(m, Yk, Zk) * (eta_y**2 * uz**2 - eta**2 * pot)
    return float(xi.scale**2 * np.sum(integrand) * hr * hr)


def rescaled_quadratic_form(field_: SaddleField, xi: TestFunction,
                            sampler: YZSampler | None = None) -> float:
    """Q(xi_a) / a^(2m-3) computed in the variable rho = y / a.

    Same cells and samples as the linearized form, but the integrand is written
    with (rho^2 - z^2/a^2) factors and d rho = dy / a.
    """
    sampler = sampler or YZSampler(field_)
    if xi.kind != "eta_uz":
        raise ValueError("rescaled form needs an eta_uz test function")
    m = sampler.m
    _require_support(sampler, xi.y_support[1])
    hr = sampler.hr
    a = xi.a
    Y, Z, keep = sampler.cells(*xi.y_support)
    Yk, Zk = Y[keep], Z[keep]
    uz = (sampler(Yk, Zk + hr) - sampler(Yk, Zk - hr)) / (2 * hr)
    uy = (sampler(Yk + hr, Zk) - sampler(Yk - hr, Zk)) / (2 * hr)
    rho = Yk / a
    q = rho**2 - (Zk / a) ** 2
    eta = xi.eta.func(rho)
    eta_r = xi.eta.deriv(rho)
    pot = 2 * (m - 1) * ((rho**2 + (Zk / a) ** 2) * uz**2 - 2 * (Zk / a) * rho * uy * uz) / q**2
    integrand = q ** (m - 1) * (eta_r**2 * uz**2 - eta**2 * pot)
    return float(xi.scale**2 * np.sum(integrand) * (hr / a) * hr)


# ---------------------------------------------------------------- scans and verdicts

@dataclass
class StabilityReport:
    m: int
    q_values: list = field(default_factory=list)       # [(a, Q(xi_a) / a^(2m-3))]
    rho_integral: float = float("nan")
    prefactor: float = float("nan")
    limit_rhs: float = float("nan")
    hardy_margin: Fraction = Fraction(0)
    verdict: str = "inconclusive"
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"m": self.m, "q_values": [[float(a), float(q)] for a, q in self.q_values],
                "rho_integral": self.rho_integral, "prefactor": self.prefactor,
                "limit_rhs": self.limit_rhs, "hardy_margin": float(self.hardy_margin),
                "verdict": self.verdict}


def decide_verdict(q_values, margin) -> str:
    if any(q < 0 for _, q in q_values):
        return "unstable_demonstrated"
    if margin > 0:
        return "asymptotically_stable_margin"
    return "inconclusive"


def instability_scan(field_: SaddleField, spec: NonlinearitySpec, profile: Profile1D,
                     a_list, eta_params=(0.1, 10.0, 1.75), method: str = "linearized",
                     sampler: YZSampler | None = None) -> StabilityReport:
    """Evaluate Q(xi_a) / a^(2m-3) for xi_a = eta(y/a) v_z and compare with the a -> inf limit.

    Requires max(a) * rho2 <= 0.9 R / sqrt2 so that every slice |z| < y of
    the support lies well inside the computed square.
    """
    m = field_.grid.m
    eta = Eta.paper(*eta_params)
    a_list = sorted(float(a) for a in a_list)
    y_hi = a_list[-1] * eta.support[1]
    limit = SUPPORT_MARGIN * field_.grid.R / SQRT2
    if y_hi > limit:
        need = y_hi * SQRT2 / SUPPORT_MARGIN
        raise SupportError(f"max(a)*rho2 = {y_hi:.4g} exceeds 0.9 R/sqrt2 = {limit:.4g}; "
                           f"need R >= {need:.4g}", need)
    sampler = sampler or YZSampler(field_)
    report = StabilityReport(m=m, hardy_margin=hardy_margin(m))
    for a in a_list:
        q = quadratic_form(field_, TestFunction.eta_uz(a, eta), spec, method=method,
                           sampler=sampler)
        report.q_values.append((a, q / a ** (2 * m - 3)))
    report.rho_integral = rho_integral(m, eta)
    report.prefactor = dissipation_integral(profile)
    report.limit_rhs = report.prefactor * report.rho_integral
    report.verdict = decide_verdict(report.q_values, report.hardy_margin)
    qs = [q for _, q in report.q_values]
    report.extras = {
        "eta_params": list(eta_params),
        "decreasing_in_a": bool(all(b < a for a, b in zip(qs[:-1], qs[1:]))),
        "limit_relative_gap": abs(qs[-1] - report.limit_rhs) / abs(report.limit_rhs)
        if report.limit_rhs else float("inf"),
    }
    return report


def disjoint_instability_family(field_: SaddleField, spec: NonlinearitySpec, count: int,
                                eta_params=(0.1, 10.0, 1.75), a0: float = 1.0,
                                gap: float = 0.0, method: str = "linearized",
                                sampler: YZSampler | None = None):
    """``count`` test functions eta(y/a_i) v_z with pairwise disjoint y-supports.

    Scales are a_i = a0 * (q (1 + gap))^i with q = rho2/rho1, so consecutive
    supports [a_i rho1, a_i rho2] touch at an endpoint (gap = 0), where both
    vanish, or are separated by a relative gap. Returns a list of
    (TestFunction, Q). Raises :class:`SupportError` naming the required R when
    the outermost support does not fit.
    """
    if field_.grid.m != 3:
        raise ValueError("the instability family is built for m = 3")
    if count < 1:
        raise ValueError("count must be >= 1")
    eta = Eta.paper(*eta_params)
    r1, r2 = eta.support
    ratio = r2 / r1 * (1.0 + gap)
    y_hi = a0 * r2 * ratio ** (count - 1)
    limit = SUPPORT_MARGIN * field_.grid.R / SQRT2
    if y_hi > limit:
        need = y_hi * SQRT2 / SUPPORT_MARGIN
        raise SupportError(f"{count} disjoint supports need y up to {y_hi:.4g} but the grid "
                           f"allows {limit:.4g}; need R >= {need:.4g}", need)
    sampler = sampler or YZSampler(field_)
    out = []
    for i in range(count):
        xi = TestFunction.eta_uz(a0 * ratio**i, eta)
        out.append((xi, quadratic_form(field_, xi, spec, method=method, sampler=sampler)))
    return out


def sum_quadratic_form(field_: SaddleField, xis, spec: NonlinearitySpec,
                       sampler: YZSampler | None = None) -> float:
    """Direct form of the sum of several test functions (for additivity checks)."""
    sampler = sampler or YZSampler(field_)
    lo = min(x.y_support[0] for x in xis)
    hi = max(x.y_support[1] for x in xis)

    def func(y, z):
        return sum(_xi_values(sampler, x, y, z) for x in xis)

    total = TestFunction(kind="explicit", y_support=(lo, hi), func=func)
    return quadratic_form(field_, total, spec, sampler=sampler)


def random_cone_vanishing(field_: SaddleField, trials: int, seed: int):
    """Seeded random bumps z * B(y, z) whose support fits in the grid."""
    rng = np.random.default_rng(seed)
    y_max = SUPPORT_MARGIN * field_.grid.R / SQRT2
    out = []
    for _ in range(trials):
        sy = rng.uniform(0.25, 0.15 * y_max)
        sz = rng.uniform(0.25, 2.0)
        y0 = rng.uniform(4 * sy, y_max - 4 * sy) if y_max > 8 * sy else 0.5 * y_max
        z0 = rng.uniform(-0.5 * y0, 0.5 * y0)
        out.append(cone_vanishing_bump(y0, z0, sy, sz))
    return out


def cone_vanishing_stability(field_: SaddleField, spec: NonlinearitySpec, trials: int = 20,
                             seed: int = 0, sampler: YZSampler | None = None):
    """Minimum of Q over ``trials`` seeded perturbations vanishing on the cone.

    Returns (min Q, list of all Q values).
    """
    sampler = sampler or YZSampler(field_)
    qs = [quadratic_form(field_, xi, spec, sampler=sampler)
          for xi in random_cone_vanishing(field_, trials, seed)]
    return float(min(qs)), qs


# ---------------------------------------------------------------- eigenpairs

def principal_eigenpair(s, t, h: float, m: int, region, potential=0.0,
                        tol: float = 1e-8, max_iter: int = 1000):
    """Smallest eigenvalue of -Delta_reduced + potential on ``region`` (zero Dirichlet data).

    Inverse power iteration with shift 0; stops when the Rayleigh quotient
    changes by at most ``tol`` (relative). Returns (lambda_1, phi_1) with phi_1
    a lattice array, positive on the region, sup-normalised, zero elsewhere.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    op = assemble(np.asarray(s, float), np.asarray(t, float), h, m, region,
                  diag_shift=potential)
    solver = FactorizedOperator(op.A)
    x = np.ones(op.n) / np.sqrt(op.n)
    lam_prev = np.inf
    lam = np.nan
    for _ in range(max_iter):
        y, _ = solver.solve(x)
        x = y / np.linalg.norm(y)
        lam = float(x @ (op.A @ x))
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            break
        lam_prev = lam
    else:
        raise EigenSolverError(f"inverse iteration stagnated; last quotient {lam:.10g}")
    if x.sum() < 0:
        x = -x
    x = x / np.max(np.abs(x))
    phi = np.zeros(region.shape)
    phi[region] = x
    return lam, phi
