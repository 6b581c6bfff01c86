"""Bistable nonlinearities f with double-well potential G (G' = -f, G(M) = 0)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NonlinearitySpec:
    """A bistable nonlinearity with its potential and well location.

    ``f``, ``f_prime`` and ``G`` accept scalars or numpy arrays.
    """

    f: ScalarFn
    f_prime: ScalarFn
    G: ScalarFn
    M: float
    name: str = "custom"
    analytic_derivative: bool = True

    @property
    def fprime_M(self) -> float:
        return float(self.f_prime(self.M))

    @property
    def identity_tol(self) -> float:
        return 1e-10 if self.analytic_derivative else 1e-6


@dataclass
class Check:
    name: str
    passed: bool
    location: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    spec_name: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_violation(self) -> Check | None:
        for c in self.checks:
            if not c.passed:
                return c
        return None

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def g_increasing(self) -> bool:
        return self["g_increasing"].passed


def _allen_cahn() -> NonlinearitySpec:
    return NonlinearitySpec(
        f=lambda u: u - u**3,
        f_prime=lambda u: 1.0 - 3.0 * u**2,
        G=lambda u: 0.25 * ((1.0 - u) * (1.0 + u)) ** 2,
        M=1.0,
        name="allen_cahn",
    )


def _sine() -> NonlinearitySpec:
    return NonlinearitySpec(
        f=lambda u: np.sin(np.pi * u),
        f_prime=lambda u: np.pi * np.cos(np.pi * u),
        # (1 + cos(pi u)) / pi without cancellation near the wells
        G=lambda u: 2.0 * np.cos(0.5 * np.pi * u) ** 2 / np.pi,
        M=1.0,
        name="sine",
    )


BUILTINS: dict[str, Callable[[], NonlinearitySpec]] = {
    "allen_cahn": _allen_cahn,
    "sine": _sine,
}


def builtin(name: str) -> NonlinearitySpec:
    """Return one of the built-in nonlinearities by name."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; available: {', '.join(sorted(BUILTINS))}"
        ) from None
    return factory()


def from_function(f: ScalarFn, M: float, f_prime: ScalarFn | None = None,
                  name: str = "custom") -> NonlinearitySpec:
    """Wrap a user nonlinearity, building G by quadrature.

    Without ``f_prime``, central differences with step ``1e-6 * M`` are used and
    the validation tolerance is loosened to 1e-6.
    """
    analytic = f_prime is not None
    if f_prime is None:
        step = 1e-6 * M

        def f_prime(u):
            return (f(np.asarray(u) + step) - f(np.asarray(u) - step)) / (2.0 * step)

    def G(u):
        u_arr = np.asarray(u, dtype=float)
        out = np.array([integrate.quad(f, float(w), M, epsabs=1e-13, epsrel=1e-13)[0]
                        for w in u_arr.ravel()])
        out = out.reshape(u_arr.shape)
        return out if u_arr.ndim else float(out)

    return NonlinearitySpec(f=f, f_prime=f_prime, G=G, M=M, name=name,
                            analytic_derivative=analytic)


def validate(spec: NonlinearitySpec, samples: int = 1000) -> ValidationReport:
    """Check the bistable hypotheses on uniform samples.

    Violations are recorded in the report rather than raised.
    """
    if samples < 16:
        raise ValueError("samples must be >= 16")
    M = spec.M
    tol = spec.identity_tol
    report = ValidationReport(spec.name)

    def add(name, ok_mask, where, detail=""):
        ok_mask = np.atleast_1d(ok_mask)
        where = np.atleast_1d(where)
        if np.all(ok_mask):
            report.checks.append(Check(name, True))
        else:
            k = int(np.argmin(ok_mask))
            report.checks.append(Check(name, False, float(where[k]), detail))

    add("G(M)=0", abs(float(spec.G(M))) <= tol, M, f"G(M)={float(spec.G(M)):.3g}")
    add("G(-M)=0", abs(float(spec.G(-M))) <= tol, -M, f"G(-M)={float(spec.G(-M)):.3g}")
    inner = np.linspace(-M, M, samples + 2)[1:-1]
    add("G>0 in (-M,M)", np.asarray(spec.G(inner)) > 0.0, inner)
    wide = np.linspace(-2.0 * M, 2.0 * M, 2 * samples + 1)
    add("G>=0", np.asarray(spec.G(wide)) >= -tol, wide)

    add("f(0)=0", abs(float(spec.f(0.0))) <= tol, 0.0)
    add("f(M)=0", abs(float(spec.f(M))) <= tol, M)

    w = np.linspace(0.0, 2.0 * M, samples + 1)
    add("f odd", np.abs(np.asarray(spec.f(-w)) + np.asarray(spec.f(w))) <= tol, w)

    rho = np.linspace(0.0, M, samples + 1)
    fp = np.asarray(spec.f_prime(rho))
    add("f' decreasing on (0,M)", np.diff(fp) < 0.0, rho[1:])
    add("f'(M)<0", spec.fprime_M < 0.0, M)

    g = g_shifted(spec, rho)
    add("g_increasing", np.diff(g) >= 0.0, rho[1:])
    q = np.asarray(spec.f(rho[1:-1])) / rho[1:-1]
    add("f(rho)/rho decreasing", np.diff(q) <= 0.0, rho[2:-1])
    return report


def g_shifted(spec: NonlinearitySpec, rho):
    """g(rho) = f(rho) - f'(M) rho, the right-hand side of the shifted iteration.

    Raises ``ValueError`` for rho outside [0, M].
    """
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0) or np.any(r > spec.M):
        raise ValueError(f"rho must lie in [0, {spec.M}]")
    out = spec.f(r) - spec.fprime_M * r
    return float(out) if np.ndim(out) == 0 else out


def g_extended(spec: NonlinearitySpec, u):
    """Shifted nonlinearity without the domain check, used inside solvers."""
    return spec.f(u) - spec.fprime_M * u


def linear_growth_threshold(spec: NonlinearitySpec, lam: float) -> float:
    """Largest rho in (0, M] with f(rho)/rho >= lam (bisection; f(rho)/rho decreasing)."""
    fp0 = float(spec.f_prime(0.0))
    if lam >= fp0:
        raise ValueError(f"lam={lam} must be below f'(0)={fp0}")
    lo, hi = 0.0, spec.M
    if float(spec.f(hi)) / hi >= lam:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = fp0 if mid == 0.0 else float(spec.f(mid)) / mid
        if q >= lam:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, spec.M):
            break
    return lo


def decay_rate(spec: NonlinearitySpec) -> float:
    return math.sqrt(-spec.fprime_M)
