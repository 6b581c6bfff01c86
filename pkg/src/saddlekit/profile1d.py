"""Increasing heteroclinic u0 of -u'' = f(u), u0(0) = 0, built by quadrature and inversion.

The layer coordinate tau(sigma) = int_0^sigma dw / sqrt(2 G(w)) is tabulated and
inverted on [-tau_max, tau_max]; outside the core an exponential tail
M - A exp(-c (tau - tau_max)) with c = sqrt(-f'(M)) takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .nonlinearity import NonlinearitySpec


class ProfileError(RuntimeError):
    pass


@dataclass(frozen=True)
class Profile1D:
    tau_max: float
    tau: np.ndarray
    u: np.ndarray
    du: np.ndarray
    decay_rate: float
    tail_amplitude: float
    spec: NonlinearitySpec
    _interp: object

    @property
    def table(self) -> np.ndarray:
        return np.column_stack([self.tau, self.u])

    def eval(self, tau):
        return eval_profile(self, tau)

    def eval_deriv(self, tau):
        return eval_deriv(self, tau)

    @property
    def hamiltonian_residual(self) -> float:
        """sup |du^2/2 - G(u)| over the table nodes."""
        return float(np.max(np.abs(0.5 * self.du**2 - self.spec.G(self.u))))

    @property
    def tail_constant(self) -> float:
        """C with eval_deriv(tau) <= C exp(-c |tau|) on the table and in the tails."""
        c = self.decay_rate
        core = np.max(self.du * np.exp(c * np.abs(self.tau)))
        tail = self.tail_amplitude * c * math.exp(c * self.tau_max)
        return float(max(core, tail))


def _velocity(spec: NonlinearitySpec, w):
    G = np.asarray(spec.G(w), dtype=float)
    return np.sqrt(2.0 * np.maximum(G, 0.0))


def build_profile(spec: NonlinearitySpec, tau_max: float = 8.0, nodes: int = 1024) -> Profile1D:
    """Tabulate u0 on ``nodes`` uniform points of [-tau_max, tau_max].

    Each node tau_k is inverted by a bracketed Newton iteration on
    phi(sigma) - tau_k (bisection whenever Newton leaves the bracket); phi is
    accumulated by quadrature between consecutive roots (Gauss-Legendre on
    short steps, adaptive otherwise), so the
    logarithmically divergent endpoint sigma = M is never integrated.
    """
    if tau_max < 4:
        raise ValueError("tau_max must be >= 4")
    if nodes < 64:
        raise ValueError("nodes must be >= 64")
    M = spec.M

    def rate(w):
        v = float(_velocity(spec, w))
        if not v > 0.0:
            raise ProfileError(f"G is not positive at w={w!r}; cannot integrate 1/sqrt(2G)")
        return 1.0 / v

    gl_x, gl_w = np.polynomial.legendre.leggauss(12)

    def phi_increment(a, b):
        if a == b:
            return 0.0
        dist = M - max(a, b)
        if abs(b - a) < 0.1 * dist:
            # integrand analytic on a disc of radius ~dist around [a, b]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            v = _velocity(spec, mid + half * gl_x)
            if not np.all(v > 0.0):
                rate(float(mid + half * gl_x[np.argmin(v)]))
            return float(half * np.sum(gl_w / v))
        val, _ = integrate.quad(rate, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    # odd symmetry: solve on tau >= 0 and mirror
    if nodes % 2 == 0:
        nodes += 1
    tau = np.linspace(-tau_max, tau_max, nodes)
    half = tau[nodes // 2:]
    sig = np.zeros_like(half)
    sigma_prev, phi_prev = 0.0, 0.0
    for k in range(1, half.size):
        target = half[k]
        lo, hi = sigma_prev, M
        # Newton start from a linearised step
        x = min(sigma_prev + (target - phi_prev) * float(_velocity(spec, sigma_prev)),
                sigma_prev + 0.5 * (M - sigma_prev))
        phi_x = phi_prev + phi_increment(sigma_prev, x)
        for _ in range(100):
            r = phi_x - target
            if r > 0:
                hi = x
            else:
                lo = x
            if abs(r) < 1e-14 * max(1.0, abs(target)) or hi - lo < 1e-16:
                break
            x_new = x - r / rate(x)
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)
            phi_x = phi_x + phi_increment(x, x_new)
            x = x_new
        sig[k] = x
        sigma_prev, phi_prev = x, phi_x

    u = np.concatenate([-sig[:0:-1], sig])
    du = _velocity(spec, u)
    c = math.sqrt(-spec.fprime_M)
    A = M - float(u[-1])
    if not A > 0:
        raise ProfileError("profile reached the well inside the core; reduce tau_max")
    interp = None
    # Fritsch-Carlson condition for monotonicity of the Hermite cubic
    secant = np.diff(u) / np.diff(tau)
    ratio_l = du[:-1] / secant
    ratio_r = du[1:] / secant
    if np.all(ratio_l**2 + ratio_r**2 <= 9.0):
        interp = CubicHermiteSpline(tau, u, du)
    else:
        interp = PchipInterpolator(tau, u)
    return Profile1D(tau_max=float(tau_max), tau=tau, u=u, du=du, decay_rate=c,
                     tail_amplitude=A, spec=spec, _interp=interp)


def eval_profile(p: Profile1D, tau):
    t = np.asarray(tau, dtype=float)
    out = np.empty_like(t)
    core = np.abs(t) <= p.tau_max
    out[core] = p._interp(t[core])
    right = t > p.tau_max
    left = t < -p.tau_max
    M, A, c = p.spec.M, p.tail_amplitude, p.decay_rate
    out[right] = M - A * np.exp(-c * (t[right] - p.tau_max))
    out[left] = -M + A * np.exp(-c * (-t[left] - p.tau_max))
    return float(out) if out.ndim == 0 else out


def eval_deriv(p: Profile1D, tau):
    """u0'(tau): sqrt(2 G(u0)) in the core, derivative of the tail model outside."""
    t = np.asarray(tau, dtype=float)
    out = np.empty_like(t)
    core = np.abs(t) <= p.tau_max
    out[core] = _velocity(p.spec, p._interp(t[core]))
    tail = ~core
    out[tail] = p.tail_amplitude * p.decay_rate * np.exp(
        -p.decay_rate * (np.abs(t[tail]) - p.tau_max))
    return float(out) if out.ndim == 0 else out


def dissipation_integral(p: Profile1D) -> float:
    """int u0'(tau)^2 dtau over the real line.

    In the core u0' dtau = du turns the integral into int sqrt(2 G(w)) dw
    between u0(-tau_max) and u0(tau_max); each tail adds A^2 c / 2.
    """
    lo, hi = float(p.u[0]), float(p.u[-1])
    core, _ = integrate.quad(lambda w: float(_velocity(p.spec, w)), lo, hi,
                             epsabs=1e-14, epsrel=1e-13, limit=200)
    tails = p.tail_amplitude**2 * p.decay_rate
    return float(core + tails)


def eval_1d_family(p: Profile1D, b, c: float, x):
    """u0(b . x + c) for a unit vector b."""
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise ValueError("b must be a unit vector")
    x = np.asarray(x, dtype=float)
    return eval_profile(p, x @ b + c)


@dataclass(frozen=True)
class LatticeProfile:
    """Heteroclinic of the second-difference equation -(U(z+d) - 2U(z) + U(z-d))/d^2 = f(U).

    A function of z alone sampled on the (s, t) lattice with spacing h sees
    exactly this three-point operator with d = h/sqrt2, so U is the discrete
    counterpart of u0 there. Values are tabulated on d*Z in [-z_max, z_max],
    with the continuous tail model beyond.
    """

    delta: float
    z: np.ndarray
    u: np.ndarray
    base: Profile1D

    def eval(self, tau):
        t = np.asarray(tau, dtype=float)
        inner = np.abs(t) <= self.z[-1]
        out = np.where(inner, np.interp(t, self.z, self.u), self.base.eval(t))
        return float(out) if out.ndim == 0 else out


def lattice_profile(p: Profile1D, delta: float, z_max: float = 16.0,
                    tol: float = 1e-14, max_iter: int = 50) -> LatticeProfile:
    """Newton solve for the odd lattice heteroclinic, started from u0.

    Unknowns are U(k delta), 0 < k < K; U(0) = 0 and U(K delta) = u0(K delta).
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import spsolve

    spec = p.spec
    K = int(math.ceil(z_max / delta))
    z = np.arange(K + 1) * delta
    U = np.asarray(p.eval(z), dtype=float).copy()
    U[0] = 0.0
    n = K - 1
    off = np.full(n - 1, -1.0 / delta**2)
    for _ in range(max_iter):
        r = -(U[2:] - 2 * U[1:-1] + U[:-2]) / delta**2 - spec.f(U[1:-1])
        J = sp.diags([off, 2.0 / delta**2 - spec.f_prime(U[1:-1]), off], [-1, 0, 1], format="csc")
        dU = spsolve(J, -r)
        U[1:-1] += dU
        if np.max(np.abs(dU)) < tol:
            break
    else:
        raise ProfileError("lattice profile Newton iteration did not converge")
    zz = np.concatenate([-z[:0:-1], z])
    uu = np.concatenate([-U[:0:-1], U])
    return LatticeProfile(delta=float(delta), z=zz, u=uu, base=p)
