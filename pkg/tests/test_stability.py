import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlekit import stability as stab
from saddlekit.solver import make_grid

from conftest import solved, spec_and_profile


@pytest.mark.parametrize("m,expected", [(1, Fraction(1, 4)), (2, Fraction(-7, 4)),
                                        (3, Fraction(-7, 4)), (4, Fraction(1, 4)),
                                        (5, Fraction(17, 4))])
def test_hardy_margin_exact(m, expected):
    assert stab.hardy_margin(m) == expected
    n = 2 * m
    assert stab.hardy_margin(m) == Fraction(n * n - 10 * n + 17, 4)


def test_hardy_margin_domain():
    with pytest.raises(ValueError):
        stab.hardy_margin(0)


def test_paper_eta_pieces():
    r1, r2, al = 0.1, 10.0, 1.75
    top = 1 - r2 ** (-al)
    assert stab.paper_eta(1.0, r1, r2, al) == pytest.approx(top)
    assert stab.paper_eta(r2, r1, r2, al) == 0.0
    assert stab.paper_eta(r1, r1, r2, al) == 0.0
    assert stab.paper_eta(0.5, r1, r2, al) == pytest.approx(top)
    assert stab.paper_eta(0.05, r1, r2, al) == 0.0 and stab.paper_eta(20, r1, r2, al) == 0.0


@pytest.mark.parametrize("args", [(0.6, 10, 1.75), (0.1, 0.9, 1.75), (0.1, 10, 1.4),
                                  (0.1, 10, 2.0)])
def test_paper_eta_domain(args):
    with pytest.raises(ValueError):
        stab.paper_eta(1.0, *args)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.45), st.floats(1.5, 50), st.floats(1.51, 1.99))
def test_paper_eta_lipschitz_and_nonnegative(r1, r2, al):
    rho = np.linspace(0, r2 * 1.1, 2001)
    eta = stab.paper_eta(rho, r1, r2, al)
    assert np.all(eta >= 0)
    lip = (1 - r2 ** (-al)) / r1 + al
    assert np.max(np.abs(np.diff(eta)) / np.diff(rho)) <= lip * (1 + 1e-9)


def test_rho_integral_signs():
    eta = stab.Eta.paper(0.01, 100, 1.75)
    val = stab.rho_integral(3, eta)
    assert val < 0
    # ramp piece: int_{r1}^{2 r1} rho^4 eta'^2 <= (32 - 1)/5 r1^3 < 7 r1^3
    ramp = stab.Eta(func=eta.func, deriv=eta.deriv, support=(0.01, 0.02))
    assert 0 < stab.rho_integral(3, ramp) <= 7 * 0.01**3
    zero = stab.Eta(func=lambda r: 0.0, deriv=lambda r: 0.0, support=(1.0, 2.0))
    assert stab.rho_integral(3, zero) == 0.0


def test_rho_integral_against_closed_form():
    # eta(rho) = rho - 1 on [1, 2], eta = 3 - rho on [2, 3]; m = 1 gives int eta'^2 = 2
    tent = stab.Eta(func=lambda r: max(0.0, 1 - abs(r - 2)),
                    deriv=lambda r: 1.0 if r < 2 else -1.0, support=(1.0, 3.0), kinks=(2.0,))
    assert stab.rho_integral(1, tent) == pytest.approx(2.0, abs=1e-12)
    # m = 2: int rho^2 (1) - 2 eta^2 over the tent
    exact = (27 - 1) / 3 - 2 * (2 / 3)
    assert stab.rho_integral(2, tent) == pytest.approx(exact, abs=1e-10)


def test_family_search_m4_nonnegative_m3_negative():
    grid = (np.linspace(0.005, 0.1, 3), np.geomspace(10, 200, 3), np.linspace(1.1, 1.9, 3))
    best4, _ = stab.eta_family_search(4, *grid)
    best3, _ = stab.eta_family_search(3, *grid)
    assert best4 >= -1e-6
    assert best3 < -0.01


# ---------------------------------------------------------------- quadratic forms

@pytest.fixture(scope="module")
def field3():
    return solved("allen_cahn", 3, 24, 1 / 8)


@pytest.fixture(scope="module")
def sampler3(field3):
    return stab.YZSampler(field3)


def test_zero_and_homogeneity(field3, sampler3, ac):
    spec, _ = ac
    zero = stab.TestFunction(kind="explicit", y_support=(1, 5), func=lambda y, z: 0 * y)
    assert stab.quadratic_form(field3, zero, spec, sampler=sampler3) == 0.0
    xi = stab.cone_vanishing_bump(8.0, 0.5, 1.5, 1.0)
    q1 = stab.quadratic_form(field3, xi, spec, sampler=sampler3)
    q2 = stab.quadratic_form(field3, xi.scaled(2.0), spec, sampler=sampler3)
    qm = stab.quadratic_form(field3, xi.scaled(-1.0), spec, sampler=sampler3)
    assert q2 == pytest.approx(4 * q1, rel=1e-10)
    assert qm == pytest.approx(q1, rel=1e-12)
    eta = stab.TestFunction.eta_uz(2.0, stab.Eta.paper(0.1, 3.0, 1.75))
    for method in ("direct", "linearized"):
        a = stab.quadratic_form(field3, eta, spec, method=method, sampler=sampler3)
        b = stab.quadratic_form(field3, eta.scaled(2.0), spec, method=method, sampler=sampler3)
        assert b == pytest.approx(4 * a, rel=1e-10)


def test_additivity_disjoint_supports(field3, sampler3, ac):
    spec, _ = ac
    x1 = stab.cone_vanishing_bump(5.0, 0.3, 0.5, 1.0)       # y in [3, 7]
    x2 = stab.cone_vanishing_bump(12.0, -0.4, 0.75, 1.0)    # y in [9, 15]
    q1 = stab.quadratic_form(field3, x1, spec, sampler=sampler3)
    q2 = stab.quadratic_form(field3, x2, spec, sampler=sampler3)
    q12 = stab.sum_quadratic_form(field3, [x1, x2], spec, sampler=sampler3)
    assert q12 == pytest.approx(q1 + q2, rel=1e-9)


def test_rescaled_form_matches(field3, sampler3, ac):
    spec, _ = ac
    eta = stab.Eta.paper(0.1, 3.0, 1.75)
    for a in (1.0, 2.5, 4.0):
        xi = stab.TestFunction.eta_uz(a, eta)
        q = stab.quadratic_form(field3, xi, spec, method="linearized", sampler=sampler3)
        r = stab.rescaled_quadratic_form(field3, xi, sampler=sampler3)
        assert r == pytest.approx(q / a**3, rel=1e-6)


def test_linearized_and_direct_agree_at_moderate_y(field3, sampler3, ac):
    # the two forms coincide for the exact solution; at y <= 6 the lattice error is small
    spec, _ = ac
    xi = stab.TestFunction.eta_uz(1.0, stab.Eta.paper(0.2, 6.0, 1.75))
    qd = stab.quadratic_form(field3, xi, spec, sampler=sampler3)
    ql = stab.quadratic_form(field3, xi, spec, method="linearized", sampler=sampler3)
    assert ql == pytest.approx(qd, rel=0.1)


def test_support_error_names_R(field3, ac):
    spec, _ = ac
    xi = stab.TestFunction.eta_uz(4.0, stab.Eta.paper(0.1, 10.0, 1.75))
    with pytest.raises(stab.SupportError, match="need R >=") as info:
        stab.quadratic_form(field3, xi, spec)
    assert info.value.required_R == pytest.approx(40 * math.sqrt(2))


def test_linearized_requires_eta_uz(field3, ac):
    spec, _ = ac
    with pytest.raises(ValueError):
        stab.quadratic_form(field3, stab.cone_vanishing_bump(5, 0, 1, 1), spec, method="linearized")


def test_cone_vanishing_deterministic(field3, sampler3, ac):
    spec, _ = ac
    a, qa = stab.cone_vanishing_stability(field3, spec, 5, seed=11, sampler=sampler3)
    b, qb = stab.cone_vanishing_stability(field3, spec, 5, seed=11, sampler=sampler3)
    assert qa == qb and a == b
    assert a >= -1e-8


def test_comparison_minimal_vs_maximal(ac):
    # f'(u) >= f'(ubar) where |u| <= |ubar| makes Q_u <= Q_ubar
    spec, _ = ac
    Fx = solved("allen_cahn", 3, 24, 1 / 8)
    Fn = solved("allen_cahn", 3, 24, 1 / 8, kind="minimal")
    xi = stab.cone_vanishing_bump(9.0, 0.5, 1.5, 1.5)
    assert (stab.quadratic_form(Fn, xi, spec) <= stab.quadratic_form(Fx, xi, spec) + 1e-9)


def test_scan_precondition(field3, ac):
    spec, prof = ac
    with pytest.raises(stab.SupportError):
        stab.instability_scan(field3, spec, prof, [4, 8, 16])


def test_scan_report_fields(field3, ac):
    spec, prof = ac
    rep = stab.instability_scan(field3, spec, prof, [1, 1.5], eta_params=(0.1, 10.0, 1.75))
    data = rep.to_json()
    assert list(data) == ["m", "q_values", "rho_integral", "prefactor", "limit_rhs",
                          "hardy_margin", "verdict"]
    assert data["hardy_margin"] == -1.75
    assert rep.limit_rhs == pytest.approx(rep.prefactor * rep.rho_integral)


def test_verdict_rules():
    assert stab.decide_verdict([(1, 0.2), (2, -0.1)], Fraction(-7, 4)) == "unstable_demonstrated"
    assert stab.decide_verdict([(1, 0.2)], Fraction(1, 4)) == "asymptotically_stable_margin"
    assert stab.decide_verdict([(1, 0.2)], Fraction(-7, 4)) == "inconclusive"


def test_family_requires_m3(ac):
    spec, _ = ac
    with pytest.raises(ValueError):
        stab.disjoint_instability_family(solved("allen_cahn", 2, 12, 1 / 16), spec, 1)


def test_family_count_one_matches_scan(field3, sampler3, ac):
    spec, prof = ac
    fam = stab.disjoint_instability_family(field3, spec, 1, (0.1, 1.5, 1.75), sampler=sampler3)
    rep = stab.instability_scan(field3, spec, prof, [1.0], (0.1, 1.5, 1.75), sampler=sampler3)
    assert fam[0][1] == pytest.approx(rep.q_values[0][1])


# ---------------------------------------------------------------- eigenpairs

def test_eigen_unit_square():
    h = 1 / 64
    c = np.arange(0, 1 + h / 2, h)
    S, T = np.meshgrid(c, c, indexing="ij")
    region = (S > 0) & (S < 1) & (T > 0) & (T < 1)
    lam, phi = stab.principal_eigenpair(S, T, h, 1, region)
    assert lam == pytest.approx(2 * math.pi**2, rel=0.02)
    assert phi.max() == pytest.approx(1.0) and phi.min() >= 0
    assert np.all(phi[~region] == 0)


def test_eigen_unit_disc():
    # quarter disc with the axes as reflection lines is the full disc for radial modes
    h = 1 / 128
    c = np.arange(0, 1 + 2 * h, h)
    S, T = np.meshgrid(c, c, indexing="ij")
    region = S**2 + T**2 < 1
    lam, _ = stab.principal_eigenpair(S, T, h, 1, region)
    assert lam == pytest.approx(2.404825557695773**2, rel=0.02)


def test_eigen_potential_shift():
    h = 1 / 32
    c = np.arange(0, 1 + h / 2, h)
    S, T = np.meshgrid(c, c, indexing="ij")
    region = (S > 0) & (S < 1) & (T > 0) & (T < 1)
    lam0, _ = stab.principal_eigenpair(S, T, h, 1, region)
    lam1, _ = stab.principal_eigenpair(S, T, h, 1, region, potential=3.0)
    assert lam1 - lam0 == pytest.approx(3.0, abs=1e-6)


def test_eigen_empty_region():
    c = np.arange(0, 1.01, 0.25)
    S, T = np.meshgrid(c, c, indexing="ij")
    with pytest.raises(ValueError):
        stab.principal_eigenpair(S, T, 0.25, 1, np.zeros_like(S, dtype=bool))
