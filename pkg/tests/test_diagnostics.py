import json
import math

import numpy as np
import pytest

from saddlekit import diagnostics as dg
from saddlekit.solver import SaddleField, extend_odd, make_grid

from conftest import solved, spec_and_profile


def _field_like(F, values):
    return SaddleField(grid=F.grid, values=values, kind="iterate")


def test_bound_on_maximal_and_constructed_fields(ac):
    spec, prof = ac
    F = solved("allen_cahn", 2, 12, 1 / 16)
    assert dg.check_pointwise_bound(F, prof) <= 1e-8
    g = F.grid
    zero = _field_like(F, np.where(g.inside, 0.0, np.nan))
    assert dg.check_pointwise_bound(zero, prof) == pytest.approx(
        -np.min(np.abs(prof.eval(g.z[g.inside]))))
    bumped = F.values.copy()
    i, j = 50, 20
    bumped[i, j] = spec.M
    expect = spec.M - prof.eval(g.z[i, j])
    assert dg.check_pointwise_bound(_field_like(F, bumped), prof) == pytest.approx(expect)


def test_bound_for_convex_combinations(ac):
    _, prof = ac
    Fx = solved("allen_cahn", 2, 12, 1 / 16)
    Fn = solved("allen_cahn", 2, 12, 1 / 16, kind="minimal")
    for lam in (0.0, 0.3, 1.0):
        v = lam * Fx.values + (1 - lam) * Fn.values
        assert dg.check_pointwise_bound(_field_like(Fx, v), prof) <= 1e-8


def test_energy_of_wells_vanishes(ac):
    spec, _ = ac
    F = solved("allen_cahn", 2, 12, 1 / 16)
    ones = _field_like(F, np.where(F.grid.inside, 1.0, np.nan))
    # the odd extension of M is -M across the cone; the energy on the triangle part is zero
    full = extend_odd(ones)
    full[:] = 1.0
    assert dg._cell_energy(full, F.grid.h, 2, spec, 12.0) == 0.0


def test_energy_profile_dominates(ac):
    spec, prof = ac
    F = solved("allen_cahn", 2, 12, 1 / 16)
    for r in (6, 9, 12):
        assert dg.energy_of_profile(F.grid, prof, r, spec) >= dg.energy(F, r, spec) - 1e-6


def test_energy_radius_check(ac):
    spec, _ = ac
    with pytest.raises(ValueError):
        dg.energy(solved("allen_cahn", 2, 12, 1 / 16), 13.0, spec)


def test_asymptotics_trend(ac):
    _, prof = ac
    g12 = dg.check_asymptotics(solved("allen_cahn", 2, 12, 1 / 8), prof, (6, 9))
    g24 = dg.check_asymptotics(solved("allen_cahn", 2, 24, 1 / 8), prof, (12, 18))
    assert g24[0] < g12[0]
    assert np.isfinite(g24[1])


def test_asymptotics_near_cone_small(ac):
    _, prof = ac
    F = solved("allen_cahn", 2, 12, 1 / 16)
    gu, gg = dg.check_asymptotics(F, prof, (7.0, 8.0))
    assert gu < 0.05
    # difference quotients of a field bounded by 2 cannot exceed 4/h
    assert gg <= 4 / F.grid.h


def test_asymptotics_empty_band(ac):
    _, prof = ac
    with pytest.raises(ValueError):
        dg.check_asymptotics(solved("allen_cahn", 2, 12, 1 / 16), prof, (100, 101))


def test_symmetry_defect():
    F = solved("allen_cahn", 2, 12, 1 / 16)
    full = extend_odd(F)
    assert dg.check_symmetry(full) == 0.0
    sym = np.abs(full)
    assert dg.check_symmetry(sym) == pytest.approx(2 * np.max(np.abs(full)))


def test_full_square_solve_is_antisymmetric():
    # independent solve on the whole square s, t in [0, R] (no symmetry imposed)
    from saddlekit.operators import FactorizedOperator, assemble
    from saddlekit.nonlinearity import g_extended

    spec, prof = spec_and_profile("allen_cahn")
    g = make_grid(2, 6.0, 1 / 8)
    S, T = g.coords[:, None] + 0 * g.coords, 0 * g.coords[:, None] + g.coords
    unknown = (S < g.R) & (T < g.R)
    op = assemble(S, T, g.h, 2, unknown, diag_shift=-spec.fprime_M)
    lu = FactorizedOperator(op.A)
    start = prof.eval((S - T) / math.sqrt(2))
    bc = op.bc_rhs(start)
    u = start[unknown]
    for _ in range(300):
        new, _ = lu.solve(g_extended(spec, u) + bc)
        done = np.max(np.abs(new - u)) < 1e-11
        u = new
        if done:
            break
    full = op.scatter(u, start)
    assert dg.check_symmetry(full) <= 10 * g.h**2


def test_monotonicity_minima_keys():
    mono = dg.monotonicity_minima(solved("allen_cahn", 2, 12, 1 / 16))
    assert set(mono) == {"minus_dt", "ds", "dy", "dz"}
    assert min(mono.values()) >= -1e-8


def test_report_json_keys(ac):
    spec, prof = ac
    rep = dg.build_report(solved("allen_cahn", 2, 12, 1 / 16), prof, spec)
    data = json.loads(json.dumps(rep.to_json()))
    assert list(data) == ["bound_violation", "energy_by_R", "asym_sup_u", "asym_sup_grad",
                          "monotonicity_minima", "symmetry_defect"]
    assert all(rep.passed().values())


def test_report_rejects_nan():
    rep = dg.DiagnosticsReport(bound_violation=float("nan"))
    with pytest.raises(ValueError):
        rep.to_json()


def test_residual_order_m2(ac):
    spec, _ = ac
    r1 = dg.residual_sup(solved("allen_cahn", 2, 12, 1 / 8), spec, h_coarse=1 / 8)
    r2 = dg.residual_sup(solved("allen_cahn", 2, 12, 1 / 16), spec, h_coarse=1 / 8)
    assert math.log2(r1 / r2) >= 1.7
