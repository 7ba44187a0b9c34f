import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crimeblowup.grid import integrate, make_grid, radial_derivative
from crimeblowup.initial_data import (
    Bridge,
    InitialDataParams,
    UnresolvedCapError,
    bridge_profile,
    cap_coefficients,
    cap_peak_factor,
    construct_w0,
    construction_constants,
    matching_defects,
    singular_profile,
    verify_w0,
    w0_function,
)

# Frozen from an independent Hermite solve with Gauss-Legendre quadrature.
A_ORACLE = {
    (1.0, 3, 1.0): 0.08234687539094039,
    (2.0, 3, 1.0): 0.08301656810770743,
    (4.0, 3, 1.0): 0.08330968910274086,
    (1.0, 4, 1.0): 0.10734326881231385,
    (2.0, 4, 1.0): 0.1086972979435556,
    (4.0, 4, 1.0): 0.1092848804666615,
    (1.0, 3, 2.0): 0.010293359423867549,
    (2.0, 3, 2.0): 0.010377071013463428,
    (4.0, 3, 2.0): 0.010413711137842608,
}


@pytest.mark.parametrize("key", sorted(A_ORACLE))
def test_A_matches_independent_quadrature(key):
    chi, n, R = key
    assert construction_constants(chi, n, R).A == pytest.approx(A_ORACLE[key], rel=1e-10)


def test_reference_lambda_mu_and_peak():
    c = construction_constants(2.0, 3, 1.0)
    assert c.lam == pytest.approx(12.0, rel=1e-12)
    assert c.mu == pytest.approx(0.125, rel=1e-12)
    params = InitialDataParams(2.0, 3, 1.0, 8.0)
    assert float(w0_function(params)(np.array([0.0]))[0]) == pytest.approx(16.0, rel=1e-14)


def test_enlarged_constants_for_other_radius():
    c = construction_constants(2.0, 3, 2.0)
    assert c.lam >= c.lam_formula
    assert c.mu <= c.mu_formula
    assert c.lam == pytest.approx(48.0, rel=1e-12)
    assert c.mu == pytest.approx(0.03125, rel=1e-12)


@pytest.mark.parametrize("chi", [1.0, 2.0, 4.0])
@pytest.mark.parametrize("M", [4.0, 16.0, 64.0, 256.0])
def test_cap_matches_to_second_order(chi, M):
    assert max(matching_defects(InitialDataParams(chi, 3, 1.0, M))) <= 1e-10


@pytest.mark.parametrize("chi", [1.0, 2.0, 4.0])
def test_constants_do_not_depend_on_M(chi):
    grid = make_grid(3, 1.0, 2048)
    consts = {construct_w0(grid, InitialDataParams(chi, 3, 1.0, M), min_cap_cells=0)[1] for M in (4, 16, 64, 256)}
    assert len(consts) == 1


@pytest.mark.parametrize("chi", [1.0, 2.0, 4.0])
@pytest.mark.parametrize("M", [4.0, 64.0])
def test_chi_integral_bounded_by_inverse_A(chi, M):
    grid = make_grid(3, 1.0, 2048)
    w0, consts = construct_w0(grid, InitialDataParams(chi, 3, 1.0, M), min_cap_cells=0)
    assert integrate(w0, chi) <= 1.0 / consts.A * (1 + 1e-6)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(1e-3, 10.0))
def test_cap_polynomial_identities(alpha):
    c0, c2, c3 = cap_coefficients(alpha)
    # value, slope and curvature of s**-alpha at s = 1
    assert c0 + c2 + c3 == pytest.approx(1.0, rel=1e-12, abs=1e-12)
    assert 2 * c2 + 3 * c3 == pytest.approx(-alpha, rel=1e-12, abs=1e-12)
    assert 2 * c2 + 6 * c3 == pytest.approx(alpha * (alpha + 1), rel=1e-12, abs=1e-12)
    assert c0 == cap_peak_factor(alpha)


def test_singular_profile_fails_monotone_neumann():
    grid = make_grid(3, 1.0, 512)
    params = InitialDataParams(2.0, 3, 1.0, 16.0)
    consts = construction_constants(2.0, 3, 1.0)
    report = verify_w0(singular_profile(grid, 2.0), params, consts)
    assert not report["b_monotone_neumann"].passed
    assert not report.passed


def test_half_profile_fails_floor():
    grid = make_grid(3, 1.0, 512)
    params = InitialDataParams(2.0, 3, 1.0, 16.0)
    w0, consts = construct_w0(grid, params)
    report = verify_w0(w0 * 0.5, params, consts)
    assert not report["a_floor"].passed


def test_valid_profile_passes_all_checks():
    grid = make_grid(3, 1.0, 1024)
    params = InitialDataParams(2.0, 3, 1.0, 16.0)
    w0, consts = construct_w0(grid, params)
    report = verify_w0(w0, params, consts)
    assert report.passed, report.summary()
    assert [c.name for c in report.checks] == [
        "a_floor",
        "b_monotone_neumann",
        "c_peak",
        "d_chi_integral",
        "e_subsolution",
        "f_gradient_comparison",
    ]


def test_unresolved_cap_is_refused():
    grid = make_grid(3, 1.0, 64)
    with pytest.raises(UnresolvedCapError):
        construct_w0(grid, InitialDataParams(2.0, 3, 1.0, 64.0))


def test_params_mismatch_with_grid():
    with pytest.raises(ValueError):
        construct_w0(make_grid(4, 1.0, 256), InitialDataParams(2.0, 3, 1.0, 4.0))


@pytest.mark.parametrize("bad", [dict(chi=0.0), dict(n=2), dict(R=-1.0), dict(M=math.inf)])
def test_params_validation(bad):
    base = dict(chi=2.0, n=3, R=1.0, M=4.0)
    base.update(bad)
    with pytest.raises(ValueError):
        InitialDataParams(**base)


def test_bridge_values():
    W = Bridge(2.0, 1.0)
    assert W(np.array([0.5]))[0] == pytest.approx(2.0, rel=1e-14)
    assert W(np.array([0.5]), 1)[0] == pytest.approx(-4.0, rel=1e-12)
    assert W(np.array([1.0]))[0] == pytest.approx(1.0, rel=1e-14)
    assert W(np.array([1.0]), 1)[0] == pytest.approx(0.0, abs=1e-12)
    assert W(np.array([1.0]), 2)[0] == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("chi", [1.0, 2.0, 4.0])
def test_bridge_strictly_decreasing(chi):
    grid = make_grid(3, 1.0, 1024)
    vals = bridge_profile(grid, chi).values
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals >= 1.0)


def test_singular_profile_values():
    grid = make_grid(3, 1.0, 16)
    np.testing.assert_allclose(singular_profile(grid, 2.0).values, 1.0 / grid.centers, rtol=1e-15)
    np.testing.assert_allclose(singular_profile(grid, 1.0).values, grid.centers**-2.0, rtol=1e-15)
    with pytest.raises(ValueError):
        singular_profile(grid, 0.0)


def test_singular_profile_slope_identity():
    chi = 2.0
    grid = make_grid(3, 1.0, 1024)
    S = singular_profile(grid, chi)
    outer = grid.centers > 0.5
    expect = -(2 / chi) * grid.centers * S.values ** (chi + 1)
    np.testing.assert_allclose(radial_derivative(S).values[outer], expect[outer], rtol=1e-5)


@pytest.mark.parametrize("chi", [1.0, 2.0, 4.0])
def test_inequality_margins_do_not_degrade_under_refinement(chi):
    params = InitialDataParams(chi, 3, 1.0, 16.0)
    margins = []
    for N in (512, 1024, 2048):
        w0, consts = construct_w0(make_grid(3, 1.0, N), params, min_cap_cells=0)
        rep = verify_w0(w0, params, consts)
        margins.append((rep["e_subsolution"].margin, rep["f_gradient_comparison"].margin))
    # margins settle on their continuum values, well away from zero
    margins = np.array(margins)
    assert np.all(margins > 0.1)
    steps = np.abs(np.diff(margins, axis=0))
    assert np.all(steps[1] <= 0.6 * steps[0] + 1e-12)
