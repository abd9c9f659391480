import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minsurf.errors import InadmissibleData, NewtonDiverged
from minsurf.forward import (BoundaryData, DiscreteArea, NewtonOptions, area, area_first_variation,
                             dn_from_areas, dn_map, solve_minimal_surface)
from minsurf.geometry import Domain, make_family

FLAT = make_family("euclidean")


def scherk(k):
    return lambda x, y: np.log(np.cos(k * x) / np.cos(k * y)) / k


def test_boundary_data_validation():
    d = Domain.square(1.0, 17)
    with pytest.raises(ValueError):
        BoundaryData(np.zeros(3), d)
    with pytest.raises(ValueError):
        BoundaryData(np.full(d.n_boundary, np.nan), d)


def test_boundary_data_norm_and_algebra():
    d = Domain.square(1.0, 33)
    f = BoundaryData.from_function(d, lambda x, y: 0.01 * x)
    assert f.norm() == pytest.approx(0.01 + 0.01, rel=1e-12)  # sup + slope, no curvature
    g = f + 2.0 * f
    assert np.allclose(g.values, 3 * f.values)
    assert np.array_equal(f.extend()[d.boundary_ij], f.values)


def test_zero_data_gives_zero_solution():
    d = Domain.square(1.0, 33)
    sol = solve_minimal_surface(BoundaryData.zeros(d), make_family("gammaB"), d)
    assert sol.iterations == 0
    assert np.max(np.abs(sol.u)) == 0.0
    assert sol.residual < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.02, 0.02), st.floats(-0.02, 0.02), st.floats(-0.02, 0.02))
def test_affine_data_reproduced_exactly(a, b, c):
    d = Domain.square(1.0, 33)
    aff = lambda x, y: a + b * x + c * y
    sol = solve_minimal_surface(BoundaryData.from_function(d, aff), FLAT, d)
    assert np.max(np.abs(sol.u - aff(d.X, d.Y))) < 1e-14


def test_scherk_second_order():
    ex = scherk(0.7)
    errs = []
    for n in (33, 65):
        d = Domain.square(1.0, n)
        sol = solve_minimal_surface(BoundaryData.from_function(d, ex), FLAT, d,
                                    NewtonOptions(delta_admissible=np.inf))
        errs.append(np.max(np.abs(sol.u - ex(d.X, d.Y))))
    assert np.log2(errs[0] / errs[1]) > 1.9
    assert errs[1] < 1e-4


def test_admissibility_guard():
    d = Domain.square(1.0, 33)
    with pytest.raises(InadmissibleData):
        solve_minimal_surface(BoundaryData.from_function(d, scherk(0.7)), FLAT, d)


def test_newton_iteration_cap():
    d = Domain.square(1.0, 33)
    f = BoundaryData.from_function(d, lambda x, y: 0.05 * np.sin(2 * x + y))
    with pytest.raises(NewtonDiverged):
        solve_minimal_surface(f, make_family("gammaB"), d, NewtonOptions(tol=1e-30, max_iter=1,
                                                                         delta_admissible=np.inf))


def test_area_of_planes():
    d = Domain.square(1.0, 33)
    assert area(np.zeros(d.shape), FLAT, d) == pytest.approx(4.0)
    u = 0.3 * d.X - 0.4 * d.Y
    exact = 4 * np.sqrt(1 + 0.09 + 0.16)
    assert area(u, FLAT, d) == pytest.approx(exact, rel=1e-12)
    assert area(u, FLAT, d, "simpson") == pytest.approx(exact, rel=1e-12)


def test_area_rules_agree_on_smooth_graph():
    ex = scherk(0.7)
    vals = []
    for n in (65, 129):
        d = Domain.square(1.0, n)
        u = ex(d.X, d.Y)
        vals.append((area(u, FLAT, d), area(u, FLAT, d, "simpson")))
    diffs = [abs(a - b) for a, b in vals]
    assert diffs[1] < diffs[0] / 3


def test_first_variation_boundary_formula_vs_fd():
    d = Domain.square(1.0, 33)
    fam = make_family("gammaB")
    f = BoundaryData.from_function(d, lambda x, y: 0.015 * np.sin(1.3 * x + 0.4) + 0.01 * np.cos(2 * y - 0.3 * x))
    sol = solve_minimal_surface(f, fam, d)
    fv = area_first_variation(sol.u, np.cos(d.X + 2 * d.Y), fam, d,
                              opts=NewtonOptions(tol=1e-13, delta_admissible=np.inf))
    assert abs(fv.boundary - fv.fd) < 1e-6 * (1 + abs(fv.boundary))
    # the continuum boundary integral agrees to discretization accuracy
    assert fv.continuum == pytest.approx(fv.boundary, rel=0.05, abs=1e-3)


def test_dn_map_of_affine_solution():
    d = Domain.square(1.0, 33)
    f = BoundaryData.from_function(d, lambda x, y: 0.02 * x)
    dn = dn_map(f, FLAT, d)
    # conormal derivative on the right side is +0.02, on the left -0.02, zero on the others
    assert np.allclose(dn.sides[1], 0.02) and np.allclose(dn.sides[3], -0.02)
    assert np.allclose(dn.sides[0], 0, atol=1e-14) and np.allclose(dn.sides[2], 0, atol=1e-14)


def test_dn_from_areas_matches_dn_map():
    d = Domain.square(1.0, 65)
    fam = make_family("gammaB")
    f = BoundaryData.from_function(d, lambda x, y: 0.015 * np.sin(1.3 * x + 0.4) + 0.01 * np.cos(2 * y - 0.3 * x))
    est, _ = dn_from_areas(fam, d, f)
    ref = dn_map(f, fam, d)
    a = np.concatenate([s[1:-1] for s in est.sides])
    b = np.concatenate([s[1:-1] for s in ref.sides])
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-2


def test_dn_from_areas_black_box_mode_agrees():
    d = Domain.square(1.0, 17)
    f = BoundaryData.from_function(d, lambda x, y: 0.01 * np.sin(x + 2 * y))
    a, _ = dn_from_areas(FLAT, d, f)
    b, _ = dn_from_areas(FLAT, d, f, mode="fd")
    assert np.allclose(a.flat(), b.flat(), atol=1e-7)


def test_discrete_gradient_is_consistent_with_value():
    d = Domain.square(1.0, 17)
    F = DiscreteArea(make_family("gammaB"), d)
    rng = np.random.default_rng(1)
    u = 0.01 * rng.standard_normal(d.shape)
    w = rng.standard_normal(d.shape)
    t = 1e-6
    fd = (F.value(u + t * w) - F.value(u - t * w)) / (2 * t)
    assert np.real(fd) == pytest.approx(float(np.sum(np.real(F.gradient(u)) * w)), rel=1e-6)
