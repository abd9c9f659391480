import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minsurf import cgo
from minsurf.errors import DegreeTooLow, SeriesDiverging, SupportViolation, UnderResolved

PHASE = cgo.CGOPhase.quadratic()


def gaussian_cauchy(W, s):
    """dbar^-1 of exp(-|w|^2/s^2): s^2 (1 - exp(-|w|^2/s^2)) / w, 0 at w = 0."""
    with np.errstate(all="ignore"):
        return np.where(W == 0, 0, s ** 2 * (1 - np.exp(-np.abs(W) ** 2 / s ** 2)) / np.where(W == 0, 1, W))


# Errors against the closed form, frozen from the first validated build:
# 2.7e-6 (n=65), 1.6e-7 (n=129): fourth order.
@pytest.mark.parametrize("n,bound", [(65, 4e-6), (129, 2.5e-7)])
def test_cauchy_transform_gaussian(n, bound):
    p = cgo.Patch(0j, 0.4, n)
    f = np.exp(-np.abs(p.W) ** 2 / 0.05 ** 2)
    ex = gaussian_cauchy(p.W, 0.05)
    assert np.max(np.abs(cgo.dbar_inverse(f, p, check_support=False) - ex)) < bound
    assert np.max(np.abs(cgo.d_inverse(f, p, check_support=False) - np.conj(ex))) < bound


def test_cauchy_inverts_dbar():
    # dbar of the transform returns the density; measured 8.2e-4 -> 5.8e-5 (65 -> 129)
    errs = []
    for n in (65, 129):
        p = cgo.Patch(0j, 0.4, n)
        f = cgo.bump(np.abs(p.W), 0.3) * (1 + p.W)
        _, dbu = cgo.wirtinger(cgo.dbar_inverse(f, p), p.dx)
        errs.append(np.max(np.abs(dbu - f)[np.abs(p.W) < 0.35]))
    assert errs[1] < 1e-4
    assert np.log2(errs[0] / errs[1]) > 3


def test_support_violation():
    p = cgo.Patch(0j, 0.4, 65)
    with pytest.raises(SupportViolation):
        cgo.dbar_inverse(np.ones(p.W.shape), p)


def test_patch_requires_odd_nodes():
    with pytest.raises(ValueError):
        cgo.Patch(0j, 0.4, 64)
    p = cgo.Patch.for_resolution(0.1 + 0.2j, 0.4, 0.01)
    assert p.n % 2 == 1 and p.dx <= 0.01
    assert p.Z[p.center_index, p.center_index] == pytest.approx(0.1 + 0.2j)


def test_hessian_split_of_z_squared():
    S, A = cgo.CGOPhase.quadratic(1.0).hessian_split()
    assert np.allclose(S, 2 * np.diag([1, -1]))
    assert np.allclose(A, 2 * np.array([[0, 1], [1, 0]]))


def test_phase_critical_points():
    crit = cgo.CGOPhase((0, 0, 0.5), 0.2j).critical_points
    assert len(crit) == 1 and crit[0][0] == pytest.approx(0.2j) and crit[0][1]
    assert not cgo.CGOPhase((0, 0, 0, 1.0)).critical_points[0][1]


def test_cutoffs():
    r = np.array([0.0, 0.05, 0.2, 0.3, 0.5])
    pc = cgo.plateau_cutoff(r, 0.1, 0.3)
    assert pc[0] == 1 and pc[1] == 1 and pc[3] == 0 and pc[4] == 0 and 0 < pc[2] < 1
    poly = cgo.polynomial_cutoff(r, 0.05, 0.3)
    assert poly[0] == 1 and poly[1] == 1 and poly[3] == 0 and 0 < poly[2] < 1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0))
def test_polynomial_cutoff_monotone(t):
    r1, r2 = 0.05, 0.3
    a = cgo.polynomial_cutoff(r1 + t * (r2 - r1), r1, r2)
    b = cgo.polynomial_cutoff(min(r1 + t * (r2 - r1) + 1e-3, r2), r1, r2)
    assert 0 <= b <= a <= 1


def test_zero_potential_gives_zero_remainder():
    sol = cgo.build_cgo(1 / 32, PHASE, q=None, J=6)
    assert np.all(sol.r == 0) and sol.neumann_terms == 0


def test_residual_small_at_default_parameters():
    q = lambda Z: cgo.default_potential(Z)
    sol = cgo.build_cgo(1 / 32, PHASE, q=q, J=6)
    assert cgo.residual_check(sol).relative_to_qa < 1e-3
    tilde = cgo.build_cgo(1 / 32, PHASE, q=q, J=6, tilde=True)
    assert cgo.residual_check(tilde).relative_to_qa < 1e-3


def test_remainder_decays():
    q = lambda Z: cgo.default_potential(Z)
    hs = [2.0 ** -k for k in (4, 5, 6, 7)]
    l2 = [(lambda s: s.patch.l2(s.r))(cgo.build_cgo(h, PHASE, q=q, J=8)) for h in hs]
    assert cgo.slope_fit(hs, l2)[0] > 0.5


def test_series_diverges_for_large_potential():
    q = lambda Z: 1e4 * cgo.default_potential(Z)
    with pytest.raises(SeriesDiverging):
        cgo.build_cgo(1 / 16, PHASE, q=q, J=8)


def test_oscillation_guard():
    ctx = cgo.CGOContext.for_h(1 / 32, PHASE)
    coarse = cgo.Patch(0j, 0.4, 33)
    with pytest.raises(UnderResolved):
        cgo.CGOContext(1 / 32, PHASE, coarse)
    f = cgo.MonomialField(1, 1).grid(coarse)
    with pytest.raises(UnderResolved):
        cgo.oscillatory_integral(f, PHASE.psi(coarse.Z), 1 / 32, 4, coarse, PHASE)
    assert ctx.patch.dx <= 1 / 32 / (10 * PHASE.max_grad_psi(0.36)) * (1 + 1e-9)


def test_slope_fit_exact_power():
    hs = np.array([0.1, 0.05, 0.025])
    s, c = cgo.slope_fit(hs, 3 * hs ** 2.5)
    assert s == pytest.approx(2.5) and np.exp(c) == pytest.approx(3)


def test_plateau_drift():
    assert cgo.plateau_drift([5, 1.0, 1.01, 0.99]) == pytest.approx(0.02)


def test_expansion_degree_guard():
    with pytest.raises(DegreeTooLow):
        cgo.expansion_iterates(cgo.MonomialField(1, 0), PHASE, 1, cgo.Patch(0j, 0.4, 65))


def test_expansion_first_iterate_closed_form():
    # F^1 = f / conj(Phi') with Phi' = z: for f = z^2 zb, F^1 = z^2 near the center
    p = cgo.Patch(0j, 0.4, 65)
    grids, exprs, degs = cgo.expansion_iterates(cgo.MonomialField(2, 1), PHASE, 1, p)
    inner = np.abs(p.W) <= 0.1
    assert np.allclose(grids[0][inner], (p.W ** 2)[inner], atol=1e-12)
    assert np.allclose(grids[1][inner], 0, atol=1e-10)  # dbar of z^2 vanishes
    assert degs == [2, 0]


def test_stationary_phase_constant_third_order():
    # -2 pi |c| Q(P) / gamma(P)^2 for Phi = c z^2
    assert cgo.third_order_leading_constant(PHASE, 1.0) == pytest.approx(-np.pi)
    assert cgo.third_order_leading_constant(cgo.CGOPhase.quadratic(2.0), 0.5, 2.0) == pytest.approx(-np.pi / 2)
    with pytest.raises(ValueError):
        cgo.third_order_leading_constant(cgo.CGOPhase((0, 1, 1)), 1.0)


def test_third_order_scaled_integral_near_constant():
    q = lambda Z: cgo.default_potential(Z)
    a = cgo.third_order_asymptotics(2.0 ** -7, PHASE, q=q)
    b = cgo.third_order_asymptotics(2.0 ** -7, PHASE, q=q, weight=cgo.vanishing_weight)
    assert abs(a.scaled - a.predicted * a.h) < 0.05 * abs(a.predicted * a.h)
    assert abs(b.scaled) < 0.05 * abs(a.scaled)
    assert abs(a.groups["smallest"]) < abs(a.groups["leading"])


def test_second_order_difference_small_with_vanishing_potential_at_center():
    q = lambda Z: Z * cgo.plateau_cutoff(np.abs(Z), 0.1, 0.3)
    a = cgo.second_order_asymptotics(2.0 ** -6, PHASE, q=q)
    assert a.difference < 1e-2 * abs(a.leading)
