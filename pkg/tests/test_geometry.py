import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from minsurf.errors import NonMinimal, NotSPD
from minsurf.geometry import (FAMILY_NAMES, Domain, MetricFamily, boundary_integral, contract,
                              eval_coefficients, eval_coefficients_at, integrate, laplace_beltrami,
                              make_family, read_grid_csv, write_grid_csv)


@pytest.fixture(scope="module")
def dom():
    return Domain.square(1.0, 33)


def test_domain_basics(dom):
    assert dom.shape == (33, 33)
    assert dom.hx == pytest.approx(2 / 32)
    assert dom.n_boundary == 128
    i, j = dom.boundary_ij
    assert len(set(zip(i.tolist(), j.tolist()))) == dom.n_boundary
    assert dom.diam == pytest.approx(2 * np.sqrt(2))


def test_domain_rejects_tiny_grid():
    with pytest.raises(ValueError):
        Domain.square(1.0, 9)


def test_side_slices_cover_corners_twice(dom):
    sl = dom.side_slices()
    assert [len(s) for s in sl] == [33] * 4
    assert sl[0][-1] == sl[1][0]
    assert sl[3][-1] == sl[0][0]


def test_quadratures_of_constants(dom):
    assert integrate(np.ones(dom.shape), dom) == pytest.approx(4.0)
    perimeter = boundary_integral([np.ones(len(sd.i)) for sd in dom.sides], dom)
    assert perimeter == pytest.approx(8.0)


def test_boundary_integral_uses_induced_line_element(dom):
    g0 = np.zeros(dom.shape + (2, 2))
    g0[..., 0, 0], g0[..., 1, 1] = 4.0, 9.0
    val = boundary_integral([np.ones(len(sd.i)) for sd in dom.sides], dom, g0)
    assert val == pytest.approx(2 * (2 * 2.0) + 2 * (2 * 3.0))


# Oracle: sympy differentiation of Tr(g^-1 d_s g) and g^-1 for g = (1 + s^2 gamma) I,
# gamma = x + 2 (run once, values frozen here):
#   h1 = 4 gamma, h2 = 0, h3 = -24 gamma^2, k2 = -2 gamma I.
def test_coefficients_conformal_quadratic_family(dom):
    fam = MetricFamily.from_strings("g", [["1+s**2*(x+2)", "0"], ["0", "1+s**2*(x+2)"]])
    co = eval_coefficients(fam, dom)
    gam = dom.X + 2
    assert np.allclose(co.h1, 4 * gam, atol=1e-12)
    assert np.allclose(co.h2, 0, atol=1e-12)
    assert np.allclose(co.h3, -24 * gam ** 2, atol=1e-10)
    assert np.allclose(co.k2, -2 * gam[..., None, None] * np.eye(2), atol=1e-12)
    assert np.allclose(co.k1, 0, atol=1e-12)


def test_coefficients_traceless_first_order(dom):
    # g = I + s B, trace-free B: k1 = -B and h1 = Tr(B^2) = 2 (b^2 + e^2)
    b, e = 0.3, -0.2
    fam = MetricFamily.from_strings("B", [[f"1+{b}*s", f"{e}*s"], [f"{e}*s", f"1-{b}*s"]])
    co = eval_coefficients(fam, dom)
    assert np.allclose(co.k1, -np.array([[b, e], [e, -b]]), atol=1e-12)
    assert np.allclose(co.h1, -2 * (b * b + e * e), atol=1e-12)


def test_cas_agrees_with_series_inverse_at_points():
    x, y, s = sp.symbols("x y s")
    m = sp.Matrix([[1 + s * x + s ** 2, s * y / 3], [s * y / 3, 1 - s * x + s ** 3]])
    fam = MetricFamily("poly", m)
    pts = np.array([0.2, -0.5]), np.array([0.1, 0.4])
    co = eval_coefficients_at(fam, *pts)
    for n, (px, py) in enumerate(zip(*pts)):
        mm = m.subs({x: px, y: py})
        h = (mm.inv() * mm.diff(s)).trace()
        for order, arr in ((1, co.h1), (2, co.h2), (3, co.h3)):
            assert float(sp.diff(h, s, order).subs(s, 0)) == pytest.approx(arr[n], abs=1e-10)
        k1 = np.array(sp.diff(mm.inv(), s).subs(s, 0), dtype=float)
        assert np.allclose(co.k1[n], k1, atol=1e-12)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_named_families_are_minimal_and_isothermal(name, dom):
    co = eval_coefficients(make_family(name), dom)
    assert np.max(np.abs(co.h0)) < 1e-10
    assert np.all(co.d > 0)


def test_family_specific_structure(dom):
    tl = eval_coefficients(make_family("traceless"), dom)
    assert np.allclose(tl.h1, 0, atol=1e-12)
    assert np.allclose(np.trace(tl.k1, axis1=-2, axis2=-1), 0, atol=1e-12)
    ev = eval_coefficients(make_family("even"), dom)
    assert np.allclose(ev.k1, 0) and np.allclose(ev.h1, 0) and np.allclose(ev.h2, 0)
    mx = eval_coefficients(make_family("mixed", {"profile": "cutoff", "r2": 0.33, "amp": 0.3}), dom)
    i = j = 16
    assert mx.h2[i, j] == pytest.approx(12 * 0.3, rel=1e-10)
    assert mx.h1[i, j] == pytest.approx(0, abs=1e-12)


def test_tabulated_family_matches_closed_form(dom):
    fam = make_family("gammaB")
    tab = MetricFamily.from_callable("tab", fam.g)
    a, b = eval_coefficients(fam, dom), eval_coefficients(tab, dom)
    for name in ("k1", "h1", "h2", "k2"):
        assert np.allclose(getattr(a, name), getattr(b, name), atol=1e-8), name


def test_non_minimal_family_rejected(dom):
    fam = MetricFamily.from_strings("bad", [["1+s", "0"], ["0", "1+s"]])
    with pytest.raises(NonMinimal):
        eval_coefficients(fam, dom)


def test_not_spd_rejected(dom):
    fam = MetricFamily.from_strings("bad", [["-1", "0"], ["0", "1"]])
    with pytest.raises(NotSPD):
        eval_coefficients(fam, dom)


def test_unknown_family():
    with pytest.raises(KeyError):
        make_family("nope")


def test_laplace_beltrami_flat_and_conformal():
    d = Domain.square(1.0, 65)
    u = d.X ** 2 + d.Y ** 2
    lb = laplace_beltrami(u, make_family("euclidean"), d)
    assert np.allclose(lb[d.interior], -4.0, atol=1e-10)
    # conformal factor c = 2: Delta_{cg} = Delta_g / c
    fam2 = MetricFamily.from_strings("2I", [["2", "0"], ["0", "2"]])
    assert np.allclose(laplace_beltrami(u, fam2, d)[d.interior], -2.0, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_contract_is_bilinear_and_symmetric(v):
    T = np.array([[v[0], v[1]], [v[1], v[2]]])
    a, b = (v[3], v[4]), (v[5], -v[3])
    assert contract(T, a, b) == pytest.approx(contract(T, b, a), abs=1e-12)
    assert contract(T, a, a) == pytest.approx(np.array(a) @ T @ np.array(a), abs=1e-12)


def test_grid_csv_roundtrip(tmp_path, dom):
    u = np.sin(dom.X) + 1j * dom.Y
    write_grid_csv(tmp_path / "u.csv", u, dom)
    v, d2 = read_grid_csv(tmp_path / "u.csv")
    assert d2 == dom
    assert np.array_equal(u, v)
