import numpy as np
import pytest

from minsurf.errors import EigenvalueObstruction
from minsurf.forward import BoundaryData
from minsurf.geometry import Domain, eval_coefficients, laplace_beltrami, make_family
from minsurf.linearize import Linearization, StabilityOperator, dn_derivative, fd_linearize


def data(d):
    fns = (lambda x, y: np.sin(1.3 * x + 0.4) + 0.5 * y, lambda x, y: np.cos(2 * y - 0.3 * x),
           lambda x, y: x * y + 0.3 * x * x)
    fl = [BoundaryData.from_function(d, fn) for fn in fns]
    return [(1 / f.norm()) * f for f in fl]


@pytest.fixture(scope="module")
def d33():
    return Domain.square(1.0, 33)


def test_first_linearization_flat_harmonic(d33):
    # x y is harmonic and reproduced exactly by the 5-point stencil
    f = BoundaryData.from_function(d33, lambda x, y: x * y)
    lin = Linearization(make_family("euclidean"), d33, [f])
    assert np.allclose(lin.v(0), d33.X * d33.Y, atol=1e-12)


def test_first_linearization_solves_laplace_beltrami_plus_q(d33):
    fam = make_family("gammaB")
    lin = Linearization(fam, d33, data(d33))
    co = lin.coeffs
    v = lin.v(0)
    res = laplace_beltrami(v, co, d33) + co.q * v
    assert np.max(np.abs(res[d33.interior])) < 1e-9


def test_flat_second_linearization_vanishes(d33):
    # the flat minimal surface operator is odd in u
    lin = Linearization(make_family("euclidean"), d33, data(d33))
    assert np.max(np.abs(lin.w(0, 1))) < 1e-14
    assert np.max(np.abs(lin.w3(0, 1, 2))) > 1e-3


def test_linearizations_are_symmetric_in_indices(d33):
    lin = Linearization(make_family("gammaB"), d33, data(d33))
    assert np.array_equal(lin.w(0, 1), lin.w(1, 0))
    assert np.array_equal(lin.w3(0, 1, 2), lin.w3(2, 0, 1))
    assert np.allclose(lin.dn(0, 1, 2).flat(), lin.dn(1, 2, 0).flat())


@pytest.mark.parametrize("order,idx", [(1, (0,)), (2, (0, 1)), (3, (0, 1, 2))])
def test_pde_vs_finite_differences_converge(order, idx):
    # the linearized PDEs are discretized on their own, so the gap to the
    # derivative of the discrete nonlinear solver is O(dx^2)
    fam = make_family("gammaB")
    gaps = []
    for n in (33, 65):
        d = Domain.square(1.0, n)
        fl = data(d)
        lin = Linearization(fam, d, fl)
        pde = {1: lin.v, 2: lin.w, 3: lin.w3}[order](*idx)
        fd = fd_linearize(order, idx, fl, fam, d)
        gaps.append(np.linalg.norm(fd - pde) / np.linalg.norm(pde))
        dn_fd = fd_linearize(order, idx, fl, fam, d, output="dn").flat()
        dn = dn_derivative(order, idx, fl, fam, d, lin).flat()
        assert np.linalg.norm(dn_fd - dn) / np.linalg.norm(dn) < 0.05
    assert gaps[1] < 1e-2
    assert gaps[1] < gaps[0] / 3 or gaps[1] < 1e-8


def test_index_count_checked(d33):
    with pytest.raises(ValueError):
        dn_derivative(2, (0,), data(d33), make_family("euclidean"), d33)


def test_eigenvalue_obstruction():
    # q = -lambda_1 of the square makes the stability operator singular
    d = Domain.square(1.0, 33)
    co = eval_coefficients(make_family("euclidean"), d)
    lam = 2 * (np.pi / 2) ** 2
    # discrete first eigenvalue of the 5-point Laplacian on this grid
    hx = d.hx
    lam_h = 2 * (4 / hx ** 2) * np.sin(np.pi * hx / 4) ** 2
    assert lam_h == pytest.approx(lam, rel=1e-2)
    co.h1 = np.full(d.shape, -2 * lam_h)
    with pytest.raises(EigenvalueObstruction):
        StabilityOperator(co, d, check=True)
