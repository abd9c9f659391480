import numpy as np
import pytest

from minsurf.criteria import identity_data
from minsurf.geometry import Domain, make_family
from minsurf.identities import second_identity, third_identity
from minsurf.linearize import Linearization


@pytest.fixture(scope="module")
def reports():
    fam = make_family("gammaB")
    out = {}
    for n in (65, 129):
        d = Domain.square(1.0, n)
        lin = Linearization(fam, d, identity_data(d))
        out[n] = (second_identity(0, 1, 2, lin), third_identity(0, 1, 2, 3, lin))
    return out


def test_residuals_small_and_converging(reports):
    (a2, a3), (b2, b3) = reports[65], reports[129]
    assert b2.relative_residual < 5e-3
    assert b3.relative_residual < 2e-2
    assert np.log2(a2.relative_residual / b2.relative_residual) > 1.6
    assert np.log2(a3.relative_residual / b3.relative_residual) > 1.6


def test_report_structure(reports):
    r2, r3 = reports[129]
    assert r2.order == 2 and r3.order == 3
    assert set(r3.groups) == {"GG", "H", "R", "B", "alpha"}
    names = [k for k, _ in r3.rows()]
    assert names[0] == "lhs" and names[-1] == "residual"
    assert r2.residual == pytest.approx(r2.lhs - r2.rhs)
    assert r2.scale >= abs(r2.lhs)


def test_identities_symmetric_in_data_slots():
    d = Domain.square(1.0, 65)
    lin = Linearization(make_family("gammaB"), d, identity_data(d))
    a, b = second_identity(0, 1, 2, lin), second_identity(1, 0, 2, lin)
    assert a.lhs == pytest.approx(b.lhs, rel=1e-10)
    assert a.rhs == pytest.approx(b.rhs, rel=1e-10)


def test_flat_second_identity_trivial():
    # flat metric: no second-order coefficients, both sides vanish
    d = Domain.square(1.0, 33)
    r = second_identity(0, 1, 2, Linearization(make_family("euclidean"), d, identity_data(d)))
    assert abs(r.lhs) < 1e-12 and abs(r.rhs) < 1e-12
