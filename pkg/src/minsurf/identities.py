"""Integral identities pairing DN-map derivatives with interior integrals.

Both identities come from Green's formula for the stability operator,
``oint f_m d_nu w dS_g = int v^m I dV``, applied to the second and third
linearizations, followed by integration by parts of every divergence term
in the source ``I``.  The conormal of the nonlinear DN map also depends on
``u``; its s-derivatives contribute boundary terms named ``alpha*``.

Third-order term groups follow the usual split into

* ``GG``: the three products ``g(grad v, grad v) g(grad v, grad v^m)``,
* ``H``: terms with second s-derivatives (``k2``, ``d2``, ``h3``),
* ``R``: terms with second-order solutions ``w`` or ``h1``, ``h2``,
* ``B``: boundary integrals of the source,

and the identity reads ``lhs = -(GG + H + R + B) + alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Domain, contract, grad, integrate, side_weights
from .linearize import Linearization, alpha

_PAIRS3 = ((0, 1, 2), (0, 2, 1), (1, 2, 0))


@dataclass
class IdentityReport:
    order: int
    indices: tuple
    lhs: complex
    terms: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    rhs: complex = 0.0
    residual: complex = 0.0

    @property
    def scale(self):
        vals = [abs(self.lhs)] + [abs(v) for v in self.terms.values()]
        return max(vals)

    @property
    def relative_residual(self):
        s = self.scale
        return abs(self.residual) / s if s > 0 else 0.0

    def rows(self):
        out = [("lhs", self.lhs)]
        out += sorted(self.terms.items())
        out += [(f"group:{k}", v) for k, v in sorted(self.groups.items())]
        out += [("rhs", self.rhs), ("residual", self.residual)]
        return out


class _Ctx:
    """Gradients and quadrature shared by the term evaluations."""

    def __init__(self, lin: Linearization):
        self.lin = lin
        self.c = lin.coeffs
        self.dom: Domain = lin.domain
        self._g = {}

    def grad(self, key, field_):
        if key not in self._g:
            self._g[key] = grad(field_, self.dom)
        return self._g[key]

    def vol(self, f):
        return integrate(f, self.dom, self.c.d, "riemannian")

    def bdry_E(self, per_side):
        """``oint X d dS_E`` for per-side values ``X``."""
        total = 0.0
        for sd, vals in zip(self.dom.sides, per_side):
            total = total + np.sum(side_weights(sd) * self.c.d[sd.i, sd.j] * vals)
        return total

    def bdry_g(self, per_side):
        """``oint X dS_g`` with the induced line element at s = 0."""
        total = 0.0
        g0 = self.c.g
        for sd, vals in zip(self.dom.sides, per_side):
            w = side_weights(sd) * np.sqrt(g0[sd.i, sd.j, sd.axis, sd.axis])
            total = total + np.sum(w * vals)
        return total

    def side(self, f, sd):
        return f[sd.i, sd.j]

    def side_grad(self, G, sd):
        return G[0][sd.i, sd.j], G[1][sd.i, sd.j]

    def kn(self, T, sd, G):
        """``T(n, grad F)`` on a side."""
        n1, n2 = sd.normal
        Ts = T[sd.i, sd.j]
        gx, gy = self.side_grad(G, sd)
        return n1 * (Ts[..., 0, 0] * gx + Ts[..., 0, 1] * gy) + n2 * (Ts[..., 1, 0] * gx + Ts[..., 1, 1] * gy)


def second_identity(j, k, m, lin: Linearization) -> IdentityReport:
    """Second-order identity for data indices ``j, k`` tested against ``f_m``."""
    X = _Ctx(lin)
    c, dom = X.c, X.dom
    vj, vk, vm = lin.v(j), lin.v(k), lin.v(m)
    Gj, Gk, Gm = X.grad(("v", j), vj), X.grad(("v", k), vk), X.grad(("v", m), vm)
    lhs = X.bdry_g([X.side(vm, sd) * val for sd, val in zip(dom.sides, lin.dn(j, k).sides)])
    t = {}
    t["k1:v^m(v^k,v^j)"] = X.vol(vm * contract(c.k1, Gk, Gj))
    t["k1:v^k(v^j,v^m)"] = X.vol(vk * contract(c.k1, Gj, Gm))
    t["k1:v^j(v^k,v^m)"] = X.vol(vj * contract(c.k1, Gk, Gm))
    t["h2"] = 0.5 * X.vol(c.h2 * vj * vk * vm)
    t["boundary:k1"] = -X.bdry_E([X.side(vm, sd) * (X.kn(c.k1, sd, Gj) * X.side(vk, sd)
                                                    + X.kn(c.k1, sd, Gk) * X.side(vj, sd))
                                  for sd in dom.sides])
    t["alpha1"] = X.bdry_g([X.side(vm, sd) * (alpha(1, c, sd, X.side_grad(Gk, sd)) * X.side(vj, sd)
                                              + alpha(1, c, sd, X.side_grad(Gj, sd)) * X.side(vk, sd))
                            for sd in dom.sides])
    rhs = sum(t.values())
    return IdentityReport(2, (j, k, m), lhs, t, {}, rhs, lhs - rhs)


def third_terms(idx, m, lin: Linearization, X: _Ctx | None = None):
    """Named sub-integrals of ``GG``, ``H``, ``R``, ``B`` (each with its group sign)."""
    X = X or _Ctx(lin)
    c, dom = X.c, X.dom
    key = tuple(sorted(idx))
    v = [lin.v(i) for i in idx]
    Gv = [X.grad(("v", i), lin.v(i)) for i in idx]
    vm = lin.v(m)
    Gm = X.grad(("v", m), vm)
    t = {"GG": {}, "H": {}, "R": {}, "B": {}}
    for a, b, p in _PAIRS3:
        tag = f"[{idx[a]}{idx[b]}|{idx[p]}]"
        wab = lin.w(idx[a], idx[b])
        Gw = X.grad(("w",) + tuple(sorted((idx[a], idx[b]))), wab)
        gab = contract(c.k, Gv[a], Gv[b])
        t["GG"]["gg" + tag] = X.vol(gab * contract(c.k, Gv[p], Gm))
        # second s-derivative terms
        t["H"]["k2:vv(v,v^m)" + tag] = -X.vol(v[a] * v[b] * contract(c.k2, Gv[p], Gm))
        Gd = grad(c.d2 * v[a] * v[b] / c.d, dom)
        t["H"]["d2" + tag] = X.vol(vm * contract(c.k, Gd, Gv[p]))
        t["H"]["k2:v^m(v,v)v" + tag] = -X.vol(vm * contract(c.k2, Gv[a], Gv[b]) * v[p])
        # second-order solutions
        t["R"]["w k1(v,v^m)" + tag] = -X.vol(wab * contract(c.k1, Gv[p], Gm))
        t["R"]["v k1(v^m,w)" + tag] = -X.vol(v[p] * contract(c.k1, Gm, Gw))
        t["R"]["v^m k1(v,w)" + tag] = -X.vol(vm * contract(c.k1, Gv[p], Gw))
        t["R"]["h1" + tag] = -0.5 * X.vol(vm * gab * v[p] * c.h1)
        t["R"]["h2" + tag] = -0.5 * X.vol(vm * wab * v[p] * c.h2)
        # boundary
        sides = dom.sides
        t["B"]["k2" + tag] = X.bdry_E([X.side(vm * v[a] * v[b], sd) * X.kn(c.k2, sd, Gv[p]) for sd in sides])
        t["B"]["w k1" + tag] = X.bdry_E([X.side(vm * wab, sd) * X.kn(c.k1, sd, Gv[p]) for sd in sides])
        t["B"]["g d_nu" + tag] = -X.bdry_E([X.side(vm * gab, sd) * X.kn(c.k, sd, Gv[p]) for sd in sides])
        t["B"]["v k1(n,w)" + tag] = X.bdry_E([X.side(vm * v[p], sd) * X.kn(c.k1, sd, Gw) for sd in sides])
    t["H"]["h3"] = -0.5 * X.vol(vm * v[0] * v[1] * v[2] * c.h3)
    return t, key


def third_identity(j, k, l, m, lin: Linearization) -> IdentityReport:
    """Third-order identity ``lhs = -(GG + H + R + B) + alpha``."""
    X = _Ctx(lin)
    c, dom = X.c, X.dom
    idx = (j, k, l)
    t, key = third_terms(idx, m, lin, X)
    vm = lin.v(m)
    lhs = X.bdry_g([X.side(vm, sd) * val for sd, val in zip(dom.sides, lin.dn(j, k, l).sides)])
    v = [lin.v(i) for i in idx]
    Gv = [X.grad(("v", i), lin.v(i)) for i in idx]
    al = 0.0
    for a, b, p in _PAIRS3:
        wab = lin.w(idx[a], idx[b])
        Gw = X.grad(("w",) + tuple(sorted((idx[a], idx[b]))), wab)
        al = al + X.bdry_g([X.side(vm, sd) * (
            alpha(1, c, sd, X.side_grad(Gw, sd)) * X.side(v[p], sd)
            + alpha(1, c, sd, X.side_grad(Gv[p], sd)) * X.side(wab, sd)
            + alpha(2, c, sd, X.side_grad(Gv[p], sd)) * X.side(v[a] * v[b], sd))
            for sd in dom.sides])
    groups = {name: sum(sub.values()) for name, sub in t.items()}
    groups["alpha"] = al
    terms = {f"{g}:{n}": val for g, sub in t.items() for n, val in sub.items()}
    terms["alpha"] = al
    rhs = -(groups["GG"] + groups["H"] + groups["R"] + groups["B"]) + al
    return IdentityReport(3, (j, k, l, m), lhs, terms, groups, rhs, lhs - rhs)
