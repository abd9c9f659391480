"""Higher-order linearizations of the minimal graph equation at u = 0.

Boundary data ``f = sum_j eps_j f_j`` gives ``u = sum eps_j v^j + 1/2 sum eps_j eps_k w^jk
+ 1/6 sum eps_j eps_k eps_l w^jkl + ...``.  Every order solves the stability
equation ``(Delta_g + h1/2) w = -I`` with a source built from lower orders.
Symmetrizations ``X^(j Y^k)`` are plain sums over the distinct index
assignments, without a 1/n! factor.

A second, independent route (``fd_linearize``) differentiates the nonlinear
solver in the amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import eigsh, splu

from .errors import EigenvalueObstruction
from .forward import BoundaryData, DNSample, NewtonOptions, solve_minimal_surface
from .geometry import (Domain, LinearizationCoefficients, MetricFamily, apply_op, contract,
                       div_form_matrix, eval_coefficients, grad, grad_inner)


@dataclass
class LinearizedSystem:
    order: int
    indices: tuple
    rhs: np.ndarray
    solution: np.ndarray


# --------------------------------------------------------------------------
# The stability operator
# --------------------------------------------------------------------------


class StabilityOperator:
    """Discrete ``Delta_g + h1/2`` with homogeneous Dirichlet conditions."""

    def __init__(self, coeffs: LinearizationCoefficients, domain: Domain, check: bool = True):
        self.coeffs = coeffs
        self.domain = domain
        L = div_form_matrix(domain, coeffs.d, coeffs.k) + sps.diags(coeffs.q.ravel())
        self.full = L.tocsr()
        keep = domain.interior_flat
        self.keep = keep
        self.L_ii = self.full[keep][:, keep].tocsc()
        self.L_ib = self.full[keep][:, domain.boundary_flat].tocsc()
        self.lambda_min = self.smallest_eigenvalue() if check else None
        self._lu = splu(self.L_ii)

    def smallest_eigenvalue(self):
        """Dirichlet eigenvalue of smallest modulus, raising on near-singularity."""
        dom = self.domain
        dI = self.coeffs.d.ravel()[self.keep]
        A = (sps.diags(dI) @ self.L_ii).tocsc()
        A = 0.5 * (A + A.T)
        thresh = 1e-3 * np.pi ** 2 * (1 / (dom.x1 - dom.x0) ** 2 + 1 / (dom.y1 - dom.y0) ** 2)
        try:
            lam = eigsh(A, k=1, M=sps.diags(dI).tocsc(), sigma=0, which="LM",
                        return_eigenvectors=False)[0]
        except RuntimeError as exc:
            raise EigenvalueObstruction(f"stability operator is singular: {exc}") from exc
        if abs(lam) < thresh:
            raise EigenvalueObstruction(
                f"0 is (numerically) a Dirichlet eigenvalue: |lambda_min| = {abs(lam):.3g}")
        return float(lam)

    def _solve(self, b):
        if np.iscomplexobj(b):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(np.ascontiguousarray(b.imag))
        return self._lu.solve(b)

    def solve(self, source, boundary=None):
        """Solve ``L w = source`` inside with ``w = boundary`` on the boundary."""
        dom = self.domain
        rhs = np.asarray(source).ravel()[self.keep]
        dtype = np.result_type(rhs, float if boundary is None else boundary)
        w = np.zeros(dom.shape, dtype=dtype)
        if boundary is not None:
            rhs = rhs - self.L_ib @ boundary
            w.ravel()[dom.boundary_flat] = boundary
        w.ravel()[self.keep] = self._solve(rhs)
        return w

    def apply(self, w):
        return apply_op(self.full, w, self.domain)


def _values(f):
    return f.values if isinstance(f, BoundaryData) else np.asarray(f)


def solve_first(f_j, coeffs, domain: Domain, op: StabilityOperator | None = None):
    """``(Delta_g + h1/2) v = 0`` with ``v = f_j`` on the boundary."""
    op = op or StabilityOperator(coeffs, domain)
    return op.solve(np.zeros(domain.shape), _values(f_j))


# --------------------------------------------------------------------------
# Source terms
# --------------------------------------------------------------------------


def apply_Pj(v_j, w, coeffs, domain: Domain):
    """``P^j w = -d^-1 div(d v^j k1 grad w)``."""
    K = v_j[..., None, None] * coeffs.k1
    return apply_op(div_form_matrix(domain, coeffs.d, K), w, domain)


def apply_Pjk(v_j, v_k, w_jk, F, coeffs, domain: Domain):
    """Second-order coefficient operator acting on ``F``.

    ``P^jk F = -d^-1 div(d T grad F) - k(grad(d2 v^j v^k / d), grad F)`` with
    ``T = k2 v^j v^k + k1 w^jk - k g(grad v^j, grad v^k)``.
    """
    c = coeffs
    gvv = grad_inner(v_j, v_k, c.k, domain)
    T = (v_j * v_k)[..., None, None] * c.k2 + w_jk[..., None, None] * c.k1 - gvv[..., None, None] * c.k
    out = apply_op(div_form_matrix(domain, c.d, T), F, domain)
    out = out - grad_inner(c.d2 * v_j * v_k / c.d, F, c.k, domain)
    out[domain.boundary] = 0
    return out


def rhs_second(vj, vk, coeffs, domain):
    c = coeffs
    I = (apply_Pj(vj, vk, c, domain) + apply_Pj(vk, vj, c, domain)
         + grad_inner(vj, vk, c.k1, domain) + 0.5 * c.h2 * vj * vk)
    I[domain.boundary] = 0
    return I


def rhs_third(v, w, coeffs, domain):
    """Source of the third linearization.

    ``v = (v^j, v^k, v^l)`` and ``w = {(0, 1): w^jk, (0, 2): w^jl, (1, 2): w^kl}``.
    """
    c = coeffs
    I = 0.5 * v[0] * v[1] * v[2] * c.h3
    for a, b, m in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        wab = w[(a, b)]
        I = I + apply_Pjk(v[a], v[b], wab, v[m], c, domain)
        I = I + apply_Pj(v[m], wab, c, domain)
        I = I + grad_inner(v[a], v[b], c.k2, domain) * v[m]
        I = I + grad_inner(v[m], wab, c.k1, domain)
        I = I + 0.5 * grad_inner(v[a], v[b], c.k, domain) * v[m] * c.h1
        I = I + 0.5 * wab * v[m] * c.h2
    I[domain.boundary] = 0
    return I


def solve_second(j, k, first_solutions, coeffs, domain, op=None):
    op = op or StabilityOperator(coeffs, domain)
    I = rhs_second(first_solutions[j], first_solutions[k], coeffs, domain)
    return op.solve(-I)


def solve_third(j, k, l, lower_solutions, coeffs, domain, op=None):
    """``lower_solutions = (vs, ws)`` with ``ws[(a, b)]`` for sorted index pairs."""
    op = op or StabilityOperator(coeffs, domain)
    vs, ws = lower_solutions
    idx = (j, k, l)
    v = [vs[i] for i in idx]
    w = {(a, b): ws[tuple(sorted((idx[a], idx[b])))] for a, b in ((0, 1), (0, 2), (1, 2))}
    return op.solve(-rhs_third(v, w, coeffs, domain))


# --------------------------------------------------------------------------
# Conormal derivatives of the DN map
# --------------------------------------------------------------------------


def _side_tensor(T, sd):
    return T[sd.i, sd.j]


def _alpha_terms(coeffs, sd):
    """Per-side (n, k0, k1, k2) needed by the s-derivatives of the conormal."""
    n = np.array(sd.normal)
    return n, _side_tensor(coeffs.k, sd), _side_tensor(coeffs.k1, sd), _side_tensor(coeffs.k2, sd)


def _kn(T, n, X):
    return n[0] * (T[..., 0, 0] * X[0] + T[..., 0, 1] * X[1]) + n[1] * (T[..., 1, 0] * X[0] + T[..., 1, 1] * X[1])


def _knn(T, n):
    return T[..., 0, 0] * n[0] ** 2 + 2 * T[..., 0, 1] * n[0] * n[1] + T[..., 1, 1] * n[1] ** 2


def alpha(order, coeffs, sd, X):
    """s-derivative of ``alpha_s(X) = k_s(n, X) / sqrt(k_s(n, n))`` at s = 0."""
    n, k0, k1, k2 = _alpha_terms(coeffs, sd)
    m0, m1, m2 = _knn(k0, n), _knn(k1, n), _knn(k2, n)
    N0, N1, N2 = _kn(k0, n, X), _kn(k1, n, X), _kn(k2, n, X)
    D0 = m0 ** -0.5
    D1 = -0.5 * m0 ** -1.5 * m1
    D2 = 0.75 * m0 ** -2.5 * m1 ** 2 - 0.5 * m0 ** -1.5 * m2
    if order == 0:
        return N0 * D0
    if order == 1:
        return N1 * D0 + N0 * D1
    if order == 2:
        return N2 * D0 + 2 * N1 * D1 + N0 * D2
    raise ValueError("alpha is needed up to order 2")


def _side_grad(u, domain):
    gx, gy = grad(u, domain)
    return [(gx[sd.i, sd.j], gy[sd.i, sd.j]) for sd in domain.sides]


def dn_first(v, coeffs, domain):
    return [alpha(0, coeffs, sd, G) for sd, G in zip(domain.sides, _side_grad(v, domain))]


def dn_second(vj, vk, wjk, coeffs, domain):
    out = []
    Gj, Gk, Gw = _side_grad(vj, domain), _side_grad(vk, domain), _side_grad(wjk, domain)
    for n, sd in enumerate(domain.sides):
        val = alpha(0, coeffs, sd, Gw[n])
        val = val + alpha(1, coeffs, sd, Gk[n]) * vj[sd.i, sd.j] + alpha(1, coeffs, sd, Gj[n]) * vk[sd.i, sd.j]
        out.append(val)
    return out


def dn_third(v, w, w3, coeffs, domain):
    """``v`` triple, ``w`` dict over position pairs as in ``rhs_third``."""
    Gv = [_side_grad(x, domain) for x in v]
    Gw = {key: _side_grad(x, domain) for key, x in w.items()}
    G3 = _side_grad(w3, domain)
    out = []
    for n, sd in enumerate(domain.sides):
        val = alpha(0, coeffs, sd, G3[n])
        for a, b, m in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            vm = v[m][sd.i, sd.j]
            wab = w[(a, b)][sd.i, sd.j]
            val = val + alpha(1, coeffs, sd, Gw[(a, b)][n]) * vm
            val = val + alpha(1, coeffs, sd, Gv[m][n]) * wab
            val = val + alpha(2, coeffs, sd, Gv[m][n]) * v[a][sd.i, sd.j] * v[b][sd.i, sd.j]
        out.append(val)
    return out


# --------------------------------------------------------------------------
# Cached hierarchy for a list of boundary data
# --------------------------------------------------------------------------


class Linearization:
    """Lazily computed ``v^j``, ``w^jk``, ``w^jkl`` for boundary data ``f_list``."""

    def __init__(self, family_or_coeffs, domain: Domain, f_list, check: bool = True):
        if isinstance(family_or_coeffs, MetricFamily):
            self.coeffs = eval_coefficients(family_or_coeffs, domain)
        else:
            self.coeffs = family_or_coeffs
        self.domain = domain
        self.f_list = [_values(f) for f in f_list]
        self.op = StabilityOperator(self.coeffs, domain, check=check)
        self._v, self._w, self._w3 = {}, {}, {}

    def v(self, j):
        if j not in self._v:
            self._v[j] = self.op.solve(np.zeros(self.domain.shape), self.f_list[j])
        return self._v[j]

    def w(self, j, k):
        key = tuple(sorted((j, k)))
        if key not in self._w:
            self._w[key] = self.op.solve(-rhs_second(self.v(key[0]), self.v(key[1]), self.coeffs, self.domain))
        return self._w[key]

    def _triple(self, idx):
        v = [self.v(i) for i in idx]
        w = {(a, b): self.w(idx[a], idx[b]) for a, b in ((0, 1), (0, 2), (1, 2))}
        return v, w

    def w3(self, j, k, l):
        key = tuple(sorted((j, k, l)))
        if key not in self._w3:
            v, w = self._triple(key)
            self._w3[key] = self.op.solve(-rhs_third(v, w, self.coeffs, self.domain))
        return self._w3[key]

    def system(self, *idx):
        order = len(idx)
        if order == 1:
            return LinearizedSystem(1, idx, np.zeros(self.domain.shape), self.v(*idx))
        if order == 2:
            return LinearizedSystem(2, idx, rhs_second(self.v(idx[0]), self.v(idx[1]), self.coeffs, self.domain),
                                    self.w(*idx))
        v, w = self._triple(tuple(idx))
        return LinearizedSystem(3, idx, rhs_third(v, w, self.coeffs, self.domain), self.w3(*idx))

    def dn(self, *idx):
        order = len(idx)
        if order == 1:
            sides = dn_first(self.v(idx[0]), self.coeffs, self.domain)
        elif order == 2:
            j, k = idx
            sides = dn_second(self.v(j), self.v(k), self.w(j, k), self.coeffs, self.domain)
        elif order == 3:
            key = tuple(sorted(idx))
            v, w = self._triple(key)
            sides = dn_third(v, w, self.w3(*key), self.coeffs, self.domain)
        else:
            raise ValueError("orders 1 to 3 only")
        return DNSample(sides, self.domain)


def dn_derivative(order, indices, f_list, family, domain, lin: Linearization | None = None):
    """``d^order / d eps_indices`` of the DN map at ``eps = 0``."""
    if len(indices) != order:
        raise ValueError("need one index per order")
    lin = lin or Linearization(family, domain, f_list)
    return lin.dn(*indices)


# --------------------------------------------------------------------------
# Finite differences of the nonlinear solver
# --------------------------------------------------------------------------


def _mixed_stencil(order, idx, f_list, eps, solve):
    fs = [np.asarray(_values(f_list[i])) for i in idx]
    acc = None
    for signs in product((1, -1), repeat=order):
        data = eps * sum(s * f for s, f in zip(signs, fs))
        val = np.prod(signs) * solve(data)
        acc = val if acc is None else acc + val
    return acc / (2 ** order * eps ** order)


def fd_linearize(order, indices, f_list, family: MetricFamily, domain: Domain, eps=None,
                 opts: NewtonOptions | None = None, richardson: bool = True, output: str = "u"):
    """Mixed central differences in the amplitudes, Richardson-extrapolated.

    ``output='u'`` differentiates the solution, ``output='dn'`` the DN map
    (returned as a ``DNSample``).  Uses ``2**order`` solves per step size.
    """
    from .forward import DiscreteArea, conormal_derivative

    if len(indices) != order:
        raise ValueError("need one index per order")
    eps = eps if eps is not None else {1: 1e-2, 2: 1e-2, 3: 3e-2}[order]
    opts = opts or NewtonOptions(tol=1e-13, delta_admissible=np.inf)
    F = DiscreteArea(family, domain)

    def solve(vals):
        u = solve_minimal_surface(BoundaryData(vals, domain), family, domain, opts, F).u
        if output == "dn":
            return np.concatenate(conormal_derivative(u, family, domain))
        return u

    D1 = _mixed_stencil(order, indices, f_list, eps, solve)
    if richardson:
        D2 = _mixed_stencil(order, indices, f_list, eps / 2, solve)
        D1 = (4 * D2 - D1) / 3
    if output == "dn":
        sizes = np.cumsum([len(sd.i) for sd in domain.sides])[:-1]
        return DNSample(np.split(D1, sizes), domain)
    return D1
