"""Grid, metric families and the discrete differential operators.

Conventions
-----------
Grid arrays use ``indexing='ij'``: ``u[i, j]`` lives at ``(x[i], y[j])``.
The ambient metric in Fermi coordinates is ``ds^2 + g_ab(x, s) dx^a dx^b``.
``grad`` is the Euclidean coordinate gradient; tensors such as ``k = g^-1``
contract it explicitly.  The Laplace-Beltrami operator carries the positive
sign, ``Delta_g u = -|g|^{-1/2} d_a(|g|^{1/2} g^ab d_b u)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
import sympy as sp

from .errors import NonMinimal, NotSPD

X_SYM, Y_SYM, S_SYM = sp.symbols("x y s", real=True)

# Grid fields are plain numpy arrays of shape ``domain.shape``.
GridFunction = np.ndarray


# --------------------------------------------------------------------------
# Domain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Side:
    """One edge of the rectangle, nodes ordered counterclockwise."""

    name: str
    i: np.ndarray
    j: np.ndarray
    normal: tuple[float, float]
    axis: int  # coordinate running along the side (0 = x, 1 = y)
    step: float
    orientation: int  # +1 if the side runs in increasing coordinate


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle with a uniform tensor grid."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 17 or self.ny < 17:
            raise ValueError("resolution must be at least 17 per axis")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("empty extent")

    @classmethod
    def square(cls, half_width: float = 1.0, n: int = 129, center=(0.0, 0.0)):
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, n, n)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @cached_property
    def x(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @cached_property
    def y(self):
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def hx(self):
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y1 - self.y0) / (self.ny - 1)

    @cached_property
    def X(self):
        return np.meshgrid(self.x, self.y, indexing="ij")[0]

    @cached_property
    def Y(self):
        return np.meshgrid(self.x, self.y, indexing="ij")[1]

    @property
    def Z(self):
        return self.X + 1j * self.Y

    @property
    def diam(self):
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    @cached_property
    def interior(self):
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    @cached_property
    def boundary(self):
        return ~self.interior

    @cached_property
    def sides(self) -> tuple[Side, ...]:
        nx, ny = self.nx, self.ny
        ar_x, ar_y = np.arange(nx), np.arange(ny)
        return (
            Side("bottom", ar_x, np.zeros(nx, int), (0.0, -1.0), 0, self.hx, +1),
            Side("right", np.full(ny, nx - 1), ar_y, (1.0, 0.0), 1, self.hy, +1),
            Side("top", ar_x[::-1], np.full(nx, ny - 1), (0.0, 1.0), 0, self.hx, -1),
            Side("left", np.zeros(ny, int), ar_y[::-1], (-1.0, 0.0), 1, self.hy, -1),
        )

    @cached_property
    def boundary_ij(self):
        """Unique boundary nodes, counterclockwise from the lower-left corner."""
        ii, jj = [], []
        for sd in self.sides:
            ii.append(sd.i[:-1])
            jj.append(sd.j[:-1])
        return np.concatenate(ii), np.concatenate(jj)

    @cached_property
    def boundary_flat(self):
        i, j = self.boundary_ij
        return np.ravel_multi_index((i, j), self.shape)

    @cached_property
    def interior_flat(self):
        return np.flatnonzero(self.interior.ravel())

    @property
    def n_boundary(self):
        return 2 * (self.nx - 1) + 2 * (self.ny - 1)

    def side_slices(self):
        """Positions of each side's nodes inside the unique boundary vector."""
        out, start = [], 0
        nb = self.n_boundary
        for sd in self.sides:
            n = len(sd.i)
            out.append((start + np.arange(n)) % nb)
            start += n - 1
        return out

    def boundary_values(self, u: GridFunction) -> np.ndarray:
        i, j = self.boundary_ij
        return u[i, j]

    def trace(self, fn: Callable) -> np.ndarray:
        """Sample ``fn(x, y)`` on the boundary nodes."""
        i, j = self.boundary_ij
        return np.asarray(fn(self.x[i], self.y[j]))

    def with_boundary(self, f: np.ndarray, interior: GridFunction | None = None, dtype=None):
        dt = dtype or np.result_type(f, float if interior is None else interior)
        u = np.zeros(self.shape, dtype=dt) if interior is None else np.array(interior, dtype=dt)
        i, j = self.boundary_ij
        u[i, j] = f
        return u

    def refine(self, factor: int = 2):
        return Domain(self.x0, self.x1, self.y0, self.y1,
                      factor * (self.nx - 1) + 1, factor * (self.ny - 1) + 1)


# --------------------------------------------------------------------------
# Symbolic helpers for closed-form families
# --------------------------------------------------------------------------


def _smoothstep_poly(order: int = 5):
    t = sp.Symbol("t")
    n = order
    poly = t ** (n + 1) * sum(comb(n + k, k) * comb(2 * n + 1, n - k) * (-t) ** k
                              for k in range(n + 1))
    return t, sp.expand(poly)


_T, _STEP = _smoothstep_poly(5)


def plateau(x, y, x0, y0, r1, r2, order=5):
    """1 on the disk of radius r1, 0 outside r2, C^order in between (polynomial in r^2)."""
    rho = (x - x0) ** 2 + (y - y0) ** 2
    t = (rho - r1 ** 2) / (r2 ** 2 - r1 ** 2)
    T, step = (_T, _STEP) if order == 5 else _smoothstep_poly(order)
    return sp.Piecewise((1, rho <= r1 ** 2), (1 - step.subs(T, t), rho < r2 ** 2), (0, True))


def bump(x, y, x0, y0, radius):
    """Smooth compact bump equal to 1 at the center."""
    return plateau(x, y, x0, y0, 0, radius)


SYMPY_LOCALS = {"x": X_SYM, "y": Y_SYM, "s": S_SYM, "bump": bump, "plateau": plateau,
                "pi": sp.pi, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos}


def _lambdify(expr):
    f = sp.lambdify((X_SYM, Y_SYM, S_SYM), expr, modules="numpy")

    def call(x, y, s):
        x = np.asarray(x)
        s = np.asarray(s)
        shape = np.broadcast_shapes(x.shape, np.shape(y), s.shape)
        out = f(x, y, s)
        return np.broadcast_to(np.asarray(out), shape)

    return call


# --------------------------------------------------------------------------
# Metric families
# --------------------------------------------------------------------------


class MetricFamily:
    """One-parameter family ``g(x, s)`` of symmetric 2x2 metrics.

    Closed-form families carry exact s-derivatives up to order 4 obtained
    by symbolic differentiation; tabulated families (``from_callable``)
    use a 9-point finite-difference stencil in ``s`` with step ``s_step``.
    All evaluators accept complex ``s`` (needed by the complex-step Jacobian).
    """

    max_order = 4

    def __init__(self, name: str, matrix: sp.Matrix | None = None, *, func=None,
                 s_max: float = 0.5, s_step: float = 1e-2, description: str = ""):
        self.name = name
        self.s_max = s_max
        self.description = description
        if matrix is not None:
            m = sp.Matrix(matrix)
            # rebind x, y, s created elsewhere (possibly with other assumptions)
            own = {"x": X_SYM, "y": Y_SYM, "s": S_SYM}
            free = m.free_symbols
            extra = sorted(str(v) for v in free if str(v) not in own)
            if extra:
                raise ValueError(f"metric depends on unknown symbols {extra}")
            m = m.xreplace({v: own[str(v)] for v in free})
            if m.shape != (2, 2) or sp.simplify(m[0, 1] - m[1, 0]) != 0:
                raise ValueError("metric must be a symmetric 2x2 matrix")
            self.provenance = "analytic-closed-form"
            self.matrix = m
            comps = [m[0, 0], m[0, 1], m[1, 1]]
            self._g = [_lambdify(c) for c in comps]
            self._gs = [_lambdify(sp.diff(c, S_SYM)) for c in comps]
            self._d = [[_lambdify(sp.diff(c, S_SYM, l).subs(S_SYM, 0)) for c in comps]
                       for l in range(self.max_order + 1)]
        elif func is not None:
            self.provenance = "tabulated"
            self.matrix = None
            self._func = func
            self.s_step = s_step
        else:
            raise ValueError("need a symbolic matrix or a callable")

    # construction -----------------------------------------------------

    @classmethod
    def from_strings(cls, name, entries, defs=None, **kw):
        """Build from a 2x2 nested list of expression strings in x, y, s."""
        loc = dict(SYMPY_LOCALS)
        for k, v in (defs or {}).items():
            loc[k] = sp.sympify(v, locals=loc) if isinstance(v, str) else sp.nsimplify(v)
        m = sp.Matrix([[sp.sympify(str(e), locals=loc) for e in row] for row in entries])
        return cls(name, m, **kw)

    @classmethod
    def from_callable(cls, name, func, **kw):
        """``func(x, y, s) -> (g11, g12, g22)``; must accept complex ``s``."""
        return cls(name, None, func=func, **kw)

    def scaled(self, c_expr, name=None):
        """Conformal multiple ``c(x) g(x, s)`` of a closed-form family."""
        c = sp.sympify(c_expr, locals=SYMPY_LOCALS) if isinstance(c_expr, str) else c_expr
        return MetricFamily(name or f"{self.name}*c", c * self.matrix, s_max=self.s_max)

    # evaluation -----------------------------------------------------------

    def g(self, x, y, s):
        if self.provenance == "tabulated":
            return tuple(np.asarray(c) for c in self._func(x, y, s))
        return tuple(f(x, y, s) for f in self._g)

    def g_ds(self, x, y, s):
        if self.provenance == "tabulated":
            e = self.s_step * 1e-3
            gp, gm = self.g(x, y, s + e), self.g(x, y, s - e)
            return tuple((a - b) / (2 * e) for a, b in zip(gp, gm))
        return tuple(f(x, y, s) for f in self._gs)

    def s_derivatives(self, x, y):
        """Array of shape (5, ..., 2, 2) with d^l/ds^l g at s = 0."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        out = np.empty((self.max_order + 1,) + shape + (2, 2))
        if self.provenance == "tabulated":
            comps = self._fd_derivatives(x, y)
        else:
            zero = np.zeros(shape)
            comps = [[np.real(f(x, y, zero)) for f in row] for row in self._d]
        for l, (a, b, c) in enumerate(comps):
            out[l, ..., 0, 0] = a
            out[l, ..., 0, 1] = b
            out[l, ..., 1, 0] = b
            out[l, ..., 1, 1] = c
        return out

    def _fd_derivatives(self, x, y):
        ks = np.arange(-4, 5)
        V = np.vander(ks * self.s_step, increasing=True).T  # V[p, k] = s_k^p
        samples = [self.g(x, y, np.full(np.broadcast_shapes(x.shape, y.shape), k * self.s_step))
                   for k in ks]
        res = []
        for l in range(self.max_order + 1):
            rhs = np.zeros(len(ks))
            rhs[l] = float(np.prod(np.arange(1, l + 1)))
            w = np.linalg.solve(V, rhs)
            res.append([sum(w[n] * np.real(samples[n][c]) for n in range(len(ks)))
                        for c in range(3)])
        return res

    def check_spd(self, domain: Domain, n_s: int = 9):
        lam = np.inf
        for s in np.linspace(-self.s_max, self.s_max, n_s):
            a, b, c = (np.real(v) for v in self.g(domain.X, domain.Y, np.full(domain.shape, s)))
            tr, det = a + c, a * c - b * b
            lo = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
            lam = min(lam, float(lo.min()))
        if not lam > 0:
            raise NotSPD(f"family {self.name!r} loses positive-definiteness (min eig {lam:.3g})")
        return lam

    def __repr__(self):
        return f"MetricFamily({self.name!r}, {self.provenance})"


# --------------------------------------------------------------------------
# Registry of named families
# --------------------------------------------------------------------------


def _profile(p):
    kind = p.get("profile", "bump")
    x0, y0 = p.get("center", (0.0, 0.0))
    if kind == "bump":
        return bump(X_SYM, Y_SYM, x0, y0, p.get("radius", 0.8))
    if kind == "plateau":
        return plateau(X_SYM, Y_SYM, x0, y0, p.get("r1", 0.4), p.get("r2", 0.85))
    if kind == "cutoff":
        # low-order polynomial transition: small constants in oscillatory integrals
        return plateau(X_SYM, Y_SYM, x0, y0, p.get("r1", 0.0), p.get("r2", 0.33), p.get("order", 4))
    if kind == "gaussian":
        w = p.get("width", 0.5)
        return sp.exp(-((X_SYM - x0) ** 2 + (Y_SYM - y0) ** 2) / (2 * w ** 2))
    if kind == "one":
        return sp.Integer(1)
    if kind == "expr":
        return sp.sympify(p["expr"], locals=SYMPY_LOCALS)
    raise ValueError(f"unknown profile {kind!r}")


def _traceless(kappa, theta, prof):
    c2, s2 = sp.cos(2 * theta), sp.sin(2 * theta)
    return kappa * prof * sp.Matrix([[c2, s2], [s2, -c2]])


def make_family(name: str, params: dict | None = None) -> MetricFamily:
    """Named families.  Parameters are floats; profiles are described in README."""
    p = dict(params or {})
    s, I = S_SYM, sp.eye(2)
    s_max = p.get("s_max", 0.5)
    if name == "euclidean":
        m = I
    elif name == "gamma":
        # I + s^2 gamma(x) I
        gam = p.get("amp", 0.3) * _profile({"profile": "gaussian", **p})
        m = (1 + s ** 2 * gam) * I
    elif name == "gamma_bump":
        gam = p.get("amp", 0.3) * _profile(p)
        m = (1 + s ** 2 * gam) * I
    elif name == "traceless":
        # I + s B + s^2 B^2 / 2 with trace-free B: k1 = -B, h1 = 0
        B = _traceless(p.get("kappa", 0.4), p.get("theta", 0.0), _profile(p))
        m = I + s * B + s ** 2 * B * B / 2
    elif name == "gammaB":
        # I + s B + s^2 C with C = gamma I + B^2/4: k1 = -B, h1 = 4 gamma
        B = _traceless(p.get("kappa", 0.3), p.get("theta", 0.3),
                       _profile({"profile": "gaussian", "width": p.get("width", 0.7)}))
        gam = p.get("amp", 0.3) * (1 + 0.5 * X_SYM * Y_SYM)
        m = I + s * B + s ** 2 * (gam * I + B * B / 4)
    elif name == "even":
        # I + s^2 C with trace-free C: h1 = h2 = 0, k1 = 0
        C = _traceless(p.get("kappa", 0.5), p.get("theta", 0.0), _profile(p))
        m = I + s ** 2 * C
    elif name == "cubic":
        # I + s^2 C + s^3 e(x) I: k1 = 0, h1 = 0, h2 = 12 e
        C = _traceless(p.get("kappa", 0.3), p.get("theta", 0.0), _profile({"profile": "one"}))
        e = p.get("amp", 0.3) * _profile(p)
        m = I + s ** 2 * C + s ** 3 * e * I
    elif name == "mixed":
        # I + s B + s^2 B^2 / 2 + s^3 e(x) I: k1 = -B, h1 = 0, h2 = 12 e
        prof = _profile(p)
        B = _traceless(p.get("kappa", 0.4), p.get("theta", 0.0), prof)
        m = I + s * B + s ** 2 * B * B / 2 + s ** 3 * p.get("amp", 0.3) * prof * I
    else:
        raise KeyError(f"unknown metric family {name!r}")
    fam = MetricFamily(name, m, s_max=s_max)
    conf = p.get("conformal")
    if conf:
        c = 1 + conf.get("amp", 0.3) * _profile(conf)
        fam = fam.scaled(c, name=f"{name}*c")
    tail = p.get("s5_perturbation")
    if tail:
        # invisible to the first three linearizations
        fam = MetricFamily(fam.name + "+s5", fam.matrix + s ** 5 * tail * _profile(p) * I,
                           s_max=s_max)
    return fam


FAMILY_NAMES = ("euclidean", "gamma", "gamma_bump", "traceless", "gammaB", "even", "cubic", "mixed")


# --------------------------------------------------------------------------
# Coefficients of the linearized equations
# --------------------------------------------------------------------------


@dataclass
class LinearizationCoefficients:
    """Coefficient fields at s = 0 on the grid (tensors have trailing (2, 2))."""

    g: np.ndarray
    k: np.ndarray
    d: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    d2: np.ndarray
    eta: np.ndarray  # d_s g at s = 0 (no factor 1/2)
    h0: np.ndarray = field(repr=False)

    @property
    def q(self):
        return 0.5 * self.h1


def _series_inverse(gd):
    """Derivatives k_n of k = g^-1 from derivatives g_n (Leibniz on g k = I)."""
    k0 = np.linalg.inv(gd[0])
    ks = [k0]
    for n in range(1, len(gd)):
        acc = np.zeros_like(k0)
        for l in range(1, n + 1):
            acc += comb(n, l) * gd[l] @ ks[n - l]
        ks.append(-k0 @ acc)
    return ks


def coefficients_from_derivatives(gd) -> LinearizationCoefficients:
    """Exact matrix calculus from ``gd[l] = d^l g / ds^l`` at s = 0, l = 0..4."""
    ks = _series_inverse(gd)
    # h(s) = Tr(k(s) g'(s));  h_n = sum_l C(n, l) Tr(k_l g_{n+1-l})
    hs = []
    for n in range(4):
        acc = 0.0
        for l in range(n + 1):
            acc = acc + comb(n, l) * np.trace(ks[l] @ gd[n + 1 - l], axis1=-2, axis2=-1)
        hs.append(acc)
    det = gd[0][..., 0, 0] * gd[0][..., 1, 1] - gd[0][..., 0, 1] * gd[0][..., 1, 0]
    d = np.sqrt(det)
    # (log det)' = h, so d' = d h / 2 and d'' = d (h^2 / 4 + h' / 2)
    d2 = d * (hs[0] ** 2 / 4 + hs[1] / 2)
    sym = lambda a: 0.5 * (a + np.swapaxes(a, -1, -2))
    return LinearizationCoefficients(
        g=gd[0], k=sym(ks[0]), d=d, h1=hs[1], h2=hs[2], h3=hs[3],
        k1=sym(ks[1]), k2=sym(ks[2]), d2=d2, eta=gd[1], h0=hs[0])


def eval_coefficients(family: MetricFamily, domain: Domain, tol: float = 1e-10):
    gd = family.s_derivatives(domain.X, domain.Y)
    det = gd[0][..., 0, 0] * gd[0][..., 1, 1] - gd[0][..., 0, 1] ** 2
    if np.any(gd[0][..., 0, 0] <= 0) or np.any(det <= 0):
        raise NotSPD(f"g(x, 0) of {family.name!r} is not positive definite")
    co = coefficients_from_derivatives(gd)
    err = float(np.max(np.abs(co.h0)))
    if err > tol:
        raise NonMinimal(f"Tr(g^-1 d_s g)|_0 = {err:.3g} exceeds {tol:g} for {family.name!r}")
    return co


def eval_coefficients_at(family: MetricFamily, x, y):
    """Coefficients at scattered points (no minimality check)."""
    return coefficients_from_derivatives(family.s_derivatives(x, y))


# --------------------------------------------------------------------------
# Discrete operators
# --------------------------------------------------------------------------


def grad(u: GridFunction, domain: Domain):
    """Centered differences inside, second-order one-sided at the boundary."""
    gx = np.gradient(u, domain.hx, axis=0, edge_order=2)
    gy = np.gradient(u, domain.hy, axis=1, edge_order=2)
    return gx, gy


def contract(T: np.ndarray, a, b):
    """Node-wise ``T^{ab} a_a b_b`` for covectors given as pairs of arrays."""
    return (T[..., 0, 0] * a[0] * b[0] + T[..., 0, 1] * a[0] * b[1]
            + T[..., 1, 0] * a[1] * b[0] + T[..., 1, 1] * a[1] * b[1])


def grad_inner(u, v, tensor, domain: Domain):
    """``T(grad u, grad v)`` with the coordinate gradient."""
    return contract(tensor, grad(u, domain), grad(v, domain))


def trapezoid_weights(domain: Domain):
    wx = np.full(domain.nx, domain.hx)
    wx[[0, -1]] *= 0.5
    wy = np.full(domain.ny, domain.hy)
    wy[[0, -1]] *= 0.5
    return np.outer(wx, wy)


def integrate(f, domain: Domain, d: np.ndarray | None = None, measure: str = "euclidean"):
    """Tensor-product trapezoid rule; ``measure='riemannian'`` multiplies by ``d``."""
    w = trapezoid_weights(domain)
    if measure == "riemannian":
        if d is None:
            raise ValueError("riemannian measure needs d = |g|^(1/2)")
        w = w * d
    elif measure != "euclidean":
        raise ValueError(f"unknown measure {measure!r}")
    return np.sum(w * f)


def side_weights(sd: Side):
    w = np.full(len(sd.i), sd.step)
    w[[0, -1]] *= 0.5
    return w


def boundary_integral(side_values: Sequence[np.ndarray], domain: Domain, g0: np.ndarray | None = None):
    """Sum of per-side trapezoid integrals with the induced line element ``dS_g``."""
    total = 0.0
    for sd, vals in zip(domain.sides, side_values):
        w = side_weights(sd)
        if g0 is not None:
            a = sd.axis
            w = w * np.sqrt(g0[sd.i, sd.j, a, a])
        total = total + np.sum(w * vals)
    return total


def div_form_matrix(domain: Domain, d: np.ndarray, K: np.ndarray, scale: np.ndarray | None = None):
    """Sparse matrix of ``F -> -d^-1 d_a (d K^ab d_b F)`` at interior nodes.

    Diagonal fluxes use face averages; mixed terms use centered differences
    of centered differences.  Rows of boundary nodes are empty.  The matrix
    ``diag(d) @ A`` is symmetric on interior columns.
    """
    nx, ny = domain.shape
    hx, hy = domain.hx, domain.hy
    A = d[..., None, None] * K
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    idx = np.arange(nx * ny).reshape(nx, ny)
    I, J = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    row = idx[I, J]
    inv_d = -1.0 / d[I, J]
    rows, cols, vals = [], [], []

    def put(ci, cj, v):
        rows.append(row)
        cols.append(idx[ci, cj])
        vals.append(inv_d * v)

    ae = 0.5 * (a11[I, J] + a11[I + 1, J]) / hx ** 2
    aw = 0.5 * (a11[I, J] + a11[I - 1, J]) / hx ** 2
    an = 0.5 * (a22[I, J] + a22[I, J + 1]) / hy ** 2
    as_ = 0.5 * (a22[I, J] + a22[I, J - 1]) / hy ** 2
    put(I + 1, J, ae)
    put(I - 1, J, aw)
    put(I, J + 1, an)
    put(I, J - 1, as_)
    put(I, J, -(ae + aw + an + as_))
    c = 1.0 / (4 * hx * hy)
    # d_x(a12 d_y F)
    put(I + 1, J + 1, c * a12[I + 1, J])
    put(I + 1, J - 1, -c * a12[I + 1, J])
    put(I - 1, J + 1, -c * a12[I - 1, J])
    put(I - 1, J - 1, c * a12[I - 1, J])
    # d_y(a21 d_x F)
    put(I + 1, J + 1, c * a21[I, J + 1])
    put(I - 1, J + 1, -c * a21[I, J + 1])
    put(I + 1, J - 1, -c * a21[I, J - 1])
    put(I - 1, J - 1, c * a21[I, J - 1])
    M = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(nx * ny, nx * ny))
    if scale is not None:
        M = sps.diags(scale.ravel()) @ M
    return M


def apply_op(M, u: GridFunction, domain: Domain):
    out = (M @ u.ravel()).reshape(domain.shape)
    out[domain.boundary] = 0
    return out


def laplace_beltrami(u: GridFunction, family_or_coeffs, domain: Domain):
    """Positive-sign Laplace-Beltrami at interior nodes; boundary nodes set to 0."""
    co = family_or_coeffs
    if isinstance(co, MetricFamily):
        co = eval_coefficients(co, domain)
    return apply_op(div_form_matrix(domain, co.d, co.k), u, domain)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def write_grid_csv(path, u: GridFunction, domain: Domain, name="u"):
    """Row-major CSV with a header recording extent and resolution."""
    with open(path, "w") as fh:
        fh.write(f"# extent {domain.x0!r} {domain.x1!r} {domain.y0!r} {domain.y1!r} "
                 f"resolution {domain.nx} {domain.ny}\n")
        cplx = np.iscomplexobj(u)
        fh.write("x,y," + (f"re_{name},im_{name}" if cplx else name) + "\n")
        for i in range(domain.nx):
            for j in range(domain.ny):
                v = u[i, j]
                tail = f"{v.real:.17g},{v.imag:.17g}" if cplx else f"{v:.17g}"
                fh.write(f"{domain.x[i]:.17g},{domain.y[j]:.17g},{tail}\n")


def read_grid_csv(path):
    with open(path) as fh:
        head = fh.readline().split()
        ext = tuple(float(v) for v in head[2:6])
        nx, ny = int(head[7]), int(head[8])
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dom = Domain(*ext, nx, ny)
    vals = data[:, 2] + 1j * data[:, 3] if len(cols) == 4 else data[:, 2]
    return vals.reshape(nx, ny), dom
