"""Nonlinear Dirichlet problem for minimal graphs ``s = u(x)`` in Fermi coordinates.

The graph of ``u`` has area ``int a(x, u, grad u) dx`` with
``a^2 = det g + adj(g)(p, p)`` evaluated at ``g = g(x, u)``; this is the
determinant identity ``det(g + p p^T) = det g (1 + |p|_g^2)``.  Minimal graphs
are critical points, so the discrete problem is the exact Euler-Lagrange
system of a discrete area.  The discrete area averages the two triangulations
of every grid cell (both diagonals), evaluated at triangle centroids, which
keeps the stencil symmetric and second-order accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import eigsh, splu

from .errors import EigenvalueObstruction, InadmissibleData, NewtonDiverged
from .geometry import Domain, MetricFamily, grad, side_weights

# vertex offsets, d p1 / d u_v (times hx), d p2 / d u_v (times hy), centroid
_TRIANGLES = (
    (((0, 0), (1, 0), (1, 1)), (-1, 1, 0), (0, -1, 1), (2 / 3, 1 / 3)),
    (((0, 0), (0, 1), (1, 1)), (0, -1, 1), (-1, 1, 0), (1 / 3, 2 / 3)),
    (((0, 0), (1, 0), (0, 1)), (-1, 1, 0), (-1, 0, 1), (1 / 3, 1 / 3)),
    (((1, 0), (1, 1), (0, 1)), (0, 1, -1), (-1, 1, 0), (2 / 3, 2 / 3)),
)


# --------------------------------------------------------------------------
# Boundary data and DN samples
# --------------------------------------------------------------------------


@dataclass
class BoundaryData:
    """Dirichlet values on the unique boundary nodes (counterclockwise)."""

    values: np.ndarray
    domain: Domain

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_boundary,):
            raise ValueError("boundary data has the wrong length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary data must be finite")

    @classmethod
    def from_function(cls, domain: Domain, fn):
        return cls(domain.trace(fn), domain)

    @classmethod
    def zeros(cls, domain: Domain):
        return cls(np.zeros(domain.n_boundary), domain)

    def __add__(self, other):
        return BoundaryData(self.values + other.values, self.domain)

    def __rmul__(self, c):
        return BoundaryData(c * self.values, self.domain)

    def per_side(self):
        return [self.values[sl] for sl in self.domain.side_slices()]

    def norm(self):
        """Discrete C^2 surrogate: sup of values, tangential first and second differences."""
        n0 = np.max(np.abs(self.values), initial=0.0)
        n1 = n2 = 0.0
        for sd, v in zip(self.domain.sides, self.per_side()):
            n1 = max(n1, np.max(np.abs(np.diff(v))) / sd.step)
            n2 = max(n2, np.max(np.abs(np.diff(v, 2))) / sd.step ** 2)
        return float(n0 + n1 + n2)

    def extend(self):
        """Zero interior extension as a grid field."""
        return self.domain.with_boundary(self.values)


@dataclass
class DNSample:
    """Boundary field on the four sides (corners appear on both adjacent sides)."""

    sides: list
    domain: Domain
    data: BoundaryData | None = None

    def flat(self):
        return np.concatenate(self.sides)

    def __sub__(self, other):
        return DNSample([a - b for a, b in zip(self.sides, other.sides)], self.domain)

    def norm(self):
        return float(np.max(np.abs(self.flat()), initial=0.0))


# --------------------------------------------------------------------------
# Discrete area functional
# --------------------------------------------------------------------------


class DiscreteArea:
    """Crossed-triangle discretization of the graph area for one family and grid."""

    def __init__(self, family: MetricFamily, domain: Domain):
        self.family = family
        self.domain = domain
        nx, ny = domain.shape
        self.weight = domain.hx * domain.hy / 4  # half of a triangle area
        xc, yc = domain.x[:-1], domain.y[:-1]
        self._centroids = []
        for _, _, _, (cx, cy) in _TRIANGLES:
            X, Y = np.meshgrid(xc + cx * domain.hx, yc + cy * domain.hy, indexing="ij")
            self._centroids.append((X, Y))
        self._slices = [[(slice(di, nx - 1 + di), slice(dj, ny - 1 + dj)) for di, dj in tri[0]]
                        for tri in _TRIANGLES]
        g = family.g(domain.X, domain.Y, np.zeros(domain.shape))
        self.d0 = np.sqrt(np.real(g[0] * g[2] - g[1] ** 2))

    def _triangle(self, t, u):
        _, c1, c2, _ = _TRIANGLES[t]
        verts = [u[sl] for sl in self._slices[t]]
        p1 = sum(c * v for c, v in zip(c1, verts)) / self.domain.hx
        p2 = sum(c * v for c, v in zip(c2, verts)) / self.domain.hy
        s = (verts[0] + verts[1] + verts[2]) / 3
        return verts, p1, p2, s

    def value(self, u):
        total = 0.0
        for t in range(4):
            _, p1, p2, s = self._triangle(t, u)
            X, Y = self._centroids[t]
            A, B, C = self.family.g(X, Y, s)
            total = total + np.sum(np.sqrt(A * C - B * B + C * p1 ** 2 - 2 * B * p1 * p2 + A * p2 ** 2))
        return self.weight * total

    def gradient(self, u):
        """Exact gradient of ``value`` w.r.t. every nodal value (complex-step safe)."""
        G = np.zeros(self.domain.shape, dtype=np.result_type(u, float))
        hx, hy = self.domain.hx, self.domain.hy
        for t in range(4):
            _, c1, c2, _ = _TRIANGLES[t]
            _, p1, p2, s = self._triangle(t, u)
            X, Y = self._centroids[t]
            A, B, C = self.family.g(X, Y, s)
            As, Bs, Cs = self.family.g_ds(X, Y, s)
            a = np.sqrt(A * C - B * B + C * p1 ** 2 - 2 * B * p1 * p2 + A * p2 ** 2)
            a_s = (As * C + A * Cs - 2 * B * Bs + Cs * p1 ** 2 - 2 * Bs * p1 * p2 + As * p2 ** 2) / (2 * a)
            a_p1 = (C * p1 - B * p2) / a
            a_p2 = (A * p2 - B * p1) / a
            for v, sl in enumerate(self._slices[t]):
                G[sl] += self.weight * (a_s / 3 + a_p1 * (c1[v] / hx) + a_p2 * (c2[v] / hy))
        return G

    def residual(self, u):
        """Interior residual scaled to approximate the continuum operator."""
        G = self.gradient(u)
        R = np.real(G) / (self.domain.hx * self.domain.hy * self.d0)
        R[self.domain.boundary] = 0.0
        return R

    def hessian(self, u, tau=1e-20):
        """Interior-interior Jacobian of the gradient by 9-colour complex step."""
        dom = self.domain
        nx, ny = dom.shape
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        colour = (I % 3) * 3 + (J % 3)
        cols = np.empty((9,) + dom.shape)
        base = np.asarray(u, dtype=complex)
        for c in range(9):
            pert = np.where((colour == c) & dom.interior, 1j * tau, 0.0)
            cols[c] = np.imag(self.gradient(base + pert)) / tau
        Ii, Jj = np.nonzero(dom.interior)
        row = np.ravel_multi_index((Ii, Jj), dom.shape)
        rows, cidx, vals = [], [], []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ci, cj = Ii + di, Jj + dj
                ok = dom.interior[ci, cj]
                rows.append(row[ok])
                cidx.append(np.ravel_multi_index((ci[ok], cj[ok]), dom.shape))
                vals.append(cols[colour[ci[ok], cj[ok]], Ii[ok], Jj[ok]])
        n = nx * ny
        H = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cidx))),
                           shape=(n, n))
        keep = dom.interior_flat
        return H[keep][:, keep].tocsc()


# --------------------------------------------------------------------------
# Newton solver
# --------------------------------------------------------------------------


@dataclass
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50
    delta_admissible: float = 0.1
    check_eigen: bool = True
    armijo: float = 1e-4


@dataclass
class ForwardSolution:
    u: np.ndarray
    data: BoundaryData
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list)
    constant: float = 0.0  # sup|u| / ||f||
    min_eigenvalue: float | None = None


def check_nonsingular(H, domain: Domain, d: np.ndarray, cache: dict | None = None):
    """Smallest eigenvalue (in modulus) of the discrete stability operator.

    Scaled so that it approximates the continuum eigenvalue; ``cache`` maps
    domains to already-checked values.
    """
    if cache is not None and domain in cache:
        return cache[domain]
    scale = domain.hx * domain.hy * float(np.min(d))
    thresh = 1e-3 * np.pi ** 2 * (1 / (domain.x1 - domain.x0) ** 2 + 1 / (domain.y1 - domain.y0) ** 2)
    try:
        lam = eigsh(H, k=1, sigma=0, which="LM", return_eigenvectors=False)[0] / scale
    except RuntimeError as exc:  # factorization of a singular shift
        raise EigenvalueObstruction(f"stability operator is singular: {exc}") from exc
    if abs(lam) < thresh:
        raise EigenvalueObstruction(
            f"0 is (numerically) a Dirichlet eigenvalue: |lambda_min| = {abs(lam):.3g} < {thresh:.3g}")
    if cache is not None:
        cache[domain] = lam
    return lam


def solve_minimal_surface(f: BoundaryData, family: MetricFamily, domain: Domain,
                          opts: NewtonOptions | None = None, functional: DiscreteArea | None = None):
    """Small solution of the minimal graph equation with Dirichlet data ``f``."""
    opts = opts or NewtonOptions()
    nrm = f.norm()
    if nrm > opts.delta_admissible:
        raise InadmissibleData(f"||f|| = {nrm:.3g} exceeds delta_admissible = {opts.delta_admissible}")
    F = functional or DiscreteArea(family, domain)
    keep = domain.interior_flat
    u = f.extend()
    res = float(np.max(np.abs(F.residual(u))))
    history = [res]
    if res < opts.tol:
        return ForwardSolution(u, f, 0, res, history, _const(u, nrm))

    H0 = F.hessian(np.zeros(domain.shape))
    lam = None
    if opts.check_eigen:
        lam = check_nonsingular(H0, domain, F.d0, family.__dict__.setdefault("_eig_cache", {}))
    # initial iterate: first linearized problem with the same data,
    # G(0) + H(0) u = 0 on interior nodes with u = f on the boundary
    tau = 1e-20
    lin = np.real(F.gradient(np.zeros(domain.shape))) + np.imag(F.gradient(1j * tau * u)) / tau
    u.ravel()[keep] = -splu(H0).solve(lin.ravel()[keep])
    gnorm = np.linalg.norm(np.real(F.gradient(u)).ravel()[keep])
    res = float(np.max(np.abs(F.residual(u))))
    history.append(res)
    it = 0
    while res >= opts.tol:
        if it >= opts.max_iter:
            raise NewtonDiverged(f"residual {res:.3g} after {it} Newton steps")
        it += 1
        G = np.real(F.gradient(u)).ravel()[keep]
        step = splu(F.hessian(u)).solve(G)
        t = 1.0
        while True:
            trial = u.copy()
            trial.ravel()[keep] -= t * step
            gtrial = np.linalg.norm(np.real(F.gradient(trial)).ravel()[keep])
            if gtrial <= (1 - opts.armijo * t) * gnorm or gtrial < 1e-14 * max(gnorm, 1e-300):
                break
            t *= 0.5
            if t < 1e-6:
                raise NewtonDiverged(f"line search failed at residual {res:.3g}")
        u, gnorm = trial, gtrial
        new = float(np.max(np.abs(F.residual(u))))
        history.append(new)
        if new >= res and t == 1.0 and new > 1e3 * opts.tol and it > 5:
            raise NewtonDiverged(f"residual stagnates at {new:.3g}")
        res = new
    return ForwardSolution(u, f, it, res, history, _const(u, nrm), lam)


def _const(u, nrm):
    return float(np.max(np.abs(u)) / nrm) if nrm > 0 else 0.0


# --------------------------------------------------------------------------
# DN map
# --------------------------------------------------------------------------


def conormal_derivative(u, family: MetricFamily, domain: Domain, s=None):
    """``k_s(n, grad u) / sqrt(k_s(n, n))`` per side, with ``k_s = g(x, s)^-1``.

    ``s`` defaults to ``u`` itself (the DN map of the nonlinear problem).
    """
    gx, gy = grad(u, domain)
    s = u if s is None else s
    out = []
    for sd in domain.sides:
        x, y = domain.x[sd.i], domain.y[sd.j]
        A, B, C = family.g(x, y, s[sd.i, sd.j])
        det = A * C - B * B
        k11, k12, k22 = C / det, -B / det, A / det
        n1, n2 = sd.normal
        px, py = gx[sd.i, sd.j], gy[sd.i, sd.j]
        kn_grad = n1 * (k11 * px + k12 * py) + n2 * (k12 * px + k22 * py)
        knn = k11 * n1 * n1 + 2 * k12 * n1 * n2 + k22 * n2 * n2
        out.append(kn_grad / np.sqrt(knn))
    return out


def dn_map(f: BoundaryData, family: MetricFamily, domain: Domain, opts=None, solution=None):
    sol = solution or solve_minimal_surface(f, family, domain, opts)
    return DNSample(conormal_derivative(sol.u, family, domain), domain, f)


def gradient_norm_factor(u, family, domain):
    """``sqrt(1 + |grad u|^2_{g(x,u)})`` per side."""
    gx, gy = grad(u, domain)
    out = []
    for sd in domain.sides:
        x, y = domain.x[sd.i], domain.y[sd.j]
        A, B, C = family.g(x, y, u[sd.i, sd.j])
        px, py = gx[sd.i, sd.j], gy[sd.i, sd.j]
        out.append(np.sqrt(1 + (C * px * px - 2 * B * px * py + A * py * py) / (A * C - B * B)))
    return out


# --------------------------------------------------------------------------
# Area and its first variation
# --------------------------------------------------------------------------


def _fd4(u, h, axis):
    """Fourth-order first derivative, one-sided at the two outer layers."""
    u = np.moveaxis(u, axis, 0)
    d = np.empty_like(u)
    d[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    c = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[0] = np.tensordot(c, u[:5], 1)
    d[1] = np.tensordot(c1, u[:5], 1)
    d[-1] = -np.tensordot(c, u[::-1][:5], 1)
    d[-2] = -np.tensordot(c1, u[::-1][:5], 1)
    return np.moveaxis(d, 0, axis)


def _simpson_weights(n, h):
    if n % 2 == 0:
        raise ValueError("simpson rule needs an odd number of nodes per axis")
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def area(u, family: MetricFamily, domain: Domain, rule: str = "discrete"):
    """Graph area ``int sqrt(1 + |grad u|_g^2) det(g)^(1/2) dx`` with ``g = g(x, u)``.

    ``rule='discrete'`` is the functional the solver extremizes (so its
    variations are consistent to Newton tolerance); ``rule='simpson'`` is a
    fourth-order quadrature of the same integrand.
    """
    if rule == "discrete":
        return float(np.real(DiscreteArea(family, domain).value(u)))
    if rule != "simpson":
        raise ValueError(f"unknown rule {rule!r}")
    px, py = _fd4(u, domain.hx, 0), _fd4(u, domain.hy, 1)
    A, B, C = family.g(domain.X, domain.Y, u)
    integrand = np.sqrt(A * C - B * B + C * px ** 2 - 2 * B * px * py + A * py ** 2)
    w = np.outer(_simpson_weights(domain.nx, domain.hx), _simpson_weights(domain.ny, domain.hy))
    return float(np.sum(w * integrand))


@dataclass
class FirstVariation:
    boundary: float  # discrete boundary functional sum_B dA/du_B w_B
    fd: float | None  # centred difference of re-solved areas
    continuum: float  # trapezoid of w * N dS_g on the sides
    t: float


def area_first_variation(u, w, family: MetricFamily, domain: Domain, t: float = 1e-4,
                         opts: NewtonOptions | None = None, with_fd: bool = True):
    """Derivative of the minimal area in the direction of boundary data ``w|_bd``.

    ``u`` must solve the Dirichlet problem.  By the envelope property the
    derivative only sees boundary nodes: ``sum_B (dA_h/du_B) w_B``.
    """
    F = DiscreteArea(family, domain)
    G = np.real(F.gradient(u))
    wb = domain.boundary_values(w)
    bnd = float(np.sum(domain.boundary_values(G) * wb))
    N = nonlinear_boundary_map(u, family, domain)
    cont = 0.0
    for sd, n_vals in zip(domain.sides, N):
        A, B, C = family.g(domain.x[sd.i], domain.y[sd.j], u[sd.i, sd.j])
        gtt = A if sd.axis == 0 else C
        cont += float(np.sum(side_weights(sd) * np.sqrt(gtt) * w[sd.i, sd.j] * n_vals))
    fd = None
    if with_fd:
        opts = opts or NewtonOptions(delta_admissible=np.inf)
        f = BoundaryData(domain.boundary_values(u), domain)
        wd = BoundaryData(wb, domain)
        ap = area(solve_minimal_surface(f + t * wd, family, domain, opts, F).u, family, domain)
        am = area(solve_minimal_surface(f + (-t) * wd, family, domain, opts, F).u, family, domain)
        fd = (ap - am) / (2 * t)
    return FirstVariation(bnd, fd, cont, t)


def nonlinear_boundary_map(u, family, domain):
    """``N(f) = d_nu u / sqrt(1 + |grad u|^2)`` per side."""
    dn = conormal_derivative(u, family, domain)
    rho = gradient_norm_factor(u, family, domain)
    return [a / b for a, b in zip(dn, rho)]


def dn_from_areas(family: MetricFamily, domain: Domain, f: BoundaryData, probes=None,
                  mode: str = "formula", opts: NewtonOptions | None = None, t: float = 1e-4):
    """DN map reconstructed from first variations of the minimal area.

    For the nodal probe ``e_b`` the variation of the area is a line-element
    weighted sample of ``N(f)``; dividing by the discrete line element gives
    ``N(f)`` at ``b``, and multiplying by ``sqrt(1 + |grad u|^2)`` converts to
    the DN normalization.  ``mode='formula'`` evaluates all nodal variations at
    once through the envelope identity; ``mode='fd'`` re-solves with every probe
    (black box, small grids only).  Corner values are extrapolated linearly
    along each side.  Returns ``(dn_sample, N_sample)``.
    """
    opts = opts or NewtonOptions()
    F = DiscreteArea(family, domain)
    sol = solve_minimal_surface(f, family, domain, opts, F)
    u = sol.u
    nb = domain.n_boundary
    if probes is None:
        probes = np.eye(nb)
    probes = np.asarray(probes, float)
    if mode == "formula":
        Gb = domain.boundary_values(np.real(F.gradient(u)))
        var = probes @ Gb
    elif mode == "fd":
        fopts = NewtonOptions(opts.tol, opts.max_iter, np.inf, False)
        var = np.empty(len(probes))
        for n, p in enumerate(probes):
            pd = BoundaryData(p, domain)
            ap = F.value(solve_minimal_surface(f + t * pd, family, domain, fopts, F).u)
            am = F.value(solve_minimal_surface(f + (-t) * pd, family, domain, fopts, F).u)
            var[n] = np.real(ap - am) / (2 * t)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # nodal variations from probe variations
    nodal = np.linalg.lstsq(probes, var, rcond=None)[0] if probes.shape != (nb, nb) or \
        not np.allclose(probes, np.eye(nb)) else var
    rho = gradient_norm_factor(u, family, domain)
    N_sides, dn_sides = [], []
    for sd, sl, r in zip(domain.sides, domain.side_slices(), rho):
        A, B, C = family.g(domain.x[sd.i], domain.y[sd.j], u[sd.i, sd.j])
        gtt = A if sd.axis == 0 else C
        ell = sd.step * np.sqrt(gtt)
        N = nodal[sl] / ell
        N[0] = 2 * N[1] - N[2]
        N[-1] = 2 * N[-2] - N[-3]
        N_sides.append(N)
        dn_sides.append(N * r)
    return DNSample(dn_sides, domain, f), DNSample(N_sides, domain, f)
