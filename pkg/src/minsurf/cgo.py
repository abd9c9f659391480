"""Semiclassical complex geometric optics on a planar patch.

Complex coordinate ``z = x + i y``, ``d = (d_x - i d_y)/2``,
``dbar = (d_x + i d_y)/2`` and the flat Laplacian ``Delta = -4 d dbar``
(positive sign).  Solutions of ``(Delta + q) v = 0`` are sought as
``v = exp(Phi/h) (a + r)`` with ``Phi = phi + i psi`` holomorphic and ``a``
holomorphic.  Writing ``dbar r = -exp(-2 i psi/h) s`` turns the equation into

    s = dbar*_psi^-1(q a) + T s,   T = -dbar*_psi^-1 q dbar_psi^-1,
    r = -dbar_psi^-1 s,

with ``dbar_psi^-1 F = dbar^-1(exp(-2 i psi/h) chi F)`` and
``dbar*_psi^-1 F = -1/4 d^-1(exp(2 i psi/h) chi F)``; the factor -1/4 carries
the Laplacian normalization.  ``chi`` is the extension cutoff.

The Cauchy transform is a zero-padded FFT convolution with the kernel
``1/(pi zeta)`` on the grid offsets.  The singular cell is integrated by its
local expansion, which contributes ``-(dx^2/pi) d f``; the remaining punctured
rule is then fourth-order accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.fft as sfft
import sympy as sp

from .errors import DegreeTooLow, SeriesDiverging, SupportViolation, UnderResolved

# --------------------------------------------------------------------------
# Cutoffs
# --------------------------------------------------------------------------


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return a / (a + b)


def plateau_cutoff(r, r1, r2):
    """1 for r <= r1, 0 for r >= r2, smooth in between."""
    return 1.0 - _smooth_step((np.asarray(r) - r1) / (r2 - r1))


def polynomial_cutoff(r, r1, r2, k=4):
    """``C^k`` cutoff, polynomial in ``r^2``: 1 for r <= r1, 0 for r >= r2.

    Used for the weights of the asymptotic integrals, where the
    non-stationary contributions of exponential-type transitions carry large
    constants.
    """
    t = np.clip((np.asarray(r, float) ** 2 - r1 ** 2) / (r2 ** 2 - r1 ** 2), 0.0, 1.0)
    s = sum(comb(k + j, j) * comb(2 * k + 1, k - j) * (-t) ** j for j in range(k + 1)) * t ** (k + 1)
    return 1.0 - s


def bump(r, radius):
    """Smooth bump ``exp(1 - 1/(1 - (r/R)^2))`` equal to 1 at the center."""
    t = (np.asarray(r, float) / radius) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t < 1, np.exp(1 - 1 / np.where(t < 1, 1 - t, 1.0)), 0.0)


def default_potential(Z, z0=0.0, r_flat=0.1, radius=0.3):
    """Non-radial complex test potential, flat-topped cutoff supported in ``|z - z0| < radius``."""
    w = Z - z0
    return (1 + 0.5 * w.real - 0.3 * w.imag + 0.2j * w.real) * plateau_cutoff(np.abs(w), r_flat, radius)


# --------------------------------------------------------------------------
# Patch and Cauchy transforms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Patch:
    """Square grid ``z0 + [-L, L]^2`` with an odd number of nodes (z0 is a node)."""

    z0: complex
    half_width: float
    n: int

    def __post_init__(self):
        if self.n % 2 == 0 or self.n < 17:
            raise ValueError("patch needs an odd node count >= 17")

    @property
    def dx(self):
        return 2 * self.half_width / (self.n - 1)

    @property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.n)

    @property
    def W(self):
        """Offsets ``z - z0`` on the grid (indexing 'ij': axis 0 is x)."""
        a = self.axis
        return a[:, None] + 1j * a[None, :]

    @property
    def Z(self):
        return self.z0 + self.W

    @property
    def center_index(self):
        return self.n // 2

    def l2(self, f):
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dx ** 2))

    def lp(self, f, p):
        return float((np.sum(np.abs(f) ** p) * self.dx ** 2) ** (1 / p))

    def integral(self, f):
        return complex(np.sum(f) * self.dx ** 2)

    @classmethod
    def for_resolution(cls, z0, half_width, spacing):
        n = int(np.ceil(2 * half_width / spacing)) + 1
        n += (n + 1) % 2
        return cls(complex(z0), half_width, max(n, 17))


@lru_cache(maxsize=4)
def _kernel_fft(n, dx, conj):
    m = sfft.next_fast_len(2 * n - 1)
    idx = np.arange(m)
    off = np.where(idx < n, idx, idx - m).astype(float) * dx
    zeta = off[:, None] + 1j * off[None, :]
    if conj:
        zeta = np.conj(zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(np.abs(zeta) > 0, 1.0 / (np.pi * np.where(zeta == 0, 1, zeta)), 0.0)
    K[n:m - n + 1, :] = 0
    K[:, n:m - n + 1] = 0
    return m, sfft.fft2(K * dx * dx, workers=-1)


def _d_fd(f, dx, axis):
    """Sixth-order central first derivative with zero extension (compact support)."""
    c = (1 / 60, -3 / 20, 3 / 4)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (3, 3)
    g = np.pad(f, pad)
    n = f.shape[axis]

    def sl(k):
        s = [slice(None), slice(None)]
        s[axis] = slice(3 + k, 3 + k + n)
        return g[tuple(s)]

    return (c[0] * (sl(3) - sl(-3)) + c[1] * (sl(2) - sl(-2)) + c[2] * (sl(1) - sl(-1))) / dx


def wirtinger(f, dx):
    """``(d f, dbar f)`` by sixth-order differences."""
    fx, fy = _d_fd(f, dx, 0), _d_fd(f, dx, 1)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def _check_support(f, patch, margin=0.1, tol=1e-10):
    n = patch.n
    k = max(1, int(round(margin * n)))
    scale = np.max(np.abs(f))
    if scale == 0:
        return
    edge = max(np.max(np.abs(f[:k])), np.max(np.abs(f[-k:])),
               np.max(np.abs(f[:, :k])), np.max(np.abs(f[:, -k:])))
    if edge > tol * scale:
        raise SupportViolation(f"input not negligible in the {margin:.0%} margin ({edge / scale:.2e} rel.)")


def _cauchy(f, patch, conj, check):
    f = np.asarray(f, dtype=complex)
    if check:
        _check_support(f, patch)
    n, dx = patch.n, patch.dx
    m, KF = _kernel_fft(n, round(dx, 15), conj)
    out = sfft.ifft2(sfft.fft2(f, s=(m, m), workers=-1) * KF, workers=-1)[:n, :n]
    df, dbf = wirtinger(f, dx)
    # singular cell: -(1/pi) int (d f) over the cell
    return out - (dx * dx / np.pi) * (dbf if conj else df)


def dbar_inverse(f, patch: Patch, check_support: bool = True):
    """Cauchy transform ``(1/pi) int f(z) / (w - z) dA(z)``; ``dbar`` of it is ``f``."""
    return _cauchy(f, patch, False, check_support)


def d_inverse(f, patch: Patch, check_support: bool = True):
    """``(1/pi) int f(z) / conj(w - z) dA(z)``; ``d`` of it is ``f``."""
    return _cauchy(f, patch, True, check_support)


# --------------------------------------------------------------------------
# Phases and amplitudes
# --------------------------------------------------------------------------


@dataclass
class CGOPhase:
    """Holomorphic polynomial ``Phi(z) = sum_k coeffs[k] (z - z0)^k``."""

    coeffs: tuple
    z0: complex = 0.0

    def __post_init__(self):
        self.coeffs = tuple(complex(c) for c in self.coeffs)

    @classmethod
    def quadratic(cls, c=0.5, z0=0.0):
        return cls((0, 0, c), z0)

    def _poly(self):
        return np.polynomial.Polynomial(self.coeffs)

    def Phi(self, Z):
        return self._poly()(Z - self.z0)

    def dPhi(self, Z):
        return self._poly().deriv()(Z - self.z0)

    def d2Phi(self, Z):
        return self._poly().deriv(2)(Z - self.z0)

    def psi(self, Z):
        return self.Phi(Z).imag

    def phi(self, Z):
        return self.Phi(Z).real

    def dbar_psi(self, Z):
        """``dbar Im Phi = (i/2) conj(Phi')``."""
        return 0.5j * np.conj(self.dPhi(Z))

    @property
    def critical_points(self):
        """List of ``(z, is_morse)`` pairs."""
        d = self._poly().deriv()
        if d.degree() < 1:
            return []
        roots = d.roots()
        return [(complex(self.z0 + w), bool(abs(self._poly().deriv(2)(w)) > 1e-12)) for w in roots]

    def hessian_split(self, z=None):
        """Real Hessians ``S = Hess Re Phi`` and ``A = Hess Im Phi`` at ``z``."""
        z = self.z0 if z is None else z
        c = complex(self.d2Phi(np.asarray(z))) / 2
        S = 2 * np.array([[c.real, -c.imag], [-c.imag, -c.real]])
        A = 2 * np.array([[c.imag, c.real], [c.real, -c.imag]])
        return S, A

    def max_grad_psi(self, radius):
        """``max |grad psi| = max |Phi'|`` over the disk of given radius (boundary sampling)."""
        t = np.linspace(0, 2 * np.pi, 721)
        vals = [np.max(np.abs(self.dPhi(self.z0 + rr * np.exp(1j * t)))) for rr in np.linspace(0, radius, 41)]
        return float(max(vals))

    def negated(self):
        return CGOPhase(tuple(-c for c in self.coeffs), self.z0)


@dataclass
class CGOAmplitude:
    """Holomorphic polynomial amplitude ``a(z) = sum_k coeffs[k] (z - z0)^k``."""

    coeffs: tuple = (1.0,)
    z0: complex = 0.0

    def __call__(self, Z):
        return np.polynomial.Polynomial(np.array(self.coeffs, dtype=complex))(Z - self.z0)

    def vanishing_order(self, z):
        p = np.polynomial.Polynomial(np.array(self.coeffs, dtype=complex))
        order = 0
        while order <= p.degree() and abs(p.deriv(order)(z - self.z0)) < 1e-12:
            order += 1
        return order


# --------------------------------------------------------------------------
# Conjugated operators
# --------------------------------------------------------------------------


@dataclass
class CGOContext:
    """Grid, cutoff and semiclassical parameter shared by the conjugated inverses."""

    h: float
    phase: CGOPhase
    patch: Patch
    r_one: float = 0.3
    r_zero: float = 0.36
    guard: float = 10.0
    check: bool = True

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        W = self.patch.W
        self.chi = plateau_cutoff(np.abs(W), self.r_one, self.r_zero)
        Z = self.patch.Z
        self.psi = self.phase.psi(Z)
        self.max_grad = self.phase.max_grad_psi(self.r_zero)
        limit = self.h / (self.guard * self.max_grad) if self.max_grad > 0 else np.inf
        if self.check and self.patch.dx > limit * (1 + 1e-9):
            raise UnderResolved(f"spacing {self.patch.dx:.3g} exceeds h/({self.guard:g} max|grad psi|) = {limit:.3g}")
        self.osc = np.exp(2j * self.psi / self.h)

    @classmethod
    def for_h(cls, h, phase, half_width=0.4, oversample=1.0, **kw):
        probe = cls.__new__(cls)
        r_zero = kw.get("r_zero", 0.36)
        guard = kw.get("guard", 10.0)
        g = phase.max_grad_psi(r_zero)
        spacing = h / (guard * g * oversample) if g > 0 else 2 * half_width / 64
        patch = Patch.for_resolution(phase.z0, half_width, spacing)
        del probe
        return cls(h, phase, patch, **kw)

    def dbar_psi_inv(self, F):
        return dbar_inverse(np.conj(self.osc) * self.chi * F, self.patch, check_support=False)

    def dbar_star_psi_inv(self, F):
        return -0.25 * d_inverse(self.osc * self.chi * F, self.patch, check_support=False)

    def d_psi_inv(self, F):
        return d_inverse(np.conj(self.osc) * self.chi * F, self.patch, check_support=False)

    def d_star_psi_inv(self, F):
        return -0.25 * dbar_inverse(self.osc * self.chi * F, self.patch, check_support=False)


def dbar_psi_inverse(f, ctx: CGOContext, kind: str = "dbar"):
    """One of the four conjugated inverses: 'dbar', 'dbar*', 'd', 'd*'."""
    return {"dbar": ctx.dbar_psi_inv, "dbar*": ctx.dbar_star_psi_inv,
            "d": ctx.d_psi_inv, "d*": ctx.d_star_psi_inv}[kind](f)


# --------------------------------------------------------------------------
# CGO construction
# --------------------------------------------------------------------------


@dataclass
class CGOSolution:
    h: float
    phase: CGOPhase
    amplitude: CGOAmplitude
    ctx: CGOContext
    r: np.ndarray
    s: np.ndarray
    neumann_terms: int
    term_norms: list
    ratio: float
    tail_bound: float
    tilde: bool = False
    q: np.ndarray | None = field(default=None, repr=False)

    @property
    def patch(self):
        return self.ctx.patch

    def a(self):
        amp = self.amplitude(self.patch.Z)
        return np.conj(amp) if self.tilde else amp

    def exponent(self):
        """Exponent of the CGO: ``Phi/h`` or ``-conj(Phi)/h`` for the tilde family."""
        P = self.phase.Phi(self.patch.Z)
        return (-np.conj(P) if self.tilde else P) / self.h

    def v(self, log_shift=0.0):
        """``exp(exponent - log_shift) (a + r)`` on the patch."""
        return np.exp(self.exponent() - log_shift) * (self.a() + self.r)


def _neumann(ctx, q, a_field, J, tol=1e-14, max_ratio=0.9):
    term = ctx.dbar_star_psi_inv(q * a_field)
    s = term.copy()
    norms = [ctx.patch.l2(term)]
    ratio = 0.0
    used = 1
    for _ in range(1, J):
        term = -ctx.dbar_star_psi_inv(q * ctx.dbar_psi_inv(term))
        nrm = ctx.patch.l2(term)
        ratio = nrm / norms[-1] if norms[-1] > 0 else 0.0
        norms.append(nrm)
        if ratio >= max_ratio:
            raise SeriesDiverging(f"Neumann term ratio {ratio:.3f} >= {max_ratio}")
        s += term
        used += 1
        if nrm <= tol * norms[0]:
            break
    tail = norms[-1] * ratio / (1 - ratio) if ratio > 0 else 0.0
    return s, used, norms, ratio, tail


def build_cgo(h, phase: CGOPhase, amplitude: CGOAmplitude | None = None, q=None, J: int = 8,
              ctx: CGOContext | None = None, tilde: bool = False, **ctx_kw) -> CGOSolution:
    """CGO remainder by a truncated Neumann series.

    ``q`` is a grid field on ``ctx.patch`` or a callable of ``Z``.  With
    ``tilde=True`` the solution is ``exp(-conj(Phi)/h)(conj(a) + r~)``, obtained
    by building with ``(-Phi, conj(q))`` and conjugating.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    amplitude = amplitude or CGOAmplitude((1.0,), phase.z0)
    ctx = ctx or CGOContext.for_h(h, phase, **ctx_kw)
    Z = ctx.patch.Z
    qf = q(Z) if callable(q) else (np.zeros(Z.shape) if q is None else np.asarray(q))
    if np.max(np.abs(qf)) == 0:
        zero = np.zeros(Z.shape, complex)
        return CGOSolution(h, phase, amplitude, ctx, zero, zero.copy(), 0, [0.0], 0.0, 0.0, tilde, qf)
    if not tilde:
        s, used, norms, ratio, tail = _neumann(ctx, qf, amplitude(Z), J)
        r = -ctx.dbar_psi_inv(s)
        return CGOSolution(h, phase, amplitude, ctx, r, s, used, norms, ratio, tail, False, qf)
    neg = CGOContext(h, phase.negated(), ctx.patch, ctx.r_one, ctx.r_zero, ctx.guard, ctx.check)
    s, used, norms, ratio, tail = _neumann(neg, np.conj(qf), amplitude(Z), J)
    r = -neg.dbar_psi_inv(s)
    return CGOSolution(h, phase, amplitude, ctx, np.conj(r), np.conj(s), used, norms, ratio, tail, True, qf)


@dataclass
class ResidualReport:
    residual: float
    norm_a: float
    norm_qa: float

    @property
    def relative_to_qa(self):
        return self.residual / self.norm_qa if self.norm_qa > 0 else self.residual


def residual_check(sol: CGOSolution, q=None, gamma=None, radius=None) -> ResidualReport:
    """``|| exp(-phi/h) (Delta + q) v ||_L2`` on the disk where the cutoff is 1.

    Evaluated as ``-4 (d + Phi'/h) dbar r + q (a + r)`` (the weight removes
    ``|exp(Phi/h)|``).  For a conformally flat metric ``gamma I`` the operator
    is ``gamma^-1 (-4 d dbar)``, handled by using ``gamma q``.
    """
    ctx, patch = sol.ctx, sol.patch
    Z = patch.Z
    qf = sol.q if q is None else (q(Z) if callable(q) else q)
    if gamma is not None:
        qf = qf * (gamma(Z) if callable(gamma) else gamma)
    a = sol.a()
    dx = patch.dx
    _, dbr = wirtinger(sol.r, dx)
    if sol.tilde:
        # v = exp(-conj(Phi)/h)(conj(a) + r): use the conjugate equation
        _, dbr_c = wirtinger(np.conj(sol.r), dx)
        d_of, _ = wirtinger(dbr_c, dx)
        res = np.conj(-4 * (d_of + (-sol.phase.dPhi(Z) / sol.h) * dbr_c)) + qf * (a + sol.r)
    else:
        d_of, _ = wirtinger(dbr, dx)
        res = -4 * (d_of + sol.phase.dPhi(Z) / sol.h * dbr) + qf * (a + sol.r)
    rad = ctx.r_one - 8 * dx if radius is None else radius
    mask = np.abs(patch.W) <= rad
    res = np.where(mask, res, 0)
    return ResidualReport(patch.l2(res), patch.l2(np.where(mask, a, 0)), patch.l2(np.where(mask, qf * a, 0)))


# --------------------------------------------------------------------------
# Oscillatory integrals and slopes
# --------------------------------------------------------------------------


def oscillatory_integral(f, psi, h, multiplier=4, patch: Patch | None = None, phase: CGOPhase | None = None,
                         guard: float = 10.0):
    """Trapezoid rule for ``int exp(i m psi / h) f dx`` on a patch (``f`` compactly supported)."""
    if patch is None:
        raise ValueError("a patch is required")
    if phase is not None:
        support = np.abs(f) > 0
        rad = float(np.max(np.abs(patch.W[support]))) if support.any() else 0.0
        g = phase.max_grad_psi(rad)
        if g > 0 and patch.dx > h / (guard * g) * (1 + 1e-9):
            raise UnderResolved(f"spacing {patch.dx:.3g} exceeds h/({guard:g} max|grad psi|)")
    return patch.integral(np.exp(1j * multiplier * psi / h) * f)


def slope_fit(hs, values):
    """Least-squares slope of ``log|value|`` against ``log h``."""
    x = np.log(np.asarray(hs, float))
    y = np.log(np.abs(np.asarray(values)))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1])


# --------------------------------------------------------------------------
# Monomial test functions and the expansion iterates
# --------------------------------------------------------------------------

_Zs, _Zb = sp.symbols("z zb")


def _cutoff_expr(r_flat, radius):
    """Symbolic ``plateau_cutoff(|w|, r_flat, radius)`` in ``z, zb`` (valid for r_flat < |w| < radius)."""
    t = (sp.sqrt(_Zs * _Zb) - r_flat) / (radius - r_flat)
    a, b = sp.exp(-1 / t), sp.exp(-1 / (1 - t))
    return b / (a + b)


@dataclass
class MonomialField:
    """``coef * chi(|w|) * w^k * conj(w)^l`` with ``w = z - z0`` and a flat-topped cutoff ``chi``.

    The flat top keeps the local expansion at ``z0`` that of the bare monomial.
    """

    k: int
    l: int
    coef: complex = 1.0
    radius: float = 0.3
    z0: complex = 0.0
    r_flat: float = 0.1

    @property
    def deg(self):
        return self.k + self.l

    def expr(self, with_cutoff=True):
        mono = self.coef * _Zs ** self.k * _Zb ** self.l
        return mono * _cutoff_expr(self.r_flat, self.radius) if with_cutoff else mono

    def grid(self, patch: Patch):
        W = patch.W - (self.z0 - patch.z0)
        return self.coef * plateau_cutoff(np.abs(W), self.r_flat, self.radius) * W ** self.k * np.conj(W) ** self.l


def _eval_expr(expr, W, mask):
    f = sp.lambdify((_Zs, _Zb), expr, modules="numpy")
    Wi = np.where(mask, W, 1.0)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(Wi, np.conj(Wi)), dtype=complex) * np.ones(W.shape)
    return np.where(mask, vals, 0.0)


def _fill_center(F, patch):
    c = patch.center_index
    bad = ~np.isfinite(F[c, c])
    if bad:
        nb = [F[c + 1, c], F[c - 1, c], F[c, c + 1], F[c, c - 1]]
        F[c, c] = np.mean(nb)
    return F


def expansion_iterates(f: MonomialField, phase: CGOPhase, K: int, patch: Patch):
    """Iterates ``F^1 .. F^(K+1)`` of ``dbar_psi^-1 f ~ exp(-2 i psi/h) sum h^j F^j``.

    ``F^1 = (i/2) f / dbar psi`` and ``F^(j+1) = -(i/2) dbar F^j / dbar psi``;
    with ``dbar psi = (i/2) conj(Phi')`` these are ``f / conj(Phi')`` and
    ``-dbar F^j / conj(Phi')``.  The quotients are formed symbolically and the
    value at the critical point (a removable or bounded singularity) is
    filled from its neighbours.  Returns ``(grids, exprs, degrees)``.
    """
    if f.deg < 2 * K + 1:
        raise DegreeTooLow(f"deg(f) = {f.deg} < 2K+1 = {2 * K + 1}")
    poly = np.polynomial.Polynomial(phase.coeffs).deriv()
    shift = f.z0 - phase.z0
    conj_dphi = sum(complex(c).conjugate() * (_Zb + np.conj(shift)) ** n for n, c in enumerate(poly.coef))

    def chain(F):
        out = [F]
        for _ in range(K):
            F = -sp.diff(F, _Zb) / conj_dphi
            out.append(F)
        return out

    core = [sp.simplify(e) for e in chain(sp.simplify(f.expr(False) / conj_dphi))]
    band = chain(f.expr(True) / conj_dphi)
    W = patch.W - (f.z0 - patch.z0)
    R = np.abs(W)
    in_core, in_band = R <= f.r_flat, (R > f.r_flat) & (R < f.radius)
    grids = [_fill_center(_eval_expr(c, W, in_core) + _eval_expr(e, W, in_band), patch)
             for c, e in zip(core, band)]
    exprs = core
    degs = [f.deg - 2 * j + 1 for j in range(1, K + 2)]
    return grids, exprs, degs


def expansion_remainder(f: MonomialField, phase: CGOPhase, K: int, ctx: CGOContext):
    """``dbar_psi^-1 f - exp(-2 i psi/h) sum_j h^j F^j`` on the context grid."""
    grids, _, _ = expansion_iterates(f, phase, K, ctx.patch)
    lead = sum(ctx.h ** (j + 1) * g for j, g in enumerate(grids))
    return ctx.dbar_psi_inv(f.grid(ctx.patch)) - np.conj(ctx.osc) * lead


# --------------------------------------------------------------------------
# Slope suite for the nonlinear calculus
# --------------------------------------------------------------------------


@dataclass
class SlopeRow:
    label: str
    deg: int
    l: int
    floor: float
    hs: list
    values: list
    slope: float
    dropped: list = field(default_factory=list)

    @property
    def passed(self):
        return self.slope >= self.floor - 0.1


def default_cases():
    """Test cases: (label, (k, l) monomial, derivative order, kind, floor)."""
    cases = []
    for deg in range(5):
        cases.append((f"remainder:deg{deg}", (deg - deg // 2, deg // 2), 0, "r", deg // 2 + 1))
    for (deg, l) in ((2, 1), (3, 1), (4, 2)):
        cases.append((f"derivative:deg{deg},l{l}", (deg - deg // 2, deg // 2), l, "dr", (deg - l) // 2 + 1))
    cases.append(("product:deg4,r*rt", (2, 2), 0, "r*rt", 3))
    cases.append(("product:deg4,r+r*rt", (2, 2), 0, "r+r*rt", 3))
    cases.append(("product:deg3,dr*(1+rt)", (2, 1), 0, "dr*(1+rt)", 2))
    return cases


def _d_power(r, l, dx):
    for _ in range(l):
        r, _ = wirtinger(r, dx)
    return r


def calculus_integrals(h, phase, q, cases, J=8, oversample=1.0, **ctx_kw):
    """All case integrals ``int exp(4 i psi/h) f L(r, r~)`` at one ``h``."""
    ctx = CGOContext.for_h(h, phase, oversample=oversample, **ctx_kw)
    sol = build_cgo(h, phase, q=q, J=J, ctx=ctx)
    need_t = any("rt" in c[3] for c in cases)
    rt = build_cgo(h, phase, q=q, J=J, ctx=ctx, tilde=True).r if need_t else None
    patch, r = ctx.patch, sol.r
    out = {}
    for label, (k, l_), dl, kind, _ in cases:
        f = MonomialField(k, l_, z0=phase.z0).grid(patch)
        if kind == "r":
            L = r
        elif kind == "dr":
            L = _d_power(r, dl, patch.dx)
        elif kind == "r*rt":
            L = r * rt
        elif kind == "r+r*rt":
            L = r + r * rt
        elif kind == "dr*(1+rt)":
            L = wirtinger(r, patch.dx)[0] * (1 + rt)
        else:
            raise ValueError(kind)
        out[label] = oscillatory_integral(f * L, ctx.psi, h, 4, patch)
    return out, ctx


def calculus_slope_suite(phase: CGOPhase | None = None, q=None, hs=None, cases=None, J=8,
                         oversample=1.0, **ctx_kw):
    """Fitted decay slopes of the calculus integrals over an h-sweep."""
    phase = phase or CGOPhase.quadratic()
    q = q if q is not None else (lambda Z: default_potential(Z, phase.z0))
    hs = list(hs or [2.0 ** -k for k in range(4, 10)])
    cases = cases or default_cases()
    table = {c[0]: [] for c in cases}
    used_h, dropped = [], []
    for h in hs:
        try:
            vals, _ = calculus_integrals(h, phase, q, cases, J, oversample, **ctx_kw)
        except UnderResolved:
            dropped.append(h)
            continue
        used_h.append(h)
        for k, v in vals.items():
            table[k].append(v)
    rows = []
    for label, (k, l_), dl, kind, floor in cases:
        slope, _ = slope_fit(used_h, table[label])
        rows.append(SlopeRow(label, k + l_, dl, floor, used_h, table[label], slope, dropped))
    return rows


# --------------------------------------------------------------------------
# Asymptotics of the integral identities
# --------------------------------------------------------------------------


def _reduced_grad(sol_or_none, phase, amp_vals, h, patch, scale=1.0, anti=False, r=None):
    """``exp(-E) grad v`` for ``v = exp(E) A`` with ``E = scale Phi/h`` or ``-scale conj(Phi)/h``."""
    Z = patch.Z
    A = amp_vals if r is None else amp_vals + r
    dP = scale * phase.dPhi(Z) / h
    if anti:
        Ex, Ey = -np.conj(dP), 1j * np.conj(dP)
    else:
        Ex, Ey = dP, 1j * dP
    return A, (Ex * A + _d_fd(A, patch.dx, 0), Ey * A + _d_fd(A, patch.dx, 1))


def _bil(T, G, H):
    return (T[..., 0, 0] * G[0] * H[0] + T[..., 0, 1] * G[0] * H[1]
            + T[..., 1, 0] * G[1] * H[0] + T[..., 1, 1] * G[1] * H[1])


def default_tensor(W, r_flat=0.05, radius=0.3):
    """Compactly supported, non-isotropic symmetric 2-tensor."""
    chi = polynomial_cutoff(np.abs(W), r_flat, radius)
    T = np.empty(W.shape + (2, 2))
    T[..., 0, 0] = (1 + 0.3 * W.real) * chi
    T[..., 1, 1] = (-0.5 + 0.2 * W.imag) * chi
    T[..., 0, 1] = T[..., 1, 0] = 0.2 * chi
    return T


@dataclass
class SecondOrderAsymptotics:
    h: float
    full: complex
    leading: complex

    @property
    def difference(self):
        return abs(self.full - self.leading)


def second_order_asymptotics(h, phase: CGOPhase | None = None, q=None, tensor=None, amplitude=None,
                             J: int = 8, oversample: float = 1.0) -> SecondOrderAsymptotics:
    """Triple-product integral of the second identity with CGOs versus their leading parts.

    Solutions ``v1 = v2 = exp(Phi/h)(a + r)`` and ``v3 = exp(-2 conj(Phi)/h)(conj(a) + r~)``,
    where ``r~`` is the tilde remainder of the doubled phase.  The sum of the
    three terms ``v_i K(grad v_j, grad v_k)`` is returned with and without
    remainders; their difference should vanish as ``h -> 0``.
    """
    phase = phase or CGOPhase.quadratic()
    q = q if q is not None else (lambda Z: default_potential(Z, phase.z0))
    amplitude = amplitude or CGOAmplitude((1.0,), phase.z0)
    tensor = tensor or default_tensor
    phase2 = CGOPhase(tuple(2 * c for c in phase.coeffs), phase.z0)
    ctx2 = CGOContext.for_h(h, phase2, oversample=oversample)
    patch = ctx2.patch
    ctx1 = CGOContext(h, phase, patch)
    r = build_cgo(h, phase, amplitude, q, J, ctx=ctx1).r
    rt = build_cgo(h, phase2, amplitude, q, J, ctx=ctx2, tilde=True).r
    a = amplitude(patch.Z)
    T = tensor(patch.W)
    osc = np.exp(4j * phase.psi(patch.Z) / h)

    def total(r1, r3):
        A1, G1 = _reduced_grad(None, phase, a, h, patch, r=r1)
        A3, G3 = _reduced_grad(None, phase, np.conj(a), h, patch, scale=2.0, anti=True, r=r3)
        s = A1 * _bil(T, G1, G3) + A1 * _bil(T, G1, G3) + A3 * _bil(T, G1, G1)
        return patch.integral(osc * s)

    return SecondOrderAsymptotics(h, total(r, rt), total(0 * r, 0 * rt))


@dataclass
class ThirdOrderAsymptotics:
    h: float
    integral: complex
    groups: dict
    predicted: complex

    @property
    def scaled(self):
        return self.integral * self.h


def third_order_leading_constant(phase: CGOPhase, Q_at_P: complex, gamma_at_P: float = 1.0):
    """Stationary-phase value of ``h * I`` for a quadratic phase ``c (z - z0)^2`` and ``a = 1`` near P.

    The leading group ``8 gamma^-2 (d v1 dbar v2)^2`` reduces to
    ``8 h^-4 int exp(4 i psi/h) Q |Phi'|^4``; rotating to ``psi = 2|c| x y`` and
    expanding to second order gives ``-2 pi |c| Q(P) / gamma(P)^2``.
    """
    c = phase.coeffs[2] if len(phase.coeffs) > 2 else 0.0
    if any(abs(x) > 0 for x in phase.coeffs[3:]) or abs(phase.coeffs[1]) > 0:
        raise ValueError("closed form only for a pure quadratic phase")
    return -2 * np.pi * abs(c) * Q_at_P / gamma_at_P ** 2


def default_weight(W, r_flat=0.05, radius=0.3):
    """Weight with ``Q(P) != 0``, flat near P."""
    return (1 + 0.4 * W.real - 0.2 * W.imag) * polynomial_cutoff(np.abs(W), r_flat, radius)


def vanishing_weight(W, r_flat=0.05, radius=0.3):
    """Weight with ``Q(P) = 0``."""
    return (W.real + 0.5 * W.imag) * polynomial_cutoff(np.abs(W), r_flat, radius)


def third_order_asymptotics(h, phase: CGOPhase | None = None, q=None, weight=None, amplitude=None,
                            J: int = 8, oversample: float = 1.0, sols=None) -> ThirdOrderAsymptotics:
    """Weighted gradient-product integral of the third identity with ``v1 = v3``, ``v2 = v4``.

    ``v1 = exp(Phi/h)(a + r)`` and ``v2 = exp(-conj(Phi)/h)(conj(a) + r~)``; the
    flat metric is used.  Groups hold the three Wirtinger types
    ``(d v1 dbar v2)^2``, ``d v1 d v2 dbar v1 dbar v2`` and ``(dbar v1 d v2)^2``
    with their weights 8, 32 and 8 (both pairings ``(12)(34)`` and ``(14)(23)``
    reduce to ``(grad v1 . grad v2)^2``).
    """
    phase = phase or CGOPhase.quadratic()
    q = q if q is not None else (lambda Z: default_potential(Z, phase.z0))
    amplitude = amplitude or CGOAmplitude((1.0,), phase.z0)
    weight = weight or default_weight
    if sols is None:
        ctx = CGOContext.for_h(h, phase, oversample=oversample)
        r = build_cgo(h, phase, amplitude, q, J, ctx=ctx).r
        rt = build_cgo(h, phase, amplitude, q, J, ctx=ctx, tilde=True).r
    else:
        ctx, r, rt = sols
    patch = ctx.patch
    a = amplitude(patch.Z)
    Q = weight(patch.W)
    osc = np.exp(4j * phase.psi(patch.Z) / h)
    _, G1 = _reduced_grad(None, phase, a, h, patch, r=r)
    _, G2 = _reduced_grad(None, phase, np.conj(a), h, patch, anti=True, r=rt)

    def dot(G, H):
        return G[0] * H[0] + G[1] * H[1]

    g12, g11, g22 = dot(G1, G2), dot(G1, G1), dot(G2, G2)
    total = patch.integral(osc * Q * (g12 * g12 + g11 * g22 + g12 * g12))
    d1, db1 = 0.5 * (G1[0] - 1j * G1[1]), 0.5 * (G1[0] + 1j * G1[1])
    d2, db2 = 0.5 * (G2[0] - 1j * G2[1]), 0.5 * (G2[0] + 1j * G2[1])
    groups = {
        "leading": patch.integral(osc * Q * 8 * (d1 * db2) ** 2),
        "mixed": patch.integral(osc * Q * 32 * d1 * d2 * db1 * db2),
        "smallest": patch.integral(osc * Q * 8 * (db1 * d2) ** 2),
    }
    P = patch.center_index
    try:
        pred = third_order_leading_constant(phase, complex(Q[P, P])) / h
    except ValueError:
        pred = np.nan
    return ThirdOrderAsymptotics(h, total, groups, pred)


def plateau_drift(values, last=3):
    """Relative spread ``max|x_i - x_j| / |mean|`` over the last points."""
    v = np.asarray(values[-last:])
    return float(np.max(np.abs(v[:, None] - v[None, :])) / abs(np.mean(v)))
