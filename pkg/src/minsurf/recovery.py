"""Twin experiments: pointwise recovery of K, the h2 discrepancy and the conformal factor.

Two metric families A and B are compared through boundary pairings of their
DN derivatives,

    P_B^(n)(z0, h) = oint f_test  d^n Lambda_B(f, ..., f)  dS,

with boundary data the traces of complex geometric optics solutions centered
at a probe ``z0``.  For families with ``h1 = 0`` and Euclidean ``g(x, 0)`` the
CGOs ``exp(Phi/h)`` are exact harmonic functions on the whole domain, so the
differences ``P_A - P_B`` equal interior integrals of the coefficient
differences and their ``h -> 0`` limits are point values:

* order 1, pair ``(e^{Phi/h}, e^{-conj Phi/h})``:   ``~ (pi/2) h dh1(z0)``
* order 2, triple ``(e^{Phi/h}, e^{Phi/h}, e^{-2 conj Phi/h})``:
  ``~ -(pi/4) e^{i theta} (K11 - K22 + 2i K12)(z0) + (pi/4) h dh2(z0)``
* order 3, quadruple ``v1 = v3 = e^{Phi/h}``, ``v2 = v4 = e^{-conj Phi/h}``:
  ``~ C (1 - 1/c(z0)) / h``

with ``Phi = e^{i theta} (z - z0)^2 / 2``.  The constant ``C`` is calibrated
against a reference twin with known ``c``; its stationary-phase value is pi.

``mode='dn-only'`` forms the pairings from ``dn_derivative`` data alone;
``mode='white-box'`` evaluates the interior side of the integral identities
with the coefficients and exists to score the former.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .cgo import CGOAmplitude, CGOPhase, slope_fit
from .errors import CalibrationMissing, ConfigInvalid, FitIllConditioned, UnderResolved
from .geometry import (Domain, MetricFamily, boundary_integral, contract, eval_coefficients, grad,
                       integrate, make_family)
from .identities import second_identity, third_identity
from .linearize import Linearization, dn_derivative

MODES = ("dn-only", "white-box")

C_H1 = pi / 2
C_K = -pi / 4
C_H2 = pi / 4
C_CONFORMAL = pi

VARIANT_NOTE = ("extension: K is fitted over several phase variants (theta = 0, theta = pi and the "
                "conjugated triple); they constrain the same complex number e^{i theta} (K11 - K22 + 2i K12), "
                "so they add redundancy, not rank; the trace comes from Tr K = -(h1_A - h1_B)")

# exponent budget max|Re Phi| / h per order; beyond it the pairings lose
# digits to the e^{+-Re Phi/h} dynamic range of the products
MAX_EXPONENT = {1: 30.0, 2: 12.0, 3: 17.0}
# (order + 1) * max|Phi'| / h * dx above this under-resolves the products
MAX_PHASE_STEP = 0.8


# --------------------------------------------------------------------------
# Extrapolation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """``value(h) ~ alpha h^p + beta h^(p+1)`` by least squares."""

    p: int
    alpha: complex
    beta: complex
    residual: float
    cond: float
    hs: tuple
    values: tuple

    def as_dict(self):
        return {"p": self.p, "alpha": _cplx(self.alpha), "beta": _cplx(self.beta),
                "residual": self.residual, "cond": self.cond}


def extrapolate(hs, values, p, max_cond=1e6) -> FitResult:
    hs = np.asarray(hs, float)
    vals = np.asarray(values, complex)
    if len(hs) < 2:
        raise FitIllConditioned("two-term fit needs at least two step sizes")
    M = np.vstack([hs ** p, hs ** (p + 1)]).T
    norms = np.linalg.norm(M, axis=0)
    cond = float(np.linalg.cond(M / norms))
    if not np.isfinite(cond) or cond > max_cond:
        raise FitIllConditioned(f"h-sweep design condition {cond:.3g} > {max_cond:g}")
    coef, *_ = np.linalg.lstsq(M, vals, rcond=None)
    resid = vals - M @ coef
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    return FitResult(p, complex(coef[0]), complex(coef[1]), float(np.linalg.norm(resid) / scale / np.sqrt(len(hs))),
                     cond, tuple(float(h) for h in hs), tuple(complex(v) for v in vals))


# --------------------------------------------------------------------------
# Experiment description
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    """Constant of the order-3 limit per unit ``Q = 1 - 1/c(z0)``."""

    constant: complex
    c_ref: float
    z0: complex
    fit: FitResult
    analytic: float = C_CONFORMAL

    @property
    def relative_to_analytic(self):
        return abs(self.constant - self.analytic) / self.analytic

    def as_dict(self):
        return {"constant": _cplx(self.constant), "c_ref": self.c_ref, "z0": _cplx(self.z0),
                "analytic": self.analytic, "relative_to_analytic": self.relative_to_analytic,
                "fit": self.fit.as_dict()}


@dataclass
class TwinExperiment:
    family_A: MetricFamily
    family_B: MetricFamily
    domain: Domain
    mode: str = "dn-only"
    probes: tuple = (0j,)
    hs_second: tuple = (1 / 96, 1 / 128, 1 / 160)
    hs_third: tuple = (1 / 160, 1 / 192, 1 / 224, 1 / 256)
    # (theta, conjugate) phase variants; see ``cgo_fields``
    orientations: tuple = ((0.0, False), (pi, False), (0.0, True))
    calibration: Calibration | dict | None = None
    name: str = "twin"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}")
        if len(self.orientations) < 3:
            raise ConfigInvalid("K recovery needs at least three phase orientations")
        self.orientations = tuple(_variant(o) for o in self.orientations)
        self.probes = tuple(complex(z) for z in self.probes)
        dom = self.domain
        margin = 0.2 * dom.diam
        for z in self.probes:
            dist = min(z.real - dom.x0, dom.x1 - z.real, z.imag - dom.y0, dom.y1 - z.imag)
            if dist < margin:
                raise ConfigInvalid(f"probe {z} is {dist:.3g} from the boundary (< 0.2 diam = {margin:.3g})")
        # admissibility of both families (NonMinimal / NotSPD propagate)
        cA = eval_coefficients(self.family_A, dom)
        eval_coefficients(self.family_B, dom)
        if np.max(np.abs(cA.g - np.eye(2))) > 1e-12:
            raise ConfigInvalid("family A must have Euclidean g(x, 0) (isothermal coordinates, gamma = 1)")
        if np.max(np.abs(cA.h1)) > 1e-10:
            raise ConfigInvalid("family A must have h1 = 0 so that the CGOs are exact solutions")
        self._boundary_metric = cA.g

    def calibration_for(self, z0):
        cal = self.calibration
        if isinstance(cal, dict):
            cal = cal.get(complex(z0))
        if cal is None:
            raise CalibrationMissing(f"no order-3 calibration for probe {z0}")
        return cal


# --------------------------------------------------------------------------
# CGO data on the domain grid
# --------------------------------------------------------------------------


def cgo_phase(z0, theta=0.0) -> CGOPhase:
    return CGOPhase.quadratic(0.5 * np.exp(1j * theta), z0)


def _variant(o):
    if isinstance(o, (tuple, list)):
        return float(o[0]), bool(o[1])
    return float(o), False


def cgo_fields(domain: Domain, z0, h, theta=0.0, order=2, conjugate=False):
    """Exact CGO solutions for ``q = 0`` on the grid.

    order 1 and 3: ``(e^{Phi/h} a, e^{-conj Phi/h} conj a)``;
    order 2: ``(e^{Phi/h} a, e^{-2 conj Phi/h} conj a)``.
    ``conjugate`` returns the complex conjugates of both.

    The discrete harmonic extensions of these traces are accurate only in
    relative terms where ``|v|`` is not exponentially small; the pairings
    cancel that error when ``Re Phi`` vanishes at the corners of the grid
    (theta = 0 or pi).  Other orientations lose all digits at moderate h.
    """
    phase = cgo_phase(z0, theta)
    a = CGOAmplitude((1.0,), z0)
    Z = domain.Z
    P = phase.Phi(Z)
    _check_resolution(domain, phase, h, order, P)
    v = np.exp(P / h) * a(Z)
    k = 2 if order == 2 else 1
    t = np.exp(-k * np.conj(P) / h) * np.conj(a(Z))
    return (np.conj(v), np.conj(t)) if conjugate else (v, t)


def check_sweep(domain: Domain, z0, hs, order, orientations=((0.0, False),)):
    """Raises UnderResolved unless every ``h`` of the sweep fits the grid budgets."""
    for th, _ in (_variant(o) for o in orientations):
        phase = cgo_phase(z0, th)
        P = phase.Phi(domain.Z)
        for h in hs:
            _check_resolution(domain, phase, h, order, P)


def _check_resolution(domain, phase, h, order, P):
    e = float(np.max(np.abs(P.real))) / h
    if e > MAX_EXPONENT[order]:
        raise UnderResolved(f"max|Re Phi|/h = {e:.3g} exceeds {MAX_EXPONENT[order]} at order {order}")
    step = (order + 1) * float(np.max(np.abs(phase.dPhi(domain.Z)))) / h * max(domain.hx, domain.hy)
    if step > MAX_PHASE_STEP:
        raise UnderResolved(f"phase advances {step:.3g} rad per cell at order {order} (> {MAX_PHASE_STEP})")


# --------------------------------------------------------------------------
# Pairings
# --------------------------------------------------------------------------

_CACHE: dict = {}


def clear_cache():
    _CACHE.clear()


def _sides(u, domain):
    return [u[sd.i, sd.j] for sd in domain.sides]


def _pairing(exp: TwinExperiment, which, order, z0, h, variant):
    family = exp.family_A if which == "A" else exp.family_B
    theta, conj = _variant(variant)
    key = (id(family), exp.domain, exp.mode, order, complex(z0), float(h), theta, conj)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is family:
        return hit[1]
    dom = exp.domain
    v, t = cgo_fields(dom, z0, h, theta, order, conj)
    f = [dom.boundary_values(v), dom.boundary_values(t)]
    idx = {1: (0,), 2: (0, 0), 3: (0, 1, 0)}[order]
    if exp.mode == "dn-only":
        dn = dn_derivative(order, idx, f, family, dom, Linearization(family, dom, f, check=False))
        val = boundary_integral([a * b for a, b in zip(dn.sides, _sides(t, dom))], dom, exp._boundary_metric)
    else:
        val = _interior(family, dom, f, v, t, order)
    val = complex(val)
    _CACHE[key] = (family, val)
    return val


def _interior(family, dom, f, v, t, order):
    """Interior side of the integral identity (coefficients visible)."""
    co = eval_coefficients(family, dom)
    if order == 1:
        G1, G2 = grad(v, dom), grad(t, dom)
        return integrate(contract(co.k, G1, G2) + co.q * v * t, dom, co.d, "riemannian")
    lin = Linearization(co, dom, f, check=False)
    if order == 2:
        return second_identity(0, 0, 1, lin).rhs
    return third_identity(0, 1, 0, 1, lin).rhs


def pairing_differences(exp: TwinExperiment, order, z0, hs, variant=(0.0, False)):
    return np.array([_pairing(exp, "A", order, z0, h, variant) - _pairing(exp, "B", order, z0, h, variant)
                     for h in hs])


# --------------------------------------------------------------------------
# Second moments and K
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondMoment:
    h: float
    variant: tuple
    value: complex          # sum as assembled in the experiment's mode
    terms: tuple | None     # the three K-integrals (white box only)


def second_moment_integrals(z0, h, exp: TwinExperiment, variant=(0.0, False)) -> SecondMoment:
    """Order-2 functional for the CGO triple at ``z0``.

    In white-box mode the three integrals
    ``int v3 K(grad v1, grad v2)``, ``int v1 K(grad v2, grad v3)``,
    ``int v2 K(grad v1, grad v3)`` with ``K = k1_A - c k1_B`` are returned
    separately as well.
    """
    variant = _variant(variant)
    value = complex(pairing_differences(exp, 2, z0, (h,), variant)[0])
    terms = None
    if exp.mode == "white-box":
        dom = exp.domain
        v, t = cgo_fields(dom, z0, h, *variant, order=2)
        cA, cB = eval_coefficients(exp.family_A, dom), eval_coefficients(exp.family_B, dom)
        c = cB.g[..., 0, 0] / cA.g[..., 0, 0]
        K = cA.k1 - c[..., None, None] * cB.k1
        G1, G3 = grad(v, dom), grad(t, dom)
        vol = lambda u: complex(integrate(u, dom, cA.d, "riemannian"))
        terms = (vol(t * contract(K, G1, G1)), vol(v * contract(K, G1, G3)), vol(v * contract(K, G1, G3)))
    return SecondMoment(float(h), variant, value, terms)


@dataclass(frozen=True)
class KEstimate:
    raw: np.ndarray          # full estimate before projection
    projected: np.ndarray    # trace part only: the K ~ I conclusion
    trace_free_norm: float
    trace: float
    cond: float
    fits: dict               # (theta, conjugate) -> FitResult

    @property
    def norm(self):
        return float(np.linalg.norm(self.raw, 2))


def recover_h1_difference(z0, exp: TwinExperiment, hs=None) -> tuple[float, FitResult]:
    hs = hs or exp.hs_second
    fit = extrapolate(hs, pairing_differences(exp, 1, z0, hs), 1)
    return float((fit.alpha / C_H1).real), fit


def recover_K(z0, exp: TwinExperiment) -> KEstimate:
    """Least squares over the phase variants for the trace-free part of K.

    Each variant gives ``alpha = C_K e^{i theta} (a + 2i b)`` with
    ``a = K11 - K22``, ``b = K12`` (complex conjugate for conjugated CGOs).
    All variants constrain the same two numbers, so they add redundancy,
    not rank.  The trace is closed by minimality:
    ``Tr K = -(h1_A - h1_B)(z0)``, the latter measured at order 1.
    """
    rows, rhs, fits = [], [], {}
    for var in exp.orientations:
        fit = extrapolate(exp.hs_second, pairing_differences(exp, 2, z0, exp.hs_second, var), 0)
        fits[var] = fit
        w = C_K * np.exp(1j * var[0])
        al = np.conj(fit.alpha) if var[1] else fit.alpha
        rows += [[w.real, -2 * w.imag], [w.imag, 2 * w.real]]
        rhs += [al.real, al.imag]
    M = np.array(rows)
    cond = float(np.linalg.cond(M))
    if cond > 1e6:
        raise FitIllConditioned(f"orientation design condition {cond:.3g} > 1e6")
    (a, b), *_ = np.linalg.lstsq(M, np.array(rhs), rcond=None)
    dh1, _ = recover_h1_difference(z0, exp)
    tr = -dh1
    raw = np.array([[tr / 2 + a / 2, b], [b, tr / 2 - a / 2]])
    proj = 0.5 * tr * np.eye(2)
    return KEstimate(raw, proj, float(np.hypot(a, 2 * b) / np.sqrt(2)), float(tr), cond, fits)


def recover_h2(z0, exp: TwinExperiment, K: KEstimate | None = None) -> tuple[float, FitResult]:
    """``(h2_A - c h2_B)(z0)`` from the O(h) coefficient of the order-2 functional.

    The K limit (``K`` given, or zero) is subtracted first; K's own O(h)
    terms are not, so the estimate is meaningful when K vanishes near z0.
    """
    th, conj = exp.orientations[0]
    vals = pairing_differences(exp, 2, z0, exp.hs_second, (th, conj))
    if conj:
        vals = np.conj(vals)
    if K is not None:
        a, b = K.raw[0, 0] - K.raw[1, 1], K.raw[0, 1]
        vals = vals - C_K * np.exp(1j * th) * (a + 2j * b)
    fit = extrapolate(exp.hs_second, vals, 1)
    return float((fit.alpha / C_H2).real), fit


# --------------------------------------------------------------------------
# Conformal factor
# --------------------------------------------------------------------------


def reference_family(z0=0j, kappa=0.5, r2=0.33):
    """Base family with k1 = h1 = h2 = 0 (Step-2 matched under conformal scaling)."""
    return make_family("even", {"kappa": kappa, "profile": "cutoff", "r2": r2,
                                "center": (complex(z0).real, complex(z0).imag)})


def calibrate(domain: Domain, z0=0j, hs=None, mode="dn-only", c_amp=0.5, r2=0.33,
              base: MetricFamily | None = None) -> Calibration:
    """Order-3 constant from a synthetic twin ``(g, c_ref g)`` with known ``c_ref``."""
    z0 = complex(z0)
    base = base or reference_family(z0, r2=r2)
    ref = base.scaled(f"1 + {c_amp} * plateau(x, y, {z0.real}, {z0.imag}, 0, {r2}, 4)", name="reference*c")
    exp = TwinExperiment(base, ref, domain, mode, probes=(z0,), hs_third=tuple(hs or TwinExperiment.hs_third),
                         name="calibration")
    fit = extrapolate(exp.hs_third, pairing_differences(exp, 3, z0, exp.hs_third), -1)
    c_ref = 1.0 + c_amp
    return Calibration(fit.alpha / (1 - 1 / c_ref), c_ref, z0, fit)


def recover_conformal_factor(z0, exp: TwinExperiment) -> tuple[float, FitResult]:
    cal = exp.calibration_for(z0)
    fit = extrapolate(exp.hs_third, pairing_differences(exp, 3, z0, exp.hs_third), -1)
    Q = (fit.alpha / cal.constant).real
    return float(1.0 / (1.0 - Q)), fit


def third_order_groups(exp: TwinExperiment, z0, hs):
    """White-box group differences ``X_A - X_B`` of the third identity per h."""
    out = {g: [] for g in ("GG", "H", "R", "B")}
    dom = exp.domain
    for h in hs:
        v, t = cgo_fields(dom, z0, h, 0.0, 3)
        f = [dom.boundary_values(v), dom.boundary_values(t)]
        reps = [third_identity(0, 1, 0, 1, Linearization(fam, dom, f, check=False))
                for fam in (exp.family_A, exp.family_B)]
        for g in out:
            out[g].append(reps[0].groups[g] - reps[1].groups[g])
    return {g: np.array(v) for g, v in out.items()}


# --------------------------------------------------------------------------
# End to end
# --------------------------------------------------------------------------


def white_box_truth(exp: TwinExperiment, z0):
    """Coefficient values at the probe node nearest ``z0`` (scoring only)."""
    dom = exp.domain
    i = int(np.argmin(np.abs(dom.x - complex(z0).real)))
    j = int(np.argmin(np.abs(dom.y - complex(z0).imag)))
    cA, cB = eval_coefficients(exp.family_A, dom), eval_coefficients(exp.family_B, dom)
    c = float(cB.g[i, j, 0, 0] / cA.g[i, j, 0, 0])
    return {"K": cA.k1[i, j] - c * cB.k1[i, j], "h2": float(cA.h2[i, j] - c * cB.h2[i, j]),
            "h1": float(cA.h1[i, j] - cB.h1[i, j]), "c": c,
            "k1_scale": float(max(np.linalg.norm(cA.k1[i, j], 2), np.linalg.norm(cB.k1[i, j], 2))),
            "h2_scale": float(max(abs(cA.h2[i, j]), abs(cB.h2[i, j])))}


@dataclass
class ProbeRecord:
    z0: complex
    K_hat: np.ndarray
    K_projected: np.ndarray
    K_trace_free_norm: float
    h2_hat: float | None
    c_hat: float | None
    fits: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    truth: dict | None = None

    def as_dict(self):
        d = {"z0": _cplx(self.z0), "K_hat": np.asarray(self.K_hat).tolist(),
             "K_projected": np.asarray(self.K_projected).tolist(),
             "K_trace_free_norm": self.K_trace_free_norm, "h2_hat": self.h2_hat, "c_hat": self.c_hat,
             "fits": {k: v.as_dict() for k, v in self.fits.items()}, "slopes": self.slopes,
             "errors": self.errors}
        if self.truth is not None:
            d["truth"] = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                          for k, v in self.truth.items()}
        return d


@dataclass
class RecoveryReport:
    name: str
    mode: str
    probes: list
    calibration: dict | None = None
    discrepancies: dict | None = None
    notes: tuple = ()

    def to_json(self):
        doc = {"name": self.name, "mode": self.mode, "probes": [p.as_dict() for p in self.probes],
               "calibration": self.calibration, "discrepancies": self.discrepancies,
               "notes": list(self.notes)}
        return json.dumps(doc, indent=2, sort_keys=True)

    def summary_rows(self):
        rows = []
        for p in self.probes:
            rows.append({"z0_re": p.z0.real, "z0_im": p.z0.imag,
                         "K11": p.K_hat[0, 0], "K12": p.K_hat[0, 1], "K22": p.K_hat[1, 1],
                         "K_trace_free": p.K_trace_free_norm,
                         "h2_hat": p.h2_hat, "c_hat": p.c_hat})
        return rows


def _slope(fit: FitResult):
    # exactly vanishing differences (e.g. both families even in s) have no slope
    if not all(np.abs(fit.values)):
        return None
    return slope_fit(fit.hs, fit.values)[0]


def end_to_end(exp: TwinExperiment, with_truth: bool = True, steps=("K", "h2", "c")) -> RecoveryReport:
    """Runs the recoveries on every probe.

    ``with_truth`` attaches white-box truth and discrepancies after the
    estimates are formed; the estimates never read family B's coefficients
    in dn-only mode.
    """
    records = []
    for z0 in exp.probes:
        fits, errors, slopes = {}, {}, {}
        K = recover_K(z0, exp)
        for (th, cj), fr in K.fits.items():
            fits[f"K:theta={th:+.4f}{':conj' if cj else ''}"] = fr
        h2 = c = None
        if "h2" in steps:
            h2, fr = recover_h2(z0, exp, K)
            fits["h2"] = fr
        if "c" in steps:
            try:
                c, fr = recover_conformal_factor(z0, exp)
                fits["c"] = fr
                slopes["order3"] = _slope(fr)
            except CalibrationMissing as err:
                errors["c"] = f"{err.code}: {err}"
        mid = K.fits[exp.orientations[0]]
        slopes["order2"] = _slope(mid)
        rec = ProbeRecord(z0, K.raw, K.projected, K.trace_free_norm, h2, c, fits, slopes, errors)
        if with_truth:
            rec.truth = white_box_truth(exp, z0)
        records.append(rec)
    disc = None
    if with_truth:
        disc = {"K": max(float(np.max(np.abs(r.K_hat - r.truth["K"]))) for r in records)}
        if "h2" in steps:
            disc["h2"] = max(abs(r.h2_hat - r.truth["h2"]) for r in records)
        if all(r.c_hat is not None for r in records) and "c" in steps:
            disc["c"] = max(abs(r.c_hat - r.truth["c"]) for r in records)
    cal = None
    if exp.calibration is not None:
        cals = exp.calibration.values() if isinstance(exp.calibration, dict) else [exp.calibration]
        cal = [x.as_dict() for x in cals]
    notes = (VARIANT_NOTE,)
    return RecoveryReport(exp.name, exp.mode, records, cal, disc, notes)


# --------------------------------------------------------------------------
# Twins and the trace algebra
# --------------------------------------------------------------------------


def twin_domain(n=513, half_width=0.35):
    return Domain.square(half_width, n)


def make_twin(kind: str, domain: Domain | None = None, mode="dn-only", probes=(0j,), **kw) -> TwinExperiment:
    """Standard twins on ``[-0.35, 0.35]^2`` with profiles supported in r < 0.33.

    ``matched``: mixed family vs the same family plus an s^5 tail, tabulated
    (identical DN derivatives to order 3, different coefficients).
    ``traceless``: trace-free k1 bump vs Euclidean.
    ``conformal``: even family vs c times it, ``c = 1 + amp * cutoff``.
    ``h2``: mixed vs traceless (K = 0, h2 difference 12 e).
    """
    domain = domain or twin_domain()
    prof = {"profile": "cutoff", "r2": 0.33}
    if kind == "matched":
        A = make_family("mixed", {"kappa": 0.4, "theta": 0.3, "amp": 0.3, **prof})
        tail = make_family("mixed", {"kappa": 0.4, "theta": 0.3, "amp": 0.3, **prof, "s5_perturbation": 0.5})
        B = MetricFamily.from_callable("mixed+s5:tabulated", tail.g)
    elif kind == "traceless":
        A = make_family("traceless", {"kappa": kw.pop("kappa", 0.4), "theta": kw.pop("theta", 0.3), **prof})
        B = make_family("euclidean")
    elif kind == "conformal":
        amp = kw.pop("amp", 0.3)
        A = reference_family()
        B = make_family("even", {"kappa": 0.5, **prof, "conformal": {"amp": amp, **prof}})
    elif kind == "h2":
        A = make_family("mixed", {"kappa": 0.4, "theta": 0.3, "amp": 0.3, **prof})
        B = make_family("traceless", {"kappa": 0.4, "theta": 0.3, **prof})
    else:
        raise ConfigInvalid(f"unknown twin kind {kind!r}")
    return TwinExperiment(A, B, domain, mode, probes, name=kind, **kw)


@dataclass(frozen=True)
class TraceAlgebraResult:
    n: int
    agree: int
    n_multiples_of_identity: int
    S: np.ndarray
    A: np.ndarray

    @property
    def passed(self):
        return self.agree == self.n


def trace_algebra(n=1000, seed=0) -> TraceAlgebraResult:
    """``Tr(KS) = Tr(KA) = 0  <=>  K ~ I`` over random integer symmetric K (exact arithmetic).

    S and A are the Hessians of Re and Im of ``Phi = z^2``.
    """
    S, A = CGOPhase.quadratic(1.0).hessian_split()
    S, A = np.rint(S).astype(np.int64), np.rint(A).astype(np.int64)
    rng = np.random.default_rng(seed)
    agree = mult = 0
    for _ in range(n):
        lam = int(rng.integers(-50, 51))
        if rng.random() < 0.5:
            K = lam * np.eye(2, dtype=np.int64)
        else:
            a, b, c = (int(x) for x in rng.integers(-50, 51, size=3))
            K = np.array([[a, b], [b, c]], dtype=np.int64)
        is_mult = K[0, 1] == 0 and K[1, 0] == 0 and K[0, 0] == K[1, 1]
        both = np.trace(K @ S) == 0 and np.trace(K @ A) == 0
        mult += bool(is_mult)
        agree += bool(is_mult) == bool(both)
    return TraceAlgebraResult(n, agree, mult, S, A)


def _cplx(z):
    z = complex(z)
    return [z.real, z.imag]
