"""Generating functions of the stationary conditional distributions.

Everything here is a numeric evaluator on the closed unit square (and on
circles of radius < 1 for coefficient extraction): the Type-1 busy-period
transform and its fixed-point relatives, the three orbit factors Ka/Kb/Kc,
the idle-orbit transform R0, the service-excess factors S, the
difference-quotient factors H, the geometric factors M1/M2, and the full
conditional transforms R1/R2 in both their raw and factored forms.

All evaluators broadcast over numpy arrays; scalars in, scalars out.
"""

from __future__ import annotations

import cmath
import warnings
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominator, InversionError, NoConvergence, QuadratureFailure
from .model import ModelParams

__all__ = [
    "FixedPointSettings",
    "GenFn",
    "Pmf",
    "KFactors",
    "solve_alpha",
    "solve_h",
    "eval_g",
    "alpha_equilibrium_lst",
    "factor_K",
    "eval_R0",
    "eval_S_beta",
    "eval_H_beta1",
    "eval_H_beta2",
    "eval_M1",
    "eval_M1_raw",
    "eval_M2",
    "eval_R1",
    "eval_R1_raw",
    "eval_R2",
    "eval_R2_raw",
    "extract_pmf",
    "conditional_pmfs",
]

_NEAR_SINGULAR = 1e-7  # switch difference quotients to derivative limits


@dataclass(frozen=True)
class FixedPointSettings:
    tol: float = 1e-12
    max_iter: int = 10_000


KFactors = namedtuple("KFactors", ["ka", "kb", "kc", "k"])


class GenFn:
    """A labelled generating-function evaluator with a point cache."""

    def __init__(self, fn, arity=1, label=""):
        self.fn = fn
        self.arity = arity
        self.label = label
        self.cache = {}

    def __call__(self, *args):
        key = args if len(args) > 1 else args[0]
        try:
            return self.cache[key]
        except (KeyError, TypeError):
            pass
        val = self.fn(*args)
        try:
            self.cache[key] = val
        except TypeError:
            pass
        return val


@dataclass
class Pmf:
    """Truncated probability vector p_0..p_N with explicit missing mass."""

    probs: np.ndarray
    deficit: float
    label: str = ""

    def __len__(self):
        return self.probs.size

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    def survival(self) -> np.ndarray:
        """P{X > j} for j = 0..N, counting the deficit as tail mass."""
        tail = np.cumsum(self.probs[::-1])[::-1]
        out = np.empty_like(tail)
        out[:-1] = tail[1:]
        out[-1] = 0.0
        return out + self.deficit


def _unpack(x):
    arr = np.asarray(x, dtype=complex)
    return np.atleast_1d(arr), arr.ndim == 0


def _repack(out, scalar):
    if not scalar:
        return out
    v = complex(out.reshape(-1)[0])
    return v.real if abs(v.imag) < 1e-12 * max(1.0, abs(v.real)) else v


def _busy_root(params, y_of, settings):
    """Solve x = beta1(y_of(x)) by a few Picard sweeps (which select the
    probabilistically minimal root from 0) followed by Newton polishing."""
    d = params.dist1
    lam1 = params.lambda1
    x = None
    for _ in range(4):
        y = y_of(0.0 if x is None else x)
        x = np.asarray(d.lst(y), dtype=complex)
    for _ in range(settings.max_iter):
        y = y_of(x)
        f = np.asarray(d.lst(y), dtype=complex) - x
        fprime = -lam1 * np.asarray(d.lst_deriv(y), dtype=complex) - 1.0
        step = f / fprime
        x = x - step
        if np.max(np.abs(step)) <= settings.tol:
            return x
    raise NoConvergence(f"busy-period fixed point stalled (last step {np.max(np.abs(step)):.2e})")


def solve_alpha(params: ModelParams, s, settings: FixedPointSettings = FixedPointSettings()):
    """Minimal root of the busy-period equation a = beta1(s + lam1 - lam1 a)."""
    arr, scalar = _unpack(s)
    lam1 = params.lambda1
    a = _busy_root(params, lambda x: arr + lam1 * (1.0 - x), settings)
    return _repack(a, scalar)


def solve_h(params: ModelParams, z2, settings: FixedPointSettings = FixedPointSettings()):
    """Minimal root of h = beta1(lam - lam1 h - lam2 z2)."""
    arr, scalar = _unpack(z2)
    lam, lam1, lam2 = params.lam, params.lambda1, params.lambda2
    h = _busy_root(params, lambda x: lam - lam1 * x - lam2 * arr, settings)
    return _repack(h, scalar)


def eval_g(params: ModelParams, z2, h=None):
    """g(z2) = q h(z2) + p z2, the batch-size transform."""
    arr, scalar = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, arr) if h is None else h, dtype=complex))
    return _repack(params.q * hh + params.p * arr, scalar)


def _alpha1(params):
    return params.dist1.mean / (1.0 - params.rho1)


def alpha_equilibrium_lst(params: ModelParams, s, alpha=None):
    """LST of the equilibrium law of the Type-1 busy period:
    (1 - alpha(s)) / (alpha_1 s), with the removable point at s = 0."""
    arr, scalar = _unpack(s)
    a = np.atleast_1d(np.asarray(solve_alpha(params, arr) if alpha is None else alpha, dtype=complex))
    out = np.ones_like(arr)
    far = np.abs(arr) >= 1e-8
    out[far] = (1.0 - a[far]) / (_alpha1(params) * arr[far])
    return _repack(out, scalar)


def factor_K(params: ModelParams, u, h=None) -> KFactors:
    """The three orbit factors and their product at u.

    Ka uses the singularity-free equilibrium form; Kb composes the merged
    equilibrium LST; Kc uses the difference quotient away from u = 1 and the
    compound-geometric form at the removable point.
    """
    arr, scalar = _unpack(u)
    lam, lam2 = params.lam, params.lambda2
    rho1, rho, p, vt = params.rho1, params.rho, params.p, params.vartheta
    hh = np.atleast_1d(np.asarray(solve_h(params, arr) if h is None else h, dtype=complex))
    g = params.q * hh + p * arr
    one_minus_u = 1.0 - arr

    # Ka: alpha(lam2 - lam2 u) equals h(u), so its equilibrium LST is free
    alpha_e = np.ones_like(arr)
    far = np.abs(one_minus_u) >= 1e-8
    alpha_e[far] = (1.0 - hh[far]) / (_alpha1(params) * lam2 * one_minus_u[far])
    ka = rho1 * alpha_e + (1.0 - rho1)

    s_g = lam * (1.0 - g)
    kb = np.atleast_1d(np.asarray(params.mixed_service_eq.lst(s_g), dtype=complex))

    beta2_g = np.atleast_1d(np.asarray(params.dist2.lst(s_g), dtype=complex))
    denom = beta2_g - arr
    near_one = np.abs(one_minus_u) < _NEAR_SINGULAR
    bad = (~near_one) & (np.abs(denom) < 1e-14) & (np.abs(one_minus_u) > 1e-6)
    if bad.any():
        raise DegenerateDenominator(
            f"beta2(lam - lam g(u)) - u vanished at u={arr[bad][0]:.6g}"
        )
    kc = np.empty_like(arr)
    fq = ~near_one
    kc[fq] = (1.0 - rho) / (1.0 - rho1) * one_minus_u[fq] / denom[fq]
    if near_one.any():
        b2e = np.atleast_1d(np.asarray(params.dist2_eq.lst(s_g[near_one]), dtype=complex))
        kc[near_one] = (1.0 - vt) / (1.0 - vt * ka[near_one] * b2e)

    k = ka * kb * kc
    if scalar:
        return KFactors(*(_repack(x, True) for x in (ka, kb, kc, k)))
    return KFactors(ka, kb, kc, k)


_GL_CACHE = {}


def _gl_rule(order):
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = ((x + 1.0) / 2.0, w / 2.0)  # mapped to [0,1]
    return _GL_CACHE[order]


def _k_integral(params, z, quad_tol=1e-10, max_order=256):
    """integral of K(u) du along the straight segment from z to 1,
    refined by doubling the Gauss-Legendre order until stable."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    seg = 1.0 - arr
    prev = None
    order = 16
    while order <= max_order:
        x, w = _gl_rule(order)
        u = arr[..., None] + seg[..., None] * x  # (..., order)
        flat = u.reshape(-1)
        k = np.asarray(factor_K(params, flat).k, dtype=complex).reshape(u.shape)
        val = seg * (k @ w)
        if prev is not None and np.max(np.abs(val - prev)) <= quad_tol:
            return val
        prev = val
        order *= 2
    raise QuadratureFailure(
        f"K-integral did not stabilise below {quad_tol:g} at order {max_order}"
    )


def eval_R0(params: ModelParams, z2, quad_tol=1e-10):
    """Orbit transform given an idle server: exp(-psi * int_z^1 K)."""
    arr, scalar = _unpack(z2)
    out = np.exp(-params.psi * _k_integral(params, arr, quad_tol=quad_tol))
    return _repack(out, scalar)


def eval_S_beta(params: ModelParams, i: int, z1, z2):
    """Equilibrium service LST of type i composed with lam - lam1 z1 - lam2 z2."""
    d = params.dist1_eq if i == 1 else params.dist2_eq
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    s = params.lam - params.lambda1 * a1 - params.lambda2 * a2
    return _repack(np.atleast_1d(np.asarray(d.lst(s), dtype=complex)), s1 and s2)


def _H_beta(params, which, z1, z2, h):
    lam, lam1, lam2 = params.lam, params.lambda1, params.lambda2
    d = params.dist1 if which == 1 else params.dist2
    pref = 1.0 / params.rho1 if which == 1 else params.p / (params.q * params.rho2)
    s = lam - lam1 * z1 - lam2 * z2
    bz = np.asarray(d.lst(s), dtype=complex)
    if which == 1:
        bh = h  # h is itself beta1 at the shifted argument
    else:
        bh = np.asarray(d.lst(lam - lam1 * h - lam2 * z2), dtype=complex)
    den = z1 - h
    out = np.empty(np.broadcast(bz, den).shape, dtype=complex)
    bz, bh, den, s = np.broadcast_arrays(bz, bh, den, s)
    near = np.abs(den) < _NEAR_SINGULAR
    fa = ~near
    out[fa] = pref * (bz[fa] - bh[fa]) / den[fa]
    if near.any():
        out[near] = pref * lam1 * (-np.asarray(d.lst_deriv(s[near]), dtype=complex))
    return out


def eval_H_beta1(params: ModelParams, z1, z2, h=None):
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    return _repack(_H_beta(params, 1, a1, a2, hh), s1 and s2)


def eval_H_beta2(params: ModelParams, z1, z2, h=None):
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    return _repack(_H_beta(params, 2, a1, a2, hh), s1 and s2)


def eval_M1(params: ModelParams, z1, z2, h=None):
    """Geometric factor (1 - rho1) / (1 - rho1 * H_beta1)."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    H = _H_beta(params, 1, a1, a2, hh)
    return _repack((1.0 - params.rho1) / (1.0 - params.rho1 * H), s1 and s2)


def eval_M1_raw(params: ModelParams, z1, z2):
    """Published difference-quotient form of M1 (cross-check only; no
    singular-point handling)."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    h = np.atleast_1d(np.asarray(solve_h(params, a2), dtype=complex))
    s = params.lam - params.lambda1 * a1 - params.lambda2 * a2
    b1 = np.asarray(params.dist1.lst(s), dtype=complex)
    return _repack((1.0 - params.rho1) * (h - a1) / (b1 - a1), s1 and s2)


def eval_M2(params: ModelParams, z1, z2, h=None, kf: KFactors = None):
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    if kf is None:
        kf = factor_K(params, a2, h=hh)
    H2 = _H_beta(params, 2, a1, a2, hh)
    vt = params.vartheta
    out = vt * H2 * np.asarray(kf.ka, dtype=complex) * np.asarray(kf.kc, dtype=complex) + (1.0 - vt)
    return _repack(out, s1 and s2)


def eval_R1(params: ModelParams, z1, z2, h=None, kf=None, r0=None):
    """Factored conditional transform given a Type-1 service in progress."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    if kf is None:
        kf = factor_K(params, a2, h=hh)
    if r0 is None:
        r0 = eval_R0(params, a2)
    m2 = eval_M2(params, a1, a2, h=hh, kf=kf)
    m1 = eval_M1(params, a1, a2, h=hh)
    sb1 = eval_S_beta(params, 1, a1, a2)
    out = np.asarray(m2, dtype=complex) * np.asarray(m1, dtype=complex)
    out = out * np.asarray(sb1, dtype=complex) * np.asarray(r0, dtype=complex)
    return _repack(np.atleast_1d(out), s1 and s2)


def eval_R2(params: ModelParams, z1, z2, h=None, kf=None, r0=None):
    """Factored conditional transform given a Type-2 service in progress."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    hh = np.atleast_1d(np.asarray(solve_h(params, a2) if h is None else h, dtype=complex))
    if kf is None:
        kf = factor_K(params, a2, h=hh)
    if r0 is None:
        r0 = eval_R0(params, a2)
    sb2 = np.asarray(eval_S_beta(params, 2, a1, a2), dtype=complex)
    out = sb2 * np.asarray(kf.ka, dtype=complex) * np.asarray(kf.kc, dtype=complex)
    out = out * np.asarray(r0, dtype=complex)
    return _repack(np.atleast_1d(out), s1 and s2)


def _w_fn(params, z1, z2, h, g):
    lam, lam1, lam2 = params.lam, params.lambda1, params.lambda2
    s12 = lam - lam1 * z1 - lam2 * z2
    b2_12 = np.asarray(params.dist2.lst(s12), dtype=complex)
    b2_g = np.asarray(params.dist2.lst(lam * (1.0 - g)), dtype=complex)
    return (lam - lam1 * h - lam2 * b2_g) * (b2_12 - z2) + (
        lam - lam1 * z1 - lam2 * b2_12
    ) * (z2 - b2_g)


def eval_R1_raw(params: ModelParams, z1, z2):
    """Original published form of R1 (interior points only)."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    lam, lam1, lam2 = params.lam, params.lambda1, params.lambda2
    h = np.atleast_1d(np.asarray(solve_h(params, a2), dtype=complex))
    g = params.q * h + params.p * a2
    s12 = lam - lam1 * a1 - lam2 * a2
    b1 = np.asarray(params.dist1.lst(s12), dtype=complex)
    b2_g = np.asarray(params.dist2.lst(lam * (1.0 - g)), dtype=complex)
    w = _w_fn(params, a1, a2, h, g)
    r0 = np.asarray(eval_R0(params, a2), dtype=complex)
    out = (
        (1.0 - params.rho)
        / params.rho1
        * w
        / ((b2_g - a2) * (a1 - b1))
        * (1.0 - b1)
        / s12
        * r0
    )
    return _repack(np.atleast_1d(out), s1 and s2)


def eval_R2_raw(params: ModelParams, z1, z2):
    """Original published form of R2 (interior points only)."""
    a1, s1 = _unpack(z1)
    a2, s2 = _unpack(z2)
    lam, lam1, lam2 = params.lam, params.lambda1, params.lambda2
    h = np.atleast_1d(np.asarray(solve_h(params, a2), dtype=complex))
    g = params.q * h + params.p * a2
    s12 = lam - lam1 * a1 - lam2 * a2
    b2_12 = np.asarray(params.dist2.lst(s12), dtype=complex)
    b2_g = np.asarray(params.dist2.lst(lam * (1.0 - g)), dtype=complex)
    r0 = np.asarray(eval_R0(params, a2), dtype=complex)
    out = (
        (1.0 - params.rho)
        / params.rho2
        * (lam * (1.0 - g))
        / (b2_g - a2)
        * (1.0 - b2_12)
        / s12
        * r0
    )
    return _repack(np.atleast_1d(out), s1 and s2)


def _ring(radius, points):
    m = np.arange(points)
    return radius * np.exp(2j * np.pi * m / points)


def _check_roundoff(n, radius):
    """Reject (n, radius) pairs whose round-off amplification is hopeless.

    Recovering p_j multiplies the FFT's absolute round-off (~1e-15) by
    radius^(-j), so a small radius with a deep cutoff yields pure noise; a
    radius closer to 1 must be used instead.
    """
    if radius < 1.0 and 1e-16 * radius ** (-float(n)) > 1e-6:
        raise InversionError(
            f"radius {radius} amplifies round-off by {radius ** (-float(n)):.1e} "
            f"at coefficient {n}; use a radius closer to 1 for this depth"
        )


def _r0_on_contour(params, z, kvals, radius, quad_tol=1e-10):
    """R0 at every point of the inversion contour at once.

    K has a nonnegative power series with K(1) = 1, so the segment integral
    splits as int_z^1 K = int_0^1 K - sum_n k_n z^(n+1)/(n+1).  The k_n come
    from an FFT of the already-computed contour values of K, and the dropped
    tail carries a factor radius^m, so the split is exact at working
    precision whenever radius^m is negligible.  Falls back to segmentwise
    quadrature otherwise.  The series path is cross-checked against the
    quadrature at one contour point.
    """
    m = z.size
    if radius**m > 1e-12:
        return np.exp(-params.psi * _k_integral(params, z, quad_tol=quad_tol))
    total = _k_integral(params, np.array([0.0 + 0j]), quad_tol=quad_tol)[0]
    # fft of the contour values gives k_n * radius^n directly
    kn = np.fft.fft(kvals) / m
    partial = m * np.fft.ifft(kn / np.arange(1, m + 1))
    integral = total - z * partial
    check = _k_integral(params, z[:1], quad_tol=quad_tol)[0]
    if abs(integral[0] - check) > 1e-8:
        raise QuadratureFailure(
            f"series and quadrature forms of the R0 integral disagree by "
            f"{abs(integral[0] - check):.2e}"
        )
    return np.exp(-params.psi * integral)


def _coeffs_from_ring(values, n, radius, label=""):
    """Power-series coefficients p_0..p_n from samples on |z| = radius."""
    m = values.size
    coeffs = np.fft.fft(values)[: n + 1] / m
    probs = coeffs.real * radius ** -np.arange(n + 1)
    lowest = probs.min()
    if lowest < -1e-6:
        raise InversionError(f"{label or 'pmf'}: coefficient {lowest:.3e} below -1e-6")
    if lowest < -1e-9:
        warnings.warn(f"{label or 'pmf'}: clipping negative dust down to {lowest:.3e}")
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total > 1.0 + 1e-7:
        raise InversionError(f"{label or 'pmf'}: probabilities sum to {total:.9f} > 1")
    return Pmf(probs=probs, deficit=max(0.0, 1.0 - total), label=label)


def extract_pmf(f, n: int, radius: float = 0.9, points: int | None = None, label: str = "") -> Pmf:
    """Invert a one-argument PGF by sampling it on a circle of given radius.

    Uses at least 2n contour points (default 4n); the result carries the
    unrecovered tail mass as `deficit`.  A radius above 1 is allowed for
    PGFs analytic beyond the unit disk (light-tailed laws), where it is the
    only way to resolve geometrically small coefficients.
    """
    if n < 1:
        raise InversionError("need n >= 1 coefficients")
    if radius <= 0.0:
        raise InversionError("inversion radius must be positive")
    m = 4 * n if points is None else int(points)
    if m < 2 * n:
        raise InversionError("need at least 2n contour points")
    _check_roundoff(n, radius)
    at_one = complex(np.asarray(f(1.0 + 0j), dtype=complex).reshape(-1)[0])
    if abs(at_one - 1.0) > 1e-8:
        raise InversionError(f"{label or 'pmf'}: PGF at 1 is {at_one:.10f}, not 1")
    z = _ring(radius, m)
    values = np.asarray(f(z), dtype=complex).reshape(m)
    return _coeffs_from_ring(values, n, radius, label=label)


def conditional_pmfs(params: ModelParams, n: int, radius: float = 0.9, points: int | None = None,
                     quad_tol: float = 1e-10) -> dict:
    """Marginal pmfs of the five conditional counts by contour inversion.

    R0:  orbit | idle;  R11/R12: queue/orbit | Type-1 in service;
    R21/R22: queue/orbit | Type-2 in service.  One shared contour is used so
    the expensive fixed points and the R0 integral are computed once.
    """
    m = 4 * n if points is None else int(points)
    if m < 2 * n:
        raise InversionError("need at least 2n contour points")
    _check_roundoff(n, radius)
    z = _ring(radius, m)
    one = np.ones_like(z)

    h = np.atleast_1d(np.asarray(solve_h(params, z), dtype=complex))
    kf = factor_K(params, z, h=h)
    r0 = _r0_on_contour(params, z, kf.k, radius, quad_tol=quad_tol)

    vals = {"R0": r0}
    # z2 = 1 slices: the orbit factors collapse to 1 and h(1) = 1
    h_one = np.ones_like(z)
    m1_q = eval_M1(params, z, one, h=h_one)
    m2_q = params.vartheta * _H_beta(params, 2, z, one, h_one) + (1.0 - params.vartheta)
    s1_q = np.asarray(eval_S_beta(params, 1, z, one), dtype=complex)
    vals["R11"] = np.asarray(m1_q, dtype=complex) * m2_q * s1_q
    vals["R21"] = np.asarray(eval_S_beta(params, 2, z, one), dtype=complex)
    # z1 = 1 slices share h, the factors and R0 on the same contour
    vals["R12"] = np.asarray(
        eval_R1(params, one, z, h=h, kf=kf, r0=r0), dtype=complex
    )
    vals["R22"] = np.asarray(eval_R2(params, one, z, h=h, kf=kf, r0=r0), dtype=complex)

    labels = {
        "R0": "orbit | idle",
        "R11": "queue | serving type 1",
        "R12": "orbit | serving type 1",
        "R21": "queue | serving type 2",
        "R22": "orbit | serving type 2",
    }
    return {
        name: _coeffs_from_ring(v, n, radius, label=f"{name}: {labels[name]}")
        for name, v in vals.items()
    }
