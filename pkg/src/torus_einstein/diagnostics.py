"""Geometric post-processing of built families.

Negative Einstein constant: alpha ~ A s^2 with A = -2 eps/(n+1), so the
metric is conformally compact with defining function sigma, d sigma / sigma
= -ds / sqrt(alpha).  Ricci-flat: t ~ sqrt(2 kappa (n+1) s / p) and the
volume of a t-ball grows like t^(2n+2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, PreconditionError
from .profiles import Family, ModelParams, PowerSum, SolutionCoefficients, profile_functions, t_of_s
from .verifier import fiber_ricci

__all__ = [
    "BoundaryMetric",
    "VolumeReport",
    "DecayReport",
    "boundary_metric",
    "geodesic_sigma",
    "zeta",
    "s_of_sigma",
    "s_of_t",
    "q_curvature4",
    "volume",
    "volume_report",
    "decay_report",
    "fit_exponent",
]


@dataclass(frozen=True)
class BoundaryMetric:
    b_bar: np.ndarray
    c_bar_sq: float
    delta_bar: float
    U_bar: tuple[float, float]
    alpha_bar: float


def _require_cce(family: Family) -> None:
    if not family.params.eps < 0:
        raise PreconditionError("conformal compactification needs eps < 0")


def boundary_metric(family: Family) -> BoundaryMetric:
    """Limits of s^-1 g on the boundary, read off the leading power-law coefficients."""
    _require_cce(family)
    prof = family.profile
    q1, q2 = family.params.q1, family.params.q2
    A = prof.alpha.coefficient(2.0)
    d = prof.delta.coefficient(1.0)
    u = np.array([prof.U1.coefficient(1.0), prof.U2.coefficient(1.0)])
    r = np.array([q2, -q1], dtype=float)
    b_bar = (np.outer(u, u) + A * np.outer(r, r)) / d
    return BoundaryMetric(b_bar, family.coeffs.kappa, d, (float(u[0]), float(u[1])), A)


# -- geodesic defining function ----------------------------------------------


def _gamma(prof) -> float:
    return 1.0 / math.sqrt(prof.alpha.coefficient(2.0))


def _midpoint(s1: float) -> float:
    return 2.0 * s1


@lru_cache(maxsize=256)
def _zeta_data(params: ModelParams, coeffs: SolutionCoefficients, s1: float) -> tuple[float, float]:
    """(zeta(mid), zeta(infinity)) for mid = 2 s1."""
    prof = profile_functions(params, coeffs)
    g = _gamma(prof)
    mid = _midpoint(s1)
    z_mid = g * math.log(mid / s1) - t_of_s(params, coeffs, mid, s1)
    return z_mid, z_mid + _tail(prof, 1.0 / mid)


def _tail(prof, v: float) -> float:
    """int_0^v h, where zeta(inf) - zeta(1/v) = int_0^v h(w) dw.

    With alpha(1/w) = R(w)^2 / w^2 and R(0)^2 = A = gamma^-2 the integrand is
    h(w) = gamma^2 (R^2 - A) / (w R (gamma R + 1)), regular at w = 0.
    """
    g = _gamma(prof)
    A = prof.alpha.coefficient(2.0)
    rest = PowerSum(tuple((1.0 - k, c) for k, c in prof.alpha.terms if k != 2.0))

    def h(w):
        if w == 0.0:
            return g * g * rest.coefficient(0.0) / (math.sqrt(A) * 2.0)
        R = math.sqrt(A + w * rest(w))
        return g * g * rest(w) / (R * (g * R + 1.0))

    if v == 0.0:
        return 0.0
    # h changes sign for some families, so an absolute floor is needed
    floor = 1e-13 * v * (abs(h(0.0)) + abs(h(v)))
    val, _ = quad(h, 0.0, v, epsabs=floor, epsrel=1e-13, limit=200)
    return val


def zeta(family: Family, s: float) -> float:
    """zeta(s) = int_{s1}^s (gamma/tau - alpha^-1/2) d tau, gamma = A^-1/2."""
    _require_cce(family)
    s1 = family.s1
    if s < s1:
        raise DomainError(f"s = {s} lies below s1 = {s1}")
    params, coeffs = family.params, family.coeffs
    prof = family.profile
    if s <= _midpoint(s1):
        return _gamma(prof) * math.log(s / s1) - t_of_s(params, coeffs, s, s1)
    _, z_inf = _zeta_data(params, coeffs, s1)
    return z_inf - _tail(prof, 1.0 / s)


def geodesic_sigma(family: Family, s: float) -> float:
    """sigma(s) = s^(-gamma) exp(zeta(s)); gamma = 1/2 for eps = -(2n+2)."""
    if s == math.inf:
        return 0.0
    g = _gamma(family.profile)
    return s ** (-g) * math.exp(zeta(family, s))


def _log_sigma_v(family: Family, v: float) -> float:
    """log sigma at s = 1/v for s beyond the midpoint."""
    prof = family.profile
    _, z_inf = _zeta_data(family.params, family.coeffs, family.s1)
    return _gamma(prof) * math.log(v) + z_inf - _tail(prof, v)


def s_of_sigma(family: Family, delta: float) -> float:
    """Inverse of the strictly decreasing map s -> sigma(s)."""
    _require_cce(family)
    s1 = family.s1
    sig1 = s1 ** (-_gamma(family.profile))
    if not 0 < delta <= sig1:
        raise DomainError(f"sigma level {delta} outside (0, {sig1}]")
    if delta == sig1:
        return s1
    mid = _midpoint(s1)
    target = math.log(delta)
    if delta >= geodesic_sigma(family, mid):
        return brentq(lambda x: math.log(geodesic_sigma(family, x)) - target, s1, mid, xtol=1e-300, rtol=1e-15)
    lv_hi = -math.log(mid)
    lv_lo = lv_hi - 10.0
    while _log_sigma_v(family, math.exp(lv_lo)) > target:
        lv_lo -= 10.0
    lv = brentq(lambda x: _log_sigma_v(family, math.exp(x)) - target, lv_lo, lv_hi, xtol=1e-15, rtol=1e-15)
    return math.exp(-lv)


# -- Q-curvature -------------------------------------------------------------


def q_curvature4(boundary: BoundaryMetric, params: ModelParams) -> float:
    """Q = (R^2 - 3|Ric|^2)/6 of the four-dimensional boundary metric (Delta R = 0)."""
    if params.n != 1:
        raise PreconditionError("Q-curvature is implemented for four-dimensional boundaries (n = 1)")
    eig, scalar = fiber_ricci(boundary.b_bar, math.sqrt(boundary.c_bar_sq), params)
    lam_v1, lam_v2, lam_h = eig
    ric_sq = lam_v1**2 + lam_v2**2 + 2 * params.n * lam_h**2
    return (scalar * scalar - 3.0 * ric_sq) / 6.0


# -- volumes -----------------------------------------------------------------


def volume(family: Family, s: float) -> float:
    """Volume of {s1 <= s' <= s}: C kappa^n/(n+1) (s^(n+1) - s1^(n+1))."""
    params = family.params
    n, k = params.n, family.coeffs.kappa
    return params.volume_constant * k**n / (n + 1) * (s ** (n + 1) - family.s1 ** (n + 1))


def s_of_t(family: Family, t: float) -> float:
    if t <= 0:
        return family.s1
    s1 = family.s1
    lo, hi = s1, 2.0 * s1
    while family.t_of_s(hi) < t:
        lo, hi = hi, hi * 4.0
        if hi > 1e300:
            raise DomainError(f"t = {t} beyond the reach of the family")
    return brentq(lambda s: family.t_of_s(s) - t, lo, hi, xtol=1e-300, rtol=1e-14)


def fit_exponent(x, y) -> float:
    """Least-squares slope of log|y| against log x."""
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float))), 1)
    return float(slope)


@dataclass(frozen=True)
class VolumeReport:
    kind: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]


def fit_log_term(cutoffs, ys, n: int, gamma, degree: int):
    """Least-squares split of Y(delta) = delta^p Vol into powers and a log term.

    Y is modelled as sum_j a_j w^j + b w^(n+1) log w with
    w = (delta/delta_max)^(1/gamma).  Returns (a_0, coefficient of
    delta^(p) log(delta) in Y, residual norm), evaluated at the current
    mpmath precision.
    """
    g = mp.mpf(gamma)
    dmax = mp.mpf(max(cutoffs))
    p_exp = (n + 1) / g
    ws = [(mp.mpf(d) / dmax) ** (1 / g) for d in cutoffs]
    M = mp.matrix([[w**j for j in range(degree + 1)] + [w ** (n + 1) * mp.log(w)] for w in ws])
    coef, res_norm = mp.qr_solve(M, mp.matrix([mp.mpf(y) for y in ys]))
    return coef[0], coef[degree + 1] / (g * dmax**p_exp), res_norm


def _cce_volume(family: Family, cutoffs, degree: int, digits: int) -> VolumeReport:
    """Log-term fit carried out in ``digits``-digit arithmetic.

    The fit separates w^(n+1) log w from w^(n+1) and neighbouring powers; in
    double precision that separation is limited by round-off for n >= 2, so
    the sigma-level inversion, the tail integrals and the least-squares solve
    are all done with mpmath on the (exact) float coefficients.
    """
    params = family.params
    n, k = params.n, family.coeffs.kappa
    prof = family.profile
    g_f = _gamma(prof)
    s1_f = family.s1
    sig1 = s1_f ** (-g_f)
    if cutoffs is None:
        cutoffs = np.geomspace(1e-3 * sig1, 1e-1 * sig1, 20)
    cutoffs = np.sort(np.asarray(cutoffs, dtype=float))
    with mp.workdps(digits):
        terms = [(mp.mpf(kk), mp.mpf(c)) for kk, c in prof.alpha.terms]
        A = next(c for kk, c in terms if kk == 2)
        g = 1 / mp.sqrt(A)
        lower = [(kk, c) for kk, c in terms if kk != 2]

        def rest(w):
            return mp.fsum(c * w ** (1 - kk) for kk, c in lower)

        def h(w):
            R = mp.sqrt(A + w * rest(w))
            return g * g * rest(w) / (R * (g * R + 1))

        def tail(v):
            return mp.quad(h, [0, v])

        s1 = mp.mpf(s1_f)
        mid = 2 * s1
        slope = mp.fsum(c * kk * s1 ** (kk - 1) for kk, c in terms)

        def root_integrand(u):
            # s1 is taken as the exact root, as in the double-precision path
            if u == 0:
                return 2 / mp.sqrt(slope)
            r = mp.log1p(u * u / s1)
            inc = mp.fsum(c * s1**kk * mp.expm1(kk * r) for kk, c in terms)
            return 2 * u / mp.sqrt(inc)

        t_mid = mp.quad(root_integrand, [0, mp.sqrt(mid - s1)])
        z_inf = g * mp.log(mid / s1) - t_mid + tail(1 / mid)
        p_exp = (n + 1) / g
        ys, vols = [], []
        for d_f in cutoffs:
            d = mp.mpf(d_f)
            # the double-precision inverse is an excellent start for the secant iteration
            lv0 = mp.mpf(-math.log(s_of_sigma(family, float(d_f))))
            lv = mp.findroot(lambda x: g * x + z_inf - tail(mp.e**x) - mp.log(d), lv0)
            z = z_inf - tail(mp.e**lv)
            ys.append(mp.e ** ((n + 1) * z / g) - s1 ** (n + 1) * d**p_exp)
            vols.append(volume(family, float(mp.e ** (-lv))))
        lead, log_c, res_norm = fit_log_term(cutoffs, ys, n, g, degree)
        pref = params.volume_constant * k**n / (n + 1)
        out = {
            "cutoffs": cutoffs.tolist(),
            "volumes": vols,
            "leading_exponent": -float(p_exp),
            "leading_coeff": float(pref * lead),
            "log_coeff": float(pref * log_c),
            "log_rel": float(abs(log_c / lead)),
            "fit_residual": float(res_norm),
            "degree": degree,
            "digits": digits,
        }
    return VolumeReport("cce", out)


def volume_report(family: Family, cutoffs=None, degree: int = 10, digits: int = 40) -> VolumeReport:
    """Volume diagnostics appropriate to the sign of the Einstein constant.

    eps < 0: volumes of {sigma > delta} and a least-squares fit of
    delta^p Vol in w = (delta/delta_max)^(1/gamma) with columns w^0..w^degree
    plus w^(n+1) log w; the log column isolates a delta^0 log(delta) term.
    eps = 0: volume of the t-ball and its growth exponent in t.
    eps > 0: total volume of the compact family.
    """
    params = family.params
    n = params.n
    if family.compact:
        total = volume(family, family.s2)
        return VolumeReport("compact", {"total": total, "normalized": total / params.volume_constant})
    if params.eps < 0:
        return _cce_volume(family, cutoffs, degree, digits)
    if params.eps == 0:
        t_grid = np.geomspace(1e2, 1e4, 20) if cutoffs is None else np.asarray(cutoffs, float)
        vols = [volume(family, s_of_t(family, float(t))) for t in t_grid]
        return VolumeReport(
            "ricci_flat",
            {
                "t": t_grid.tolist(),
                "volumes": vols,
                "growth_exponent": fit_exponent(t_grid, vols),
                "expected": 2 * n + 2,
                "euclidean": 2 * n + 3,
            },
        )
    raise PreconditionError("non-compact family with eps > 0")


# -- Ricci-flat curvature proxies --------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    t: list[float]
    mixed_curvature: list[float]
    shape_norm: list[float]
    mixed_exponent: float
    shape_exponent: float
    b_tilde: np.ndarray
    b_over_t2: np.ndarray
    det_over_t4: list[float]
    cone_rel_err: float


def decay_report(family: Family, t_grid=None) -> DecayReport:
    """Closed-form curvature proxies along a Ricci-flat family.

    K(t) = -c''/c with c = sqrt(kappa s): since ds/dt = sqrt(alpha),
    K = alpha/(4 s^2) - alpha'/(4 s) = sum_k a_k (1-k) s^(k-2) / 4, so the
    linear term of alpha drops out.  The shape operator of the level sets
    gives tr(L^2) = alpha tr(Phi^2)/4 + 2n alpha/(4 s^2).
    """
    params = family.params
    if params.eps != 0:
        raise PreconditionError("decay proxies are defined for Ricci-flat families (eps = 0)")
    n, k = params.n, family.coeffs.kappa
    prof = family.profile
    t_grid = np.geomspace(1e2, 1e4, 20) if t_grid is None else np.asarray(t_grid, float)
    mixed_terms = PowerSum(tuple((kk - 2.0, c * (1.0 - kk) / 4.0) for kk, c in prof.alpha.terms if kk != 1.0))
    K, L2, dets = [], [], []
    b_last = None
    for t in t_grid:
        s = s_of_t(family, float(t))
        smp = family.sample(s, order=1)
        a = smp.alpha[0]
        K.append(mixed_terms(s))
        Phi = smp.B[1] @ np.linalg.inv(smp.B[0])
        L2.append(a * float(np.trace(Phi @ Phi)) / 4.0 + 2 * n * a / (4.0 * s * s))
        b_last = smp.B[0] / t**2
        dets.append(float(np.linalg.det(smp.B[0]) / t**4))
    u = np.array([prof.U1.coefficient(1.0), prof.U2.coefficient(1.0)])
    b_tilde = np.outer(u, u) / (4.0 * k * k)
    cone_err = float(np.abs(b_last - b_tilde).max() / np.abs(b_tilde).max())
    return DecayReport(
        t_grid.tolist(),
        K,
        L2,
        fit_exponent(t_grid, K),
        fit_exponent(t_grid, L2),
        b_tilde,
        b_last,
        dets,
        cone_err,
    )
