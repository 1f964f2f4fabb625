"""Numerical certification of built families.

Residuals of the reduced Einstein system are evaluated in the radial
coordinate s, where ds = sqrt(alpha) dt.  With Phi = B' B^-1 and
Upsilon = det B' the three equations read

    hh:  n alpha (-beta''/beta + (beta'/beta)^2 / 2) - n alpha' beta' / (2 beta)
         - alpha''/2 + Upsilon/2 = eps
    se:  alpha/2 (-n beta'/beta Phi - Phi') - alpha'/2 Phi + n/(2 beta^2) U q^T = eps I
    ba:  alpha/2 (-beta''/beta - (n-1)(beta'/beta)^2) - alpha' beta'/(2 beta)
         + p/beta - Delta/(2 beta^2) = eps

The builders impose only se and ba; hh is checked independently here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFiberError, DomainError
from .profiles import (
    ModelParams,
    ProfileSample,
    SolutionCoefficients,
    eval_profile,
    profile_functions,
)

__all__ = [
    "End",
    "ResidualReport",
    "CollapseReport",
    "DomainScanReport",
    "DerivativeReport",
    "fiber_ricci",
    "log_grid",
    "einstein_residual",
    "residual_tolerance",
    "collapse_check",
    "domain_scan",
    "fd_jet",
    "derivative_check",
]

GRID_POINTS = 200
ENDPOINT_CLIP = 1e-6


class End(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


def residual_tolerance(eps: float, base: float = 1e-8) -> float:
    return base * (1.0 + abs(eps))


def fiber_ricci(B: np.ndarray, c: float, params: ModelParams) -> tuple[np.ndarray, float]:
    """Ricci eigenvalues of a fixed fibre metric with s-independent coefficients.

    Returns ([lambda_v1, lambda_v2, lambda_h], scalar); lambda_h has
    multiplicity 2n, so scalar = lambda_v1 + lambda_v2 + 2n lambda_h.
    """
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2) or not np.allclose(B, B.T, rtol=0, atol=1e-14 * np.abs(B).max()):
        raise DomainError("B must be a symmetric 2x2 matrix")
    if not (B[0, 0] > 0 and np.linalg.det(B) > 0):
        raise DomainError("B is not positive definite")
    if not c > 0:
        raise DomainError("c must be positive")
    n, p = params.n, params.p
    q = params.q
    delta = float(q @ B @ q)
    c2 = c * c
    lam_v1 = n * delta / (2.0 * c2 * c2)
    lam_h = p / c2 - delta / (2.0 * c2 * c2)
    scalar = (2.0 * n / c2) * (p - delta / (4.0 * c2))
    return np.array([lam_v1, 0.0, lam_h]), scalar


def log_grid(lo: float, hi: float, npoints: int = GRID_POINTS, clip: float = ENDPOINT_CLIP) -> np.ndarray:
    """Log-spaced points in [lo, hi] pulled a relative ``clip`` inside both ends."""
    if not 0 < lo < hi:
        raise DomainError(f"need 0 < lo < hi, got ({lo}, {hi})")
    return np.geomspace(lo * (1.0 + clip), hi * (1.0 - clip), npoints)


# -- residuals ---------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    grid: list[float]
    res_hh: list[float]
    res_ba: list[float]
    res_se: list[float]
    max_abs: float
    structural: list[float] = field(default_factory=list)

    def passed(self, tol: float) -> bool:
        return not self.structural and self.max_abs <= tol


def _equations(sample: ProfileSample, params: ModelParams, literal: bool = False) -> tuple[float, float, float]:
    n, p, eps = params.n, params.p, params.eps
    a, da, dda = sample.alpha
    b, db, ddb = sample.beta
    B, dB, ddB = sample.B
    q = params.q
    r = db / b
    ups = np.linalg.det(dB)
    hh = n * a * (-ddb / b + 0.5 * r * r) - n * da * r / 2.0 - dda / 2.0 + ups / 2.0 - eps
    if literal:
        Binv = np.linalg.inv(B)
        Phi = dB @ Binv
        dPhi = ddB @ Binv - dB @ Binv @ dB @ Binv
        curv = a / 2.0 * (-n * r * Phi - dPhi) - da / 2.0 * Phi
    else:
        # B^-1 = N / (alpha Delta) with N = alpha q q^T + V V^T, V = (U2, -U1);
        # the 1/alpha parts of alpha Phi'/2 and alpha' Phi/2 cancel identically,
        # which keeps the residual well conditioned next to a collapse root
        d, dd = sample.delta[0], sample.delta[1]
        V = np.array([sample.U2[0], -sample.U1[0]])
        dV = np.array([sample.U2[1], -sample.U1[1]])
        N = a * np.outer(q, q) + np.outer(V, V)
        dN = da * np.outer(q, q) + np.outer(dV, V) + np.outer(V, dV)
        BN = dB @ N
        curv = -(ddB @ N + dB @ dN) / (2.0 * d) + BN * dd / (2.0 * d * d) - n * r * BN / (2.0 * d)
    se = curv + n / (2.0 * b * b) * np.outer(sample.U, q) - eps * np.eye(2)
    ba = (
        a / 2.0 * (-ddb / b - (n - 1) * r * r)
        - da * r / 2.0
        + p / b
        - sample.delta[0] / (2.0 * b * b)
        - eps
    )
    return float(hh), float(np.abs(se).max()), float(ba)


def _fd_sample(params: ModelParams, coeffs: SolutionCoefficients, s: float) -> ProfileSample:
    """ProfileSample whose derivatives come from finite differences of values only."""

    def values(x):
        smp = eval_profile(params, coeffs, x, order=0)
        return np.concatenate(
            [[smp.alpha[0], smp.beta[0], smp.delta[0], smp.U1[0], smp.U2[0]], smp.B[0].ravel()]
        )

    jet = fd_jet(values, s, 1e-3 * s)
    return ProfileSample(
        s=s,
        alpha=jet[:, 0],
        beta=jet[:, 1],
        delta=jet[:, 2],
        U1=jet[:, 3],
        U2=jet[:, 4],
        B=jet[:, 5:].reshape(3, 2, 2),
    )


def einstein_residual(
    params: ModelParams,
    coeffs: SolutionCoefficients,
    grid,
    derivatives: str = "analytic",
) -> ResidualReport:
    """Evaluate hh, se, ba on ``grid``.

    ``derivatives="fd"`` replaces the analytic jets by Richardson-extrapolated
    central differences of the closed-form values and evaluates se with an
    explicit inverse of B (oracle mode).  Its step is 1e-3 s, so oracle grids
    should stay a few multiples of that away from the collapse roots.
    """
    if derivatives not in ("analytic", "fd"):
        raise ValueError("derivatives must be 'analytic' or 'fd'")
    grid = [float(s) for s in grid]
    hh_l, se_l, ba_l, bad = [], [], [], []
    good_grid = []
    for s in grid:
        sample = eval_profile(params, coeffs, s, order=2)
        B0 = sample.B[0]
        if not (np.all(np.isfinite(B0)) and B0[0, 0] > 0 and np.linalg.det(B0) > 0):
            bad.append(s)
            continue
        if derivatives == "fd":
            sample = _fd_sample(params, coeffs, s)
        hh, se, ba = _equations(sample, params, literal=derivatives == "fd")
        good_grid.append(s)
        hh_l.append(hh)
        se_l.append(se)
        ba_l.append(ba)
    mags = [abs(v) for v in hh_l + ba_l] + se_l
    max_abs = max(mags) if mags else math.inf
    return ResidualReport(good_grid, hh_l, ba_l, se_l, max_abs, bad)


# -- boundary conditions -----------------------------------------------------


@dataclass(frozen=True)
class CollapseReport:
    end: End
    s_end: float
    alpha_at_end: float
    U_at_end: float
    slope: float
    tol: float
    passed: bool


def collapse_check(
    params: ModelParams,
    coeffs: SolutionCoefficients,
    end: End | str,
    s_end: float,
    tol: float = 1e-9,
) -> CollapseReport:
    """Smooth-collapse conditions at a root of alpha.

    At the left end the circle in direction e_1 collapses: alpha = U1 = 0 and
    d/dt sqrt(b11) = |q2| alpha' / (2 sqrt(Delta)) = 1.  At the right end e_2
    collapses: alpha = U2 = 0 and |q1| alpha' / (2 sqrt(Delta)) = -1.

    alpha and U are compared with tol times their natural size at s_end
    (|alpha'| s_end and sqrt(Delta)), so the test is scale free.
    """
    end = End(end)
    if not s_end > 0:
        raise DomainError("s_end must be positive")
    prof = profile_functions(params, coeffs)
    delta = prof.delta(s_end)
    if not delta > 0:
        raise DegenerateFiberError(f"Delta(s_end) = {delta!r} <= 0")
    a = prof.alpha(s_end)
    da = prof.alpha.jet(s_end, 1)[1]
    if end is End.LEFT:
        u, qabs, target = prof.U1(s_end), abs(params.q2), 1.0
    else:
        u, qabs, target = prof.U2(s_end), abs(params.q1), -1.0
    slope = qabs * da / (2.0 * math.sqrt(delta))
    a_scale = abs(da) * s_end
    u_scale = math.sqrt(delta)
    ok = (
        abs(a) <= tol * a_scale
        and abs(u) <= tol * u_scale
        and abs(slope - target) <= tol
    )
    return CollapseReport(end, float(s_end), float(a), float(u), float(slope), tol, bool(ok))


# -- interior positivity -----------------------------------------------------


@dataclass(frozen=True)
class DomainScanReport:
    grid: list[float]
    alpha_positive: bool
    delta_positive: bool
    spd: bool
    f_below_c2: bool | None
    failures: list[tuple[float, str]]

    @property
    def passed(self) -> bool:
        return not self.failures


def domain_scan(
    params: ModelParams,
    coeffs: SolutionCoefficients,
    interval: tuple[float, float],
    npoints: int = GRID_POINTS,
    clip: float = ENDPOINT_CLIP,
) -> DomainScanReport:
    """Check alpha > 0, Delta > 0, B positive definite on a log grid.

    For positive Einstein constant also check F(z) < c2 < 0 where
    F(z) = 4 z^(n+2) - 2p/(kappa(n+1)) z^(n+1) - c1 z.
    """
    lo, hi = interval
    grid = log_grid(lo, hi, npoints, clip)
    prof = profile_functions(params, coeffs)
    n, p, k = params.n, params.p, coeffs.kappa
    positive = params.eps > 0
    failures: list[tuple[float, str]] = []
    flags = {"alpha": True, "delta": True, "spd": True, "F": True}
    if positive and not coeffs.c2 < 0:
        flags["F"] = False
        failures.append((float("nan"), "c2 >= 0"))
    for s in grid:
        s = float(s)
        a, d = prof.alpha(s), prof.delta(s)
        if not a > 0:
            flags["alpha"] = False
            failures.append((s, "alpha <= 0"))
        if not d > 0:
            flags["delta"] = False
            failures.append((s, "Delta <= 0"))
        else:
            u1, u2 = prof.U1(s), prof.U2(s)
            b11 = (u1 * u1 + params.q2**2 * a) / d
            b12 = (u1 * u2 - params.q1 * params.q2 * a) / d
            b22 = (u2 * u2 + params.q1**2 * a) / d
            if not (b11 > 0 and b11 * b22 - b12 * b12 > 0):
                flags["spd"] = False
                failures.append((s, "B not positive definite"))
        if positive:
            F = 4.0 * s ** (n + 2) - 2.0 * p / (k * (n + 1)) * s ** (n + 1) - coeffs.c1 * s
            if not F < coeffs.c2:
                flags["F"] = False
                failures.append((s, "F(s) >= c2"))
    return DomainScanReport(
        [float(s) for s in grid],
        flags["alpha"],
        flags["delta"],
        flags["spd"],
        flags["F"] if positive else None,
        failures,
    )


# -- derivative oracle -------------------------------------------------------


def fd_jet(f, s: float, h: float) -> np.ndarray:
    """[f, f', f''] at s from central differences, one Richardson step.

    ``f`` may return a scalar or a 1-d array; the result has shape (3, ...).
    """

    def central(step):
        fp, fm, f0 = np.asarray(f(s + step)), np.asarray(f(s - step)), np.asarray(f(s))
        return f0, (fp - fm) / (2.0 * step), (fp - 2.0 * f0 + fm) / (step * step)

    f0, d1h, d2h = central(h)
    _, d1h2, d2h2 = central(h / 2.0)
    d1 = (4.0 * d1h2 - d1h) / 3.0
    d2 = (4.0 * d2h2 - d2h) / 3.0
    return np.stack([f0, d1, d2])


@dataclass(frozen=True)
class DerivativeReport:
    points: list[float]
    max_rel_err: float

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_rel_err <= tol


def derivative_check(params: ModelParams, coeffs: SolutionCoefficients, points) -> DerivativeReport:
    """Compare analytic first and second derivatives of alpha, Delta, U and B
    with finite differences of the values.

    The error of the j-th derivative of f is measured relative to
    max(|f^(j)|, |f| / s^j, |f'| / s^(j-1)), the natural size of that derivative.
    """
    worst = 0.0
    pts = [float(s) for s in points]
    for s in pts:
        smp = eval_profile(params, coeffs, s, order=2)
        exact = np.column_stack(
            [smp.alpha, smp.delta, smp.U1, smp.U2, smp.B.reshape(3, 4)]
        )

        def values(x):
            v = eval_profile(params, coeffs, x, order=0)
            return np.concatenate([[v.alpha[0], v.delta[0], v.U1[0], v.U2[0]], v.B[0].ravel()])

        approx = fd_jet(values, s, 1e-3 * s)
        for j in (1, 2):
            scale = np.maximum.reduce(
                [np.abs(exact[j]), np.abs(exact[0]) / s**j, np.abs(exact[1]) / s ** (j - 1)]
            )
            scale = np.where(scale > 0, scale, 1.0)
            worst = max(worst, float(np.max(np.abs(approx[j] - exact[j]) / scale)))
    return DerivativeReport(pts, worst)
