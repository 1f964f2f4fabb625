"""Construction of complete families from their free data.

Non-positive Einstein constant: free data (s1, lambda) and the ratio of the
collapse slope fixes kappa.  Positive Einstein constant eps = 2n + 2: the two
collapse radii s1 = p x / (kappa (2n+2)), s2 = p y / (kappa (2n+2)) are fixed
by solving q1^2(x, y) = L1^2, q2^2(x, y) = L2^2 on

    Gamma = {0 < x < y < 1,  y^(n+1) - y^n > x^(n+1) - x^n}.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, root

from .errors import DomainError, PreconditionError, SolverError
from .profiles import Family, Kind, ModelParams, SolutionCoefficients, psi_consistency
from .verifier import End, collapse_check, domain_scan

__all__ = [
    "NegativeSpec",
    "PositiveSpec",
    "XYPoint",
    "LAMBDA_FLOOR",
    "solve_kappa",
    "kappa_ratio",
    "build_nonpositive",
    "a_polys",
    "q_squared",
    "in_gamma",
    "theta",
    "solve_xy",
    "kappa_from_xy",
    "build_positive",
]

LAMBDA_FLOOR = 1e-6


@dataclass(frozen=True)
class NegativeSpec:
    s1: float
    lam: float
    eps: float
    q1: int
    q2: int
    psi_sign: int = 1
    lam_floor: float = LAMBDA_FLOOR

    def __post_init__(self):
        if not self.s1 > 0:
            raise PreconditionError("s1 must be positive")
        if not self.eps <= 0:
            raise PreconditionError("eps must be <= 0 for the non-positive builder")
        if not self.lam_floor <= self.lam <= 1:
            raise PreconditionError(
                f"lambda must lie in [{self.lam_floor}, 1], got {self.lam!r}"
            )
        if int(self.q2) != self.q2 or self.q2 == 0 or int(self.q1) != self.q1:
            raise PreconditionError("q2 must be a nonzero integer and q1 an integer")
        if self.psi_sign not in (1, -1):
            raise PreconditionError("psi_sign must be +1 or -1")

    def params(self, n: int, p: int, vol_base: float | None = None) -> ModelParams:
        return ModelParams(n, p, int(self.q1), int(self.q2), self.eps, vol_base)


@dataclass(frozen=True)
class PositiveSpec:
    q1: int
    q2: int
    n: int
    p: int
    vol_base: float | None = None

    def __post_init__(self):
        if int(self.q1) != self.q1 or int(self.q2) != self.q2:
            raise PreconditionError("q1, q2 must be integers")
        if not abs(self.q1) > abs(self.q2) > 0:
            raise PreconditionError(f"need |q1| > |q2| > 0, got ({self.q1}, {self.q2})")

    @property
    def eps(self) -> float:
        return float(2 * self.n + 2)

    def params(self) -> ModelParams:
        return ModelParams(self.n, self.p, int(self.q1), int(self.q2), self.eps, self.vol_base)


@dataclass(frozen=True)
class XYPoint:
    x: float
    y: float
    region_ok: bool
    a: float = math.nan
    path: list[tuple[float, float, float]] = field(default_factory=list, compare=False, repr=False)


# -- non-positive families ---------------------------------------------------


def kappa_ratio(kappa: float, s1: float, lam: float, eps: float, n: int, p: int) -> float:
    """sqrt(2 lam p kappa^3 s1 / (n+1)) / (p (1 - lam/(n+1)) - eps kappa s1); increasing in kappa."""
    return math.sqrt(2.0 * lam * p * kappa**3 * s1 / (n + 1)) / (
        p * (1.0 - lam / (n + 1)) - eps * kappa * s1
    )


def _check_consistent(spec: NegativeSpec, params: ModelParams) -> None:
    if (params.q1, params.q2, params.eps) != (spec.q1, spec.q2, float(spec.eps)):
        raise PreconditionError("ModelParams (q1, q2, eps) disagree with the NegativeSpec")


def solve_kappa(spec: NegativeSpec, params: ModelParams) -> float:
    """The unique kappa > 0 at which the left collapse slope equals one.

    Bisection in log(kappa) on the monotone ratio, run until the bracket can
    no longer be split in floating point.
    """
    _check_consistent(spec, params)
    n, p = params.n, params.p
    target = abs(spec.q2)

    def g(k):
        return kappa_ratio(k, spec.s1, spec.lam, spec.eps, n, p) - target

    lo, hi = sys.float_info.epsilon, 1.0
    if g(lo) >= 0:
        raise SolverError("ratio already exceeds |q2| at the lower bracket", {"lo": lo})
    doublings = 0
    while g(hi) < 0:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > 2000 or not math.isfinite(hi):
            raise SolverError("kappa bracket expansion failed", {"hi": hi})
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    else:
        raise SolverError("kappa bisection did not converge", {"lo": lo, "hi": hi})
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


def build_nonpositive(
    spec: NegativeSpec, params: ModelParams, check: bool = True, scan_ratio: float = 1e6
) -> Family:
    """Family on [s1, infinity) for eps <= 0.

    lambda < 1 gives the generic two-parameter family (psi != 0); lambda = 1
    its psi = 0 limit with c2 = 0 and U1 identically zero.  With ``check``
    the psi identity, the left collapse conditions and positivity on
    [s1, scan_ratio * s1] are verified and a failure raises SolverError.
    """
    _check_consistent(spec, params)
    n, p, eps, q1, q2 = params.n, params.p, params.eps, params.q1, params.q2
    s1, lam = spec.s1, spec.lam
    k = solve_kappa(spec, params)
    kn = k**n
    c1 = 2.0 * eps / (n + 1) * s1 ** (n + 1) - 2.0 * p * lam / (k * (n + 1)) * s1**n
    if lam == 1.0:
        coeffs = SolutionCoefficients(
            Kind.PSI_ZERO, k, c1, 0.0, -q2 * kn * n * c1, q1 * kn * n * c1, 0.0
        )
    else:
        c2 = 2.0 * p * (lam - 1.0) / (k * (n + 1)) * s1 ** (n + 1)
        psi = spec.psi_sign * math.sqrt(
            8.0 / (n + 1) * p * p * k ** (2 * n + 1) * lam * (1.0 - lam)
            * s1 ** (2 * n + 1) * (p - eps * k * s1)
        )
        w1 = q2 * k ** (n - 1) * (k * c1 + 2.0 * p * s1**n - 2.0 * eps * k * s1 ** (n + 1))
        w2 = (psi - q1 * w1) / q2
        coeffs = SolutionCoefficients(Kind.GENERIC_PSI, k, c1, c2, w1, w2, psi)
    meta = {
        "builder": "nonpositive",
        "s1": s1,
        "lambda": lam,
        "psi_sign": spec.psi_sign,
    }
    fam = Family(params, coeffs, s1, None, meta)
    if check:
        _postcheck(fam, [End.LEFT], (s1, scan_ratio * s1))
    return fam


# -- positive families -------------------------------------------------------


def a_polys(x: float, y: float, n: int) -> list[float]:
    """A_m = sum_{i<=m} y^(m-i) x^i - sum_{j<m} y^(m-1-j) x^j for m = 0..n.

    A_n vanishes on an edge of the region and q^2 ~ 1/A_n there, so the sums
    are formed exactly from the binary inputs and rounded once whenever the
    floating-point difference has lost more than a few digits.
    """
    out = []
    for m in range(n + 1):
        plus = math.fsum(y ** (m - i) * x**i for i in range(m + 1))
        minus = math.fsum(y ** (m - 1 - j) * x**j for j in range(m))
        if abs(plus - minus) < 1e-3 * (plus + minus):
            return _a_polys_exact(x, y, n)
        out.append(plus - minus)
    return out


def _a_polys_exact(x: float, y: float, n: int) -> list[float]:
    X, Y = Fraction(x), Fraction(y)
    out = []
    prev = Fraction(0)  # sum_{j<m} y^(m-1-j) x^j
    for m in range(n + 1):
        cur = Y * prev + X**m
        out.append(float(cur - prev))
        prev = cur
    return out


def in_gamma(x: float, y: float, n: int) -> bool:
    return 0 < x < y < 1 and y ** (n + 1) - y**n > x ** (n + 1) - x**n


def _weighted(z: float, A: list[float], n: int) -> float:
    return math.fsum(z**i * A[n - i] for i in range(n + 1))


def q_squared(x: float, y: float, n: int, p: int) -> tuple[float, float]:
    """(q1^2, q2^2) as functions of the normalised collapse radii (x, y).

    q1^2 = (p/(n+1))^2 y(1-x) / (x^n A_n) * (sum_i x^i A_(n-i))^2
    q2^2 = (p/(n+1))^2 x(1-y) / (y^n A_n) * (sum_i y^i A_(n-i))^2

    Valid on Gamma and on its diagonal edge x = y; A_n <= 0 is rejected.
    """
    if not (0 < x <= y <= 1):
        raise DomainError(f"need 0 < x <= y <= 1, got ({x}, {y})")
    A = a_polys(x, y, n)
    if not A[n] > 0:
        raise DomainError(f"A_n = {A[n]!r} <= 0: (x, y) = ({x}, {y}) lies outside the region")
    pre = (p / (n + 1)) ** 2 / A[n]
    q1sq = pre * y * (1.0 - x) / x**n * _weighted(x, A, n) ** 2
    q2sq = pre * x * (1.0 - y) / y**n * _weighted(y, A, n) ** 2
    return q1sq, q2sq


def _an_on_line(tau: float, a: float, n: int) -> float:
    return a_polys(tau, tau + a, n)[n]


def _line_floor(a: float, n: int) -> float:
    """Largest tau in [0, 1-a) with A_n(tau, tau + a) = 0; q2^2 blows up there."""
    if a == 0.0:
        return n / (n + 1.0)
    top = 1.0 - a
    ts = np.linspace(top, 0.0, 401)
    prev = ts[0]
    for t in ts[1:]:
        t = float(t)
        if _an_on_line(t, a, n) <= 0:
            return brentq(_an_on_line, t, prev, args=(a, n), xtol=1e-300, rtol=4 * np.finfo(float).eps)
        prev = t
    return 0.0


def theta(L2: float, a: float, n: int, p: int) -> float:
    """Largest tau < 1 - a with q2^2(tau, tau + a) = L2^2."""
    if not 0 <= a < 1:
        raise DomainError("a must lie in [0, 1)")
    floor = _line_floor(a, n)
    top = 1.0 - a
    width = top - floor

    def f(tau):
        return math.log(q_squared(tau, tau + a, n, p)[1]) - 2.0 * math.log(L2)

    # q2^2 vanishes at tau = 1 - a and blows up at the floor; walk down from the top
    us = np.concatenate([np.linspace(1.0, 0.01, 100), np.geomspace(0.01, 1e-14, 60)[1:]])
    prev = None
    for u in us:
        tau = floor + width * float(u)
        if tau >= top:
            continue
        val = f(tau)
        if val >= 0:
            hi_tau = prev if prev is not None else top
            if prev is None:
                raise SolverError("q2^2 already exceeds L2^2 next to y = 1", {"a": a})
            return brentq(f, tau, hi_tau, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        prev = tau
    raise SolverError("no root of q2^2 = L2^2 on the line", {"a": a, "floor": floor})


def _outer(a: float, L1: float, L2: float, n: int, p: int) -> float:
    t = theta(L2, a, n, p)
    return math.log(q_squared(t, t + a, n, p)[0]) - 2.0 * math.log(L1)


def _newton_polish(x: float, y: float, L1: float, L2: float, n: int, p: int) -> tuple[float, float]:
    def res(v):
        try:
            q1sq, q2sq = q_squared(v[0], v[1], n, p)
        except DomainError:
            return [1e3, 1e3]
        return [math.log(q1sq) - 2 * math.log(L1), math.log(q2sq) - 2 * math.log(L2)]

    sol = root(res, [x, y], method="hybr", options={"xtol": 1e-15})
    return float(sol.x[0]), float(sol.x[1])


def _xy_residual(x, y, L1, L2, n, p) -> float:
    q1sq, q2sq = q_squared(x, y, n, p)
    return max(abs(q1sq / L1**2 - 1.0), abs(q2sq / L2**2 - 1.0))


def solve_xy(L1: int, L2: int, n: int, p: int, tol: float = 1e-9) -> XYPoint:
    """(x, y) in Gamma with q_squared(x, y) = (L1^2, L2^2).

    Two-level continuation: for each offset a the point (Theta(L2; a),
    Theta(L2; a) + a) satisfies q2^2 = L2^2; at a = 0 it also has
    q1^2 = L2^2 < L1^2 and q1^2 grows without bound as a -> 1, so a is
    increased from 0 until q1^2 crosses L1^2 and then refined by Brent's
    method.  A damped Newton step on the log-residuals is the fallback.
    """
    if not (int(L1) == L1 and int(L2) == L2 and L1 > L2 >= 1):
        raise PreconditionError(f"need integers L1 > L2 >= 1, got ({L1}, {L2})")
    L1, L2 = float(L1), float(L2)
    path: list[tuple[float, float, float]] = []
    a_grid = list(np.linspace(0.0, 0.9, 19)) + [1.0 - 0.1 * 2.0**-k for k in range(1, 40)]
    prev_a, prev_h = None, None
    bracket = None
    for a in a_grid:
        a = float(a)
        try:
            h = _outer(a, L1, L2, n, p)
        except (SolverError, DomainError):
            continue
        t = theta(L2, a, n, p)
        path.append((a, t, t + a))
        if h >= 0 and prev_a is not None:
            bracket = (prev_a, a)
            break
        prev_a, prev_h = a, h
    if bracket is not None:
        a_star = brentq(_outer, *bracket, args=(L1, L2, n, p), xtol=1e-16, rtol=4 * np.finfo(float).eps)
        x = theta(L2, a_star, n, p)
        y = x + a_star
    else:
        if not path:
            raise SolverError("continuation produced no valid points", {"L1": L1, "L2": L2})
        a_star, x, y = path[-1]
    if not (in_gamma(x, y, n) and _xy_residual(x, y, L1, L2, n, p) <= tol):
        x, y = _newton_polish(x, y, L1, L2, n, p)
        a_star = y - x
    resid = _xy_residual(x, y, L1, L2, n, p) if in_gamma(x, y, n) else math.inf
    if not resid <= tol:
        raise SolverError(
            "solve_xy did not reach tolerance",
            {"x": x, "y": y, "residual": resid, "path": path},
        )
    path.append((a_star, x, y))
    return XYPoint(x, y, in_gamma(x, y, n), a_star, path)


def kappa_from_xy(x: float, y: float, n: int, p: int) -> float:
    """Positive root of the kappa^2 formula in (x, y).

    Written with S = sum x^i y^(n-i) = (y^(n+1) - x^(n+1))/(y - x) and the
    weighted sums of A_m so no difference quotient is formed:
    kappa^2 = p^2 (y-x)^2 P_x^2 P_y^2 / ((n+1)^2 x^n y^n S A_n).
    """
    A = a_polys(x, y, n)
    S = math.fsum(x**i * y ** (n - i) for i in range(n + 1))
    px, py = _weighted(x, A, n), _weighted(y, A, n)
    k2 = p * p * (y - x) ** 2 * px * px * py * py / ((n + 1) ** 2 * x**n * y**n * S * A[n])
    return math.sqrt(k2)


def build_positive(spec: PositiveSpec, check: bool = True) -> Family:
    """Compact family on [s1, s2] with eps = 2n + 2 for |q1| > |q2| > 0."""
    params = spec.params()
    n, p, q1, q2 = params.n, params.p, params.q1, params.q2
    xy = solve_xy(abs(q1), abs(q2), n, p)
    x, y = xy.x, xy.y
    k = kappa_from_xy(x, y, n, p)
    s1 = p * x / (k * (2 * n + 2))
    s2 = p * y / (k * (2 * n + 2))
    # (s2^(n+2) - s1^(n+2)) / (s2 - s1) and its (n+1) analogue, summed termwise
    g2 = math.fsum(s1**i * s2 ** (n + 1 - i) for i in range(n + 2))
    g1 = math.fsum(s1**i * s2 ** (n - i) for i in range(n + 1))
    c1 = 4.0 * g2 - 2.0 * p / (k * (n + 1)) * g1
    c2 = s1 * s2 / (s1 - s2) * (
        4.0 * (s2 ** (n + 1) - s1 ** (n + 1)) - 2.0 * p / (k * (n + 1)) * (s2**n - s1**n)
    )
    kn1 = k ** (n - 1)
    w1 = q2 * kn1 * (k * c1 + 2.0 * p * s1**n - (4 * n + 4) * k * s1 ** (n + 1))
    w2 = -q1 * kn1 * (k * c1 + 2.0 * p * s2**n - (4 * n + 4) * k * s2 ** (n + 1))
    psi = q1 * w1 + q2 * w2
    coeffs = SolutionCoefficients(Kind.GENERIC_PSI, k, c1, c2, w1, w2, psi)
    meta = {"builder": "positive", "x": x, "y": y, "a": xy.a}
    fam = Family(params, coeffs, s1, s2, meta)
    if check:
        if not 0 < s1 < s2 < p / (k * (2 * n + 2)):
            raise SolverError("collapse radii out of order", {"s1": s1, "s2": s2})
        _postcheck(fam, [End.LEFT, End.RIGHT], (s1, s2))
    return fam


def _postcheck(fam: Family, ends: list[End], interval: tuple[float, float]) -> None:
    params, coeffs = fam.params, fam.coeffs
    problems: dict[str, object] = {}
    if coeffs.kind is Kind.GENERIC_PSI:
        r = psi_consistency(params, coeffs)
        if abs(r) > 1e-9 * coeffs.psi**2:
            problems["psi_consistency"] = r
    for end in ends:
        s_end = fam.s1 if end is End.LEFT else fam.s2
        rep = collapse_check(params, coeffs, end, s_end)
        if not rep.passed:
            problems[f"collapse_{end.value}"] = rep
    scan = domain_scan(params, coeffs, interval)
    if not scan.passed:
        problems["domain_scan"] = scan.failures[:5]
    if problems:
        raise SolverError("built family failed its post-build checks", problems)
