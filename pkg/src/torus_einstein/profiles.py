"""Closed-form metric profiles on the radial interval.

Every profile function of the cohomogeneity-one ansatz is a finite sum of
power laws ``c * s**k`` over the basis {s^2, s, s^(1-n), s^(-n)}, so values and
derivatives are evaluated term by term.  The torus block ``B`` is then
recovered from (alpha, Delta, U1, U2) by

    b11 = (U1^2 + q2^2 alpha) / Delta
    b12 = (U1 U2 - q1 q2 alpha) / Delta
    b22 = (U2^2 + q1^2 alpha) / Delta

with derivatives propagated by the quotient rule.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.integrate import quad

from .errors import (
    DegenerateFiberError,
    DomainError,
    InconsistentCoefficientsError,
    PreconditionError,
)

__all__ = [
    "Kind",
    "ModelParams",
    "SolutionCoefficients",
    "PowerSum",
    "Profile",
    "ProfileSample",
    "Family",
    "default_vol_base",
    "profile_functions",
    "eval_profile",
    "b_matrix",
    "psi_consistency",
    "t_of_s",
]


class Kind(str, enum.Enum):
    GENERIC_PSI = "GenericPsi"
    PSI_ZERO = "PsiZero"


def default_vol_base(n: int, p: int) -> float:
    """Volume of the base used when the caller supplies none.

    For p = n + 1 this is CP^n with the Kaehler-Einstein metric normalised to
    Ric = p h, i.e. twice Fubini-Study, of volume (2 pi)^n / n!.  For n = 1 that
    is 2 pi, the area of the round 2-sphere with Ric = 2h.  Other (n, p) fall
    back to 1.0; volume ratios never depend on this number.
    """
    if p == n + 1:
        return (2.0 * math.pi) ** n / math.factorial(n)
    return 1.0


@dataclass(frozen=True)
class ModelParams:
    n: int
    p: int
    q1: int
    q2: int
    eps: float
    vol_base: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError(f"n must be a positive integer, got {self.n!r}")
        if int(self.p) != self.p or self.p < 1:
            raise PreconditionError(f"p must be a positive integer, got {self.p!r}")
        if int(self.q1) != self.q1 or int(self.q2) != self.q2:
            raise PreconditionError("q1, q2 must be integers")
        if self.q1 == 0 and self.q2 == 0:
            raise PreconditionError("(q1, q2) must not both vanish")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q1", int(self.q1))
        object.__setattr__(self, "q2", int(self.q2))
        object.__setattr__(self, "eps", float(self.eps))
        vb = default_vol_base(self.n, self.p) if self.vol_base is None else float(self.vol_base)
        if not vb > 0:
            raise PreconditionError("vol_base must be positive")
        object.__setattr__(self, "vol_base", vb)

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q1, self.q2], dtype=float)

    @property
    def volume_constant(self) -> float:
        """C = 4 pi^2 Vol_h(V), the torus-times-base volume factor."""
        return 4.0 * math.pi**2 * self.vol_base


@dataclass(frozen=True)
class SolutionCoefficients:
    kind: Kind
    kappa: float
    c1: float
    c2: float
    w1: float
    w2: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("kappa", "c1", "c2", "w1", "w2", "psi"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.kappa > 0:
            raise InconsistentCoefficientsError("kappa must be positive")


@dataclass(frozen=True)
class PowerSum:
    """``sum(c * s**k for k, c in terms)`` with exact termwise derivatives."""

    terms: tuple[tuple[float, float], ...]

    @classmethod
    def of(cls, *pairs: tuple[float, float]) -> "PowerSum":
        merged: dict[float, float] = {}
        for k, c in pairs:
            merged[float(k)] = merged.get(float(k), 0.0) + float(c)
        return cls(tuple(sorted(merged.items(), reverse=True)))

    def coefficient(self, k: float) -> float:
        for kk, c in self.terms:
            if kk == k:
                return c
        return 0.0

    def __call__(self, s: float) -> float:
        return math.fsum(c * s**k for k, c in self.terms)

    def jet(self, s: float, order: int = 2) -> np.ndarray:
        out = np.zeros(order + 1)
        for k, c in self.terms:
            fall = 1.0
            for j in range(order + 1):
                out[j] += c * fall * s ** (k - j)
                fall *= k - j
        return out

    def increment(self, s0: float, h: float) -> float:
        """f(s0 + h) - f(s0) without cancellation for small |h|."""
        r = math.log1p(h / s0)
        return math.fsum(c * s0**k * math.expm1(k * r) for k, c in self.terms)

    def scaled(self, factor: float) -> "PowerSum":
        return PowerSum(tuple((k, factor * c) for k, c in self.terms))

    def without(self, k: float) -> "PowerSum":
        return PowerSum(tuple((kk, c) for kk, c in self.terms if kk != k))


@dataclass(frozen=True)
class Profile:
    """The four independent profile functions of a solution (beta = kappa s)."""

    alpha: PowerSum
    delta: PowerSum
    U1: PowerSum
    U2: PowerSum
    kappa: float


@lru_cache(maxsize=1024)
def profile_functions(params: ModelParams, coeffs: SolutionCoefficients) -> Profile:
    n, p, q1, q2, eps = params.n, params.p, params.q1, params.q2, params.eps
    k, c1, c2, w1, w2, psi = (
        coeffs.kappa, coeffs.c1, coeffs.c2, coeffs.w1, coeffs.w2, coeffs.psi,
    )
    alpha = PowerSum.of(
        (2, -2.0 * eps / (n + 1)),
        (1, 2.0 * p / (k * (n + 1))),
        (1 - n, c1),
        (-n, c2),
    )
    delta = PowerSum.of((1, 2.0 * p * k / (n + 1)), (-n, k**2 * c2))
    if coeffs.kind is Kind.GENERIC_PSI:
        if psi == 0.0:
            raise InconsistentCoefficientsError("GenericPsi coefficients need psi != 0")
        kn = k**n
        lin = 2.0 * k / (psi * (n + 1))
        U1 = PowerSum.of(
            (1, lin * (p * w1 + n * p * q2 * kn * c1 + q2 * eps * kn * k * c2 * (n + 1))),
            (-n, k**2 * c2 / psi * (w1 - q2 * kn * c1)),
        )
        U2 = PowerSum.of(
            (1, lin * (p * w2 - n * p * q1 * kn * c1 - q1 * eps * kn * k * c2 * (n + 1))),
            (-n, k**2 * c2 / psi * (w2 + q1 * kn * c1)),
        )
    else:
        if q2 == 0:
            raise InconsistentCoefficientsError("PsiZero family requires q2 != 0")
        U1 = PowerSum.of()
        U2 = delta.scaled(1.0 / q2)
    return Profile(alpha=alpha, delta=delta, U1=U1, U2=U2, kappa=k)


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[0] = a[0] * b[0]
    if len(a) > 1:
        out[1] = a[1] * b[0] + a[0] * b[1]
    if len(a) > 2:
        out[2] = a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2]
    return out


def _div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.empty_like(num)
    out[0] = num[0] / den[0]
    if len(num) > 1:
        out[1] = (num[1] - out[0] * den[1]) / den[0]
    if len(num) > 2:
        out[2] = (num[2] - 2.0 * out[1] * den[1] - out[0] * den[2]) / den[0]
    return out


@dataclass(frozen=True)
class ProfileSample:
    """Profile values at one radius.

    Each scalar field is an array ``[f, f', f'']`` truncated to the requested
    order; ``B`` has shape ``(order + 1, 2, 2)`` and is NaN where Delta <= 0.
    """

    s: float
    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    B: np.ndarray = field(repr=False)

    @property
    def U(self) -> np.ndarray:
        return np.array([self.U1[0], self.U2[0]])


def _b_jets(q1: int, q2: int, alpha, delta, U1, U2) -> np.ndarray:
    order = len(alpha) - 1
    B = np.empty((order + 1, 2, 2))
    b11 = _div(_mul(U1, U1) + q2 * q2 * alpha, delta)
    b12 = _div(_mul(U1, U2) - q1 * q2 * alpha, delta)
    b22 = _div(_mul(U2, U2) + q1 * q1 * alpha, delta)
    B[:, 0, 0] = b11
    B[:, 0, 1] = B[:, 1, 0] = b12
    B[:, 1, 1] = b22
    return B


def eval_profile(
    params: ModelParams, coeffs: SolutionCoefficients, s: float, order: int = 2
) -> ProfileSample:
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    s = float(s)
    if not s > 0:
        raise DomainError(f"radial coordinate must be positive, got s={s}")
    prof = profile_functions(params, coeffs)
    alpha = prof.alpha.jet(s, order)
    delta = prof.delta.jet(s, order)
    U1 = prof.U1.jet(s, order)
    U2 = prof.U2.jet(s, order)
    beta = np.array([coeffs.kappa * s, coeffs.kappa, 0.0][: order + 1])
    if delta[0] > 0:
        B = _b_jets(params.q1, params.q2, alpha, delta, U1, U2)
    else:
        B = np.full((order + 1, 2, 2), np.nan)
    return ProfileSample(s=s, alpha=alpha, beta=beta, delta=delta, U1=U1, U2=U2, B=B)


def b_matrix(
    params: ModelParams, coeffs: SolutionCoefficients, s: float
) -> tuple[np.ndarray, bool]:
    """The 2x2 torus block at ``s`` and whether it is positive definite."""
    prof = profile_functions(params, coeffs)
    delta = prof.delta(s)
    if not delta > 0:
        raise DegenerateFiberError(f"Delta(s) = {delta!r} <= 0 at s = {s!r}")
    a, u1, u2 = prof.alpha(s), prof.U1(s), prof.U2(s)
    q1, q2 = params.q1, params.q2
    B = np.array(
        [
            [(u1 * u1 + q2 * q2 * a) / delta, (u1 * u2 - q1 * q2 * a) / delta],
            [(u1 * u2 - q1 * q2 * a) / delta, (u2 * u2 + q1 * q1 * a) / delta],
        ]
    )
    det = B[0, 0] * B[1, 1] - B[0, 1] ** 2
    return B, bool(B[0, 0] > 0 and det > 0)


def psi_consistency(params: ModelParams, coeffs: SolutionCoefficients) -> float:
    """psi^2 - 2(n+1) kappa^(2n+3) c2 (p c1 + c2 eps kappa); zero for valid data."""
    if coeffs.kind is not Kind.GENERIC_PSI:
        raise PreconditionError("psi consistency applies to GenericPsi coefficients only")
    n, p, eps = params.n, params.p, params.eps
    k, c1, c2 = coeffs.kappa, coeffs.c1, coeffs.c2
    return coeffs.psi**2 - 2.0 * (n + 1) * k ** (2 * n + 3) * c2 * (p * c1 + c2 * eps * k)


@dataclass(frozen=True)
class Family:
    """A built solution: coefficients plus its radial domain [s1, s2] (s2=None: infinite)."""

    params: ModelParams
    coeffs: SolutionCoefficients
    s1: float
    s2: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    @property
    def compact(self) -> bool:
        return self.s2 is not None

    @property
    def profile(self) -> Profile:
        return profile_functions(self.params, self.coeffs)

    def sample(self, s: float, order: int = 2) -> ProfileSample:
        return eval_profile(self.params, self.coeffs, s, order)

    def t_of_s(self, s: float) -> float:
        return t_of_s(self.params, self.coeffs, s, self.s1, self.s2)


def _positive(value: float, where: float) -> float:
    if not value > 0:
        raise DomainError(f"alpha <= 0 at s = {where!r} inside the integration interval")
    return value


def _root_piece(alpha: PowerSum, root: float, width: float, sign: int, epsrel: float) -> float:
    """Integral of alpha^(-1/2) over [root, root + sign*width] with tau = root + sign u^2."""
    if width <= 0:
        return 0.0
    slope = abs(alpha.jet(root, 1)[1])

    def integrand(u):
        if u == 0.0:
            return 2.0 / math.sqrt(slope)
        h = sign * u * u
        # alpha(root) == 0 by construction; only the increment is evaluated
        a = alpha.increment(root, h)
        return 2.0 * u / math.sqrt(_positive(a, root + h))

    val, _ = quad(integrand, 0.0, math.sqrt(width), epsabs=0.0, epsrel=epsrel, limit=200)
    return val


def t_of_s(
    params: ModelParams,
    coeffs: SolutionCoefficients,
    s: float,
    s1: float,
    s2: float | None = None,
    epsrel: float = 1e-12,
) -> float:
    """Geodesic distance t(s) = int_{s1}^{s} alpha^(-1/2) from the collapsing orbit.

    The simple root of alpha at s1 (and at s2 for compact families) is removed
    by the substitution tau = s1 + u^2 (tau = s2 - u^2); the remaining smooth
    stretch is integrated in log(tau).
    """
    if s < s1:
        raise DomainError(f"s = {s} lies below the collapse radius s1 = {s1}")
    if s2 is not None and s > s2:
        raise DomainError(f"s = {s} lies beyond the collapse radius s2 = {s2}")
    if s == s1:
        return 0.0
    alpha = profile_functions(params, coeffs).alpha
    if s2 is None:
        mid = min(s, 2.0 * s1)
    else:
        mid = min(s, 0.5 * (s1 + s2))
    total = _root_piece(alpha, s1, mid - s1, +1, epsrel)
    if s <= mid:
        return total
    if s2 is not None:
        # the far half ends at the second root
        return total + _root_piece(alpha, s2, s2 - mid, -1, epsrel) - _root_piece(
            alpha, s2, s2 - s, -1, epsrel
        )

    def log_integrand(v):
        tau = math.exp(v)
        return tau / math.sqrt(_positive(alpha(tau), tau))

    val, _ = quad(
        log_integrand, math.log(mid), math.log(s), epsabs=0.0, epsrel=epsrel, limit=400
    )
    return total + val
