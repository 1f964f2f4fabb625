"""Exact invariants of the 3-sphere bundles W_q over CP^2.

All arithmetic is over Python integers and ``fractions.Fraction``.  With
K = q1 q2 and L = q1^2 + q2^2 the total space is spin iff q1 + q2 is odd
(equivalently L odd), H^4 is cyclic of order |K|, and the Kreck-Stolz
invariants come from the relative characteristic numbers

    y^4 = 1/K,   y^2 p1 = (3 + L)/K,   p1^2 = (3 + L)^2/K,   sign = sgn K.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

from .errors import OutOfModelError, PreconditionError

__all__ = [
    "BundleCharge",
    "KSInvariants",
    "Verdict",
    "Mode",
    "PairKind",
    "normal_form",
    "char_classes",
    "rel_numbers",
    "kreck_stolz",
    "classify",
    "example_pairs",
    "frac_mod1",
]


@dataclass(frozen=True)
class BundleCharge:
    q1: int
    q2: int

    def __post_init__(self):
        if int(self.q1) != self.q1 or int(self.q2) != self.q2:
            raise PreconditionError("bundle charges must be integers")
        object.__setattr__(self, "q1", int(self.q1))
        object.__setattr__(self, "q2", int(self.q2))
        if self.q1 == 0 and self.q2 == 0:
            raise PreconditionError("(q1, q2) must not both vanish")

    @classmethod
    def of(cls, q) -> "BundleCharge":
        if isinstance(q, BundleCharge):
            return q
        q1, q2 = q
        return cls(q1, q2)

    @property
    def q0(self) -> int:
        return gcd(self.q1, self.q2)

    @property
    def K(self) -> int:
        return self.q1 * self.q2

    @property
    def L(self) -> int:
        return self.q1 * self.q1 + self.q2 * self.q2

    @property
    def spin(self) -> bool:
        return (self.q1 + self.q2) % 2 == 1

    def __str__(self) -> str:
        return f"({self.q1},{self.q2})"


def frac_mod1(x: Fraction) -> Fraction:
    """Representative of x mod 1 in [0, 1); Fraction keeps the denominator positive."""
    return x - (x.numerator // x.denominator)


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, u, v) with a u + b v = g = gcd(a, b) >= 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_u, u = u, old_u - quo * u
        old_v, v = v, old_v - quo * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def normal_form(q) -> tuple[int, list[list[int]]]:
    """q0 = gcd(q1, q2) and A in SL(2, Z) whose first column is q / q0.

    A = [[q1/q0, -r2], [q2/q0, r1]] with q1 r1 + q2 r2 = q0, so A^-1 sends
    (q1, q2) to (q0, 0) and P_q is P_(q0, 0) after the change of torus basis.
    """
    q = BundleCharge.of(q)
    q0, r1, r2 = _egcd(q.q1, q.q2)
    A = [[q.q1 // q0, -r2], [q.q2 // q0, r1]]
    assert A[0][0] * A[1][1] - A[0][1] * A[1][0] == 1
    return q0, A


def _require_finite_h4(q: BundleCharge) -> None:
    if q.K == 0:
        raise OutOfModelError(f"q1 q2 = 0 for q = {q}: H^4 is not finite")


def char_classes(q) -> dict:
    """Characteristic data of the total space over CP^2, as coefficients of a or a^2."""
    q = BundleCharge.of(q)
    _require_finite_h4(q)
    return {
        "c1": q.q1 + q.q2,
        "euler": q.K,
        "w2": (1 + q.q1 + q.q2) % 2,
        "spin": q.spin,
        "p1": 3 + q.L,
        "h4_order": abs(q.K),
    }


def rel_numbers(q) -> dict:
    """Relative characteristic numbers of the disc bundle bounding W_q."""
    q = BundleCharge.of(q)
    _require_finite_h4(q)
    K, L = q.K, q.L
    return {
        "y4": Fraction(1, K),
        "y2p1": Fraction(3 + L, K),
        "p1sq": Fraction((3 + L) ** 2, K),
        "sign": 1 if K > 0 else -1,
    }


@dataclass(frozen=True)
class KSInvariants:
    s1: Fraction
    s2: Fraction
    s3: Fraction
    spin: bool
    order_h4: int

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.s1, self.s2, self.s3)


def kreck_stolz(q) -> KSInvariants:
    q = BundleCharge.of(q)
    _require_finite_h4(q)
    K, L = q.K, q.L
    sgn = 1 if K > 0 else -1
    if q.spin:
        s1 = Fraction((3 + L) ** 2, 896 * K) - Fraction(sgn, 224)
        s2 = Fraction(-(1 + L), 48 * K)
        s3 = Fraction(5 - L, 12 * K)
    else:
        s1 = (
            Fraction(1, 384 * K)
            - Fraction(3 + L, 192 * K)
            + Fraction((3 + L) ** 2, 896 * K)
            - Fraction(sgn, 224)
        )
        s2 = Fraction(2 - L, 24 * K)
        s3 = Fraction(10 - L, 8 * K)
    return KSInvariants(frac_mod1(s1), frac_mod1(s2), frac_mod1(s3), q.spin, abs(K))


class Mode(str, enum.Enum):
    INVARIANTS = "invariants"
    CONGRUENCES = "congruences"


@dataclass(frozen=True)
class Verdict:
    homeomorphic: bool
    diffeomorphic: bool
    comparable: bool = True
    witness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.diffeomorphic and not self.homeomorphic:
            raise AssertionError("diffeomorphic verdict without homeomorphism")


def _mu(L: int) -> int:
    """0 for L odd (spin), 1 for L even."""
    return 1 - L % 2


def _invariants_verdict(q: BundleCharge, qh: BundleCharge) -> Verdict:
    a, b = kreck_stolz(q), kreck_stolz(qh)
    diffs = [frac_mod1(x - y) for x, y in zip(a.as_tuple(), b.as_tuple())]
    d28 = frac_mod1(28 * (a.s1 - b.s1))
    homeo = d28 == 0 and diffs[1] == 0 and diffs[2] == 0
    diffeo = homeo and diffs[0] == 0
    witness = {
        "ks": [str(x) for x in a.as_tuple()],
        "ks_hat": [str(x) for x in b.as_tuple()],
        "differences_mod1": [str(d) for d in diffs],
        "28_s1_difference_mod1": str(d28),
    }
    return Verdict(homeo, diffeo, True, witness)


def _congruence_verdict(q: BundleCharge, qh: BundleCharge) -> Verdict:
    K, Kh = q.K, qh.K
    if K == -Kh and K != Kh:
        ok = abs(K) == 1
        return Verdict(ok, ok, True, {"case": "K = -K_hat", "abs_K_is_1": ok})
    L, Lh = q.L, qh.L
    mu = _mu(L)
    m_homeo = 2 ** (4 - mu) * 3 * abs(K)
    m_diffeo = 2**5 * 3**mu * 7 * abs(K)

    def lhs(x):
        return x + 3 ** _mu(x) * ((x + 1) // 2) ** 2

    homeo = (L - Lh) % m_homeo == 0
    diffeo = homeo and (lhs(L) - lhs(Lh)) % m_diffeo == 0
    witness = {
        "case": "K = K_hat",
        "homeo_modulus": m_homeo,
        "L_difference": L - Lh,
        "diffeo_modulus": m_diffeo,
        "diffeo_difference": lhs(L) - lhs(Lh),
    }
    return Verdict(homeo, diffeo, True, witness)


def classify(q, qhat, mode: Mode | str = Mode.INVARIANTS) -> Verdict:
    """Homeomorphism and diffeomorphism of W_q and W_qhat.

    Necessary gates: |K| = |K_hat| and equal spin type.  Inputs with
    q1 q2 = 0 yield a verdict with comparable = False.
    """
    mode = Mode(mode)
    try:
        q, qh = BundleCharge.of(q), BundleCharge.of(qhat)
        _require_finite_h4(q)
        _require_finite_h4(qh)
    except (OutOfModelError, PreconditionError) as exc:
        return Verdict(False, False, False, {"reason": str(exc)})
    if abs(q.K) != abs(qh.K):
        return Verdict(False, False, True, {"gate": "|H^4| differs", "orders": [abs(q.K), abs(qh.K)]})
    if q.spin != qh.spin:
        return Verdict(False, False, True, {"gate": "spin type differs"})
    if mode is Mode.INVARIANTS:
        return _invariants_verdict(q, qh)
    return _congruence_verdict(q, qh)


class PairKind(str, enum.Enum):
    SPIN = "spin"
    NONSPIN = "nonspin"


def example_pairs(kind: PairKind | str, s_range, mode: Mode | str = Mode.INVARIANTS) -> list:
    """The families of pairs with equal K parametrised by s.

    spin:    r = 48 s + 1, W_(1, r(r+1)) against W_(r, r+1)
    nonspin: r = 24 s + 1, W_(2, 2r(r+1)) against W_(2r, 2(r+1))
    """
    kind = PairKind(kind)
    out = []
    for s in s_range:
        s = int(s)
        if kind is PairKind.SPIN:
            r = 48 * s + 1
            pair = ((1, r * (r + 1)), (r, r + 1))
        else:
            r = 24 * s + 1
            pair = ((2, 2 * r * (r + 1)), (2 * r, 2 * (r + 1)))
        out.append((s, pair, classify(pair[0], pair[1], mode)))
    return out
