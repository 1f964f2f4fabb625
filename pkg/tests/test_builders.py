from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest

from conftest import negative, positive
from torus_einstein import (
    Kind,
    NegativeSpec,
    PositiveSpec,
    PreconditionError,
    DomainError,
    a_polys,
    build_nonpositive,
    build_positive,
    q_squared,
    solve_kappa,
    solve_xy,
)
from torus_einstein.builders import in_gamma, kappa_from_xy, kappa_ratio, theta
from torus_einstein.diagnostics import volume

# root of kappa^(3/2) = 3/2 + 4 kappa, from a 40-digit findroot
KAPPA_HALF_LAMBDA = 16.72551001636817729816130853321275443968


def _kappa(s1, lam, eps, q2=1, n=1, p=2):
    spec = NegativeSpec(s1, lam, eps, 0, q2)
    return solve_kappa(spec, spec.params(n, p))


def test_solve_kappa_named_root():
    assert _kappa(1.0, 0.5, -4.0) == pytest.approx(KAPPA_HALF_LAMBDA, rel=1e-14)


def test_solve_kappa_closed_form_ricci_flat_psi_zero():
    for n, p, s1, q2 in ((1, 2, 1.0, 1), (2, 3, 0.5, 2), (3, 1, 2.0, 3)):
        closed = (q2 * q2 * (n * p / (n + 1)) ** 2 * (n + 1) / (2 * p * s1)) ** (1 / 3)
        assert _kappa(s1, 1.0, 0.0, q2, n, p) == pytest.approx(closed, rel=1e-13)


@pytest.mark.parametrize("args", [(1.0, 0.5, -4.0, 1, 1, 2), (3.0, 0.1, 0.0, 2, 2, 3), (0.2, 0.9, -8.0, 5, 3, 4)])
def test_solve_kappa_defining_ratio(args):
    s1, lam, eps, q2, n, p = args
    k = _kappa(s1, lam, eps, q2, n, p)
    assert kappa_ratio(k, s1, lam, eps, n, p) == pytest.approx(q2, rel=1e-12)
    # strictly increasing across the final bracket
    lo, hi = k * (1 - 1e-9), k * (1 + 1e-9)
    assert kappa_ratio(lo, s1, lam, eps, n, p) < q2 < kappa_ratio(hi, s1, lam, eps, n, p)


def test_doubling_q2_increases_kappa():
    assert _kappa(1.0, 0.5, -4.0, 2) > _kappa(1.0, 0.5, -4.0, 1)
    assert _kappa(1.0, 0.5, 0.0, 2) > _kappa(1.0, 0.5, 0.0, 1)


def test_solve_kappa_rejects_mismatched_params():
    spec = NegativeSpec(1.0, 0.5, -4.0, 0, 1)
    with pytest.raises(PreconditionError):
        solve_kappa(spec, NegativeSpec(1.0, 0.5, -4.0, 0, 2).params(1, 2))


@pytest.mark.parametrize(
    "kw",
    [dict(lam=0.0), dict(lam=1e-7), dict(lam=1.5), dict(s1=0.0), dict(eps=1.0), dict(q2=0), dict(psi_sign=2)],
)
def test_negative_spec_validation(kw):
    base = dict(s1=1.0, lam=0.5, eps=-4.0, q1=0, q2=1)
    base.update(kw)
    with pytest.raises(PreconditionError):
        NegativeSpec(**base)


def test_lambda_floor_is_configurable():
    spec = NegativeSpec(1.0, 1e-7, -4.0, 0, 1, lam_floor=1e-8)
    assert spec.lam == 1e-7


def test_psi_zero_family_has_vanishing_U1():
    fam = negative(2, 3, 1, 2, 1.0, 1.0)
    assert fam.coeffs.kind is Kind.PSI_ZERO and fam.coeffs.c2 == 0.0 and fam.coeffs.psi == 0.0
    for s in np.geomspace(1.0, 1e4, 30):
        assert fam.sample(s, order=2).U1.tolist() == [0.0, 0.0, 0.0]


def test_ricci_flat_generic_family():
    fam = negative(1, 2, 1, 1, 1.0, 0.4, 0.0)
    assert fam.coeffs.kind is Kind.GENERIC_PSI and fam.params.eps == 0.0
    assert fam.coeffs.psi > 0


def test_psi_sign_recorded_and_both_signs_build():
    plus = negative(1, 2, 1, 2, 1.0, 0.5, psi_sign=1)
    minus = negative(1, 2, 1, 2, 1.0, 0.5, psi_sign=-1)
    assert plus.coeffs.psi == -minus.coeffs.psi
    assert minus.metadata["psi_sign"] == -1


def test_nonpositive_coefficient_formulas():
    n, p, s1, lam, eps = 2, 3, 1.3, 0.4, -6.0
    fam = negative(n, p, 1, 2, s1, lam, eps)
    k = fam.coeffs.kappa
    assert fam.coeffs.c1 == pytest.approx(2 * eps / (n + 1) * s1 ** (n + 1) - 2 * p * lam / (k * (n + 1)) * s1**n, rel=1e-14)
    assert fam.coeffs.c2 == pytest.approx(2 * p * (lam - 1) / (k * (n + 1)) * s1 ** (n + 1), rel=1e-14)


def test_a_polys_examples():
    assert a_polys(0.3, 0.9, 0) == [1.0]
    assert a_polys(0.4, 0.8, 1) == pytest.approx([1.0, 0.2], rel=1e-14)
    assert a_polys(0.4, 0.8, 3)[0] == 1.0


def _gamma_points(n, count, seed):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        x, y = np.sort(rng.uniform(0, 1, 2))
        if in_gamma(float(x), float(y), n) and y - x > 1e-3:
            pts.append((float(x), float(y)))
    return pts


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_a_polys_positive_on_gamma(n):
    for x, y in _gamma_points(n, 200, n):
        assert all(a > 0 for a in a_polys(x, y, n))


def _q_oracle(x, y, n, p):
    """Unsimplified (q1^2, q2^2) evaluated with 50 significant digits."""
    with mp.workdps(50):
        x, y = mp.mpf(x), mp.mpf(y)
        D = y ** (n + 1) - x ** (n + 1)
        E = (y - x) * (D - y**n + x**n)
        q1 = p * p * x**n * y * (1 - x) / E * (1 - x - (1 - y) * D / ((n + 1) * x**n * (y - x))) ** 2
        q2 = p * p * x * y**n * (1 - y) / E * (1 - y - (1 - x) * D / ((n + 1) * y**n * (y - x))) ** 2
        k2 = (
            (n + 1) ** 2 * p * p * x**n * y**n / (D * (D - y**n + x**n))
            * (1 - x - (1 - y) * D / ((n + 1) * x**n * (y - x))) ** 2
            * (1 - y - (1 - x) * (x ** (n + 1) - y ** (n + 1)) / ((n + 1) * y**n * (x - y))) ** 2
        )
        return float(q1), float(q2), float(k2)


@pytest.mark.parametrize("n,p", [(1, 2), (2, 3), (3, 4), (2, 1)])
def test_q_squared_against_direct_formula(n, p):
    for x, y in _gamma_points(n, 100, 100 + n):
        q1sq, q2sq, k2 = _q_oracle(x, y, n, p)
        got = q_squared(x, y, n, p)
        assert got[0] == pytest.approx(q1sq, rel=1e-12)
        assert got[1] == pytest.approx(q2sq, rel=1e-12)
        assert kappa_from_xy(x, y, n, p) ** 2 == pytest.approx(k2, rel=1e-12)


def test_q_squared_n1_expanded_form():
    p = 2
    for x, y in _gamma_points(1, 50, 3):
        expect = (p / 2) ** 2 * y * (1 - x) * (2 * x + y - 1) ** 2 / (x * (x + y - 1))
        assert q_squared(x, y, 1, p)[0] == pytest.approx(expect, rel=1e-12)


def test_q1_dominates_on_gamma():
    for n in (1, 2, 3):
        for x, y in _gamma_points(n, 100, 40 + n):
            q1sq, q2sq = q_squared(x, y, n, n + 1)
            assert q1sq > q2sq


def test_q_ratio_tends_to_one_on_diagonal():
    y = 0.9
    ratios = [q_squared(y - d, y, 2, 3) for d in (1e-2, 1e-4, 1e-6)]
    errs = [abs(a / b - 1) for a, b in ratios]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-4


def test_q_squared_boundary_behaviour():
    assert q_squared(0.5, 1.0, 1, 2)[1] == 0.0
    # approaching A_n = 0 along a fixed offset line, q2^2 blows up
    from torus_einstein.builders import _line_floor

    a = 0.2
    floor = _line_floor(a, 2)
    vals = [q_squared(floor + d, floor + d + a, 2, 3)[1] for d in (1e-2, 1e-4, 1e-6)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 1e4
    with pytest.raises(DomainError):
        q_squared(floor - 1e-3, floor - 1e-3 + a, 2, 3)
    with pytest.raises(DomainError):
        q_squared(0.8, 0.5, 1, 2)


@pytest.mark.parametrize("L1,L2,n,p", [(2, 1, 1, 2), (3, 2, 2, 3), (6, 5, 1, 2), (5, 1, 3, 4)])
def test_solve_xy_round_trip(L1, L2, n, p):
    pt = solve_xy(L1, L2, n, p)
    assert pt.region_ok and in_gamma(pt.x, pt.y, n)
    q1sq, q2sq = q_squared(pt.x, pt.y, n, p)
    assert q1sq == pytest.approx(L1 * L1, rel=1e-9)
    assert q2sq == pytest.approx(L2 * L2, rel=1e-9)
    for _, x, y in pt.path:
        if x < y:
            assert all(a > 0 for a in a_polys(x, y, n))


def test_path_starts_on_diagonal():
    L2, n, p = 1, 1, 2
    t = theta(L2, 0.0, n, p)
    q1sq, q2sq = q_squared(t, t, n, p)
    assert q1sq == pytest.approx(q2sq, rel=1e-12)
    assert q2sq == pytest.approx(L2 * L2, rel=1e-12)
    pt = solve_xy(2, 1, n, p)
    assert pt.path[0][0] == 0.0


@pytest.mark.parametrize("L1,L2", [(1, 1), (1, 2), (2, 0)])
def test_solve_xy_preconditions(L1, L2):
    with pytest.raises(PreconditionError):
        solve_xy(L1, L2, 1, 2)


def test_positive_named_family_volume():
    fam = positive()
    k, s1, s2 = fam.coeffs.kappa, fam.s1, fam.s2
    C = 4 * math.pi**2 * 2 * math.pi
    assert volume(fam, s2) == pytest.approx(C * k / 2 * (s2**2 - s1**2), rel=1e-14)


def test_positive_family_invariants():
    for fam in (positive(), positive(-2, 1), positive(5, 3, 2, 3), positive(3, -1, 3, 4)):
        n = fam.params.n
        assert fam.coeffs.c2 < 0
        assert fam.coeffs.c1 < 4 * fam.s1 ** (n + 1)
        assert 0 < fam.s1 < fam.s2
        assert fam.params.eps == 2 * n + 2


def test_negative_q1_sign_handling():
    a, b = positive(2, 1), positive(-2, 1)
    assert a.coeffs.kappa == b.coeffs.kappa and a.s1 == b.s1
    assert b.coeffs.w2 == -a.coeffs.w2


@pytest.mark.parametrize("q", [(1, 1), (1, 2), (0, 1), (2, 0)])
def test_positive_spec_preconditions(q):
    with pytest.raises(PreconditionError):
        PositiveSpec(q[0], q[1], 1, 2)


def test_builders_are_deterministic():
    spec = PositiveSpec(3, 2, 1, 2)
    assert build_positive(spec) == build_positive(spec)
    nspec = NegativeSpec(1.0, 0.5, -4.0, 1, 1)
    assert build_nonpositive(nspec, nspec.params(1, 2)) == build_nonpositive(nspec, nspec.params(1, 2))
