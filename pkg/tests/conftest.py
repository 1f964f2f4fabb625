from __future__ import annotations

from functools import lru_cache

import pytest

from torus_einstein import NegativeSpec, PositiveSpec, build_nonpositive, build_positive


@lru_cache(maxsize=None)
def negative(n=1, p=2, q1=0, q2=1, s1=1.0, lam=0.5, eps=None, psi_sign=1):
    eps = -(2.0 * n + 2.0) if eps is None else float(eps)
    spec = NegativeSpec(s1, lam, eps, q1, q2, psi_sign)
    return build_nonpositive(spec, spec.params(n, p))


@lru_cache(maxsize=None)
def ricci_flat(n=1, p=2, q1=1, q2=1, s1=1.0, lam=0.5):
    return negative(n, p, q1, q2, s1, lam, 0.0)


@lru_cache(maxsize=None)
def positive(q1=2, q2=1, n=1, p=2, vol_base=None):
    return build_positive(PositiveSpec(q1, q2, n, p, vol_base))


@pytest.fixture(scope="session")
def neg_family():
    return negative()


@pytest.fixture(scope="session")
def psi_zero_family():
    return negative(lam=1.0, q1=1, q2=2)


@pytest.fixture(scope="session")
def flat_family():
    return ricci_flat()


@pytest.fixture(scope="session")
def pos_family():
    return positive()


def sample_families():
    """A spread of families of every kind, used by invariant tests."""
    return [
        negative(),
        negative(1, 2, 1, 2, 2.0, 0.3),
        negative(1, 2, 1, 2, 0.7, 1.0),
        negative(2, 3, 1, 1, 1.5, 0.6, psi_sign=-1),
        negative(3, 4, 2, 3, 0.5, 0.8),
        ricci_flat(),
        ricci_flat(2, 3, 0, 1, 1.0, 1.0),
        ricci_flat(3, 4, 1, 2, 2.0, 0.25),
        positive(),
        positive(-2, 1),
        positive(3, 2, 2, 3),
        positive(4, 1, 3, 4),
    ]
