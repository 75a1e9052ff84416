"""Shared builders for the test suite: tiny exact series and forms."""

from fractions import Fraction
import random

import pytest

from foliation.fields import RATIONAL
from foliation.series import TruncatedSeries, monomials


COEFF_POOL = [Fraction(1), Fraction(-1), Fraction(1, 2), Fraction(-1, 2),
              Fraction(1, 3), Fraction(-1, 3)]


def sparse_series(rng: random.Random, nvars: int, order: int,
                  degrees=(1, 2, 3), max_terms: int = 3,
                  field: str = RATIONAL) -> TruncatedSeries:
    """Random sparse series with small rational coefficients (seeded)."""
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        deg = rng.choice([d for d in degrees if d <= order])
        exps = list(monomials(nvars, deg))
        terms[rng.choice(exps)] = rng.choice(COEFF_POOL)
    return TruncatedSeries(nvars, order, field, terms)


@pytest.fixture
def rng():
    return random.Random(20240)
