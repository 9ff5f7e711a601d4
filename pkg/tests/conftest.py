"""Shared builders for the test suite: charts, random polynomials, points."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, Sequence, Tuple

from diracavg.rings import Poly, RationalFn
from diracavg.tensors import Chart

CHART2 = Chart(("x", "y"))
CHART4 = Chart(("x1", "x2", "y1", "y2"))


def rand_fraction(rng: random.Random, span: int = 4, den: int = 3) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def rand_poly(
    rng: random.Random,
    names: Sequence[str],
    degree: int = 2,
    terms: int = 3,
) -> Poly:
    """A random polynomial with small rational coefficients."""
    p = Poly.zero()
    for _ in range(terms):
        mono = Poly.const(rand_fraction(rng))
        for _ in range(rng.randint(0, degree)):
            mono = mono * Poly.var(rng.choice(list(names)))
        p = p + mono
    return p


def rand_rational(rng: random.Random, names: Sequence[str], degree: int = 2) -> RationalFn:
    # denominator 1 + v**2 never vanishes on rational sample points
    num = rand_poly(rng, names, degree)
    den = Poly.const(1) + Poly.var(rng.choice(list(names))) ** 2
    if rng.random() < 0.5:
        den = Poly.const(1)
    return RationalFn(num, den)


def frac_point(rng: random.Random, names: Sequence[str], span: int = 3) -> Dict[str, Fraction]:
    return {n: Fraction(rng.randint(-span, span), rng.randint(1, 4)) for n in names}
