"""Exact matrix algebra over the rational-function field."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from diracavg.linalg import (
    det,
    frac_mat,
    identity,
    inverse,
    kernel_basis,
    mat_mul,
    mat_of,
    mat_vec,
    rank,
    solve,
)
from diracavg.rings import Poly, RationalFn

from conftest import rand_fraction


def _rand_mat(rng, n, span=3):
    return frac_mat([[rand_fraction(rng, span) for _ in range(n)] for _ in range(n)])


def test_det_known_values():
    assert det(frac_mat([[Fraction(2)]])).const_value() == 2
    a = frac_mat([[1, 2], [3, 4]])
    assert det(a).const_value() == -2
    b = frac_mat([[2, 0, 1], [1, 1, 0], [0, 3, 1]])
    assert det(b).const_value() == 2 * 1 - 0 + 1 * 3
    # a repeated row kills the determinant
    c = frac_mat([[1, 2, 3], [1, 2, 3], [0, 1, 0]])
    assert det(c).is_zero()


def test_det_is_multiplicative():
    rng = random.Random(21)
    for _ in range(10):
        a = _rand_mat(rng, 3)
        b = _rand_mat(rng, 3)
        assert det(mat_mul(a, b)) == det(a) * det(b)


def test_det_with_symbolic_entries():
    x = RationalFn.var("x")
    one = RationalFn.const(1)
    a = mat_of([[x, one], [one, x]])
    assert det(a) == x * x - one


def test_inverse_round_trip():
    rng = random.Random(22)
    done = 0
    while done < 10:
        a = _rand_mat(rng, 3)
        if det(a).is_zero():
            continue
        assert mat_mul(a, inverse(a)) == identity(3)
        assert mat_mul(inverse(a), a) == identity(3)
        done += 1
    with pytest.raises(ArithmeticError):
        inverse(frac_mat([[1, 1], [1, 1]]))


def test_inverse_with_symbolic_entries():
    y = RationalFn.var("y")
    one = RationalFn.const(1)
    zero = RationalFn.zero()
    a = mat_of([[one + y, zero], [zero, one]])
    ainv = inverse(a)
    assert mat_mul(a, ainv) == identity(2)
    assert ainv[0][0] == one / (one + y)


def test_rank():
    assert rank(frac_mat([[1, 2], [2, 4]])) == 1
    assert rank(frac_mat([[1, 0], [0, 1]])) == 2
    assert rank(frac_mat([[0, 0], [0, 0]])) == 0
    # tall and wide shapes
    assert rank(frac_mat([[1, 2, 3], [2, 4, 6]])) == 1
    assert rank([[RationalFn.var("x"), RationalFn.zero()]]) == 1


def test_solve_consistent_and_inconsistent():
    a = frac_mat([[1, 1], [1, -1]])
    b = [RationalFn.const(3), RationalFn.const(1)]
    x = solve(a, b)
    assert x is not None
    assert mat_vec(a, x) == b
    # singular but consistent
    a2 = frac_mat([[1, 1], [2, 2]])
    x2 = solve(a2, [RationalFn.const(1), RationalFn.const(2)])
    assert x2 is not None
    assert mat_vec(a2, x2) == [RationalFn.const(1), RationalFn.const(2)]
    # inconsistent
    assert solve(a2, [RationalFn.const(1), RationalFn.const(3)]) is None


def test_solve_random_systems():
    rng = random.Random(23)
    done = 0
    while done < 8:
        a = _rand_mat(rng, 3)
        if det(a).is_zero():
            continue
        b = [RationalFn.const(rand_fraction(rng)) for _ in range(3)]
        x = solve(a, b)
        assert x is not None and mat_vec(a, x) == b
        done += 1


def test_kernel_basis_spans_the_null_space():
    a = frac_mat([[1, 2, 3], [2, 4, 6], [1, 1, 1]])
    ker = kernel_basis(a)
    assert len(ker) == 3 - rank(a) == 1
    for v in ker:
        assert all(c.is_zero() for c in mat_vec(a, v))
    assert kernel_basis(identity(2)) == []


def test_kernel_basis_random():
    rng = random.Random(24)
    for _ in range(6):
        rows = [[RationalFn.const(rand_fraction(rng)) for _ in range(4)] for _ in range(2)]
        # duplicate a row so the rank is at most 2
        a = rows + [rows[0]]
        ker = kernel_basis(a)
        assert len(ker) == 4 - rank(a)
        for v in ker:
            assert all(c.is_zero() for c in mat_vec(a, v))
