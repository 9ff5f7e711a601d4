"""Exact dense linear algebra over the rational-function field.

Matrices are plain nested lists of ``RationalFn``.  Sizes here are tiny
(chart dimension at most 8), so Gaussian elimination with exact pivots and
Cramer-style inverses via fraction-free Bareiss determinants are plenty.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .rings import Poly, RationalFn, poly_divmod_exact

Mat = List[List[RationalFn]]


def mat_of(rows: Sequence[Sequence[object]]) -> Mat:
    return [[RationalFn.of(x) for x in row] for row in rows]


def identity(n: int) -> Mat:
    return [
        [RationalFn.const(1 if i == j else 0) for j in range(n)] for i in range(n)
    ]


def mat_add(a: Mat, b: Mat) -> Mat:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(a: Mat, c: RationalFn) -> Mat:
    return [[x * c for x in row] for row in a]


def mat_mul(a: Mat, b: Mat) -> Mat:
    n, k, m = len(a), len(b), len(b[0])
    out: Mat = []
    for i in range(n):
        row = []
        for j in range(m):
            s = RationalFn.zero()
            for t in range(k):
                if a[i][t].is_zero() or b[t][j].is_zero():
                    continue
                s = s + a[i][t] * b[t][j]
            row.append(s.simplified())
        out.append(row)
    return out


def mat_vec(a: Mat, v: Sequence[RationalFn]) -> List[RationalFn]:
    out = []
    for row in a:
        s = RationalFn.zero()
        for x, y in zip(row, v):
            if not (x.is_zero() or y.is_zero()):
                s = s + x * y
        out.append(s.simplified())
    return out


def _all_poly(a: Mat) -> bool:
    return all(x.is_poly() for row in a for x in row)


def bareiss_det(rows: List[List[Poly]]) -> Poly:
    """Fraction-free determinant of a square polynomial matrix."""
    n = len(rows)
    if n == 0:
        return Poly.const(1)
    m = [row[:] for row in rows]
    sign = 1
    prev = Poly.const(1)
    for k in range(n - 1):
        if m[k][k].is_zero():
            for r in range(k + 1, n):
                if not m[r][k].is_zero():
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return Poly.zero()
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                q = poly_divmod_exact(num, prev)
                if q is None:
                    raise ArithmeticError("Bareiss division failed")
                m[i][j] = q
        prev = m[k][k]
    det = m[n - 1][n - 1]
    return det if sign == 1 else -det


def det(a: Mat) -> RationalFn:
    n = len(a)
    if n == 0:
        return RationalFn.const(1)
    if _all_poly(a):
        return RationalFn.from_poly(bareiss_det([[x.as_poly() for x in row] for row in a]))
    # Clear denominators row by row, track the correction factor.
    factor = RationalFn.const(1)
    rows: List[List[Poly]] = []
    for row in a:
        d = Poly.const(1)
        seen = []
        for x in row:
            if not x.is_poly() and all(x.den != s for s in seen):
                seen.append(x.den)
                d = d * x.den
        factor = factor * RationalFn.from_poly(d)
        cleared = []
        for x in row:
            v = RationalFn.from_poly(d) * x
            cleared.append(v.simplified().as_poly())
        rows.append(cleared)
    return (RationalFn.from_poly(bareiss_det(rows)) / factor).simplified()


def _minor(rows: List[List[Poly]], i: int, j: int) -> List[List[Poly]]:
    return [
        [x for c, x in enumerate(row) if c != j]
        for r, row in enumerate(rows)
        if r != i
    ]


def inverse(a: Mat) -> Mat:
    """Exact inverse; raises ArithmeticError if the determinant is zero."""
    n = len(a)
    d = det(a)
    if d.is_zero():
        raise ArithmeticError("matrix is singular over the function field")
    if _all_poly(a) and n >= 1:
        rows = [[x.as_poly() for x in row] for row in a]
        dp = d
        out: Mat = [[RationalFn.zero()] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                cof = bareiss_det(_minor(rows, j, i))
                if (i + j) % 2:
                    cof = -cof
                out[i][j] = (RationalFn.from_poly(cof) / dp).simplified()
        return out
    # General case: Gauss-Jordan with exact pivots.
    aug = [[x for x in row] + [RationalFn.const(1 if i == j else 0) for j in range(n)]
           for i, row in enumerate(a)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not aug[r][col].is_zero():
                piv = r
                break
        if piv is None:
            raise ArithmeticError("matrix is singular over the function field")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = aug[col][col].inverse()
        aug[col] = [x * inv_p for x in aug[col]]
        for r in range(n):
            if r == col or aug[r][col].is_zero():
                continue
            f = aug[r][col]
            aug[r] = [(x - f * y).simplified() for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def rank(a: Mat) -> int:
    """Row rank by exact elimination (matrix is copied, not mutated)."""
    if not a:
        return 0
    m = [[x for x in row] for row in a]
    nrows, ncols = len(m), len(m[0])
    r = 0
    for col in range(ncols):
        piv = None
        for i in range(r, nrows):
            if not m[i][col].is_zero():
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv_p = m[r][col].inverse()
        m[r] = [x * inv_p for x in m[r]]
        for i in range(nrows):
            if i != r and not m[i][col].is_zero():
                f = m[i][col]
                m[i] = [(x - f * y).simplified() for x, y in zip(m[i], m[r])]
        r += 1
        if r == nrows:
            break
    return r


def solve(a: Mat, b: Sequence[RationalFn]) -> Optional[List[RationalFn]]:
    """One solution of A x = b, or None if inconsistent.

    A may be rectangular (rows x cols); free variables are set to zero.
    """
    nrows = len(a)
    ncols = len(a[0]) if nrows else 0
    aug = [[x for x in row] + [b[i]] for i, row in enumerate(a)]
    pivots: List[Tuple[int, int]] = []
    r = 0
    for col in range(ncols):
        piv = None
        for i in range(r, nrows):
            if not aug[i][col].is_zero():
                piv = i
                break
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv_p = aug[r][col].inverse()
        aug[r] = [x * inv_p for x in aug[r]]
        for i in range(nrows):
            if i != r and not aug[i][col].is_zero():
                f = aug[i][col]
                aug[i] = [(x - f * y).simplified() for x, y in zip(aug[i], aug[r])]
        pivots.append((r, col))
        r += 1
        if r == nrows:
            break
    for i in range(r, nrows):
        if not aug[i][ncols].is_zero():
            return None
    x = [RationalFn.zero()] * ncols
    for row_i, col_i in pivots:
        x[col_i] = aug[row_i][ncols]
    return x


def kernel_basis(a: Mat) -> List[List[RationalFn]]:
    """Basis of the right kernel of A over the function field."""
    nrows = len(a)
    ncols = len(a[0]) if nrows else 0
    m = [[x for x in row] for row in a]
    pivots: List[Tuple[int, int]] = []
    r = 0
    for col in range(ncols):
        piv = None
        for i in range(r, nrows):
            if not m[i][col].is_zero():
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv_p = m[r][col].inverse()
        m[r] = [x * inv_p for x in m[r]]
        for i in range(nrows):
            if i != r and not m[i][col].is_zero():
                f = m[i][col]
                m[i] = [(x - f * y).simplified() for x, y in zip(m[i], m[r])]
        pivots.append((r, col))
        r += 1
        if r == nrows:
            break
    pivot_cols = [c for _, c in pivots]
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    basis = []
    for fc in free_cols:
        vec = [RationalFn.zero()] * ncols
        vec[fc] = RationalFn.const(1)
        for row_i, col_i in pivots:
            vec[col_i] = -m[row_i][fc]
        basis.append(vec)
    return basis


def frac_mat(rows: Sequence[Sequence[Fraction]]) -> Mat:
    return [[RationalFn.const(x) for x in row] for row in rows]
