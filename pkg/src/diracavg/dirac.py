"""Dirac structures as explicit frames of (vector, covector) sections.

A frame holds n sections on an n-dimensional chart; maximal isotropy is
verified symbolically at construction and full rank pointwise at rational
sample points.  Involutivity, coupling position against a vertical
distribution, and the induced leafwise 2-form are decided by exact linear
algebra at those points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import linalg
from .linalg import Mat
from .reports import CheckResult, failed, passed
from .rings import Poly, RationalFn
from .sampling import Point, format_point, sweep
from .tensors import (
    Chart,
    DifferentialForm,
    MultivectorField,
    BigradeContext,
    d_scalar,
    exterior_derivative,
    interior_product,
    lie_derivative,
    one_form,
    sharp_bivector,
    vector_field,
    vf_bracket,
)


@dataclass
class DiracSection:
    """A section (X, alpha) of TM + T*M."""

    vector: MultivectorField
    covector: DifferentialForm

    def __post_init__(self) -> None:
        if self.vector.degree != 1 or self.covector.degree != 1:
            raise ValueError("sections need a vector field and a 1-form")
        if self.vector.chart != self.covector.chart:
            raise ValueError("section parts live on different charts")

    @property
    def chart(self) -> Chart:
        return self.vector.chart

    def components_at(self, point: Point) -> List[RationalFn]:
        """The 2n component values at a rational point (exact, pi-formal)."""
        n = self.chart.dim
        out: List[RationalFn] = []
        for i in range(n):
            out.append(self.vector.comps.get((i,), RationalFn.zero()).eval_frac(point))
        for i in range(n):
            out.append(self.covector.comps.get((i,), RationalFn.zero()).eval_frac(point))
        return out


def pairing(s: DiracSection, t: DiracSection) -> RationalFn:
    """The symmetric pairing <(X, a), (Y, b)> = b(X) + a(Y)."""
    if s.chart != t.chart:
        raise ValueError("charts differ")
    return (t.covector.evaluate(s.vector) + s.covector.evaluate(t.vector)).simplified()


class DiracFrame:
    """n sections spanning an almost Dirac structure on an n-chart."""

    def __init__(self, sections: Sequence[DiracSection], check_isotropy: bool = True):
        if not sections:
            raise ValueError("empty frame")
        chart = sections[0].chart
        if any(s.chart != chart for s in sections):
            raise ValueError("sections live on different charts")
        if len(sections) != chart.dim:
            raise ValueError(
                f"frame needs {chart.dim} sections, got {len(sections)}"
            )
        self.chart = chart
        self.sections: Tuple[DiracSection, ...] = tuple(sections)
        if check_isotropy:
            for i, j in itertools.combinations_with_replacement(
                range(len(self.sections)), 2
            ):
                p = pairing(self.sections[i], self.sections[j])
                if not p.is_zero():
                    raise ValueError(
                        f"frame is not isotropic: <s_{i}, s_{j}> = {p!r}"
                    )

    # -- pointwise data ----------------------------------------------------

    def matrix_at(self, point: Point) -> Mat:
        """Rows are the 2n-component section values at the point."""
        return [s.components_at(point) for s in self.sections]

    def rank_ok_at(self, point: Point) -> bool:
        return linalg.rank(self.matrix_at(point)) == self.chart.dim

    def validate_rank(self, points: List[Point]) -> CheckResult:
        run, first_fail = sweep(points, self.rank_ok_at)
        if first_fail is not None:
            return failed(
                "frame-rank", point=format_point(first_fail), usable=run.usable
            )
        return passed("frame-rank", usable=run.usable, total=run.total)


def graph_of_bivector(pi: MultivectorField) -> DiracFrame:
    """The frame {(Pi# du_i, du_i)} spanning the graph of a bivector."""
    if pi.degree != 2:
        raise ValueError("expects a bivector")
    chart = pi.chart
    sections = []
    for i in range(chart.dim):
        du = one_form(chart, {i: RationalFn.const(1)})
        sections.append(DiracSection(sharp_bivector(pi, du), du))
    return DiracFrame(sections)


def cotangent_frame(chart: Chart) -> DiracFrame:
    """The frame {(0, du_i)} (graph of the zero bivector)."""
    return graph_of_bivector(MultivectorField.zero(chart, 2))


def gauge_transform(frame: DiracFrame, b: DifferentialForm) -> DiracFrame:
    """Shift the covector parts by the closed 2-form b: (X, a - i_X b)."""
    if b.degree != 2:
        raise ValueError("gauge form must be a 2-form")
    if not exterior_derivative(b).is_zero():
        raise ValueError("gauge form is not closed")
    out = []
    for s in frame.sections:
        shift = interior_product(s.vector, b)
        out.append(DiracSection(s.vector, (s.covector - shift).simplified()))
    return DiracFrame(out)


def courant_bracket(s: DiracSection, t: DiracSection) -> DiracSection:
    """[(X, a), (Y, b)] = ([X, Y], L_X b - L_Y a + d(a(Y) - b(X)) / 2)."""
    if s.chart != t.chart:
        raise ValueError("charts differ")
    x, a = s.vector, s.covector
    y, b = t.vector, t.covector
    vec = vf_bracket(x, y)
    cov = lie_derivative(x, b) - lie_derivative(y, a)
    half = (a.evaluate(y) - b.evaluate(x)).scale(Fraction(1, 2))
    cov = cov + d_scalar(half, s.chart)
    return DiracSection(vec.simplified(), cov.simplified())


def same_span_at(f1: DiracFrame, f2: DiracFrame, point: Point) -> bool:
    """True when the two frames span the same subspace at the point."""
    m1 = f1.matrix_at(point)
    m2 = f2.matrix_at(point)
    r1 = linalg.rank(m1)
    r2 = linalg.rank(m2)
    if r1 != r2:
        return False
    return linalg.rank(m1 + m2) == r1


def involutivity_check(frame: DiracFrame, points: List[Point]) -> CheckResult:
    """Closure of the frame under the Courant bracket, decided pointwise.

    The bracket of every section pair is computed symbolically once; at each
    usable sample point it must be a linear combination of the frame.
    """
    n = len(frame.sections)
    brackets: Dict[Tuple[int, int], DiracSection] = {}
    for i in range(n):
        for j in range(i + 1, n):
            brackets[(i, j)] = courant_bracket(frame.sections[i], frame.sections[j])

    witness: Dict[str, object] = {}

    def probe(p: Point) -> bool:
        rows = frame.matrix_at(p)
        if linalg.rank(rows) != frame.chart.dim:
            raise ArithmeticError("rank-deficient frame at sample point")
        cols = [[rows[k][m] for k in range(n)] for m in range(2 * frame.chart.dim)]
        for (i, j), br in brackets.items():
            target = br.components_at(p)
            sol = linalg.solve(cols, target)
            if sol is None:
                if not witness:
                    witness["pair"] = [i, j]
                return False
        return True

    run, first_fail = sweep(points, probe)
    if first_fail is not None:
        return failed(
            "involutivity",
            point=format_point(first_fail),
            witness=witness or None,
            usable=run.usable,
        )
    return passed("involutivity", usable=run.usable, total=run.total)


def coupling_test(
    frame: DiracFrame, ctx: BigradeContext, points: List[Point]
) -> Tuple[CheckResult, Optional[List[MultivectorField]]]:
    """Transversality of the frame's horizontal distribution.

    H = {Z : (Z, a) in D for some a annihilating the verticals} is computed
    as the symbolic kernel of the fiber-components of the covector parts; the
    coupling condition H + V = TM (direct sum) is verified at sample points.
    Returns the check result and a spanning set for H when it holds.
    """
    n = len(frame.sections)
    b = ctx.b
    # rows: fiber components of each section's covector; kernel combos have
    # covector parts annihilating the vertical distribution
    rows = [
        [frame.sections[k].covector.comps.get((fi,), RationalFn.zero()) for k in range(n)]
        for fi in ctx.fiber
    ]
    combos = linalg.kernel_basis(rows)
    h_fields: List[MultivectorField] = []
    for c in combos:
        acc = MultivectorField.zero(frame.chart, 1)
        for k, ck in enumerate(c):
            if not ck.is_zero():
                acc = acc + frame.sections[k].vector.scale(ck)
        h_fields.append(acc.simplified())

    if len(h_fields) != b:
        return (
            failed("coupling", witness={"horizontal_rank": len(h_fields), "expected": b}),
            None,
        )

    def probe(p: Point) -> bool:
        m: Mat = []
        for h in h_fields:
            m.append(
                [h.comps.get((i,), RationalFn.zero()).eval_frac(p) for i in range(frame.chart.dim)]
            )
        for j in ctx.fiber:
            m.append(
                [RationalFn.const(1 if i == j else 0) for i in range(frame.chart.dim)]
            )
        return linalg.rank(m) == frame.chart.dim

    run, first_fail = sweep(points, probe)
    if first_fail is not None:
        return (
            failed("coupling", point=format_point(first_fail), usable=run.usable),
            None,
        )
    return passed("coupling", usable=run.usable, total=run.total), h_fields


def presymplectic_on_characteristic(
    frame: DiracFrame,
    point: Point,
    basis: Optional[List[List[RationalFn]]] = None,
) -> Tuple[List[List[RationalFn]], List[List[RationalFn]]]:
    """The leafwise 2-form on the tangent projection of the frame at a point.

    For tangent vectors Y, Z in p_T(D) the form is w(Y, Z) = -a(Z) where
    (Y, a) lies in the frame's pointwise span; isotropy of the frame makes
    the value independent of the chosen a, which is re-checked here.

    Returns (basis vectors, matrix of w on that basis).  A caller-supplied
    basis must consist of vectors inside p_T(D) at the point.
    """
    n = frame.chart.dim
    rows = frame.matrix_at(point)
    vec_rows = [r[:n] for r in rows]
    cov_rows = [r[n:] for r in rows]

    if basis is None:
        # greedy independent subset of the section vector parts
        basis = []
        for r in vec_rows:
            if any(not v.is_zero() for v in r) and linalg.rank(basis + [r]) > len(basis):
                basis.append(r)

    # express each basis vector in the section vector parts
    cols = [[vec_rows[k][m] for k in range(len(vec_rows))] for m in range(n)]
    covs: List[List[RationalFn]] = []
    for v in basis:
        combo = linalg.solve(cols, list(v))
        if combo is None:
            raise ValueError("basis vector is not tangent to the frame at the point")
        cov = [RationalFn.zero()] * n
        for k, ck in enumerate(combo):
            if ck.is_zero():
                continue
            for m in range(n):
                cov[m] = cov[m] + ck * cov_rows[k][m]
        covs.append([c.simplified() for c in cov])

    # well-definedness: a section with zero vector part must annihilate p_T(D)
    null_combos = linalg.kernel_basis(cols)
    for c in null_combos:
        for v in basis:
            s = RationalFn.zero()
            for k, ck in enumerate(c):
                if ck.is_zero():
                    continue
                for m in range(n):
                    s = s + ck * cov_rows[k][m] * v[m]
            if not s.simplified().is_zero():
                raise ArithmeticError("leafwise form is not well defined (isotropy broken)")

    mat = [
        [
            (-sum((covs[a][m] * basis[b][m] for m in range(n)), RationalFn.zero())).simplified()
            for b in range(len(basis))
        ]
        for a in range(len(basis))
    ]
    return basis, mat
