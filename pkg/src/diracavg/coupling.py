"""Fibered charts with connections and the coupling correspondence.

A foliation here is a coordinate fibration: base coordinates x_i label the
leaf space, fiber coordinates y_j the leaves.  A connection is a matrix of
lift coefficients; together with a horizontal 2-form sigma and a vertical
bivector P it forms the geometric data of a coupling structure.  The module
checks the three structure equations, converts data to the associated Poisson
bivector and Dirac frame and back, tests Hamiltonian sections, and applies
the gauge transformation attached to a horizontal 1-form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import linalg
from .dirac import DiracFrame, DiracSection
from .reports import CheckResult, failed, passed
from .rings import Poly, RationalFn
from .sampling import Point, format_point, sweep
from .tensors import (
    BigradeContext,
    Chart,
    DifferentialForm,
    MultivectorField,
    VectorValued1Form,
    VectorValued2Form,
    d10_horizontal,
    d_scalar,
    exterior_derivative,
    fn_bracket,
    interior_product,
    is_horizontal_form,
    is_vertical_multivector,
    lie_derivative_multivector,
    one_form,
    schouten_bracket,
    sharp_bivector,
    vector_field,
    vf_bracket,
)


@dataclass(frozen=True)
class Foliation:
    """A coordinate fibration: leaves are the level sets of the base block."""

    chart: Chart
    base: Tuple[int, ...]
    fiber: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.base) < 1 or len(self.fiber) < 1:
            raise ValueError("need at least one base and one fiber coordinate")
        if sorted(self.base + self.fiber) != list(range(self.chart.dim)):
            raise ValueError("base and fiber must partition the chart")

    @property
    def b(self) -> int:
        return len(self.base)

    @property
    def f(self) -> int:
        return len(self.fiber)


class Connection:
    """Lift coefficients over a foliation: h_i = dx_i + sum_j gamma[j][i] dy_j."""

    def __init__(self, fol: Foliation, gamma: Sequence[Sequence[object]]):
        self.fol = fol
        if len(gamma) != fol.f or any(len(r) != fol.b for r in gamma):
            raise ValueError("gamma must be a fiber x base matrix")
        self.gamma: List[List[RationalFn]] = [
            [RationalFn.of(x) for x in row] for row in gamma
        ]
        self._ctx = BigradeContext(fol.chart, fol.base, fol.fiber, self.gamma)
        proj = self._ctx.vertical_projector()
        if not proj.is_projection():
            raise AssertionError("vertical projector fails gamma o gamma = gamma")

    @property
    def chart(self) -> Chart:
        return self.fol.chart

    def context(self) -> BigradeContext:
        return self._ctx

    def lift(self, i: int) -> MultivectorField:
        return self._ctx.lift(i)

    def eta(self, j: int) -> DifferentialForm:
        return self._ctx.eta(j)

    def dx(self, i: int) -> DifferentialForm:
        return self._ctx.dx(i)

    def projector(self) -> VectorValued1Form:
        return self._ctx.vertical_projector()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Connection):
            return NotImplemented
        return self.fol == other.fol and all(
            a == b
            for ra, rb in zip(self.gamma, other.gamma)
            for a, b in zip(ra, rb)
        )

    def __hash__(self) -> int:
        return hash((self.fol, tuple(tuple(r) for r in self.gamma)))


@dataclass
class Curvature:
    """Curvature of a connection, with lift-pair values precomputed."""

    conn: Connection
    vv2: VectorValued2Form
    on_lifts: Dict[Tuple[int, int], MultivectorField]


def curvature(conn: Connection) -> Curvature:
    """Curvature via the vector-valued bracket, cross-checked on lifts.

    Computes half the bracket of the vertical projector with itself and
    asserts, pair by pair, that evaluating it on lifted frame fields agrees
    with projecting their Lie bracket; also that vertical insertions vanish.
    A disagreement means the bracket conventions drifted and raises.
    """
    ctx = conn.context()
    proj = conn.projector()
    full = fn_bracket(proj, proj)
    half_vals = {
        k: v.scale(Fraction(1, 2)) for k, v in full.values.items()
    }
    vv2 = VectorValued2Form(conn.chart, half_vals)
    lifts = [conn.lift(i) for i in range(ctx.b)]
    verts = [ctx.vertical(j) for j in range(ctx.f)]
    on_lifts: Dict[Tuple[int, int], MultivectorField] = {}
    for i in range(ctx.b):
        for j in range(i + 1, ctx.b):
            via_bracket = vv2.evaluate(lifts[i], lifts[j])
            via_lift = proj.apply(vf_bracket(lifts[i], lifts[j])).simplified()
            if via_bracket != via_lift:
                raise ArithmeticError(
                    f"curvature routes disagree on lift pair ({i}, {j})"
                )
            on_lifts[(i, j)] = via_lift
    for v in verts:
        for w in lifts + verts:
            if not vv2.evaluate(v, w).is_zero():
                raise ArithmeticError("curvature does not kill vertical insertions")
    return Curvature(conn, vv2, on_lifts)


@dataclass
class GeometricData:
    """A connection with a horizontal 2-form and a vertical bivector."""

    conn: Connection
    sigma: DifferentialForm
    p: MultivectorField
    integrable: str = "unchecked"  # "unchecked" | "verified" | "failed"
    witness: Optional[Dict[str, object]] = None

    def __post_init__(self) -> None:
        ctx = self.conn.context()
        if self.sigma.degree != 2 or self.sigma.chart != self.conn.chart:
            raise ValueError("sigma must be a 2-form on the connection chart")
        if self.p.degree != 2 or self.p.chart != self.conn.chart:
            raise ValueError("p must be a bivector on the connection chart")
        if not is_horizontal_form(self.sigma, ctx):
            raise ValueError("sigma must have only base-coordinate legs")
        if not is_vertical_multivector(self.p, ctx):
            raise ValueError("p must have only fiber-coordinate legs")

    def require_verified(self, op: str) -> None:
        if self.integrable != "verified":
            raise ValueError(
                f"{op} needs structure-checked data; run structure_eq_check first "
                f"(current flag: {self.integrable})"
            )

    def p_bracket(self, fa: RationalFn, fb: RationalFn) -> RationalFn:
        """The fiberwise bracket {f, g} = P(df, dg)."""
        chart = self.conn.chart
        return self.p.evaluate(d_scalar(fa, chart), d_scalar(fb, chart))


def d10_scalar(conn: Connection, f: RationalFn) -> DifferentialForm:
    """Covariant horizontal differential of a function: sum h_i(f) dx_i."""
    ctx = conn.context()
    comps: Dict[int, RationalFn] = {}
    for i in range(ctx.b):
        hi = conn.lift(i)
        v = RationalFn.zero()
        for (k,), c in hi.comps.items():
            dfk = f.diff(conn.chart.coords[k])
            if not dfk.is_zero():
                v = v + c * dfk
        v = v.simplified()
        if not v.is_zero():
            comps[ctx.base[i]] = v
    return DifferentialForm(conn.chart, 1, {(i,): c for i, c in comps.items()})


def structure_eq_check(gd: GeometricData) -> Tuple[GeometricData, List[CheckResult]]:
    """Check SE1 (flat vertical part), SE2 (closed sigma), SE3 (curvature).

    SE1: the lifted frame fields preserve P.
    SE2: the horizontal differential of sigma vanishes on lift triples.
    SE3: the curvature on a lift pair equals -P# d(sigma(h_i, h_j)).
    Returns the data with its integrability flag updated plus per-equation
    results; failures carry a witness, nothing is thrown.
    """
    conn = gd.conn
    ctx = conn.context()
    results: List[CheckResult] = []
    witness: Optional[Dict[str, object]] = None

    # SE1: lifts generate the projectable horizontal sections
    se1_bad = None
    for i in range(ctx.b):
        lv = lie_derivative_multivector(conn.lift(i), gd.p)
        if not lv.is_zero():
            se1_bad = {"lift": i, "residual": repr(lv.comps)}
            break
    if se1_bad is None:
        results.append(passed("SE1"))
    else:
        results.append(failed("SE1", witness=se1_bad))
        witness = witness or {"SE1": se1_bad}

    # SE2: d sigma evaluated on lift triples
    dsigma = exterior_derivative(gd.sigma)
    se2_bad = None
    lifts = [conn.lift(i) for i in range(ctx.b)]
    for tri in itertools.combinations(range(ctx.b), 3):
        v = dsigma.evaluate(*[lifts[i] for i in tri])
        if not v.is_zero():
            se2_bad = {"triple": list(tri), "residual": repr(v)}
            break
    if se2_bad is None:
        results.append(passed("SE2"))
    else:
        results.append(failed("SE2", witness=se2_bad))
        witness = witness or {"SE2": se2_bad}

    # SE3: curvature against the fiberwise Hamiltonian field of sigma(h_i, h_j)
    se3_bad = None
    try:
        cur = curvature(conn)
    except ArithmeticError as exc:  # pragma: no cover - internal guard
        se3_bad = {"error": str(exc)}
        cur = None
    if cur is not None:
        for i in range(ctx.b):
            for j in range(i + 1, ctx.b):
                sij = gd.sigma.evaluate(lifts[i], lifts[j])
                rhs = -sharp_bivector(gd.p, d_scalar(sij, conn.chart))
                lhs = cur.on_lifts.get((i, j), MultivectorField.zero(conn.chart, 1))
                if lhs != rhs:
                    se3_bad = {
                        "pair": [i, j],
                        "curvature": repr(lhs.comps),
                        "expected": repr(rhs.comps),
                    }
                    break
            if se3_bad is not None:
                break
    if se3_bad is None:
        results.append(passed("SE3"))
    else:
        results.append(failed("SE3", witness=se3_bad))
        witness = witness or {"SE3": se3_bad}

    ok = all(r.passed for r in results)
    out = replace(gd, integrable="verified" if ok else "failed", witness=witness)
    return out, results


@dataclass
class CouplingPoisson:
    """The bivector of a coupling structure, split by bidegree."""

    conn: Connection
    pi20: MultivectorField
    pi02: MultivectorField

    @property
    def pi(self) -> MultivectorField:
        return (self.pi20 + self.pi02).simplified()


def sigma_on_lifts(gd: GeometricData) -> List[List[RationalFn]]:
    ctx = gd.conn.context()
    lifts = [gd.conn.lift(i) for i in range(ctx.b)]
    return [
        [gd.sigma.evaluate(lifts[i], lifts[j]) for j in range(ctx.b)]
        for i in range(ctx.b)
    ]


def data_to_poisson(gd: GeometricData) -> CouplingPoisson:
    """Build the Poisson bivector whose horizontal block inverts -sigma.

    With S the matrix of sigma on lifts and W = -S^{-1}, the horizontal part
    is sum_{i<j} W[i][j] h_i ^ h_j and the vertical part is P.  The output is
    verified to be Poisson coefficient-exactly.
    """
    gd.require_verified("data_to_poisson")
    conn = gd.conn
    ctx = conn.context()
    s = sigma_on_lifts(gd)
    try:
        w = linalg.inverse(s)
    except ArithmeticError as exc:
        raise ValueError(
            "sigma is singular on the horizontal frame; not a coupling candidate"
        ) from exc
    w = [[(-x).simplified() for x in row] for row in w]
    lifts = [conn.lift(i) for i in range(ctx.b)]
    pi20 = MultivectorField.zero(conn.chart, 2)
    for i in range(ctx.b):
        for j in range(i + 1, ctx.b):
            if not w[i][j].is_zero():
                pi20 = pi20 + lifts[i].wedge(lifts[j]).scale(w[i][j])
    pi20 = pi20.simplified()
    cp = CouplingPoisson(conn, pi20, gd.p)
    jac = schouten_bracket(cp.pi, cp.pi)
    if not jac.is_zero():
        raise ArithmeticError(
            f"constructed bivector violates the Jacobi identity: {jac.comps!r}"
        )
    return cp


def poisson_to_data(
    pi: MultivectorField,
    fol: Foliation,
    points: Optional[List[Point]] = None,
) -> GeometricData:
    """Extract (connection, sigma, P) from a coupling Poisson bivector.

    The horizontal distribution is the image of the base coframe under Pi#;
    writing those fields in the lifted frame yields the connection, the
    inverse of their base block gives sigma, and the vertical remainder is P.
    Round-trips with data_to_poisson coefficient-exactly.
    """
    if pi.degree != 2 or pi.chart != fol.chart:
        raise ValueError("expects a bivector on the foliation chart")
    jac = schouten_bracket(pi, pi)
    if not jac.is_zero():
        raise ValueError(f"bivector is not Poisson: [[Pi,Pi]] = {jac.comps!r}")
    b, f = fol.b, fol.f
    images = []
    for i in range(b):
        dx = one_form(fol.chart, {fol.base[i]: RationalFn.const(1)})
        images.append(sharp_bivector(pi, dx))
    a = [
        [images[i].comps.get((fol.base[l],), RationalFn.zero()) for i in range(b)]
        for l in range(b)
    ]
    bm = [
        [images[i].comps.get((fol.fiber[j],), RationalFn.zero()) for i in range(b)]
        for j in range(f)
    ]
    try:
        a_inv = linalg.inverse(a)
    except ArithmeticError as exc:
        raise ValueError(
            "coupling condition fails: the horizontal image degenerates "
            "against the vertical distribution"
        ) from exc
    gamma = linalg.mat_mul(bm, a_inv)
    conn = Connection(fol, gamma)

    if points is not None:
        def probe(p: Point) -> bool:
            av = [[x.eval_frac(p) for x in row] for row in a]
            return linalg.rank(av) == b

        run, first_fail = sweep(points, probe)
        if first_fail is not None:
            raise ValueError(
                f"coupling condition fails at sample point {format_point(first_fail)}"
            )

    # sigma from the inverse of the base block: S = -(A^T)^{-1}
    s = [[(-a_inv[j][i]).simplified() for j in range(b)] for i in range(b)]
    sigma = DifferentialForm.zero(fol.chart, 2)
    for i in range(b):
        for j in range(i + 1, b):
            if not s[i][j].is_zero():
                basis = DifferentialForm.basis(fol.chart, (fol.base[i], fol.base[j]))
                sigma = sigma + basis.scale(s[i][j])
    sigma = sigma.simplified()

    lifts = [conn.lift(i) for i in range(b)]
    pi20 = MultivectorField.zero(fol.chart, 2)
    for i in range(b):
        for j in range(i + 1, b):
            wij = a[j][i]  # W = A^T
            if not wij.is_zero():
                pi20 = pi20 + lifts[i].wedge(lifts[j]).scale(wij)
    p = (pi - pi20).simplified()
    ctx = conn.context()
    if not is_vertical_multivector(p, ctx):
        raise ArithmeticError("mixed-degree remainder; adapted splitting failed")

    gd = GeometricData(conn, sigma, p)
    gd, results = structure_eq_check(gd)
    if gd.integrable != "verified":
        bad = [r.check for r in results if not r.passed]
        raise ArithmeticError(
            f"structure equations fail on extracted data ({', '.join(bad)}); "
            "this contradicts the Jacobi identity and signals a convention bug"
        )
    return gd


def data_to_dirac(gd: GeometricData) -> DiracFrame:
    """The Dirac frame {(h_i, -i_{h_i} sigma)} + {(P# eta_j, eta_j)}."""
    gd.require_verified("data_to_dirac")
    conn = gd.conn
    ctx = conn.context()
    sections: List[DiracSection] = []
    for i in range(ctx.b):
        hi = conn.lift(i)
        sections.append(DiracSection(hi, (-interior_product(hi, gd.sigma)).simplified()))
    for j in range(ctx.f):
        ej = conn.eta(j)
        sections.append(DiracSection(sharp_bivector(gd.p, ej).simplified(), ej))
    return DiracFrame(sections)


def hamiltonian_check(gd: GeometricData, x: MultivectorField, f: RationalFn) -> bool:
    """Is (x, f) a Hamiltonian pair for the coupling Dirac structure?

    Requires the vertical part of x to be the fiberwise Hamiltonian field of
    f and the horizontal part to satisfy i_X sigma = -(horizontal df).
    """
    if x.degree != 1 or x.chart != gd.conn.chart:
        raise ValueError("expects a vector field on the data chart")
    proj = gd.conn.projector()
    x01 = proj.apply(x)
    x10 = (x - x01).simplified()
    chart = gd.conn.chart
    if x01.simplified() != sharp_bivector(gd.p, d_scalar(f, chart)).simplified():
        return False
    lhs = interior_product(x10, gd.sigma).simplified()
    rhs = (-d10_scalar(gd.conn, f)).simplified()
    return lhs == rhs


def is_horizontal_one_form(q: DifferentialForm, ctx: BigradeContext) -> bool:
    return q.degree == 1 and is_horizontal_form(q, ctx)


def q_gauge(gd: GeometricData, q: DifferentialForm) -> GeometricData:
    """Gauge the geometric data by a horizontal 1-form Q.

    The connection shifts by the fiberwise Hamiltonian fields of the
    coefficients of Q and sigma by the horizontal differential of Q plus half
    the P-pairing of Q with itself:

        new h_i  = h_i + P# d(Q(h_i))
        new sigma(h_i, h_j) = sigma(h_i, h_j) - dQ(h_i, h_j) - {Q(h_i), Q(h_j)}_P

    The result is re-checked against the structure equations.
    """
    gd.require_verified("q_gauge")
    conn = gd.conn
    ctx = conn.context()
    if not is_horizontal_one_form(q, ctx):
        raise ValueError("gauge 1-form must be horizontal (base legs only)")
    chart = conn.chart
    lifts = [conn.lift(i) for i in range(ctx.b)]
    qi = [q.evaluate(lifts[i]) for i in range(ctx.b)]

    new_gamma = [list(row) for row in conn.gamma]
    for i in range(ctx.b):
        xi = sharp_bivector(gd.p, d_scalar(qi[i], chart))
        for (k,), val in xi.comps.items():
            j = ctx.fiber.index(k)
            new_gamma[j][i] = (new_gamma[j][i] + val).simplified()
    new_conn = Connection(conn.fol, new_gamma)

    dq = exterior_derivative(q)
    new_sigma = DifferentialForm.zero(chart, 2)
    for i in range(ctx.b):
        for j in range(i + 1, ctx.b):
            val = (
                gd.sigma.evaluate(lifts[i], lifts[j])
                - dq.evaluate(lifts[i], lifts[j])
                - gd.p_bracket(qi[i], qi[j])
            ).simplified()
            if not val.is_zero():
                basis = DifferentialForm.basis(chart, (ctx.base[i], ctx.base[j]))
                new_sigma = new_sigma + basis.scale(val)

    out = GeometricData(new_conn, new_sigma.simplified(), gd.p)
    out, results = structure_eq_check(out)
    if out.integrable != "verified":
        bad = [r.check for r in results if not r.passed]
        raise ArithmeticError(
            f"gauged data fails structure equations ({', '.join(bad)}); "
            "gauge transformations must preserve them"
        )
    return out
