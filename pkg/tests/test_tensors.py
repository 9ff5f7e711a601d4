"""Antisymmetric tensor calculus: wedge, d, contractions, graded brackets."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from diracavg.config import CapacityError
from diracavg.rings import Poly, RationalFn
from diracavg.tensors import (
    BigradeContext,
    Chart,
    DifferentialForm,
    MultivectorField,
    VectorValued1Form,
    apply_vector,
    bigrade_decompose,
    check_public_degree,
    d_decompose,
    d_scalar,
    exterior_derivative,
    flat_matrix,
    fn_bracket,
    interior_product,
    lie_derivative,
    one_form,
    schouten_bracket,
    sharp_bivector,
    sharp_matrix,
    sharp_two_form,
    sort_with_sign,
    vector_field,
    vf_bracket,
)

from conftest import CHART4, frac_point, rand_poly, rand_rational


def _rand_form(rng, chart, degree, poly_degree=2):
    import itertools

    comps = {}
    for idx in itertools.combinations(range(chart.dim), degree):
        if rng.random() < 0.6:
            comps[idx] = RationalFn.from_poly(rand_poly(rng, chart.coords, poly_degree))
    return DifferentialForm(chart, degree, comps)


def _rand_mv(rng, chart, degree, poly_degree=2):
    import itertools

    comps = {}
    for idx in itertools.combinations(range(chart.dim), degree):
        if rng.random() < 0.6:
            comps[idx] = RationalFn.from_poly(rand_poly(rng, chart.coords, poly_degree))
    return MultivectorField(chart, degree, comps)


def test_sort_with_sign():
    assert sort_with_sign((0, 1, 2)) == ((0, 1, 2), 1)
    assert sort_with_sign((1, 0)) == ((0, 1), -1)
    assert sort_with_sign((2, 0, 1)) == ((0, 1, 2), 1)
    assert sort_with_sign((0, 0)) == (None, 0)


def test_component_lookup_is_antisymmetric():
    dx = DifferentialForm.basis(CHART4, (0, 1))
    assert dx.component((0, 1)) == RationalFn.const(1)
    assert dx.component((1, 0)) == RationalFn.const(-1)
    assert dx.component((0, 2)).is_zero()
    assert dx.component((0, 0)).is_zero()


def test_wedge_antisymmetry_and_associativity():
    rng = random.Random(31)
    a = _rand_form(rng, CHART4, 1)
    b = _rand_form(rng, CHART4, 1)
    c = _rand_form(rng, CHART4, 2)
    assert a.wedge(b) == -(b.wedge(a))
    assert a.wedge(a).is_zero()
    assert (a.wedge(b)).wedge(c) == a.wedge(b.wedge(c))
    # even-degree factors commute
    assert c.wedge(a.wedge(b)) == (a.wedge(b)).wedge(c)


def test_form_evaluation():
    chart = CHART4
    w = DifferentialForm.basis(chart, (0, 1))
    e0 = vector_field(chart, {0: 1})
    e1 = vector_field(chart, {1: 1})
    assert w.evaluate(e0, e1) == RationalFn.const(1)
    assert w.evaluate(e1, e0) == RationalFn.const(-1)
    assert w.evaluate(e0, e0).is_zero()


def test_interior_product_rules():
    rng = random.Random(32)
    chart = CHART4
    x = _rand_mv(rng, chart, 1)
    a = _rand_form(rng, chart, 1)
    b = _rand_form(rng, chart, 2)
    # degree-1 insertions square to zero
    assert interior_product(x, interior_product(x, b)).is_zero()
    # graded product rule on a wedge of a 1-form and a 2-form
    lhs = interior_product(x, a.wedge(b))
    rhs = b.scale(a.evaluate(x)) - a.wedge(interior_product(x, b))
    assert lhs == rhs


def test_sharp_and_flat_conventions():
    chart = Chart(("x", "y"))
    pi = MultivectorField(chart, 2, {(0, 1): RationalFn.const(1)})
    dx = DifferentialForm.basis(chart, (0,))
    dy = DifferentialForm.basis(chart, (1,))
    # the anchor inserts the covector into the first slot
    assert sharp_bivector(pi, dx) == vector_field(chart, {1: 1})
    assert sharp_bivector(pi, dy) == vector_field(chart, {0: -1})
    sm = sharp_matrix(pi)
    assert sm[1][0] == RationalFn.const(1) and sm[0][1] == RationalFn.const(-1)
    w = DifferentialForm(chart, 2, {(0, 1): RationalFn.const(1)})
    fm = flat_matrix(w)
    assert fm[1][0] == RationalFn.const(1) and fm[0][1] == RationalFn.const(-1)
    ex = vector_field(chart, {0: 1})
    assert sharp_two_form(w, ex) == dy


def test_symplectic_inverse_pairing():
    # with both maps inserting into the first slot, flat(w) o sharp(pi) = -id
    # when pi has the same components as w
    chart = CHART4
    w = DifferentialForm(chart, 2, {(0, 1): RationalFn.const(1), (2, 3): RationalFn.const(1)})
    pi = MultivectorField(chart, 2, {(0, 1): RationalFn.const(1), (2, 3): RationalFn.const(1)})
    from diracavg.linalg import identity, mat_mul, mat_scale

    prod = mat_mul(flat_matrix(w), sharp_matrix(pi))
    assert prod == mat_scale(identity(4), RationalFn.const(-1))


def test_exterior_derivative_known_value_and_nilpotency():
    chart = CHART4
    x1 = RationalFn.var("x1")
    a = one_form(chart, {1: x1})  # x1 dx2
    da = exterior_derivative(a)
    assert da == DifferentialForm(chart, 2, {(0, 1): RationalFn.const(1)})
    rng = random.Random(33)
    for _ in range(12):
        b = _rand_form(rng, chart, rng.choice((0, 1, 2)))
        assert exterior_derivative(exterior_derivative(b)).is_zero()


def test_exterior_derivative_product_rule_on_scalars():
    rng = random.Random(34)
    chart = CHART4
    f = rand_rational(rng, chart.coords)
    g = rand_rational(rng, chart.coords)
    lhs = d_scalar(f * g, chart)
    assert lhs == d_scalar(f, chart).scale(g) + d_scalar(g, chart).scale(f)


def test_lie_derivative_cartan_formula():
    rng = random.Random(35)
    chart = CHART4
    for _ in range(6):
        x = _rand_mv(rng, chart, 1, 1)
        a = _rand_form(rng, chart, rng.choice((1, 2)), 1)
        lhs = lie_derivative(x, a)
        rhs = interior_product(x, exterior_derivative(a)) + exterior_derivative(
            interior_product(x, a)
        )
        assert lhs == rhs


def test_lie_derivative_on_scalars_is_application():
    rng = random.Random(36)
    chart = CHART4
    x = _rand_mv(rng, chart, 1)
    f = rand_rational(rng, chart.coords)
    assert lie_derivative(x, f) == apply_vector(x, f)


def test_vf_bracket_jacobi_identity():
    rng = random.Random(37)
    chart = CHART4
    x = _rand_mv(rng, chart, 1, 1)
    y = _rand_mv(rng, chart, 1, 1)
    z = _rand_mv(rng, chart, 1, 1)
    jac = (
        vf_bracket(x, vf_bracket(y, z))
        + vf_bracket(y, vf_bracket(z, x))
        + vf_bracket(z, vf_bracket(x, y))
    )
    assert jac.is_zero()


def test_lie_derivative_respects_the_bracket():
    rng = random.Random(38)
    chart = CHART4
    x = _rand_mv(rng, chart, 1, 1)
    y = _rand_mv(rng, chart, 1, 1)
    f = rand_rational(rng, chart.coords, 1)
    lhs = apply_vector(vf_bracket(x, y), f)
    rhs = apply_vector(x, apply_vector(y, f)) - apply_vector(y, apply_vector(x, f))
    assert lhs == rhs


def test_schouten_bracket_degree_one_cases():
    rng = random.Random(39)
    chart = CHART4
    x = _rand_mv(rng, chart, 1, 1)
    y = _rand_mv(rng, chart, 1, 1)
    f = MultivectorField.from_scalar(chart, rand_rational(rng, chart.coords, 1))
    assert schouten_bracket(x, y) == vf_bracket(x, y)
    got = schouten_bracket(x, f)
    assert got.scalar_value() == apply_vector(x, f.scalar_value())


def test_schouten_bracket_graded_antisymmetry():
    rng = random.Random(40)
    chart = CHART4
    for (p, q) in ((1, 2), (2, 2), (1, 1), (2, 3)):
        a = _rand_mv(rng, chart, p, 1)
        b = _rand_mv(rng, chart, q, 1)
        sign = (-1) ** ((p - 1) * (q - 1))
        assert schouten_bracket(a, b) == schouten_bracket(b, a).scale(-sign)


def test_schouten_bracket_leibniz_rule():
    rng = random.Random(41)
    chart = CHART4
    # [X, b wedge c] = [X, b] wedge c + b wedge [X, c] for a vector field X
    x = _rand_mv(rng, chart, 1, 1)
    b = _rand_mv(rng, chart, 1, 1)
    c = _rand_mv(rng, chart, 2, 1)
    lhs = schouten_bracket(x, b.wedge(c))
    rhs = schouten_bracket(x, b).wedge(c) + b.wedge(schouten_bracket(x, c))
    assert lhs == rhs


def test_poisson_condition_for_constant_bivector():
    pi = MultivectorField(
        CHART4, 2, {(0, 1): RationalFn.const(1), (2, 3): RationalFn.const(1)}
    )
    assert schouten_bracket(pi, pi).is_zero()


def test_nonintegrable_bivector_has_nonzero_self_bracket():
    y1 = RationalFn.var("y1")
    pi = MultivectorField(CHART4, 2, {(0, 3): y1, (1, 2): RationalFn.const(1)})
    jac = schouten_bracket(pi, pi)
    assert jac.component((0, 1, 3)) == RationalFn.const(-2)


def test_self_bracket_is_twice_the_cyclic_bracket_sum():
    # [[Pi,Pi]](df,dg,dh) = 2 * sum over cyclic permutations of {f,{g,h}}
    rng = random.Random(42)
    chart = CHART4
    pi = _rand_mv(rng, chart, 2, 1)
    jac = schouten_bracket(pi, pi)

    def pb(f, g):
        return pi.evaluate(d_scalar(f, chart), d_scalar(g, chart))

    for _ in range(4):
        f = rand_rational(rng, chart.coords, 1)
        g = rand_rational(rng, chart.coords, 1)
        h = rand_rational(rng, chart.coords, 1)
        cyc = pb(f, pb(g, h)) + pb(g, pb(h, f)) + pb(h, pb(f, g))
        direct = jac.evaluate(d_scalar(f, chart), d_scalar(g, chart), d_scalar(h, chart))
        assert direct == cyc + cyc


def test_hamiltonian_fields_represent_the_bracket():
    chart = CHART4
    pi = MultivectorField(
        chart, 2, {(0, 1): RationalFn.const(1), (2, 3): RationalFn.const(1)}
    )
    rng = random.Random(43)
    f = rand_rational(rng, chart.coords, 2)
    g = rand_rational(rng, chart.coords, 2)
    xf = sharp_bivector(pi, d_scalar(f, chart))
    assert apply_vector(xf, g) == pi.evaluate(d_scalar(f, chart), d_scalar(g, chart))


def test_vv1_apply_compose_projection():
    chart = CHART4
    k = VectorValued1Form.identity(chart)
    rng = random.Random(44)
    x = _rand_mv(rng, chart, 1, 1)
    assert k.apply(x) == x
    assert k.compose(k) == k
    assert k.is_projection()
    half = VectorValued1Form(
        chart,
        [
            [RationalFn.const(1), RationalFn.zero(), RationalFn.zero(), RationalFn.zero()],
            [RationalFn.zero(), RationalFn.const(1), RationalFn.zero(), RationalFn.zero()],
            [RationalFn.zero()] * 4,
            [RationalFn.zero()] * 4,
        ],
    )
    assert half.is_projection()
    assert half.apply(x) == vector_field(
        chart, {0: x.component((0,)), 1: x.component((1,))}
    )


def test_fn_bracket_of_identity_vanishes():
    chart = CHART4
    k = VectorValued1Form.identity(chart)
    assert fn_bracket(k, k).is_zero()


def test_fn_bracket_detects_nonintegrable_projector():
    # vertical projector whose horizontal complement span(d_x1, d_x2 + x1 d_y1)
    # is not involutive: the self-bracket must see the obstruction
    chart = Chart(("x1", "x2", "y1"))
    x1 = RationalFn.var("x1")
    zero, one = RationalFn.zero(), RationalFn.const(1)
    proj = VectorValued1Form(chart, [[zero, zero, zero], [zero, zero, zero], [zero, -x1, one]])
    assert proj.compose(proj) == proj
    vv2 = fn_bracket(proj, proj)
    assert not vv2.is_zero()
    # a constant-coefficient projector is integrable
    flat = VectorValued1Form(chart, [[zero, zero, zero], [zero, zero, zero], [zero, zero, one]])
    assert fn_bracket(flat, flat).is_zero()


def test_bigrade_decompose_reassembles():
    chart = CHART4
    ctx = BigradeContext(chart, (0, 1), (2, 3), [[0, 0], [0, 0]])
    rng = random.Random(45)
    a = _rand_form(rng, chart, 2)
    parts = bigrade_decompose(a, ctx)
    total = DifferentialForm.zero(chart, 2)
    for piece in parts.values():
        total = total + piece
    assert total == a


def test_d_decompose_parts_sum_to_d():
    chart = CHART4
    ctx = BigradeContext(chart, (0, 1), (2, 3), [[0, 0], [0, 0]])
    rng = random.Random(46)
    a = _rand_form(rng, chart, 1)
    parts = d_decompose(a, ctx)
    total = DifferentialForm.zero(chart, 2)
    for piece in parts.values():
        total = total + piece
    assert total == exterior_derivative(a)


def test_public_degree_cap():
    check_public_degree(4)
    with pytest.raises(CapacityError):
        check_public_degree(5)


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart(("x", "x"))
    c = CHART4
    assert c.dim == 4
    assert c.index("y1") == 2
    with pytest.raises(ValueError):
        c.index("nope")
