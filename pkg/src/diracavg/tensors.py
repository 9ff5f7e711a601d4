"""Antisymmetric tensor calculus on a fixed coordinate chart.

Multivector fields and differential forms are stored sparsely: a map from
strictly increasing index tuples to ``RationalFn`` components.  All operations
are coefficient-exact.

Fixed conventions (used consistently across the package):

* ``(u ^ v)(alpha, beta) = alpha(u) beta(v) - alpha(v) beta(u)``.
* Interior product contracts the first slot:
  ``i_alpha (u ^ v) = alpha(u) v - alpha(v) u`` and dually for ``i_X`` on
  forms.  The bivector sharp is ``Pi#(alpha) = i_alpha Pi``.
* The Schouten bracket is computed in odd coordinates:
  ``[[A, B]] = A*B - (-1)^((a-1)(b-1)) B*A`` with
  ``A*B = sum_k d^R_k(A) ^ d_{x_k}(B)`` where ``d^R_k`` is the right
  derivative against the odd generator of slot k.  With this normalization
  ``[[X, B]]`` is the Lie derivative and ``[[X, f]] = X(f)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .config import LIMITS, CapacityError
from .rings import Poly, RationalFn, Scalar

Idx = Tuple[int, ...]
Components = Dict[Idx, RationalFn]

MAX_PUBLIC_DEGREE = 4


@dataclass(frozen=True)
class Chart:
    """An ordered coordinate system on a box domain."""

    coords: Tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("duplicate coordinate names")
        if len(self.coords) > LIMITS.max_variables:
            raise CapacityError(
                f"{len(self.coords)} coordinates exceeds cap {LIMITS.max_variables}"
            )
        for c in self.coords:
            if c.startswith("@"):
                raise ValueError(f"coordinate name {c!r} is reserved")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        return self.coords.index(name)


def sort_with_sign(idx: Sequence[int]) -> Tuple[Optional[Idx], int]:
    """Sort an index tuple, returning (sorted tuple, permutation sign).

    Returns (None, 0) when an index repeats.
    """
    lst = list(idx)
    sign = 1
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(lst, lst[1:]):
        if a == b:
            return None, 0
    return tuple(lst), sign


class _Tensor:
    """Shared implementation for multivectors and forms."""

    kind = "?"

    def __init__(self, chart: Chart, degree: int, comps: Components):
        if degree < 0:
            raise ValueError("negative degree")
        self.chart = chart
        self.degree = degree
        self.comps: Components = {}
        for idx, val in comps.items():
            if len(idx) != degree:
                raise ValueError("index tuple length does not match degree")
            if any(i < 0 or i >= chart.dim for i in idx):
                raise ValueError("index out of range")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError("index tuples must be strictly increasing")
            if not val.is_zero():
                self.comps[idx] = val

    # -- generic helpers --------------------------------------------------

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "_Tensor":
        return cls(chart, degree, {})

    @classmethod
    def from_scalar(cls, chart: Chart, f: Union[RationalFn, Poly, int, Fraction]) -> "_Tensor":
        return cls(chart, 0, {(): RationalFn.of(f)})

    @classmethod
    def basis(cls, chart: Chart, idx: Sequence[int]) -> "_Tensor":
        srt, sign = sort_with_sign(tuple(idx))
        if srt is None:
            return cls(chart, len(idx), {})
        return cls(chart, len(idx), {srt: RationalFn.const(sign)})

    def component(self, idx: Sequence[int]) -> RationalFn:
        """Signed component lookup for an arbitrary index tuple."""
        srt, sign = sort_with_sign(tuple(idx))
        if srt is None:
            return RationalFn.zero()
        val = self.comps.get(srt)
        if val is None:
            return RationalFn.zero()
        return val if sign == 1 else -val

    def is_zero(self) -> bool:
        return not self.comps

    def scalar_value(self) -> RationalFn:
        if self.degree != 0:
            raise ValueError("not a degree-0 tensor")
        return self.comps.get((), RationalFn.zero())

    def _require_same(self, other: "_Tensor") -> None:
        if self.chart != other.chart:
            raise ValueError("tensors live on different charts")
        if self.kind != other.kind:
            raise ValueError("tensor kinds differ")

    def __add__(self, other: "_Tensor") -> "_Tensor":
        self._require_same(other)
        if self.degree != other.degree:
            raise ValueError("degrees differ")
        out = dict(self.comps)
        for idx, val in other.comps.items():
            cur = out.get(idx)
            s = val if cur is None else cur + val
            if s.is_zero():
                out.pop(idx, None)
            else:
                out[idx] = s
        return type(self)(self.chart, self.degree, out)

    def __neg__(self) -> "_Tensor":
        return type(self)(
            self.chart, self.degree, {i: -v for i, v in self.comps.items()}
        )

    def __sub__(self, other: "_Tensor") -> "_Tensor":
        return self + (-other)

    def scale(self, f: Union[RationalFn, Poly, int, Fraction]) -> "_Tensor":
        f = RationalFn.of(f)
        if f.is_zero():
            return type(self)(self.chart, self.degree, {})
        return type(self)(
            self.chart, self.degree, {i: v * f for i, v in self.comps.items()}
        )

    def simplified(self) -> "_Tensor":
        return type(self)(
            self.chart, self.degree, {i: v.simplified() for i, v in self.comps.items()}
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _Tensor):
            return NotImplemented
        if self.kind != other.kind or self.chart != other.chart:
            return False
        if self.degree != other.degree:
            return False
        keys = set(self.comps) | set(other.comps)
        zero = RationalFn.zero()
        return all(
            self.comps.get(k, zero) == other.comps.get(k, zero) for k in keys
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.chart, self.degree, frozenset(self.comps)))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(deg={self.degree}, {self.comps!r})"

    # -- wedge ------------------------------------------------------------

    def wedge(self, other: "_Tensor") -> "_Tensor":
        self._require_same(other)
        out: Components = {}
        for ia, va in self.comps.items():
            for ib, vb in other.comps.items():
                srt, sign = sort_with_sign(ia + ib)
                if srt is None:
                    continue
                val = va * vb
                if sign == -1:
                    val = -val
                cur = out.get(srt)
                s = val if cur is None else cur + val
                if s.is_zero():
                    out.pop(srt, None)
                else:
                    out[srt] = s
        return type(self)(self.chart, self.degree + other.degree, out)

    # -- evaluation -------------------------------------------------------

    def evaluate(self, *args: "_Tensor") -> RationalFn:
        """Full contraction with ``degree`` arguments of the dual kind.

        Each argument must be a degree-1 tensor of the opposite kind.  Uses
        the determinant pairing fixed by the wedge convention.
        """
        if len(args) != self.degree:
            raise ValueError("argument count must equal tensor degree")
        for a in args:
            if a.degree != 1 or a.kind == self.kind:
                raise ValueError("arguments must be degree-1 duals")
        if self.degree == 0:
            return self.scalar_value()
        total = RationalFn.zero()
        for idx, val in self.comps.items():
            det = RationalFn.zero()
            for perm in itertools.permutations(range(self.degree)):
                sign = _perm_sign(perm)
                prod = RationalFn.const(sign)
                ok = True
                for row, col in enumerate(perm):
                    entry = args[row].comps.get((idx[col],))
                    if entry is None:
                        ok = False
                        break
                    prod = prod * entry
                if ok:
                    det = det + prod
            if not det.is_zero():
                total = total + val * det
        return total.simplified()


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class MultivectorField(_Tensor):
    kind = "multivector"


class DifferentialForm(_Tensor):
    kind = "form"


def vector_field(chart: Chart, comps: Mapping[int, object]) -> MultivectorField:
    return MultivectorField(
        chart, 1, {(i,): RationalFn.of(v) for i, v in comps.items()}
    )


def one_form(chart: Chart, comps: Mapping[int, object]) -> DifferentialForm:
    return DifferentialForm(
        chart, 1, {(i,): RationalFn.of(v) for i, v in comps.items()}
    )


def check_public_degree(degree: int) -> None:
    if degree > MAX_PUBLIC_DEGREE:
        raise CapacityError(
            f"tensor degree {degree} exceeds supported degree {MAX_PUBLIC_DEGREE}"
        )


# ----------------------------------------------------------------------
# contraction, sharp
# ----------------------------------------------------------------------


def interior_product(first: _Tensor, t: _Tensor) -> _Tensor:
    """First-slot contraction ``i_first t``.

    ``first`` is a vector field when ``t`` is a form, or a 1-form when ``t``
    is a multivector.
    """
    if first.degree != 1:
        raise ValueError("interior product expects a degree-1 first argument")
    if first.kind == t.kind:
        raise ValueError("interior product needs dual kinds")
    if first.chart != t.chart:
        raise ValueError("charts differ")
    if t.degree == 0:
        raise ValueError("cannot contract a degree-0 tensor")
    out: Components = {}
    for idx, val in t.comps.items():
        for pos, j in enumerate(idx):
            w = first.comps.get((j,))
            if w is None:
                continue
            rest = idx[:pos] + idx[pos + 1 :]
            contrib = w * val
            if pos % 2 == 1:
                contrib = -contrib
            cur = out.get(rest)
            s = contrib if cur is None else cur + contrib
            if s.is_zero():
                out.pop(rest, None)
            else:
                out[rest] = s
    return type(t)(t.chart, t.degree - 1, out)


def sharp_bivector(pi: MultivectorField, alpha: DifferentialForm) -> MultivectorField:
    """``Pi#(alpha) = i_alpha Pi`` for a bivector field."""
    if pi.degree != 2:
        raise ValueError("sharp expects a bivector")
    if alpha.degree != 1:
        raise ValueError("sharp expects a 1-form")
    return interior_product(alpha, pi)


def sharp_two_form(b: DifferentialForm, x: MultivectorField) -> DifferentialForm:
    """``B#(X) = i_X B`` for a 2-form."""
    if b.degree != 2 or x.degree != 1:
        raise ValueError("expects a 2-form and a vector field")
    return interior_product(x, b)


def sharp_matrix(pi: MultivectorField) -> List[List[RationalFn]]:
    """Matrix of Pi# on components: (Pi# a)^j = sum_i a_i M[j][i]."""
    if pi.degree != 2:
        raise ValueError("expects a bivector")
    n = pi.chart.dim
    return [[pi.component((i, j)) for i in range(n)] for j in range(n)]


def flat_matrix(b: DifferentialForm) -> List[List[RationalFn]]:
    """Matrix of B# on components: (i_X B)_j = sum_i X^i M[j][i]."""
    if b.degree != 2:
        raise ValueError("expects a 2-form")
    n = b.chart.dim
    return [[b.component((i, j)) for i in range(n)] for j in range(n)]


# ----------------------------------------------------------------------
# exterior derivative, Lie derivative, Schouten bracket
# ----------------------------------------------------------------------


def exterior_derivative(beta: DifferentialForm) -> DifferentialForm:
    chart = beta.chart
    out: Components = {}
    for idx, val in beta.comps.items():
        for i, name in enumerate(chart.coords):
            dval = val.diff(name)
            if dval.is_zero():
                continue
            srt, sign = sort_with_sign((i,) + idx)
            if srt is None:
                continue
            contrib = dval if sign == 1 else -dval
            cur = out.get(srt)
            s = contrib if cur is None else cur + contrib
            if s.is_zero():
                out.pop(srt, None)
            else:
                out[srt] = s
    return DifferentialForm(chart, beta.degree + 1, out)


def apply_vector(x: MultivectorField, f: RationalFn) -> RationalFn:
    """Directional derivative X(f)."""
    if x.degree != 1:
        raise ValueError("expects a vector field")
    out = RationalFn.zero()
    for (i,), xi in x.comps.items():
        df = f.diff(x.chart.coords[i])
        if not df.is_zero():
            out = out + xi * df
    return out.simplified()


def lie_derivative_multivector(x: MultivectorField, t: MultivectorField) -> MultivectorField:
    """L_X T computed leg by leg with [X, d_j] = -(d_j X^l) d_l."""
    if x.degree != 1:
        raise ValueError("expects a vector field")
    chart = x.chart
    out = MultivectorField.zero(chart, t.degree)
    dX: Dict[Tuple[int, int], RationalFn] = {}
    for (l,), xl in x.comps.items():
        for j, name in enumerate(chart.coords):
            d = xl.diff(name)
            if not d.is_zero():
                dX[(j, l)] = d
    for idx, val in t.comps.items():
        # transport of the coefficient
        xv = apply_vector(x, val)
        if not xv.is_zero():
            out = out + MultivectorField(chart, t.degree, {idx: xv})
        # transport of each leg
        for pos, j in enumerate(idx):
            for (jj, l), d in dX.items():
                if jj != j:
                    continue
                new_idx = idx[:pos] + (l,) + idx[pos + 1 :]
                srt, sign = sort_with_sign(new_idx)
                if srt is None:
                    continue
                contrib = val * d
                if sign == -1:
                    contrib = -contrib
                out = out - MultivectorField(chart, t.degree, {srt: contrib})
    return out.simplified()


def lie_derivative(x: MultivectorField, t: Union[_Tensor, RationalFn]) -> Union[_Tensor, RationalFn]:
    """Lie derivative along a vector field of a scalar, form or multivector."""
    if isinstance(t, RationalFn):
        return apply_vector(x, t)
    if isinstance(t, MultivectorField):
        if t.degree == 0:
            return MultivectorField.from_scalar(t.chart, apply_vector(x, t.scalar_value()))
        return lie_derivative_multivector(x, t)
    if isinstance(t, DifferentialForm):
        if t.degree == 0:
            return DifferentialForm.from_scalar(t.chart, apply_vector(x, t.scalar_value()))
        # Cartan formula
        a = interior_product(x, exterior_derivative(t))
        b = exterior_derivative(interior_product(x, t))
        return (a + b).simplified()
    raise TypeError(f"unsupported operand {type(t).__name__}")


def _d_scalar(f: RationalFn, chart: Chart) -> DifferentialForm:
    comps: Components = {}
    for i, name in enumerate(chart.coords):
        d = f.diff(name)
        if not d.is_zero():
            comps[(i,)] = d
    return DifferentialForm(chart, 1, comps)


def d_scalar(f: Union[RationalFn, Poly], chart: Chart) -> DifferentialForm:
    """Exterior derivative of a scalar function as a 1-form."""
    return _d_scalar(RationalFn.of(f), chart)


def _xi_right_derivative(t: MultivectorField, k: int) -> MultivectorField:
    """Right derivative against the odd generator of coordinate slot k."""
    out: Components = {}
    a = t.degree
    for idx, val in t.comps.items():
        if k not in idx:
            continue
        m = idx.index(k)  # zero-based position
        rest = idx[:m] + idx[m + 1 :]
        sign = 1 if (a - (m + 1)) % 2 == 0 else -1
        contrib = val if sign == 1 else -val
        cur = out.get(rest)
        s = contrib if cur is None else cur + contrib
        out[rest] = s
    return MultivectorField(t.chart, a - 1, {i: v for i, v in out.items() if not v.is_zero()})


def _x_derivative(t: MultivectorField, name: str) -> MultivectorField:
    return MultivectorField(
        t.chart,
        t.degree,
        {i: v.diff(name) for i, v in t.comps.items() if not v.diff(name).is_zero()},
    )


def _schouten_half(a: MultivectorField, b: MultivectorField) -> MultivectorField:
    chart = a.chart
    out = MultivectorField.zero(chart, a.degree + b.degree - 1)
    if a.degree == 0:
        return out
    for k, name in enumerate(chart.coords):
        da = _xi_right_derivative(a, k)
        if da.is_zero():
            continue
        db = _x_derivative(b, name)
        if db.is_zero():
            continue
        out = out + da.wedge(db)
    return out


def schouten_bracket(a: MultivectorField, b: MultivectorField) -> MultivectorField:
    """Schouten bracket [[A, B]] of multivector fields.

    Degree is a + b - 1; for vector fields this is the Lie bracket, and
    [[Pi, Pi]] = 0 is the Jacobi identity for the bivector Pi.
    """
    if a.chart != b.chart:
        raise ValueError("charts differ")
    if a.degree + b.degree == 0:
        return MultivectorField.zero(a.chart, 0)
    first = _schouten_half(a, b)
    second = _schouten_half(b, a)
    sign = -1 if ((a.degree - 1) * (b.degree - 1)) % 2 == 0 else 1
    # [[A,B]] = A*B - (-1)^((a-1)(b-1)) B*A
    if sign == -1:
        return (first - second).simplified()
    return (first + second).simplified()


def vf_bracket(x: MultivectorField, y: MultivectorField) -> MultivectorField:
    """Lie bracket of vector fields."""
    if x.degree != 1 or y.degree != 1:
        raise ValueError("expects vector fields")
    return lie_derivative_multivector(x, y)


# ----------------------------------------------------------------------
# vector-valued forms
# ----------------------------------------------------------------------


class VectorValued1Form:
    """A (1,1)-tensor K: TM -> TM stored as a matrix K[i][j] = dx_i(K(d_j))."""

    def __init__(self, chart: Chart, matrix: Sequence[Sequence[object]]):
        n = chart.dim
        if len(matrix) != n or any(len(r) != n for r in matrix):
            raise ValueError("matrix shape must match chart dimension")
        self.chart = chart
        self.matrix: List[List[RationalFn]] = [
            [RationalFn.of(x) for x in row] for row in matrix
        ]

    @staticmethod
    def zero(chart: Chart) -> "VectorValued1Form":
        n = chart.dim
        return VectorValued1Form(chart, [[RationalFn.zero()] * n for _ in range(n)])

    @staticmethod
    def identity(chart: Chart) -> "VectorValued1Form":
        n = chart.dim
        return VectorValued1Form(
            chart, [[RationalFn.const(1 if i == j else 0) for j in range(n)] for i in range(n)]
        )

    def column(self, j: int) -> MultivectorField:
        """K(d_j) as a vector field."""
        return vector_field(
            self.chart, {i: self.matrix[i][j] for i in range(self.chart.dim)}
        )

    def apply(self, x: MultivectorField) -> MultivectorField:
        if x.degree != 1:
            raise ValueError("expects a vector field")
        comps: Dict[int, RationalFn] = {}
        for (j,), xj in x.comps.items():
            for i in range(self.chart.dim):
                kij = self.matrix[i][j]
                if kij.is_zero():
                    continue
                comps[i] = comps.get(i, RationalFn.zero()) + kij * xj
        return vector_field(self.chart, {i: v.simplified() for i, v in comps.items()})

    def compose(self, other: "VectorValued1Form") -> "VectorValued1Form":
        n = self.chart.dim
        out = [[RationalFn.zero()] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                s = RationalFn.zero()
                for k in range(n):
                    a, b = self.matrix[i][k], other.matrix[k][j]
                    if not (a.is_zero() or b.is_zero()):
                        s = s + a * b
                out[i][j] = s.simplified()
        return VectorValued1Form(self.chart, out)

    def __add__(self, other: "VectorValued1Form") -> "VectorValued1Form":
        return VectorValued1Form(
            self.chart,
            [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(self.matrix, other.matrix)],
        )

    def __sub__(self, other: "VectorValued1Form") -> "VectorValued1Form":
        return VectorValued1Form(
            self.chart,
            [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(self.matrix, other.matrix)],
        )

    def __neg__(self) -> "VectorValued1Form":
        return VectorValued1Form(self.chart, [[-x for x in row] for row in self.matrix])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorValued1Form):
            return NotImplemented
        return self.chart == other.chart and all(
            x == y
            for ra, rb in zip(self.matrix, other.matrix)
            for x, y in zip(ra, rb)
        )

    def __hash__(self) -> int:
        return hash((self.chart, tuple(tuple(r) for r in self.matrix)))

    def is_projection(self) -> bool:
        return self.compose(self) == self


class VectorValued2Form:
    """An antisymmetric TM x TM -> TM tensor, stored on increasing pairs."""

    def __init__(self, chart: Chart, values: Mapping[Tuple[int, int], MultivectorField]):
        self.chart = chart
        self.values: Dict[Tuple[int, int], MultivectorField] = {}
        for (i, j), v in values.items():
            if not i < j:
                raise ValueError("keys must be increasing pairs")
            if not v.is_zero():
                self.values[(i, j)] = v

    def evaluate(self, u: MultivectorField, v: MultivectorField) -> MultivectorField:
        out = MultivectorField.zero(self.chart, 1)
        for (i, j), vec in self.values.items():
            ui = u.comps.get((i,), RationalFn.zero())
            uj = u.comps.get((j,), RationalFn.zero())
            vi = v.comps.get((i,), RationalFn.zero())
            vj = v.comps.get((j,), RationalFn.zero())
            coeff = ui * vj - uj * vi
            if not coeff.is_zero():
                out = out + vec.scale(coeff)
        return out.simplified()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorValued2Form):
            return NotImplemented
        keys = set(self.values) | set(other.values)
        zero = MultivectorField.zero(self.chart, 1)
        return all(
            self.values.get(k, zero) == other.values.get(k, zero) for k in keys
        )

    def __sub__(self, other: "VectorValued2Form") -> "VectorValued2Form":
        keys = set(self.values) | set(other.values)
        zero = MultivectorField.zero(self.chart, 1)
        return VectorValued2Form(
            self.chart,
            {k: self.values.get(k, zero) - other.values.get(k, zero) for k in keys},
        )

    def is_zero(self) -> bool:
        return not self.values


def fn_bracket(k: VectorValued1Form, l: VectorValued1Form) -> VectorValued2Form:
    """Bracket of vector-valued 1-forms, evaluated on the coordinate frame.

    On coordinate fields X = d_i, Y = d_j the last term (K L + L K)[X, Y]
    vanishes, leaving

        [K, L](d_i, d_j) = [K d_i, L d_j] - [K d_j, L d_i]
                           - L([K d_i, d_j] - [K d_j, d_i])
                           - K([L d_i, d_j] - [L d_j, d_i])
    """
    if k.chart != l.chart:
        raise ValueError("charts differ")
    chart = k.chart
    n = chart.dim
    kcols = [k.column(j) for j in range(n)]
    lcols = [l.column(j) for j in range(n)]
    basis = [vector_field(chart, {i: RationalFn.const(1)}) for i in range(n)]
    out: Dict[Tuple[int, int], MultivectorField] = {}
    for i in range(n):
        for j in range(i + 1, n):
            term = vf_bracket(kcols[i], lcols[j]) - vf_bracket(kcols[j], lcols[i])
            term = term - l.apply(vf_bracket(kcols[i], basis[j]) - vf_bracket(kcols[j], basis[i]))
            term = term - k.apply(vf_bracket(lcols[i], basis[j]) - vf_bracket(lcols[j], basis[i]))
            term = term.simplified()
            if not term.is_zero():
                out[(i, j)] = term
    return VectorValued2Form(chart, out)


# ----------------------------------------------------------------------
# bigrading against a foliated chart with a connection
# ----------------------------------------------------------------------


class BigradeContext:
    """Horizontal/vertical splitting data for a foliated chart.

    ``base`` and ``fiber`` are disjoint coordinate index tuples covering the
    chart.  ``gamma[j][i]`` is the fiber-j component of the lift of the i-th
    base coordinate field, so the lifted frame is

        h_i = d_{base[i]} + sum_j gamma[j][i] d_{fiber[j]}.

    A (p, q) tensor has p base-type legs and q fiber-type legs in the frame
    (dx_i, eta_j = dy_j - sum_i gamma[j][i] dx_i) and dually (h_i, d_{y_j}).
    """

    def __init__(
        self,
        chart: Chart,
        base: Sequence[int],
        fiber: Sequence[int],
        gamma: Sequence[Sequence[object]],
    ):
        if sorted(tuple(base) + tuple(fiber)) != list(range(chart.dim)):
            raise ValueError("base and fiber must partition the chart indices")
        self.chart = chart
        self.base = tuple(base)
        self.fiber = tuple(fiber)
        f, b = len(self.fiber), len(self.base)
        if len(gamma) != f or any(len(r) != b for r in gamma):
            raise ValueError("gamma must be a fiber x base matrix")
        self.gamma: List[List[RationalFn]] = [
            [RationalFn.of(x) for x in row] for row in gamma
        ]

    @property
    def b(self) -> int:
        return len(self.base)

    @property
    def f(self) -> int:
        return len(self.fiber)

    def lift(self, i: int) -> MultivectorField:
        comps: Dict[int, RationalFn] = {self.base[i]: RationalFn.const(1)}
        for j in range(self.f):
            g = self.gamma[j][i]
            if not g.is_zero():
                comps[self.fiber[j]] = g
        return vector_field(self.chart, comps)

    def vertical(self, j: int) -> MultivectorField:
        return vector_field(self.chart, {self.fiber[j]: RationalFn.const(1)})

    def dx(self, i: int) -> DifferentialForm:
        return one_form(self.chart, {self.base[i]: RationalFn.const(1)})

    def eta(self, j: int) -> DifferentialForm:
        comps: Dict[int, RationalFn] = {self.fiber[j]: RationalFn.const(1)}
        for i in range(self.b):
            g = self.gamma[j][i]
            if not g.is_zero():
                comps[self.base[i]] = -g
        return one_form(self.chart, comps)

    def vertical_projector(self) -> VectorValued1Form:
        """The projection onto the fiber directions along the lifted frame."""
        n = self.chart.dim
        m = [[RationalFn.zero() for _ in range(n)] for _ in range(n)]
        for j in range(self.f):
            m[self.fiber[j]][self.fiber[j]] = RationalFn.const(1)
            for i in range(self.b):
                g = self.gamma[j][i]
                if not g.is_zero():
                    m[self.fiber[j]][self.base[i]] = -g
        return VectorValued1Form(self.chart, m)


def bigrade_decompose(
    t: _Tensor, ctx: BigradeContext
) -> Dict[Tuple[int, int], _Tensor]:
    """Split a tensor into its (p, q) parts (p base legs, q fiber legs).

    The parts are returned in coordinate components; they sum to ``t``.
    """
    if t.chart != ctx.chart:
        raise ValueError("charts differ")
    k = t.degree
    out: Dict[Tuple[int, int], _Tensor] = {}
    if k == 0:
        if not t.is_zero():
            out[(0, 0)] = t
        return out
    is_form = isinstance(t, DifferentialForm)
    for p in range(0, k + 1):
        q = k - p
        if p > ctx.b or q > ctx.f:
            continue
        part = type(t).zero(ctx.chart, k)
        for bi in itertools.combinations(range(ctx.b), p):
            for fj in itertools.combinations(range(ctx.f), q):
                if is_form:
                    args = [ctx.lift(i) for i in bi] + [ctx.vertical(j) for j in fj]
                    basis_factors = [ctx.dx(i) for i in bi] + [ctx.eta(j) for j in fj]
                else:
                    args = [ctx.dx(i) for i in bi] + [ctx.eta(j) for j in fj]
                    basis_factors = [ctx.lift(i) for i in bi] + [ctx.vertical(j) for j in fj]
                coeff = t.evaluate(*args)
                if coeff.is_zero():
                    continue
                basis = type(t).from_scalar(ctx.chart, 1)
                for fct in basis_factors:
                    basis = basis.wedge(fct)
                part = part + basis.scale(coeff)
        if not part.is_zero():
            out[(p, q)] = part.simplified()
    return out


def d_decompose(
    beta: DifferentialForm, ctx: BigradeContext
) -> Dict[str, DifferentialForm]:
    """Split d(beta) into its three bidegree shifts.

    Returns components named "d10" (shift (+1, 0)), "d2m1" (shift (+2, -1))
    and "d01" (shift (0, +1)).  Their sum is d(beta); any component of d at a
    different shift would violate the derivation structure and raises.
    """
    chart = beta.chart
    k1 = beta.degree + 1
    acc = {
        "d10": DifferentialForm.zero(chart, k1),
        "d2m1": DifferentialForm.zero(chart, k1),
        "d01": DifferentialForm.zero(chart, k1),
    }
    for (p, q), part in bigrade_decompose(beta, ctx).items():
        dpart = exterior_derivative(part)
        for (pp, qq), piece in bigrade_decompose(dpart, ctx).items():
            shift = (pp - p, qq - q)
            if shift == (1, 0):
                acc["d10"] = acc["d10"] + piece
            elif shift == (2, -1):
                acc["d2m1"] = acc["d2m1"] + piece
            elif shift == (0, 1):
                acc["d01"] = acc["d01"] + piece
            else:
                raise ArithmeticError(
                    f"unexpected bidegree shift {shift} in exterior derivative"
                )
    total = acc["d10"] + acc["d2m1"] + acc["d01"]
    if total != exterior_derivative(beta):
        raise ArithmeticError("bigraded pieces do not reassemble d(beta)")
    return acc


def is_horizontal_form(t: DifferentialForm, ctx: BigradeContext) -> bool:
    """True when every leg is a base-coordinate leg (no dy components)."""
    fiber = set(ctx.fiber)
    return all(not (set(idx) & fiber) for idx in t.comps)


def is_vertical_multivector(t: MultivectorField, ctx: BigradeContext) -> bool:
    base = set(ctx.base)
    return all(not (set(idx) & base) for idx in t.comps)


def d10_horizontal(beta: DifferentialForm, ctx: BigradeContext) -> DifferentialForm:
    """Covariant horizontal differential of a base-leg form.

    Defined by evaluating d(beta) on tuples of lifted frame fields; the result
    again has only base legs.
    """
    if not is_horizontal_form(beta, ctx):
        raise ValueError("form must have only base-coordinate legs")
    dbeta = exterior_derivative(beta)
    k1 = beta.degree + 1
    out = DifferentialForm.zero(ctx.chart, k1)
    for bi in itertools.combinations(range(ctx.b), k1):
        coeff = dbeta.evaluate(*[ctx.lift(i) for i in bi])
        if coeff.is_zero():
            continue
        basis = DifferentialForm.from_scalar(ctx.chart, 1)
        for i in bi:
            basis = basis.wedge(ctx.dx(i))
        out = out + basis.scale(coeff)
    return out.simplified()
