"""Exact scalar arithmetic: sparse polynomials, rational functions and
trigonometric polynomials over Q.

Representation choices:

* ``Poly`` stores a sorted tuple of variable names and a dict mapping exponent
  tuples to nonzero ``Fraction`` coefficients.  Variables are kept in sorted
  order so structural equality is canonical; arithmetic on polynomials with
  different variable sets aligns them to the union first.
* ``RationalFn`` is a numerator/denominator pair of ``Poly``.  No gcd
  normalization is performed; equality is decided by cross-multiplication
  (``a*d == c*b``).  A cheap ``simplify`` pass (content, monomial factors,
  exact trial division) keeps sizes reasonable.
* ``TrigPoly`` stores Fourier modes of one flow parameter: a dict mapping
  ``(k, part)`` with ``part`` in ``{"cos", "sin"}`` to ``Poly`` coefficients.
  No complex exponentials are used anywhere.

The reserved variable ``@pi`` (``config.PI``) represents the circle constant
as a formal transcendental, so objects produced by the homotopy operator stay
exact.  Spatial differentiation treats it as a constant.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple, Union

from .config import LIMITS, PI, CapacityError

Exponent = Tuple[int, ...]
Scalar = Union[int, Fraction]

COS = "cos"
SIN = "sin"


def _as_fraction(c: Scalar) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise TypeError(f"expected int or Fraction, got {type(c).__name__}")


class Poly:
    """Sparse multivariate polynomial with exact rational coefficients."""

    __slots__ = ("vars", "terms")

    def __init__(self, variables: Tuple[str, ...], terms: Dict[Exponent, Fraction]):
        # Internal constructor; assumes sorted vars and pruned nonzero terms.
        self.vars = variables
        self.terms = terms

    # -- construction ---------------------------------------------------

    @staticmethod
    def zero() -> "Poly":
        return Poly((), {})

    @staticmethod
    def const(c: Scalar) -> "Poly":
        c = _as_fraction(c)
        if c == 0:
            return Poly.zero()
        return Poly((), {(): c})

    @staticmethod
    def var(name: str) -> "Poly":
        if not name or name.startswith("@") and name != PI:
            raise ValueError(f"invalid variable name {name!r}")
        return Poly((name,), {(1,): Fraction(1)})

    @staticmethod
    def from_terms(
        variables: Sequence[str], terms: Mapping[Exponent, Scalar]
    ) -> "Poly":
        """Public checked constructor: validates names, caps and canonicalizes."""
        vs = tuple(variables)
        if len(set(vs)) != len(vs):
            raise ValueError("duplicate variable names")
        spatial = [v for v in vs if v != PI]
        if len(spatial) > LIMITS.max_variables:
            raise CapacityError(
                f"{len(spatial)} variables exceeds cap {LIMITS.max_variables}"
            )
        out: Dict[Exponent, Fraction] = {}
        for exps, c in terms.items():
            if len(exps) != len(vs):
                raise ValueError("exponent tuple length does not match variables")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")
            deg = sum(e for e, v in zip(exps, vs) if v != PI)
            if deg > LIMITS.max_input_degree:
                raise CapacityError(
                    f"total degree {deg} exceeds cap {LIMITS.max_input_degree}"
                )
            c = _as_fraction(c)
            if c != 0:
                out[tuple(exps)] = out.get(tuple(exps), Fraction(0)) + c
        p = Poly(vs, {e: c for e, c in out.items() if c != 0})
        return p._sorted()

    def _sorted(self) -> "Poly":
        order = tuple(sorted(range(len(self.vars)), key=lambda i: self.vars[i]))
        if order == tuple(range(len(self.vars))):
            return self
        vs = tuple(self.vars[i] for i in order)
        terms = {tuple(e[i] for i in order): c for e, c in self.terms.items()}
        return Poly(vs, terms)

    # -- alignment -------------------------------------------------------

    def aligned_to(self, variables: Tuple[str, ...]) -> "Poly":
        """Reindex onto a sorted superset of this polynomial's variables."""
        if variables == self.vars:
            return self
        pos = {v: i for i, v in enumerate(variables)}
        n = len(variables)
        terms: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            new = [0] * n
            for v, exp in zip(self.vars, e):
                new[pos[v]] = exp
            terms[tuple(new)] = c
        return Poly(variables, terms)

    @staticmethod
    def _merge_vars(a: "Poly", b: "Poly") -> Tuple[str, ...]:
        if a.vars == b.vars:
            return a.vars
        return tuple(sorted(set(a.vars) | set(b.vars)))

    # -- ring operations -------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        vs = Poly._merge_vars(self, other)
        a, b = self.aligned_to(vs), other.aligned_to(vs)
        terms = dict(a.terms)
        for e, c in b.terms.items():
            s = terms.get(e, Fraction(0)) + c
            if s == 0:
                terms.pop(e, None)
            else:
                terms[e] = s
        return Poly(vs, terms)

    def __neg__(self) -> "Poly":
        return Poly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        vs = Poly._merge_vars(self, other)
        a, b = self.aligned_to(vs), other.aligned_to(vs)
        if len(a.terms) > len(b.terms):
            a, b = b, a
        terms: Dict[Exponent, Fraction] = {}
        for ea, ca in a.terms.items():
            for eb, cb in b.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                s = terms.get(e, Fraction(0)) + ca * cb
                if s == 0:
                    terms.pop(e, None)
                else:
                    terms[e] = s
            if len(terms) > LIMITS.max_terms:
                raise CapacityError("polynomial term count exceeded max_terms")
        return Poly(vs, terms)

    def scale(self, c: Scalar) -> "Poly":
        c = _as_fraction(c)
        if c == 0:
            return Poly.zero()
        return Poly(self.vars, {e: c * v for e, v in self.terms.items()})

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power")
        out = Poly.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base_needed = n > 1
            n >>= 1
            if base_needed and n:
                base = base * base
        return out

    # -- queries ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(all(x == 0 for x in e) for e in self.terms)

    def const_value(self) -> Fraction:
        if self.is_zero():
            return Fraction(0)
        if not self.is_const():
            raise ValueError("polynomial is not constant")
        return sum(self.terms.values(), Fraction(0))

    def total_degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        vs = Poly._merge_vars(self, other)
        return self.aligned_to(vs).terms == other.aligned_to(vs).terms

    def __hash__(self) -> int:
        # Hash over a variable-pruned canonical form.
        used = [i for i, v in enumerate(self.vars) if any(e[i] for e in self.terms)]
        vs = tuple(self.vars[i] for i in used)
        items = tuple(
            sorted((tuple(e[i] for i in used), c) for e, c in self.terms.items())
        )
        return hash((vs, items))

    # -- calculus --------------------------------------------------------

    def diff(self, name: str) -> "Poly":
        if name == PI:
            raise ValueError("differentiation against the pi symbol is undefined")
        if name not in self.vars:
            return Poly.zero()
        i = self.vars.index(name)
        terms: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            new = list(e)
            new[i] -= 1
            terms[tuple(new)] = c * e[i]
        return Poly(self.vars, terms)

    def eval_frac(self, point: Mapping[str, Fraction]) -> "Poly":
        """Substitute coordinates by exact values.

        The pi symbol is never substituted here, so the result is a polynomial
        in whatever variables were left unassigned (usually none or ``@pi``).
        """
        keep = [i for i, v in enumerate(self.vars) if v not in point or v == PI]
        vs = tuple(self.vars[i] for i in keep)
        out: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            val = c
            for i, v in enumerate(self.vars):
                if v in point and v != PI and e[i]:
                    val *= _as_fraction(point[v]) ** e[i]
            key = tuple(e[i] for i in keep)
            s = out.get(key, Fraction(0)) + val
            if s == 0:
                out.pop(key, None)
            else:
                out[key] = s
        return Poly(vs, out)

    def eval_float(self, point: Mapping[str, float]) -> float:
        total = 0.0
        for e, c in self.terms.items():
            val = float(c)
            for i, v in enumerate(self.vars):
                if e[i]:
                    x = math.pi if v == PI else point[v]
                    val *= x ** e[i]
            total += val
        return total

    def subst(self, assignment: Mapping[str, "Poly"]) -> "Poly":
        """Polynomial substitution var -> Poly (vars not listed are kept)."""
        out = Poly.zero()
        cache: Dict[Tuple[str, int], Poly] = {}

        def power(v: str, n: int) -> Poly:
            key = (v, n)
            if key not in cache:
                base = assignment.get(v, Poly.var(v))
                cache[key] = base ** n
            return cache[key]

        for e, c in self.terms.items():
            term = Poly.const(c)
            for i, v in enumerate(self.vars):
                if e[i]:
                    term = term * power(v, e[i])
            out = out + term
        return out

    def __repr__(self) -> str:
        if self.is_zero():
            return "Poly(0)"
        bits = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(
                f"{v}^{k}" if k > 1 else v
                for v, k in zip(self.vars, e)
                if k
            )
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " + ".join(bits) + ")"


def poly_gcd_content(p: Poly) -> Fraction:
    """Positive rational content (gcd of numerators / lcm of denominators)."""
    if p.is_zero():
        return Fraction(1)
    num = 0
    den = 1
    for c in p.terms.values():
        num = math.gcd(num, abs(c.numerator))
        den = den * c.denominator // math.gcd(den, c.denominator)
    return Fraction(num, den) if num else Fraction(1)


def _common_monomial(p: Poly) -> Exponent:
    if p.is_zero():
        return ()
    mins = None
    for e in p.terms:
        mins = e if mins is None else tuple(min(a, b) for a, b in zip(mins, e))
    return mins or ()


def _shift_down(p: Poly, mono: Exponent) -> Poly:
    if not any(mono):
        return p
    return Poly(p.vars, {tuple(a - b for a, b in zip(e, mono)): c for e, c in p.terms.items()})


def poly_divmod_exact(num: Poly, den: Poly) -> Union[Poly, None]:
    """Exact multivariate division: returns num/den if remainder-free else None."""
    if den.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if num.is_zero():
        return Poly.zero()
    vs = Poly._merge_vars(num, den)
    a, b = num.aligned_to(vs), den.aligned_to(vs)
    # Leading term of b under graded-lex order.
    def key(e: Exponent) -> Tuple:
        return (sum(e), e)

    lead_b = max(b.terms, key=key)
    cb = b.terms[lead_b]
    q: Dict[Exponent, Fraction] = {}
    r = a
    steps = 0
    limit = 4 * (len(a.terms) + 1) * (len(b.terms) + 1) + 64
    while not r.is_zero():
        steps += 1
        if steps > limit:
            return None
        lead_r = max(r.terms, key=key)
        diff = tuple(x - y for x, y in zip(lead_r, lead_b))
        if any(d < 0 for d in diff):
            return None
        coeff = r.terms[lead_r] / cb
        q[diff] = q.get(diff, Fraction(0)) + coeff
        r = r - Poly(vs, {diff: coeff}) * b
    return Poly(vs, {e: c for e, c in q.items() if c != 0})


class RationalFn:
    """Exact rational function num/den with cross-multiplication equality."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            den = Poly.const(1)
        elif den.is_const():
            num = num.scale(Fraction(1) / den.const_value())
            den = Poly.const(1)
        self.num = num
        self.den = den

    # -- construction ----------------------------------------------------

    @staticmethod
    def zero() -> "RationalFn":
        return RationalFn(Poly.zero(), Poly.const(1))

    @staticmethod
    def const(c: Scalar) -> "RationalFn":
        return RationalFn(Poly.const(c), Poly.const(1))

    @staticmethod
    def var(name: str) -> "RationalFn":
        return RationalFn(Poly.var(name), Poly.const(1))

    @staticmethod
    def from_poly(p: Poly) -> "RationalFn":
        return RationalFn(p, Poly.const(1))

    @staticmethod
    def of(x: Union["RationalFn", Poly, int, Fraction]) -> "RationalFn":
        if isinstance(x, RationalFn):
            return x
        if isinstance(x, Poly):
            return RationalFn.from_poly(x)
        return RationalFn.const(x)

    # -- field operations -------------------------------------------------

    def __add__(self, other: "RationalFn") -> "RationalFn":
        other = RationalFn.of(other)
        if self.den == other.den:
            return RationalFn(self.num + other.num, self.den)
        return RationalFn(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def __neg__(self) -> "RationalFn":
        return RationalFn(-self.num, self.den)

    def __sub__(self, other: "RationalFn") -> "RationalFn":
        return self + (-RationalFn.of(other))

    def __mul__(self, other: "RationalFn") -> "RationalFn":
        other = RationalFn.of(other)
        return RationalFn(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RationalFn") -> "RationalFn":
        other = RationalFn.of(other)
        if other.num.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFn(self.num * other.den, self.den * other.num)

    def scale(self, c: Scalar) -> "RationalFn":
        return RationalFn(self.num.scale(c), self.den)

    def inverse(self) -> "RationalFn":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RationalFn(self.den, self.num)

    # -- queries ----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_poly(self) -> bool:
        return self.den.is_const()

    def as_poly(self) -> Poly:
        if not self.is_poly():
            q = poly_divmod_exact(self.num, self.den)
            if q is None:
                raise ValueError("rational function is not polynomial")
            return q
        return self.num

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = RationalFn.const(other)
        elif isinstance(other, Poly):
            other = RationalFn.from_poly(other)
        if not isinstance(other, RationalFn):
            return NotImplemented
        return (self.num * other.den) == (other.num * self.den)

    def __hash__(self) -> int:
        s = self.simplified()
        return hash((s.num, s.den))

    # -- calculus ---------------------------------------------------------

    def diff(self, name: str) -> "RationalFn":
        if self.is_poly():
            return RationalFn.from_poly(self.num.diff(name))
        n = self.num.diff(name) * self.den - self.num * self.den.diff(name)
        return RationalFn(n, self.den * self.den).simplified()

    def eval_frac(self, point: Mapping[str, Fraction]) -> "RationalFn":
        den = self.den.eval_frac(point)
        if den.is_zero():
            raise ZeroDivisionError("denominator vanishes at sample point")
        return RationalFn(self.num.eval_frac(point), den)

    def eval_float(self, point: Mapping[str, float]) -> float:
        d = self.den.eval_float(point)
        if d == 0.0:
            raise ZeroDivisionError("denominator vanishes at sample point")
        return self.num.eval_float(point) / d

    def const_value(self) -> Fraction:
        return self.num.const_value() / self.den.const_value()

    def simplified(self) -> "RationalFn":
        """Cheap normalization: content, shared monomials, trial division."""
        num, den = self.num, self.den
        if num.is_zero():
            return RationalFn.zero()
        if den.is_const():
            return RationalFn(num, den)
        if len(num.terms) * len(den.terms) <= 20_000:
            q = poly_divmod_exact(num, den)
            if q is not None:
                return RationalFn(q, Poly.const(1))
        vs = Poly._merge_vars(num, den)
        num, den = num.aligned_to(vs), den.aligned_to(vs)
        mn, md = _common_monomial(num), _common_monomial(den)
        shared = tuple(min(a, b) for a, b in zip(mn, md)) if mn and md else ()
        if any(shared):
            num, den = _shift_down(num, shared), _shift_down(den, shared)
        cn, cd = poly_gcd_content(num), poly_gcd_content(den)
        c = cn / cd
        num = num.scale(Fraction(1) / cn)
        den = den.scale(Fraction(1) / cd)
        return RationalFn(num.scale(c), den)

    def __repr__(self) -> str:
        if self.is_poly():
            return f"RationalFn({self.num!r})"
        return f"RationalFn({self.num!r} / {self.den!r})"


Mode = Tuple[int, str]


class TrigPoly:
    """Finite Fourier series in the flow parameter with Poly coefficients.

    ``terms[(k, "cos")]`` and ``terms[(k, "sin")]`` hold the coefficient of
    cos(k t) and sin(k t).  Mode 0 only carries a cos entry.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Dict[Mode, Poly]):
        clean: Dict[Mode, Poly] = {}
        for (k, part), p in terms.items():
            if p.is_zero():
                continue
            if k < 0 or (k == 0 and part == SIN):
                raise ValueError("modes must be normalized (k >= 0, no sin 0)")
            clean[(k, part)] = p
        self.terms = clean

    # -- construction ----------------------------------------------------

    @staticmethod
    def zero() -> "TrigPoly":
        return TrigPoly({})

    @staticmethod
    def const_poly(p: Poly) -> "TrigPoly":
        return TrigPoly({(0, COS): p})

    @staticmethod
    def cosine(k: int, coeff: Poly) -> "TrigPoly":
        k = abs(k)
        return TrigPoly({(k, COS): coeff})

    @staticmethod
    def sine(k: int, coeff: Poly) -> "TrigPoly":
        if k == 0:
            return TrigPoly.zero()
        if k < 0:
            return TrigPoly({(-k, SIN): -coeff})
        return TrigPoly({(k, SIN): coeff})

    # -- ring operations --------------------------------------------------

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        terms = dict(self.terms)
        for m, p in other.terms.items():
            s = terms.get(m)
            terms[m] = p if s is None else s + p
        return TrigPoly(terms)

    def __neg__(self) -> "TrigPoly":
        return TrigPoly({m: -p for m, p in self.terms.items()})

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + (-other)

    def scale_poly(self, p: Poly) -> "TrigPoly":
        return TrigPoly({m: q * p for m, q in self.terms.items()})

    def __mul__(self, other: "TrigPoly") -> "TrigPoly":
        out: Dict[Mode, Poly] = {}

        def bump(k: int, part: str, p: Poly) -> None:
            if p.is_zero():
                return
            if part == SIN:
                if k == 0:
                    return
                if k < 0:
                    k, p = -k, -p
            else:
                k = abs(k)
            cur = out.get((k, part))
            s = p if cur is None else cur + p
            if s.is_zero():
                out.pop((k, part), None)
            else:
                out[(k, part)] = s

        half = Fraction(1, 2)
        for (k1, p1), c1 in self.terms.items():
            for (k2, p2), c2 in other.terms.items():
                c = (c1 * c2).scale(half)
                if p1 == COS and p2 == COS:
                    bump(k1 - k2, COS, c)
                    bump(k1 + k2, COS, c)
                elif p1 == SIN and p2 == SIN:
                    bump(k1 - k2, COS, c)
                    bump(k1 + k2, COS, -c)
                elif p1 == SIN and p2 == COS:
                    bump(k1 + k2, SIN, c)
                    bump(k1 - k2, SIN, c)
                else:  # cos * sin
                    bump(k1 + k2, SIN, c)
                    bump(k2 - k1, SIN, c)
        return TrigPoly(out)

    def __pow__(self, n: int) -> "TrigPoly":
        out = TrigPoly.const_poly(Poly.const(1))
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(tuple(sorted((m, hash(p)) for m, p in self.terms.items())))

    # -- evaluation and integrals -----------------------------------------

    def eval_at_zero(self) -> Poly:
        """Value at t = 0: sum of cosine coefficients."""
        out = Poly.zero()
        for (k, part), p in self.terms.items():
            if part == COS:
                out = out + p
        return out

    def eval_at_two_pi(self) -> Poly:
        """Value at t = 2*pi; equals the t = 0 value (period check)."""
        return self.eval_at_zero()

    def eval_float(self, t: float, point: Mapping[str, float]) -> float:
        total = 0.0
        for (k, part), p in self.terms.items():
            w = math.cos(k * t) if part == COS else math.sin(k * t)
            total += p.eval_float(point) * w
        return total

    def mean(self) -> Poly:
        """Normalized average over one period: the mode-0 cosine coefficient."""
        return self.terms.get((0, COS), Poly.zero())

    def weighted_moment(self) -> Poly:
        """Closed form of ``-(1/2pi) * int_0^{2pi} (t - pi) g(t) dt``.

        Uses: the weight (t - pi) integrates cos(kt) to 0 for all k and
        sin(kt) to -2*pi/k for k >= 1, so the result is
        ``sum_k sin_coeff(k) / k``.
        """
        out = Poly.zero()
        for (k, part), p in self.terms.items():
            if part == SIN and k >= 1:
                out = out + p.scale(Fraction(1, k))
        return out


def integrate_mean(g: TrigPoly) -> Poly:
    """Normalized Haar average of a one-period Fourier series."""
    return g.mean()


def integrate_weighted(g: TrigPoly) -> Poly:
    """The homotopy kernel integral ``-(1/2pi) int_0^{2pi} (t-pi) g dt``."""
    return g.weighted_moment()


def parse_fraction(text: str) -> Fraction:
    """Parse a decimal-free rational literal "p", "-p" or "p/q"."""
    s = text.strip()
    body = s[1:] if s[:1] in "+-" else s
    if not body or not all(part.isdigit() for part in body.split("/", 1)) or body.count("/") > 1:
        raise ValueError(f"invalid rational literal {text!r}")
    return Fraction(s)


def format_fraction(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"
