"""Floating-point verification of the interpolation flow between gauges.

The family Pi_t interpolates a bivector and its gauge image; the field
Z_t = -Pi_t#(Theta) generates a flow whose time-1 map intertwines the two.
This module compiles exact components to fast float evaluators (checked
against exact evaluation at probe points), computes Z_t, measures the
homotopy residual [[Z_t, Pi_t]] + d(Pi_t)/dt, and integrates the flow with
a fixed-step classical 4th-order scheme to verify the intertwining
identity through finite-difference Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import linalg
from .config import PI
from .rings import Poly, RationalFn
from .sampling import Box
from .tensors import (
    Chart,
    DifferentialForm,
    MultivectorField,
    exterior_derivative,
    flat_matrix,
    schouten_bracket,
    sharp_matrix,
    vector_field,
)


class GuardError(ArithmeticError):
    """The interpolation matrix came too close to singular."""


class BoxExit(RuntimeError):
    """A trajectory left the configured box."""


FloatPoint = Mapping[str, float]


def _point_vec(chart: Chart, point: FloatPoint) -> np.ndarray:
    # last slot carries the value of the formal constant
    vec = np.empty(chart.dim + 1)
    for k, name in enumerate(chart.coords):
        vec[k] = float(point[name])
    vec[chart.dim] = math.pi
    return vec


class _CompiledEntries:
    """Stacked monomial evaluation for a family of rational components.

    All numerators and denominators share one exponent matrix so a single
    vectorized power computation serves every entry.
    """

    def __init__(self, chart: Chart, entries: Sequence[Tuple[object, RationalFn]]):
        names = chart.coords + (PI,)
        self.keys: List[object] = []
        exps: List[Tuple[int, ...]] = []
        coeffs: List[float] = []
        self.slices: List[Tuple[slice, slice]] = []
        for key, fn in entries:
            fn = fn.simplified()
            start_num = len(exps)
            num = fn.num.aligned_to(names)
            for e, c in num.terms.items():
                exps.append(e)
                coeffs.append(float(c))
            start_den = len(exps)
            den = fn.den.aligned_to(names)
            for e, c in den.terms.items():
                exps.append(e)
                coeffs.append(float(c))
            self.keys.append(key)
            self.slices.append(
                (slice(start_num, start_den), slice(start_den, len(exps)))
            )
        if exps:
            self.exps = np.array(exps, dtype=np.int64)
            self.coeffs = np.array(coeffs)
        else:
            self.exps = np.zeros((0, len(names)), dtype=np.int64)
            self.coeffs = np.zeros(0)
        # 0/1 aggregation matrices: entry sums become two matrix products
        m, e = self.exps.shape[0], len(self.keys)
        self._wnum = np.zeros((m, e))
        self._wden = np.zeros((m, e))
        for col, (sl_num, sl_den) in enumerate(self.slices):
            self._wnum[sl_num, col] = 1.0
            self._wden[sl_den, col] = 1.0

    def eval(self, vec: np.ndarray) -> Dict[object, float]:
        if self.exps.shape[0]:
            vals = np.prod(vec[np.newaxis, :] ** self.exps, axis=1) * self.coeffs
        else:
            vals = np.zeros(0)
        out: Dict[object, float] = {}
        for key, (sl_num, sl_den) in zip(self.keys, self.slices):
            num = float(vals[sl_num].sum())
            den = float(vals[sl_den].sum())
            if abs(den) < 1e-300:
                raise ZeroDivisionError(f"denominator vanished for component {key!r}")
            out[key] = num / den
        return out

    def eval_stack(self, vecs: np.ndarray) -> np.ndarray:
        """All entries at a batch of points: (B, k) -> (B, len(keys))."""
        b = vecs.shape[0]
        if self.exps.shape[0]:
            vals = (
                np.prod(vecs[:, np.newaxis, :] ** self.exps[np.newaxis, :, :], axis=2)
                * self.coeffs
            )
        else:
            vals = np.zeros((b, 0))
        num = vals @ self._wnum
        den = vals @ self._wden
        bad = np.abs(den) < 1e-300
        if bad.any():
            key = self.keys[int(np.argwhere(bad)[0][1])]
            raise ZeroDivisionError(f"denominator vanished for component {key!r}")
        return num / den


class NumericEvaluator:
    """Float evaluators for a bivector, a 1-form Theta, and d(Theta).

    Construction cross-checks the compiled route against exact evaluation at
    the supplied rational probe points (relative 1e-12); a disagreement is a
    compiler bug and raises.  ``guard`` rejects interpolation matrices whose
    determinant magnitude falls below the threshold.
    """

    def __init__(
        self,
        pi: MultivectorField,
        theta: DifferentialForm,
        box: Box,
        probes: Optional[Sequence[Mapping[str, Fraction]]] = None,
        guard: float = 1e-8,
    ):
        if pi.degree != 2 or theta.degree != 1 or pi.chart != theta.chart:
            raise ValueError("expects a bivector and a 1-form on one chart")
        self.chart = pi.chart
        self.pi_exact = pi.simplified()
        self.theta_exact = theta.simplified()
        self.dtheta_exact = exterior_derivative(self.theta_exact).simplified()
        self.box = dict(box)
        self.guard = guard
        n = self.chart.dim
        self._n = n
        self._box_lo = np.array([float(self.box[c][0]) for c in self.chart.coords])
        self._box_hi = np.array([float(self.box[c][1]) for c in self.chart.coords])
        self._eye = np.eye(n)

        sp = sharp_matrix(self.pi_exact)
        sb = flat_matrix(self.dtheta_exact)
        self._sp_entries = _CompiledEntries(
            self.chart, [((j, i), sp[j][i]) for j in range(n) for i in range(n)]
        )
        self._sb_entries = _CompiledEntries(
            self.chart, [((j, i), sb[j][i]) for j in range(n) for i in range(n)]
        )
        self._theta_entries = _CompiledEntries(
            self.chart,
            [
                (i, self.theta_exact.comps.get((i,), RationalFn.zero()))
                for i in range(n)
            ],
        )
        self._sp_sym = sp
        self._sb_sym = sb
        self._pi_t_cache: Dict[Fraction, MultivectorField] = {}
        self._z_cache: Dict[Fraction, MultivectorField] = {}
        self._bracket_cache: Dict[Fraction, MultivectorField] = {}
        if probes:
            self._verify_probes(probes)

    # -- compiled evaluation ----------------------------------------------

    def _verify_probes(self, probes: Sequence[Mapping[str, Fraction]]) -> None:
        n = self._n
        for p in probes:
            fp = {k: float(v) for k, v in p.items()}
            vec = _point_vec(self.chart, fp)
            got_sp = self._sp_entries.eval(vec)
            got_sb = self._sb_entries.eval(vec)
            got_th = self._theta_entries.eval(vec)
            for j in range(n):
                for i in range(n):
                    for got, sym in (
                        (got_sp[(j, i)], self._sp_sym[j][i]),
                        (got_sb[(j, i)], self._sb_sym[j][i]),
                    ):
                        want = sym.eval_float(fp)
                        scale = max(1.0, abs(want))
                        if abs(got - want) > 1e-12 * scale:
                            raise AssertionError(
                                f"compiled evaluator disagrees at {p!r}: "
                                f"{got} vs {want}"
                            )
            for i in range(n):
                want = self.theta_exact.comps.get(
                    (i,), RationalFn.zero()
                ).eval_float(fp)
                if abs(got_th[i] - want) > 1e-12 * max(1.0, abs(want)):
                    raise AssertionError("compiled 1-form evaluator disagrees")

    def pi_matrix(self, point: FloatPoint) -> np.ndarray:
        vec = _point_vec(self.chart, point)
        return self._mat(self._sp_entries, vec)

    def b_matrix(self, point: FloatPoint) -> np.ndarray:
        vec = _point_vec(self.chart, point)
        return self._mat(self._sb_entries, vec)

    def theta_vector(self, point: FloatPoint) -> np.ndarray:
        vec = _point_vec(self.chart, point)
        vals = self._theta_entries.eval(vec)
        return np.array([vals[i] for i in range(self._n)])

    def _mat(self, entries: _CompiledEntries, vec: np.ndarray) -> np.ndarray:
        vals = entries.eval(vec)
        n = self._n
        out = np.empty((n, n))
        for j in range(n):
            for i in range(n):
                out[j, i] = vals[(j, i)]
        return out

    def _mats_at_vec(self, vec: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        sp = self._mat(self._sp_entries, vec)
        sb = self._mat(self._sb_entries, vec)
        th_vals = self._theta_entries.eval(vec)
        th = np.array([th_vals[i] for i in range(self._n)])
        return sp, sb, th

    def _mats_at_mat(
        self, vecs: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        # entry registration order is row-major, so a reshape rebuilds [j][i]
        b, n = vecs.shape[0], self._n
        sp = self._sp_entries.eval_stack(vecs).reshape(b, n, n)
        sb = self._sb_entries.eval_stack(vecs).reshape(b, n, n)
        th = self._theta_entries.eval_stack(vecs)
        return sp, sb, th

    def in_box_mat(self, vecs: np.ndarray) -> bool:
        cols = vecs[:, : self._n]
        return bool(np.all(cols >= self._box_lo) and np.all(cols <= self._box_hi))

    def interp_matrix(self, t: float, point: FloatPoint) -> np.ndarray:
        """The float matrix of Pi_t# = Pi# (Id + t dTheta# Pi#)^{-1}."""
        vec = _point_vec(self.chart, point)
        sp, sb, _ = self._mats_at_vec(vec)
        m = np.eye(self._n) + t * (sb @ sp)
        if abs(np.linalg.det(m)) < self.guard:
            raise GuardError(f"interpolation matrix near singular at t={t}")
        return sp @ np.linalg.inv(m)

    def in_box(self, vec: np.ndarray) -> bool:
        for k, name in enumerate(self.chart.coords):
            lo, hi = self.box[name]
            if not float(lo) <= vec[k] <= float(hi):
                return False
        return True

    # -- exact companions --------------------------------------------------

    def pi_t_exact(self, t: Fraction) -> MultivectorField:
        """The interpolated bivector at rational t, by exact inversion."""
        t = Fraction(t)
        if t not in self._pi_t_cache:
            n = self._n
            tm = [
                [(self._sb_sym[j][k] * RationalFn.const(t)) for k in range(n)]
                for j in range(n)
            ]
            m = linalg.mat_add(linalg.identity(n), linalg.mat_mul(tm, self._sp_sym))
            new_sharp = linalg.mat_mul(self._sp_sym, linalg.inverse(m))
            comps: Dict[Tuple[int, int], RationalFn] = {}
            for i in range(n):
                for j in range(i + 1, n):
                    val = new_sharp[j][i].simplified()
                    if not val.is_zero():
                        comps[(i, j)] = val
            self._pi_t_cache[t] = MultivectorField(self.chart, 2, comps)
        return self._pi_t_cache[t]

    def z_exact(self, t: Fraction) -> MultivectorField:
        """The field -Pi_t#(Theta) at rational t, as an exact vector field."""
        t = Fraction(t)
        if t not in self._z_cache:
            pit = self.pi_t_exact(t)
            sharp = sharp_matrix(pit)
            comps: Dict[int, RationalFn] = {}
            for j in range(self._n):
                acc = RationalFn.zero()
                for i in range(self._n):
                    th = self.theta_exact.comps.get((i,), RationalFn.zero())
                    if not th.is_zero() and not sharp[j][i].is_zero():
                        acc = acc + sharp[j][i] * th
                acc = (-acc).simplified()
                if not acc.is_zero():
                    comps[j] = acc
            self._z_cache[t] = vector_field(self.chart, comps)
        return self._z_cache[t]

    def bracket_exact(self, t: Fraction) -> MultivectorField:
        """[[Z_t, Pi_t]] at rational t (cached; point-independent)."""
        t = Fraction(t)
        if t not in self._bracket_cache:
            self._bracket_cache[t] = schouten_bracket(
                self.z_exact(t), self.pi_t_exact(t)
            ).simplified()
        return self._bracket_cache[t]


def z_field(ev: NumericEvaluator, t: float, point: FloatPoint) -> np.ndarray:
    """Z_t at a point: -Pi#(Id + t dTheta# Pi#)^{-1} Theta, in floats."""
    vec = _point_vec(ev.chart, point)
    return _z_at_vec(ev, t, vec)


def _z_at_vec(ev: NumericEvaluator, t: float, vec: np.ndarray) -> np.ndarray:
    sp, sb, th = ev._mats_at_vec(vec)
    m = np.eye(ev.chart.dim) + t * (sb @ sp)
    if abs(np.linalg.det(m)) < ev.guard:
        raise GuardError(f"interpolation matrix near singular at t={t}")
    return -(sp @ np.linalg.solve(m, th))


def _z_at_mat(ev: NumericEvaluator, t: float, vecs: np.ndarray) -> np.ndarray:
    """Z_t at a batch of padded points: (B, n+1) -> (B, n)."""
    sp, sb, th = ev._mats_at_mat(vecs)
    m = ev._eye[np.newaxis, :, :] + t * (sb @ sp)
    if np.any(np.abs(np.linalg.det(m)) < ev.guard):
        raise GuardError(f"interpolation matrix near singular at t={t}")
    sol = np.linalg.solve(m, th[:, :, np.newaxis])
    return -(sp @ sol)[:, :, 0]


def homotopy_residual(
    ev: NumericEvaluator,
    t: Union[float, Fraction],
    point: FloatPoint,
    fd_step: float = 1e-5,
) -> float:
    """Max-norm of [[Z_t, Pi_t]] + d(Pi_t)/dt at the point.

    The bracket is computed exactly and evaluated in floats; the time
    derivative uses central differences with the given step.
    """
    t_frac = Fraction(t)
    bracket = ev.bracket_exact(t_frac)
    n = ev.chart.dim
    # substitute the point exactly; symbolic components can be of high
    # degree and a direct float evaluation cancels catastrophically
    fq = {k: Fraction(v) for k, v in point.items()}
    bmat = np.zeros((n, n))
    for (i, j), val in bracket.comps.items():
        v = val.eval_frac(fq).eval_float({})
        bmat[i, j] = v
        bmat[j, i] = -v
    tf = float(t_frac)
    plus = ev.interp_matrix(tf + fd_step, point)
    minus = ev.interp_matrix(tf - fd_step, point)
    dpidt = (plus - minus) / (2.0 * fd_step)
    # sharp-matrix slot (j, i) holds the (i, j) component
    resid = 0.0
    for i in range(n):
        for j in range(n):
            resid = max(resid, abs(bmat[i, j] + dpidt[j, i]))
    return resid


@dataclass
class FlowConfig:
    """Settings for the time-1 verification run."""

    points: List[Dict[str, float]]
    steps: int = 1000
    tolerance: float = 1e-6
    jacobian_step: float = 1e-5
    leaf_points: List[Dict[str, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.steps < 100:
            raise ValueError("flow verification needs at least 100 steps")


def flow_batch(ev: NumericEvaluator, starts: np.ndarray, steps: int) -> np.ndarray:
    """Integrate dx/dt = Z_t(x) from t = 1 back to t = 0 for a batch.

    ``starts`` is (B, n); all trajectories share the time grid, so each
    stage is one vectorized field evaluation.  Classical fixed-step
    4th-order scheme; raises BoxExit if any trajectory leaves the box.
    """
    n = ev.chart.dim
    x = np.asarray(starts, dtype=float).copy()
    b = x.shape[0]
    h = -1.0 / steps
    t = 1.0
    mid = np.empty((b, n + 1))
    mid[:, n] = math.pi

    def z(tt: float, xx: np.ndarray) -> np.ndarray:
        mid[:, :n] = xx
        if not ev.in_box_mat(mid):
            raise BoxExit("trajectory left the box")
        return _z_at_mat(ev, tt, mid)

    for _ in range(steps):
        k1 = z(t, x)
        k2 = z(t + h / 2.0, x + (h / 2.0) * k1)
        k3 = z(t + h / 2.0, x + (h / 2.0) * k2)
        k4 = z(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    mid[:, :n] = x
    if not ev.in_box_mat(mid):
        raise BoxExit("trajectory left the box")
    return x


def flow_point(ev: NumericEvaluator, point: FloatPoint, steps: int) -> np.ndarray:
    """Integrate one point from t = 1 back to t = 0."""
    vec = _point_vec(ev.chart, point)
    return flow_batch(ev, vec[np.newaxis, : ev.chart.dim], steps)[0]


@dataclass
class PointOutcome:
    point: Dict[str, float]
    image: Optional[List[float]]
    deviation: Optional[float]
    aborted: bool = False


@dataclass
class FlowReport:
    """Aggregated outcome of flow_and_verify."""

    outcomes: List[PointOutcome]
    max_deviation: float
    mean_deviation: float
    leaf_max_error: Optional[float]
    aborted: int
    ok: bool
    notes: List[str] = field(default_factory=list)


def flow_and_verify(ev: NumericEvaluator, cfg: FlowConfig) -> FlowReport:
    """Verify that the time-1 map carries the gauged bivector back.

    For each point p the map phi (reverse-time flow) and its
    finite-difference Jacobian J are computed; the componentwise deviation
    | J Pi_1(p) J^T - Pi(phi(p)) | must stay within cfg.tolerance.  Leaf
    points must be fixed by phi to the same tolerance.  More than 10%
    aborted trajectories fail the run.
    """
    n = ev.chart.dim
    outcomes: List[PointOutcome] = []
    devs: List[float] = []
    notes: List[str] = []
    aborted = 0
    for p in cfg.points:
        try:
            # one batch: the point plus its 2n central-difference offsets
            h = cfg.jacobian_step
            center = _point_vec(ev.chart, p)[:n]
            starts = np.repeat(center[np.newaxis, :], 1 + 2 * n, axis=0)
            for k in range(n):
                starts[1 + 2 * k, k] += h
                starts[2 + 2 * k, k] -= h
            ends = flow_batch(ev, starts, cfg.steps)
            image = ends[0]
            jac = np.empty((n, n))
            for k in range(n):
                jac[:, k] = (ends[1 + 2 * k] - ends[2 + 2 * k]) / (2.0 * h)
            pi1 = ev.interp_matrix(1.0, p)
            image_pt = {name: image[k] for k, name in enumerate(ev.chart.coords)}
            pi_img = ev.pi_matrix(image_pt)
            dev = float(np.max(np.abs(jac @ pi1 @ jac.T - pi_img)))
            devs.append(dev)
            outcomes.append(PointOutcome(dict(p), [float(v) for v in image], dev))
        except (BoxExit, GuardError, ZeroDivisionError) as exc:
            aborted += 1
            notes.append(f"aborted point {p!r}: {exc}")
            outcomes.append(PointOutcome(dict(p), None, None, aborted=True))
    leaf_max: Optional[float] = None
    if cfg.leaf_points:
        leaf_max = 0.0
        starts = np.stack([_point_vec(ev.chart, p)[:n] for p in cfg.leaf_points])
        try:
            ends = np.asarray(flow_batch(ev, starts, cfg.steps))
            leaf_max = float(np.max(np.abs(ends - starts)))
        except (BoxExit, GuardError, ZeroDivisionError):
            # one bad trajectory poisons the batch; redo them one by one
            for p in cfg.leaf_points:
                try:
                    image = flow_point(ev, p, cfg.steps)
                    vec = _point_vec(ev.chart, p)[:n]
                    leaf_max = max(leaf_max, float(np.max(np.abs(image - vec))))
                except (BoxExit, GuardError, ZeroDivisionError) as exc:
                    aborted += 1
                    notes.append(f"aborted leaf point {p!r}: {exc}")
    total = len(cfg.points) + len(cfg.leaf_points)
    ok = True
    if total and aborted > total / 10.0:
        ok = False
        notes.append(f"{aborted}/{total} trajectories aborted (over 10%)")
    if devs and max(devs) > cfg.tolerance:
        ok = False
    if leaf_max is not None and leaf_max > cfg.tolerance:
        ok = False
    return FlowReport(
        outcomes=outcomes,
        max_deviation=max(devs) if devs else 0.0,
        mean_deviation=(sum(devs) / len(devs)) if devs else 0.0,
        leaf_max_error=leaf_max,
        aborted=aborted,
        ok=ok,
        notes=notes,
    )
