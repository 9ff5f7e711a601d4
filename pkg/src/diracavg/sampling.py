"""Deterministic rational sample points in a coordinate box.

Pointwise checks evaluate exact tensors at rational points drawn from a
seeded generator.  Points where a denominator vanishes (or a frame loses
rank) are skipped with a notice; a run needs at least 80% usable points.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from .tensors import Chart

log = logging.getLogger("diracavg")

Box = Mapping[str, Tuple[Fraction, Fraction]]
Point = Dict[str, Fraction]

# grid resolution for drawn coordinates; small denominators keep exact
# arithmetic cheap downstream
_DENOM = 256

USABLE_FRACTION = Fraction(4, 5)


class SamplingError(RuntimeError):
    """Raised when too few sample points were usable."""


def default_box(chart: Chart) -> Dict[str, Tuple[Fraction, Fraction]]:
    half = Fraction(1, 2)
    return {name: (-half, half) for name in chart.coords}


def sample_box(chart: Chart, box: Box, count: int, seed: int) -> List[Point]:
    """Draw `count` rational points uniformly from the box, reproducibly."""
    for name in chart.coords:
        if name not in box:
            raise ValueError(f"box is missing coordinate {name!r}")
        lo, hi = box[name]
        if not lo < hi:
            raise ValueError(f"empty box interval for {name!r}")
    rng = random.Random(seed)
    pts: List[Point] = []
    for _ in range(count):
        p: Point = {}
        for name in chart.coords:
            lo, hi = box[name]
            p[name] = lo + (hi - lo) * Fraction(rng.randint(0, _DENOM), _DENOM)
        pts.append(p)
    return pts


@dataclass
class PointwiseRun:
    """Outcome of a per-point sweep under the skip policy."""

    total: int
    usable: int
    skipped: List[Point] = field(default_factory=list)

    @property
    def healthy(self) -> bool:
        if self.total == 0:
            return False
        return Fraction(self.usable, self.total) >= USABLE_FRACTION


def sweep(points: List[Point], probe: Callable[[Point], bool]) -> Tuple[PointwiseRun, Optional[Point]]:
    """Run probe at each point; returns (run stats, first failing point).

    The probe returns True/False for pass/fail and raises ZeroDivisionError
    (or ArithmeticError) to mark the point degenerate.  Degenerate points are
    skipped with a notice.  If fewer than 80% of the points are usable a
    SamplingError is raised.
    """
    run = PointwiseRun(total=len(points), usable=0)
    first_fail: Optional[Point] = None
    for p in points:
        try:
            ok = probe(p)
        except (ZeroDivisionError, ArithmeticError):
            run.skipped.append(p)
            log.info("skipping degenerate sample point %s", format_point(p))
            continue
        run.usable += 1
        if not ok and first_fail is None:
            first_fail = p
    if not run.healthy:
        raise SamplingError(
            f"only {run.usable}/{run.total} sample points usable (need 80%)"
        )
    return run, first_fail


def format_point(p: Mapping[str, Fraction]) -> Dict[str, str]:
    return {k: str(v) for k, v in sorted(p.items())}
