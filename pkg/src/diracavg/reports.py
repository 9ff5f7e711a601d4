"""Structured results for verification checks, ready for JSON reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional


@dataclass
class CheckResult:
    """One named check: pass/fail plus an optional witness.

    ``point`` holds the witness sample point (fractions rendered as strings)
    and ``witness`` any extra locating detail (a pair of frame indices, a
    residual value, a component name).
    """

    check: str
    status: str  # "pass" | "fail" | "error"
    point: Optional[Dict[str, str]] = None
    witness: Optional[object] = None
    info: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"check": self.check, "status": self.status}
        if self.point is not None:
            out["point"] = self.point
        if self.witness is not None:
            out["witness"] = self.witness
        if self.info:
            out["info"] = dict(sorted(self.info.items()))
        return out


def passed(check: str, **info: object) -> CheckResult:
    return CheckResult(check=check, status="pass", info=dict(info))


def failed(
    check: str,
    point: Optional[Dict[str, str]] = None,
    witness: Optional[object] = None,
    **info: object,
) -> CheckResult:
    return CheckResult(
        check=check, status="fail", point=point, witness=witness, info=dict(info)
    )
