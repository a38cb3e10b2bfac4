"""
Data models shared by the verifiers, the CLI and the report writer
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Any, Tuple
from enum import Enum


class Flavor(Enum):
    """Coderivations on S(V) carry an arity-0 coefficient, those on the reduced S̄(V) do not"""
    REDUCED = "reduced"
    UNREDUCED = "unreduced"


class Suite(Enum):
    """Check suites of the `check` command"""
    THEOREMS = "theorems"
    LINFTY = "linfty"
    EXAMPLES = "examples"
    ALL = "all"


@dataclass
class Check:
    """One coefficientwise comparison"""
    identity: str
    arity: int
    word: List[str]
    lhs: Any
    rhs: Any
    passed: bool

    def sort_key(self) -> Tuple:
        return (self.identity, self.arity, tuple(self.word))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "identity": self.identity,
            "arity": self.arity,
            "word": list(self.word),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "pass": self.passed,
        }


@dataclass
class Report:
    """Result of a verification; `ok` iff no failure was recorded"""
    command: str
    checks: List[Check] = field(default_factory=list)
    passed: Dict[Tuple[str, int], int] = field(default_factory=dict)
    failed: Dict[Tuple[str, int], int] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)
    timing_ms: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.failed

    @property
    def total_checks(self) -> int:
        return sum(self.passed.values()) + sum(self.failed.values())

    def record(self, identity: str, arity: int, word: List[str], lhs: Any, rhs: Any,
               passed: Optional[bool] = None) -> bool:
        """Record one comparison; only failures keep their values"""
        if passed is None:
            passed = lhs == rhs
        key = (identity, arity)
        if passed:
            self.passed[key] = self.passed.get(key, 0) + 1
        else:
            self.failed[key] = self.failed.get(key, 0) + 1
            self.checks.append(Check(identity, arity, list(word), lhs, rhs, False))
        return passed

    def fail(self, identity: str, arity: int = 0, word: Optional[List[str]] = None,
             lhs: Any = None, rhs: Any = None):
        self.record(identity, arity, word or [], lhs, rhs, passed=False)

    def merge(self, other: "Report", prefix: str = ""):
        """Fold another report into this one, optionally namespacing identities"""
        def rename(name: str) -> str:
            return f"{prefix}{name}" if prefix else name

        for (identity, arity), count in other.passed.items():
            key = (rename(identity), arity)
            self.passed[key] = self.passed.get(key, 0) + count
        for (identity, arity), count in other.failed.items():
            key = (rename(identity), arity)
            self.failed[key] = self.failed.get(key, 0) + count
        for check in other.checks:
            self.checks.append(Check(rename(check.identity), check.arity, check.word,
                                     check.lhs, check.rhs, check.passed))
        self.notes.extend(other.notes)
        for key, value in other.data.items():
            self.data[rename(key)] = value

    def summary(self) -> List[Dict[str, Any]]:
        keys = sorted(set(self.passed) | set(self.failed))
        return [
            {
                "identity": identity,
                "arity": arity,
                "passed": self.passed.get((identity, arity), 0),
                "failed": self.failed.get((identity, arity), 0),
            }
            for identity, arity in keys
        ]

    def to_dict(self, include_timing: bool = False, max_failures: Optional[int] = None) -> Dict[str, Any]:
        """Every failure is listed unless `max_failures` caps the listing; the cap is then noted"""
        checks = sorted(self.checks, key=Check.sort_key)
        notes = list(self.notes)
        if max_failures is not None and len(checks) > max_failures:
            notes.append(f"{len(checks) - max_failures} further violations omitted")
            checks = checks[:max_failures]
        result = {
            "ok": self.ok,
            "command": self.command,
            "checks": [check.to_dict() for check in checks],
            "summary": self.summary(),
        }
        if notes:
            result["notes"] = notes
        if self.data:
            result["data"] = self.data
        if include_timing and self.timing_ms is not None:
            result["timing_ms"] = round(self.timing_ms, 3)
        return result
