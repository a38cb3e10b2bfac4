"""
Coefficientwise verification and deterministic report records
Compares Taylor coefficients word by word and produces digestible JSON reports
"""

import json
import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Any

from cryptography.hazmat.primitives import hashes

from .graded import GradedSpace, Vec, vec_to_json
from .models import Report

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]


class VerificationManager:
    """Runs coefficientwise comparisons and renders reports"""

    def __init__(self, indent: int = 2, include_timing: bool = False, max_failures: Optional[int] = None):
        self.indent = indent
        self.include_timing = include_timing
        self.max_failures = max_failures

    def compare_maps(self, report: Report, identity: str, domain: GradedSpace, codomain: GradedSpace,
                     arities: Iterable[int], lhs: Callable[[Word], Vec], rhs: Callable[[Word], Vec]) -> bool:
        """
        Compare two multilinear maps on every canonical word of the given arities

        Args:
            report: Report receiving one record per word
            identity: Name of the identity being checked
            domain: Space whose canonical words are enumerated
            codomain: Space the values live in (used for rendering)
            arities: Arities to enumerate
            lhs, rhs: Maps from a canonical word to a sparse vector

        Returns:
            True when every word agreed
        """
        ok = True
        for arity in arities:
            words = domain.canonical_words(arity)
            logger.debug(f"{identity}: arity {arity}, {len(words)} words")
            for word in words:
                left, right = lhs(word), rhs(word)
                passed = left == right
                if not passed:
                    ok = False
                report.record(identity, arity, domain.word_names(word),
                              vec_to_json(codomain, left) if not passed else None,
                              vec_to_json(codomain, right) if not passed else None,
                              passed=passed)
        return ok

    def compare_coderivations(self, report: Report, identity: str, lhs, rhs,
                              arities: Iterable[int]) -> bool:
        """Coderivations on spaces of equal dimension, compared by basis position"""
        return self.compare_maps(report, identity, lhs.space, lhs.space, arities, lhs.value, rhs.value)

    def compare_morphisms(self, report: Report, identity: str, lhs, rhs, arities: Iterable[int]) -> bool:
        return self.compare_maps(report, identity, lhs.domain, lhs.codomain, arities, lhs.value, rhs.value)

    def compare_vectors(self, report: Report, identity: str, space: GradedSpace, arity: int,
                        word: Sequence[str], lhs: Vec, rhs: Vec) -> bool:
        passed = lhs == rhs
        report.record(identity, arity, list(word), vec_to_json(space, lhs), vec_to_json(space, rhs), passed)
        return passed

    def render(self, report: Report) -> str:
        """Canonical JSON text of a report: sorted keys, fixed indent"""
        return json.dumps(report.to_dict(include_timing=self.include_timing, max_failures=self.max_failures),
                          indent=self.indent, sort_keys=True)

    def render_payload(self, payload: Dict[str, Any]) -> str:
        return json.dumps(payload, indent=self.indent, sort_keys=True)

    def digest(self, report: Report) -> str:
        """SHA-256 of the report's canonical JSON without timing"""
        canonical = json.dumps(report.to_dict(include_timing=False), sort_keys=True, separators=(",", ":"))
        hasher = hashes.Hash(hashes.SHA256())
        hasher.update(canonical.encode("utf-8"))
        return hasher.finalize().hex()

    def save_report(self, report: Report, path: Path) -> Optional[str]:
        """Write the report to disk; returns the path on success"""
        try:
            path = Path(path)
            if path.parent and not path.parent.exists():
                path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as f:
                f.write(self.render(report))
                f.write("\n")
            logger.info(f"Report saved: {path}")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving report to {path}: {e}")
            return None

    def text_summary(self, report: Report) -> str:
        """Human-readable summary for --format text"""
        lines = [f"{report.command}: {'OK' if report.ok else 'FAILED'} ({report.total_checks} checks)"]
        for entry in report.summary():
            status = "ok" if entry["failed"] == 0 else f"{entry['failed']} failed"
            lines.append(f"  {entry['identity']} [arity {entry['arity']}]: {entry['passed']} passed, {status}")
        listed = report.to_dict(max_failures=self.max_failures)
        for check in listed["checks"]:
            lines.append(f"  FAIL {check['identity']} arity {check['arity']} on {', '.join(check['word']) or '-'}")
        for note in listed.get("notes", []):
            lines.append(f"  note: {note}")
        return "\n".join(lines)


default_manager = VerificationManager()


def compare_coderivations(report: Report, identity: str, lhs, rhs, arities: Iterable[int]) -> bool:
    return default_manager.compare_coderivations(report, identity, lhs, rhs, arities)


def compare_morphisms(report: Report, identity: str, lhs, rhs, arities: Iterable[int]) -> bool:
    return default_manager.compare_morphisms(report, identity, lhs, rhs, arities)


def failing_words(report: Report, identity: Optional[str] = None) -> List[Tuple[str, int, List[str]]]:
    return [(c.identity, c.arity, c.word) for c in sorted(report.checks, key=lambda c: c.sort_key())
            if identity is None or c.identity == identity]
