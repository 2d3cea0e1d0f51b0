"""Anchor engine: mining, verification, migration and feedback."""

from anchorgate.anchors.invariants import CHECKS, Violation, applicable, check_invariant
from anchorgate.anchors.library import Library, default_library, load_library
from anchorgate.anchors.mining import (
    anchor_present,
    detect_guard_functions,
    mine_anchors,
    parse_signature,
    signature_selector,
    snippet_regex,
)
from anchorgate.anchors.verify import (
    K_DOWNGRADE,
    K_NEWANCHOR,
    apply_anchor_feedback,
    missing_verdict,
    process_migration,
    to_checks,
    verify_anchors,
)

__all__ = [
    "CHECKS",
    "K_DOWNGRADE",
    "K_NEWANCHOR",
    "Library",
    "Violation",
    "anchor_present",
    "applicable",
    "apply_anchor_feedback",
    "check_invariant",
    "default_library",
    "detect_guard_functions",
    "load_library",
    "mine_anchors",
    "missing_verdict",
    "parse_signature",
    "process_migration",
    "signature_selector",
    "snippet_regex",
    "to_checks",
    "verify_anchors",
]
