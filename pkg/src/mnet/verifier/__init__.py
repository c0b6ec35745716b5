"""Post-hoc audit engine and decision recording."""

from mnet.verifier.audit import (
    AuditReport,
    InconsistentVerdict,
    ManualCheck,
    MissingArtifact,
    PackageUnreadable,
    PerChallengeCheck,
    PrematureDecision,
    TimelineCheck,
    record_decision,
    timeline_tolerance_us,
    verify_submission,
)

__all__ = [
    "AuditReport",
    "InconsistentVerdict",
    "ManualCheck",
    "MissingArtifact",
    "PackageUnreadable",
    "PerChallengeCheck",
    "PrematureDecision",
    "TimelineCheck",
    "record_decision",
    "timeline_tolerance_us",
    "verify_submission",
]
