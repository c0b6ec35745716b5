"""Task metrics and score normalization.

Scores normalize to a 0..100 percentage of the task's maximum possible
score. Checklist tasks (peg-in-hole, cable, tabletop, blocks) count
finished items; grasping-in-clutter combines declutter rate, grasp success
rate, and time efficiency with equal weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

EVENT_FINISHED = "TaskFinished"
EVENT_SKIPPED = "TaskSkipped"

DEFAULT_TIME_BUDGET_S = 300.0


class UnknownItem(Exception):
    """A finished/skipped event referenced an item outside the checklist."""


class NoAttempts(Exception):
    pass


@dataclass(frozen=True)
class TaskScore:
    task: str
    raw: float
    max_possible: float
    normalized_pct: float
    components: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def to_payload(self) -> dict:
        return {
            "task": self.task,
            "raw": self.raw,
            "max_possible": self.max_possible,
            "normalized_pct": self.normalized_pct,
            "components": self.components,
            "flags": list(self.flags),
        }


def _clamp01(v: float) -> float:
    return max(0.0, min(1.0, v))


def score_fixed_checklist(events: Iterable[Mapping], items: Sequence[str], task: str = "checklist") -> TaskScore:
    """Count finished checklist items; out-of-order completion is scored but flagged."""
    order = {item: i for i, item in enumerate(items)}
    finished: list[str] = []
    flags: set[str] = set()
    for ev in events:
        kind = ev.get("kind")
        if kind not in (EVENT_FINISHED, EVENT_SKIPPED):
            continue
        item = (ev.get("payload") or {}).get("item")
        if item not in order:
            raise UnknownItem(f"event references unknown checklist item {item!r}")
        if kind == EVENT_FINISHED:
            if item in finished:
                flags.add("duplicate_finished")
                continue
            finished.append(item)

    positions = [order[item] for item in finished]
    if any(b < a for a, b in zip(positions, positions[1:])):
        flags.add("out_of_order")

    raw = float(len(finished))
    max_possible = float(len(items))
    pct = 100.0 * raw / max_possible if max_possible else 0.0
    return TaskScore(task=task, raw=raw, max_possible=max_possible,
                     normalized_pct=pct, flags=tuple(sorted(flags)))


def score_grasping(events: Iterable[Mapping], n_spawned: int,
                   time_budget_s: float = DEFAULT_TIME_BUDGET_S) -> TaskScore:
    """Equal-weight average of declutter rate, grasp success rate, and time
    efficiency. Zero attempts scores 0 with a flag instead of dividing."""
    attempts = []
    for ev in events:
        payload = ev.get("payload") or {}
        if "attempt_id" in payload:
            attempts.append(payload)

    if not attempts:
        return TaskScore(task="GraspingInClutter", raw=0.0, max_possible=100.0,
                         normalized_pct=0.0,
                         components={"declutter_rate": 0.0, "grasp_success_rate": 0.0,
                                     "time_efficiency": 0.0},
                         flags=("no_attempts",))

    successes = [a for a in attempts if a.get("success")]
    removed = {a["object_id"] for a in successes}
    declutter = _clamp01(len(removed) / n_spawned) if n_spawned else 0.0
    success_rate = len(successes) / len(attempts)
    elapsed = max(a["t_end"] for a in attempts) - min(a["t_start"] for a in attempts)
    time_eff = _clamp01(1.0 - elapsed / time_budget_s)

    components = {
        "declutter_rate": declutter,
        "grasp_success_rate": success_rate,
        "time_efficiency": time_eff,
    }
    pct = 100.0 * (declutter + success_rate + time_eff) / 3.0
    flags = () if n_spawned else ("no_spawned_objects",)
    return TaskScore(task="GraspingInClutter", raw=pct, max_possible=100.0,
                     normalized_pct=pct, components=components, flags=flags)
