"""Random frame-attestation request timing.

Issue times are memoryless on purpose: the first request lands at a fixed
offset, then exponential inter-arrivals follow, so a client can never
predict when the next attestation demand will arrive.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Optional


@dataclass(frozen=True)
class ChallengeSchedule:
    mean_interval_s: float = 30.0
    first_after_s: float = 10.0
    response_deadline_s: float = 15.0
    rng_seed: Optional[int] = None  # fixed in tests only

    def __post_init__(self) -> None:
        if min(self.mean_interval_s, self.first_after_s, self.response_deadline_s) <= 0:
            raise ValueError("schedule parameters must be positive")
        if self.response_deadline_s >= self.mean_interval_s:
            raise ValueError("response deadline must be shorter than the mean interval")


def challenge_times(schedule: ChallengeSchedule, rng: random.Random) -> Iterator[float]:
    """Unbounded issue-time stream, seconds from execution start."""
    t = schedule.first_after_s
    while True:
        yield t
        t += rng.expovariate(1.0 / schedule.mean_interval_s)


def schedule_challenges(schedule: ChallengeSchedule, session_duration_s: float) -> list[float]:
    """Issue times truncated to one session. Reproducible iff rng_seed set."""
    rng = random.Random(schedule.rng_seed)
    out: list[float] = []
    for t in challenge_times(schedule, rng):
        if t >= session_duration_s:
            break
        out.append(t)
    return out
