"""Tabletop scene layouts for grasping-in-clutter style tasks.

A layout places exactly five objects (ids 1..16) in a tag-anchored square
workspace. Difficulty controls the spatial structure:

* easy   — sparse: every pairwise center distance >= D_EASY_M
* medium — dense: at least one pair closer than D_TOUCH_M, nothing stacked
* hard   — at least one object stacked on another

Placement is seeded rejection sampling against per-object footprint radii,
so equal (seed, difficulty) always reproduces the same layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from mnet.taskpack._seeding import derive_rng

DIFFICULTIES = ("easy", "medium", "hard")

N_OBJECTS = 5
N_OBJECT_IDS = 16
WORKSPACE_SIDE_M = 0.5  # square side; coordinates are centered on the tag
D_EASY_M = 0.12
D_TOUCH_M = 0.05
MAX_ATTEMPTS = 10_000

# Footprint radius per object id, meters. Kept under 0.055 so two footprints
# can always coexist inside an easy-spacing pair (0.055*2 < D_EASY_M never
# binds the sampler).
FOOTPRINT_RADII_M = {
    1: 0.030, 2: 0.040, 3: 0.025, 4: 0.035, 5: 0.045,
    6: 0.030, 7: 0.020, 8: 0.050, 9: 0.035, 10: 0.025,
    11: 0.040, 12: 0.030, 13: 0.055, 14: 0.020, 15: 0.045, 16: 0.035,
}


class PlacementInfeasible(Exception):
    """Rejection sampling exhausted its attempt budget: bad configuration."""


@dataclass(frozen=True)
class ScenePose:
    x_m: float
    y_m: float
    theta_rad: float


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    pose: ScenePose
    stacked_on: Optional[int] = None


@dataclass(frozen=True)
class SceneLayout:
    difficulty: str
    objects: tuple[SceneObject, ...]
    workspace_side_m: float = WORKSPACE_SIDE_M

    def to_payload(self) -> dict:
        return {
            "difficulty": self.difficulty,
            "workspace_side_m": self.workspace_side_m,
            "objects": [
                {
                    "object_id": o.object_id,
                    "pose": {"x_m": o.pose.x_m, "y_m": o.pose.y_m, "theta_rad": o.pose.theta_rad},
                    "stacked_on": o.stacked_on,
                }
                for o in self.objects
            ],
        }


def _dist(a: ScenePose, b: ScenePose) -> float:
    return math.hypot(a.x_m - b.x_m, a.y_m - b.y_m)


def _sample_pose(rng, radius: float) -> ScenePose:
    half = WORKSPACE_SIDE_M / 2 - radius
    return ScenePose(
        x_m=round(rng.uniform(-half, half), 4),
        y_m=round(rng.uniform(-half, half), 4),
        theta_rad=round(rng.uniform(-math.pi, math.pi), 4),
    )


def _place(rng, object_id: int, placed: list[SceneObject], min_gap: float, attempts_left: list[int]) -> ScenePose:
    radius = FOOTPRINT_RADII_M[object_id]
    while True:
        attempts_left[0] -= 1
        if attempts_left[0] <= 0:
            raise PlacementInfeasible("could not satisfy spacing constraints")
        pose = _sample_pose(rng, radius)
        if all(_dist(pose, other.pose) >= min_gap for other in placed if other.stacked_on is None):
            return pose


def gen_scene(seed: int, difficulty: str) -> SceneLayout:
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {difficulty!r}")
    rng = derive_rng("scene", seed, difficulty)
    budget = [MAX_ATTEMPTS]
    ids = rng.sample(range(1, N_OBJECT_IDS + 1), N_OBJECTS)
    objects: list[SceneObject] = []

    if difficulty == "easy":
        for oid in ids:
            pose = _place(rng, oid, objects, D_EASY_M, budget)
            objects.append(SceneObject(oid, pose))
    elif difficulty == "medium":
        anchor = SceneObject(ids[0], _sample_pose(rng, FOOTPRINT_RADII_M[ids[0]]))
        objects.append(anchor)
        # One guaranteed close pair, strictly under the touch threshold.
        close = _pose_near(rng, anchor.pose, rng.uniform(0.02, D_TOUCH_M * 0.95), FOOTPRINT_RADII_M[ids[1]], budget)
        objects.append(SceneObject(ids[1], close))
        for oid in ids[2:]:
            pose = _place(rng, oid, objects, D_TOUCH_M, budget)
            objects.append(SceneObject(oid, pose))
    else:  # hard
        for oid in ids[:-1]:
            pose = _place(rng, oid, objects, D_TOUCH_M, budget)
            objects.append(SceneObject(oid, pose))
        base = rng.choice(objects)
        top_pose = ScenePose(base.pose.x_m, base.pose.y_m, round(rng.uniform(-math.pi, math.pi), 4))
        objects.append(SceneObject(ids[-1], top_pose, stacked_on=base.object_id))

    return SceneLayout(difficulty=difficulty, objects=tuple(objects))


def _pose_near(rng, center: ScenePose, distance: float, radius: float, attempts_left: list[int]) -> ScenePose:
    half = WORKSPACE_SIDE_M / 2 - radius
    while True:
        attempts_left[0] -= 1
        if attempts_left[0] <= 0:
            raise PlacementInfeasible("could not place close pair inside workspace")
        angle = rng.uniform(-math.pi, math.pi)
        x = center.x_m + distance * math.cos(angle)
        y = center.y_m + distance * math.sin(angle)
        if abs(x) <= half and abs(y) <= half:
            return ScenePose(round(x, 4), round(y, 4), round(rng.uniform(-math.pi, math.pi), 4))
