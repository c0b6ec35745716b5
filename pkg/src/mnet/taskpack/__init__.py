"""Task instruction generators and scoring for the five first-release benchmarks."""

from mnet.taskpack.blocks import (
    BLOCK_COLORS,
    BlockPlacement,
    BlockPrompt,
    front_view,
    gen_block_prompt,
    support_ok,
)
from mnet.taskpack.cable import (
    FIXTURE_TYPES,
    BoardTooSmall,
    CableFixture,
    CableRoute,
    gen_cable_route,
)
from mnet.taskpack.pegs import CLEARANCES_MM, PEG_SHAPES, peg_in_hole_checklist
from mnet.taskpack.payloads import checklist_for_payload, instruction_payload
from mnet.taskpack.scenes import (
    DIFFICULTIES,
    PlacementInfeasible,
    SceneLayout,
    SceneObject,
    gen_scene,
)
from mnet.taskpack.scoring import NoAttempts, TaskScore, UnknownItem, score_fixed_checklist, score_grasping

__all__ = [
    "BLOCK_COLORS",
    "CLEARANCES_MM",
    "DIFFICULTIES",
    "FIXTURE_TYPES",
    "PEG_SHAPES",
    "BlockPlacement",
    "BlockPrompt",
    "BoardTooSmall",
    "CableFixture",
    "CableRoute",
    "NoAttempts",
    "PlacementInfeasible",
    "SceneLayout",
    "SceneObject",
    "TaskScore",
    "UnknownItem",
    "checklist_for_payload",
    "front_view",
    "gen_block_prompt",
    "gen_cable_route",
    "gen_scene",
    "instruction_payload",
    "peg_in_hole_checklist",
    "score_fixed_checklist",
    "score_grasping",
    "support_ok",
]
