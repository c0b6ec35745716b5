"""Instruction payload assembly: one JSON document per task type.

The server delivers these over the wire at session start; schemas are
documented in docs/task-payloads.md. Equal (task, seed) always yields a
byte-identical canonical JSON serialization.
"""

from __future__ import annotations

import base64
import json

from mnet.taskpack._seeding import derive_rng
from mnet.taskpack.blocks import PROMPT_MODES, gen_block_prompt
from mnet.taskpack.cable import gen_cable_route
from mnet.taskpack.pegs import peg_in_hole_checklist
from mnet.taskpack.scenes import DIFFICULTIES, gen_scene

# Object attribute bank for language-conditioned tabletop instructions.
# (name, color, category, functionality) per object id.
OBJECT_ATTRS = {
    1: ("mustard bottle", "yellow", "food container", "squeezing condiments"),
    2: ("soup can", "red", "food container", "holding soup"),
    3: ("banana", "yellow", "fruit", "eating"),
    4: ("drill", "blue", "power tool", "drilling holes"),
    5: ("cracker box", "red", "food container", "storing crackers"),
    6: ("mug", "blue", "tableware", "drinking"),
    7: ("golf ball", "white", "sports gear", "putting practice"),
    8: ("bleach bottle", "white", "cleaning supply", "disinfecting"),
    9: ("sugar box", "yellow", "food container", "storing sugar"),
    10: ("tennis ball", "green", "sports gear", "throwing practice"),
    11: ("pitcher", "blue", "tableware", "pouring water"),
    12: ("spam can", "blue", "food container", "holding meat"),
    13: ("bowl", "red", "tableware", "serving food"),
    14: ("marker", "black", "stationery", "writing"),
    15: ("clamp", "black", "hand tool", "holding parts"),
    16: ("wood block", "brown", "toy", "stacking"),
}

_TABLETOP_TEMPLATES = (
    "Move the {name} next to the {other_name}.",
    "Put the {color} object closest to the tag into the container.",
    "Place the item used for {functionality} at the far edge of the workspace.",
    "Stack the {name} on top of the {other_name}.",
    "Group every {category} item on the left half of the table.",
)


def canonical_json(payload: dict) -> bytes:
    return json.dumps(payload, separators=(",", ":"), sort_keys=True, ensure_ascii=False).encode("utf-8")


def instruction_payload(task: str, seed: int, difficulty: str = "easy") -> dict:
    """Build the instruction payload the server sends for one trial."""
    if task == "GraspingInClutter":
        return {"kind": "scene_layout", "scene": gen_scene(seed, difficulty).to_payload()}
    if task == "CableManagement":
        rng = derive_rng("cable-n", seed)
        route = gen_cable_route(seed, n_fixtures=rng.randint(4, 6))
        return {"kind": "cable_route", "route": route.to_payload()}
    if task == "PegInHole":
        return {"kind": "peg_checklist", "items": list(peg_in_hole_checklist())}
    if task == "BlockArrangement":
        rng = derive_rng("blocks-mode", seed)
        prompt = gen_block_prompt(seed, rng.choice(PROMPT_MODES))
        doc: dict = {
            "kind": "block_prompt",
            "mode": prompt.mode,
            "text": prompt.text,
            "target_layout": [
                {"color": b.color, "cell": list(b.cell)} for b in prompt.target_layout
            ],
        }
        if prompt.image_png is not None:
            doc["image_ref"] = "block_prompt.png"
            doc["image_png_b64"] = base64.b64encode(prompt.image_png).decode("ascii")
        return doc
    if task == "TabletopManipulation":
        rng = derive_rng("tabletop", seed)
        scene = gen_scene(seed, rng.choice(list(DIFFICULTIES)))
        ids = [o.object_id for o in scene.objects]
        primary, other = rng.sample(ids, 2)
        name, color, category, functionality = OBJECT_ATTRS[primary]
        other_name = OBJECT_ATTRS[other][0]
        template = rng.choice(_TABLETOP_TEMPLATES)
        text = template.format(name=name, color=color, category=category,
                               functionality=functionality, other_name=other_name)
        steps = [f"step_{i + 1}" for i in range(rng.randint(1, 3))]
        return {
            "kind": "tabletop",
            "scene": scene.to_payload(),
            "instruction": text,
            "steps": steps,
        }
    raise ValueError(f"unknown task {task!r}")


def checklist_for_payload(payload: dict) -> list[str]:
    """Ordered checklist item ids implied by an instruction payload."""
    kind = payload.get("kind")
    if kind == "peg_checklist":
        return list(payload["items"])
    if kind == "cable_route":
        return [
            f"fixture_{i + 1}_{f['type']}@r{f['hole']['row']}c{f['hole']['col']}"
            for i, f in enumerate(payload["route"]["fixtures"])
        ]
    if kind == "block_prompt":
        return [
            f"block_{i + 1}_{b['color']}@{b['cell'][0]},{b['cell'][1]},{b['cell'][2]}"
            for i, b in enumerate(payload["target_layout"])
        ]
    if kind == "tabletop":
        return list(payload["steps"])
    raise ValueError(f"payload kind {kind!r} has no checklist")
