"""Peg-in-hole checklist: the fixed instruction constant.

Five shapes, four clearance levels each; every combination appears exactly
once, ordered by descending clearance within each shape (loose fits first).
"""

from __future__ import annotations

PEG_SHAPES = ("round", "square", "hexagon", "triangle", "ell")
CLEARANCES_MM = (3.0, 1.0, 0.1, 0.02)


def peg_item_id(shape: str, clearance_mm: float) -> str:
    return f"{shape}@{clearance_mm:g}mm"


def peg_in_hole_checklist() -> tuple[str, ...]:
    return tuple(
        peg_item_id(shape, clearance)
        for shape in PEG_SHAPES
        for clearance in CLEARANCES_MM
    )
