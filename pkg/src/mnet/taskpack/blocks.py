"""Block arrangement prompts: language, visual, and visual-language.

Layouts live on an integer grid; a cell is (x, y, z) with x across, y away
from the camera, z up. Gravity rules the layout space: a block above the
table must sit on a full cell, so every column of blocks is a solid stack.

The rendered "visual" prompt is a deterministic front-view schematic: for
each (x, z) the block nearest the camera (smallest y) is drawn. Blocks
hidden behind others are genuinely absent from the image, which is what
makes visual and visual-language prompts underdetermined on purpose.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

from PIL import Image, ImageDraw

from mnet.taskpack._seeding import derive_rng

BLOCK_COLORS = ("red", "yellow", "orange", "blue", "green")
MAX_PER_COLOR = 10
PROMPT_MODES = ("Language", "Visual", "VisualLanguage")

GRID_W = 3  # x cells
GRID_D = 2  # y cells (depth)
GRID_H = 3  # z cells

_RGB = {
    "red": (220, 50, 47),
    "yellow": (240, 200, 20),
    "orange": (235, 130, 30),
    "blue": (38, 100, 220),
    "green": (40, 160, 70),
}
_CELL_PX = 28


@dataclass(frozen=True)
class BlockPlacement:
    color: str
    cell: tuple[int, int, int]  # (x, y, z)


@dataclass(frozen=True)
class BlockPrompt:
    mode: str
    text: Optional[str]
    image_png: Optional[bytes]
    target_layout: tuple[BlockPlacement, ...]
    image_ref: Optional[str] = None  # file name once written into a package

    def color_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for b in self.target_layout:
            counts[b.color] = counts.get(b.color, 0) + 1
        return counts


def support_ok(layout) -> bool:
    """Every block above the table rests on an occupied cell."""
    cells = {b.cell for b in layout}
    return all(z == 0 or (x, y, z - 1) in cells for (x, y, z) in cells)


def front_view(layout) -> dict[tuple[int, int], str]:
    """Visible color per (x, z): the placement with the smallest y wins."""
    best: dict[tuple[int, int], tuple[int, str]] = {}
    for b in layout:
        x, y, z = b.cell
        cur = best.get((x, z))
        if cur is None or y < cur[0]:
            best[(x, z)] = (y, b.color)
    return {k: color for k, (_, color) in best.items()}


def render_front_view(layout, grid_w: int = GRID_W, grid_h: int = GRID_H) -> bytes:
    """Deterministic schematic PNG of the front view."""
    view = front_view(layout)
    width = grid_w * _CELL_PX + 2
    height = grid_h * _CELL_PX + 2
    img = Image.new("RGB", (width, height), (250, 250, 250))
    draw = ImageDraw.Draw(img)
    for (x, z), color in sorted(view.items()):
        left = 1 + x * _CELL_PX
        top = 1 + (grid_h - 1 - z) * _CELL_PX
        draw.rectangle([left, top, left + _CELL_PX - 2, top + _CELL_PX - 2],
                       fill=_RGB[color], outline=(40, 40, 40))
    for gx in range(grid_w + 1):
        draw.line([(1 + gx * _CELL_PX, 1), (1 + gx * _CELL_PX, height - 1)], fill=(210, 210, 210))
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def _counts_text(layout) -> str:
    counts: dict[str, int] = {}
    for b in layout:
        counts[b.color] = counts.get(b.color, 0) + 1
    parts = [f"{n} {color}" for color, n in sorted(counts.items())]
    total = len(layout)
    return f"Use exactly {total} blocks in total: " + ", ".join(parts) + "."


_LANGUAGE_TEMPLATES = ("line", "tower", "two_towers", "square")


def _language_prompt(rng) -> tuple[str, tuple[BlockPlacement, ...]]:
    template = rng.choice(_LANGUAGE_TEMPLATES)
    color = rng.choice(BLOCK_COLORS)
    if template == "line":
        k = rng.randint(3, 5)
        text = f"Place {k} {color} blocks in a straight line on the table."
        layout = tuple(BlockPlacement(color, (i, 0, 0)) for i in range(k))
    elif template == "tower":
        k = rng.randint(2, 3)
        text = f"Stack {k} {color} cubes into a straight vertical line."
        layout = tuple(BlockPlacement(color, (0, 0, i)) for i in range(k))
    elif template == "two_towers":
        other = rng.choice([c for c in BLOCK_COLORS if c != color])
        text = (f"Build two towers of two blocks each, one {color} and one {other}, "
                "with one empty cell between them.")
        layout = (
            BlockPlacement(color, (0, 0, 0)), BlockPlacement(color, (0, 0, 1)),
            BlockPlacement(other, (2, 0, 0)), BlockPlacement(other, (2, 0, 1)),
        )
    else:  # square
        text = f"Arrange four {color} blocks into a 2x2 square on the table."
        layout = tuple(BlockPlacement(color, (x, y, 0)) for x in (0, 1) for y in (0, 1))
    return text, layout


def _drop_block(rng, heights: dict[tuple[int, int], int], x: int, y: int, color: str,
                blocks: list[BlockPlacement]) -> None:
    z = heights.get((x, y), 0)
    if z >= GRID_H:
        return
    blocks.append(BlockPlacement(color, (x, y, z)))
    heights[(x, y)] = z + 1


def _visual_layout(rng) -> tuple[BlockPlacement, ...]:
    heights: dict[tuple[int, int], int] = {}
    blocks: list[BlockPlacement] = []
    for _ in range(rng.randint(3, 6)):
        _drop_block(rng, heights, rng.randrange(GRID_W), rng.randrange(GRID_D),
                    rng.choice(BLOCK_COLORS), blocks)
    return tuple(blocks)


def _visual_language_layout(rng) -> tuple[BlockPlacement, ...]:
    """A layout with at least one block guaranteed hidden in the front view.

    Capped at six blocks so the full layout space stays small enough for
    exhaustive consistency checking.
    """
    heights: dict[tuple[int, int], int] = {}
    blocks: list[BlockPlacement] = []
    front_cols = rng.sample(range(GRID_W), rng.randint(2, GRID_W))
    n_hidden = rng.randint(1, 2)
    n_front = rng.randint(len(front_cols), min(2 * len(front_cols), 6 - n_hidden))
    per_col = {x: 1 for x in front_cols}
    for _ in range(n_front - len(front_cols)):
        per_col[rng.choice(front_cols)] += 1
    for x in front_cols:
        for _ in range(per_col[x]):
            _drop_block(rng, heights, x, 0, rng.choice(BLOCK_COLORS), blocks)
    # Hidden blocks: behind an occupied front column, at ground level.
    for x in rng.sample(front_cols, n_hidden):
        _drop_block(rng, heights, x, 1, rng.choice(BLOCK_COLORS), blocks)
    return tuple(blocks)


def gen_block_prompt(seed: int, mode: str) -> BlockPrompt:
    if mode not in PROMPT_MODES:
        raise ValueError(f"mode must be one of {PROMPT_MODES}, got {mode!r}")
    rng = derive_rng("blocks", seed, mode)

    if mode == "Language":
        text, layout = _language_prompt(rng)
        prompt = BlockPrompt(mode=mode, text=text, image_png=None, target_layout=layout)
    elif mode == "Visual":
        layout = _visual_layout(rng)
        prompt = BlockPrompt(mode=mode, text=None, image_png=render_front_view(layout),
                             target_layout=layout)
    else:
        layout = _visual_language_layout(rng)
        prompt = BlockPrompt(mode=mode, text=_counts_text(layout),
                             image_png=render_front_view(layout), target_layout=layout)

    assert support_ok(prompt.target_layout)
    counts = prompt.color_counts()
    assert all(n <= MAX_PER_COLOR for n in counts.values())
    return prompt
