"""Block prompts: support rule, templates, and cross-modal ambiguity.

The ambiguity oracle enumerates the small layout space directly. Because
the support rule forces every occupied column to be a solid stack, a layout
is fully described by per-column heights plus block colors; enumerating
height assignments is tractable and exact.
"""

import itertools

from mnet.taskpack import (
    BLOCK_COLORS,
    BlockPlacement,
    front_view,
    gen_block_prompt,
    support_ok,
)
from mnet.taskpack.blocks import GRID_D, GRID_H, GRID_W, MAX_PER_COLOR


def test_generation_is_deterministic():
    for mode in ("Language", "Visual", "VisualLanguage"):
        a = gen_block_prompt(3, mode)
        b = gen_block_prompt(3, mode)
        assert a.target_layout == b.target_layout
        assert a.text == b.text
        assert a.image_png == b.image_png


def test_language_line_template_puts_blocks_in_a_row_on_the_table():
    for seed in range(120):
        prompt = gen_block_prompt(seed, "Language")
        if prompt.text and prompt.text.startswith("Place") and "straight line" in prompt.text:
            cells = sorted(b.cell for b in prompt.target_layout)
            k = len(cells)
            assert cells == [(i, 0, 0) for i in range(k)]
            colors = {b.color for b in prompt.target_layout}
            assert len(colors) == 1
            return
    raise AssertionError("line template never sampled in 120 seeds")


def test_every_generated_layout_is_supported_and_within_color_budget():
    for seed in range(150):
        for mode in ("Language", "Visual", "VisualLanguage"):
            prompt = gen_block_prompt(seed, mode)
            assert support_ok(prompt.target_layout)
            counts = prompt.color_counts()
            assert all(n <= MAX_PER_COLOR for n in counts.values())
            assert set(counts) <= set(BLOCK_COLORS)


def test_support_rule_rejects_floating_block():
    floating = (BlockPlacement("red", (0, 0, 1)),)
    assert not support_ok(floating)
    grounded = (BlockPlacement("red", (0, 0, 0)), BlockPlacement("blue", (0, 0, 1)))
    assert support_ok(grounded)


def test_visual_prompt_carries_rendered_image():
    prompt = gen_block_prompt(5, "Visual")
    assert prompt.image_png and prompt.image_png.startswith(b"\x89PNG")
    assert prompt.text is None


# -- exhaustive ambiguity oracle ----------------------------------------------
#
# Support-valid layouts are exactly the per-column stack-height assignments,
# so the whole small layout space can be enumerated as height grids.


def _enumerate_height_configs(max_blocks):
    columns = list(itertools.product(range(GRID_W), range(GRID_D)))
    for heights in itertools.product(range(GRID_H + 1), repeat=len(columns)):
        if 0 < sum(heights) <= max_blocks:
            yield dict(zip(columns, heights))


def _view_cells(heights):
    """Front-view occupancy: (x, z) cells showing a block from any depth."""
    return {
        (x, z)
        for (x, y), h in heights.items()
        for z in range(h)
    }


def _hidden_blocks(heights):
    """Blocks occluded by a nearer block in the same (x, z) line of sight."""
    hidden = 0
    for (x, y), h in heights.items():
        for z in range(h):
            if any(heights.get((x, nearer), 0) > z for nearer in range(y)):
                hidden += 1
    return hidden


def _count_image_consistent(target_view, total_blocks, limit=2):
    """Layouts (occupancy x free hidden colors) matching the front view."""
    count = 0
    for heights in _enumerate_height_configs(total_blocks + 2):
        if _view_cells(heights) != set(target_view):
            continue
        count += max(1, len(BLOCK_COLORS) ** _hidden_blocks(heights))
        if count >= limit:
            return count
    return count


def _count_text_consistent(color_counts, limit=2):
    """Distinct occupancies admitting the exact stated block total."""
    total = sum(color_counts.values())
    count = 0
    for heights in _enumerate_height_configs(total):
        if sum(heights.values()) == total:
            count += 1
            if count >= limit:
                return count
    return count


def _is_hidden(block, layout):
    x, y, z = block.cell
    return any(b.cell == (x, nearer, z) for b in layout for nearer in range(y))


def test_visual_language_prompts_are_ambiguous_under_either_single_modality():
    for seed in range(40):
        prompt = gen_block_prompt(seed, "VisualLanguage")
        layout = prompt.target_layout
        assert len(layout) <= 6
        assert [b for b in layout if _is_hidden(b, layout)], f"seed {seed}: no hidden block"

        view = front_view(layout)
        assert _count_image_consistent(view, len(layout)) >= 2, seed
        assert _count_text_consistent(prompt.color_counts()) >= 2, seed
