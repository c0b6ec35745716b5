"""Submission code generation."""

import math
import random

from mnet.protocol import CODE_ALPHABET, CODE_LENGTH, generate_submission_code


def test_alphabet_has_32_symbols_without_ambiguous_glyphs():
    assert len(CODE_ALPHABET) == 32
    assert len(set(CODE_ALPHABET)) == 32
    for glyph in "0O1I":
        assert glyph not in CODE_ALPHABET
    # 8 chars over 32 symbols -> 40 bits of entropy.
    assert CODE_LENGTH * math.log2(len(CODE_ALPHABET)) >= 40


def test_codes_have_expected_shape():
    for _ in range(200):
        code = generate_submission_code()
        assert len(code) == CODE_LENGTH
        assert all(c in CODE_ALPHABET for c in code)


def test_forbidden_glyphs_never_appear():
    rng = random.Random(1)
    for _ in range(2000):
        assert not set(generate_submission_code(rng)) & set("0O1I")


def test_ten_thousand_draws_have_no_duplicates():
    # Birthday bound: 10^4 draws over 32^8 values collide with p < 5e-5.
    rng = random.Random(2024)
    codes = {generate_submission_code(rng) for _ in range(10_000)}
    assert len(codes) == 10_000
