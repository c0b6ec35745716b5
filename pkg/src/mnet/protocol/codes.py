"""One-time submission codes.

The code is read off a physical display in the recorded video, so the
alphabet drops the glyphs people misread on camera: 0/O and 1/I. That
leaves 32 symbols; 8 characters give 40 bits of entropy.
"""

from __future__ import annotations

import secrets

CODE_ALPHABET = "ABCDEFGHJKLMNPQRSTUVWXYZ23456789"
CODE_LENGTH = 8

assert len(CODE_ALPHABET) == 32


def generate_submission_code(rng=None) -> str:
    """Draw a fresh code; ``rng`` (anything with ``choice``) defaults to the OS CSPRNG."""
    choice = secrets.choice if rng is None else rng.choice
    return "".join(choice(CODE_ALPHABET) for _ in range(CODE_LENGTH))
