"""Cable routing configurations over a grid board of mount holes.

The route is an ordered fixture list; routing order is list order.
Consecutive fixtures keep at least one empty hole between them (Chebyshev
distance >= 2) so the cable has room to bend.
"""

from __future__ import annotations

from dataclasses import dataclass

from mnet.taskpack._seeding import derive_rng

FIXTURE_TYPES = ("YClip", "RoundPeg", "UClip", "CClip")

BOARD_ROWS = 8
BOARD_COLS = 8
PITCH_MM = 40.0

_MAX_ATTEMPTS = 10_000


class BoardTooSmall(Exception):
    """The board cannot host the requested number of fixtures."""


@dataclass(frozen=True)
class CableFixture:
    type: str
    hole: tuple[int, int]  # (row, col)


@dataclass(frozen=True)
class CableRoute:
    rows: int
    cols: int
    pitch_mm: float
    fixtures: tuple[CableFixture, ...]

    def to_payload(self) -> dict:
        return {
            "board": {"rows": self.rows, "cols": self.cols, "pitch_mm": self.pitch_mm},
            "fixtures": [
                {"type": f.type, "hole": {"row": f.hole[0], "col": f.hole[1]}}
                for f in self.fixtures
            ],
        }


def _chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def gen_cable_route(
    seed: int,
    n_fixtures: int,
    rows: int = BOARD_ROWS,
    cols: int = BOARD_COLS,
    pitch_mm: float = PITCH_MM,
) -> CableRoute:
    if n_fixtures < 2:
        raise ValueError("a route needs at least 2 fixtures")
    if n_fixtures > rows * cols:
        raise BoardTooSmall(f"{n_fixtures} fixtures on a {rows}x{cols} board")
    rng = derive_rng("cable", seed, n_fixtures, rows, cols)

    holes: list[tuple[int, int]] = []
    attempts = _MAX_ATTEMPTS
    while len(holes) < n_fixtures:
        attempts -= 1
        if attempts <= 0:
            # Dense boards can make the spacing rule unsatisfiable by sampling.
            raise BoardTooSmall("could not satisfy fixture spacing on this board")
        hole = (rng.randrange(rows), rng.randrange(cols))
        if hole in holes:
            continue
        if holes and _chebyshev(hole, holes[-1]) < 2:
            continue
        holes.append(hole)

    fixtures = tuple(CableFixture(type=rng.choice(FIXTURE_TYPES), hole=h) for h in holes)
    return CableRoute(rows=rows, cols=cols, pitch_mm=pitch_mm, fixtures=fixtures)
