"""Finite treatment lattices under the componentwise product order.

Treatments are integer-coded level vectors.  A treatment set is usable only
if it is closed under componentwise min (meet) and max (join).  The
four-point non-chain sublattices of such a set ("diamonds") are the minimal
structures on which cross-dimension shape restrictions have any bite, so a
validated lattice knows how to enumerate them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator

Point = tuple[int, ...]


class LatticeError(ValueError):
    """Invalid lattice input."""


class DimensionMismatch(LatticeError):
    pass


class EmptySet(LatticeError):
    pass


class NotClosed(LatticeError):
    """A member pair whose meet or join is missing from the set."""

    def __init__(self, a: Point, b: Point, missing: Point):
        self.pair = (a, b)
        self.missing = missing
        super().__init__(f"not closed under meet/join: {a}, {b} require {missing}")


class Relation(Enum):
    """Product-order relation between two treatment points.

    ``LESS``/``GREATER`` are strict (equality is reported distinctly).
    """

    LESS = "less-or-equal"
    GREATER = "greater-or-equal"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def as_point(coords: Iterable[int]) -> Point:
    """Coerce an iterable of integer levels to a treatment point."""
    return tuple(int(c) for c in coords)


def _check_dims(a: Point, b: Point) -> None:
    if len(a) != len(b):
        raise DimensionMismatch(f"points {a} and {b} differ in dimension")


def compare(a: Point, b: Point) -> Relation:
    """Relate ``a`` to ``b`` componentwise."""
    _check_dims(a, b)
    le = all(x <= y for x, y in zip(a, b))
    ge = all(x >= y for x, y in zip(a, b))
    if le and ge:
        return Relation.EQUAL
    if le:
        return Relation.LESS
    if ge:
        return Relation.GREATER
    return Relation.INCOMPARABLE


def leq(a: Point, b: Point) -> bool:
    """a <= b under the product order (weak inequality)."""
    _check_dims(a, b)
    return all(x <= y for x, y in zip(a, b))


def lt(a: Point, b: Point) -> bool:
    """a < b: dominance in every coordinate with at least one strict."""
    return leq(a, b) and a != b


def incomparable(a: Point, b: Point) -> bool:
    _check_dims(a, b)
    return not leq(a, b) and not leq(b, a)


def meet(a: Point, b: Point) -> Point:
    """Componentwise minimum (greatest lower bound)."""
    _check_dims(a, b)
    return tuple(min(x, y) for x, y in zip(a, b))


def join(a: Point, b: Point) -> Point:
    """Componentwise maximum (least upper bound)."""
    _check_dims(a, b)
    return tuple(max(x, y) for x, y in zip(a, b))


@dataclass(frozen=True)
class TreatmentLattice:
    """A validated finite treatment set, closed under meet and join.

    ``points`` is kept sorted so that every downstream iteration (bound
    aggregation, report rows, oracle strata) is reproducible.
    """

    dimension: int
    points: tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __contains__(self, p: object) -> bool:
        return p in self._point_set()

    @lru_cache(maxsize=None)
    def _point_set(self) -> frozenset[Point]:
        return frozenset(self.points)

    def index(self, p: Point) -> int:
        """Position of ``p`` in the canonical point order."""
        try:
            return self.points.index(p)
        except ValueError:
            raise LatticeError(f"{p} is not a member of the lattice") from None


@dataclass(frozen=True)
class Diamond:
    """Four-point non-chain sublattice {bottom, left, right, top}.

    ``left`` and ``right`` are the incomparable pair; ``bottom``/``top`` are
    their meet/join.  ``id`` is the position in the canonical enumeration
    (lexicographic by (bottom, top, left)), stable for a given lattice.
    """

    bottom: Point
    left: Point
    right: Point
    top: Point
    id: int

    @property
    def members(self) -> frozenset[Point]:
        return frozenset((self.bottom, self.left, self.right, self.top))


def validate_lattice(points: Iterable[Iterable[int]]) -> TreatmentLattice:
    """Check closure under meet and join and return the validated lattice.

    Raises ``EmptySet`` for an empty input, ``DimensionMismatch`` for ragged
    coordinates, and ``NotClosed`` naming a violating pair otherwise.
    """
    pts = sorted({as_point(p) for p in points})
    if not pts:
        raise EmptySet("a treatment lattice must be nonempty")
    dim = len(pts[0])
    for p in pts:
        if len(p) != dim:
            raise DimensionMismatch(f"point {p} does not have dimension {dim}")
    members = set(pts)
    for a, b in itertools.combinations(pts, 2):
        m = meet(a, b)
        if m not in members:
            raise NotClosed(a, b, m)
        j = join(a, b)
        if j not in members:
            raise NotClosed(a, b, j)
    return TreatmentLattice(dimension=dim, points=tuple(pts))


def grid_lattice(levels: Iterable[Iterable[int]]) -> TreatmentLattice:
    """Full product grid over the given per-dimension level lists."""
    axes = [sorted({int(v) for v in axis}) for axis in levels]
    if not axes or any(not axis for axis in axes):
        raise EmptySet("every dimension needs at least one level")
    pts = list(itertools.product(*axes))
    return TreatmentLattice(dimension=len(axes), points=tuple(sorted(pts)))


def close_under_meet_join(points: Iterable[Iterable[int]]) -> frozenset[Point]:
    """Smallest meet/join-closed superset of ``points``."""
    current = {as_point(p) for p in points}
    while True:
        new = set()
        for a, b in itertools.combinations(sorted(current), 2):
            for c in (meet(a, b), join(a, b)):
                if c not in current:
                    new.add(c)
        if not new:
            return frozenset(current)
        current |= new


@lru_cache(maxsize=None)
def enumerate_diamonds(lattice: TreatmentLattice) -> tuple[Diamond, ...]:
    """All four-point non-chain sublattices of the lattice.

    Every unordered incomparable pair {a, b} defines exactly one diamond
    (its meet and join exist by closure and are distinct from both members),
    so the scan over pairs is exhaustive and duplicate-free.
    """
    found: list[tuple[Point, Point, Point, Point]] = []
    for a, b in itertools.combinations(lattice.points, 2):
        if not incomparable(a, b):
            continue
        left, right = sorted((a, b))
        found.append((meet(a, b), join(a, b), left, right))
    found.sort(key=lambda rec: (rec[0], rec[1], rec[2]))
    return tuple(
        Diamond(bottom=bot, left=left, right=right, top=top, id=i)
        for i, (bot, top, left, right) in enumerate(found)
    )
