"""Exact dyadic intervals, tiles, E(P) sets, tile mass and tree grouping.

Space intervals at level k are [i 2^-k, (i+1) 2^-k) with i taken mod 2^k.
Frequency intervals at level k are [i 2^k, (i+1) 2^k) in integer frequency
units. A tile pairs a frequency and a space interval of the same level, so
|omega| * |I| = 1 exactly.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Side",
    "DyadicInterval",
    "Tile",
    "Tree",
    "space",
    "freq",
    "scale_range",
    "all_tiles",
    "e_set",
    "mass",
    "masses",
    "mass_bucket",
    "mass_partition",
    "decompose_trees",
    "NULL_BUCKET",
    "MIN_TILE_LEVEL",
]

MIN_TILE_LEVEL = 5
# Tiles stop this many levels above the grid resolution.
TILE_LEVEL_MARGIN = 5
NULL_BUCKET = None


class Side(str, Enum):
    SPACE = "space"
    FREQUENCY = "frequency"


@dataclass(frozen=True, order=True)
class DyadicInterval:
    side: Side
    level: int
    index: int

    def __post_init__(self):
        side = Side(self.side)
        level, index = int(self.level), int(self.index)
        if side is Side.SPACE:
            if level < 0:
                raise ConfigurationError(f"space level must be >= 0, got {level}")
            index %= 1 << level
        elif level < 0:
            raise ConfigurationError(f"frequency level must be >= 0, got {level}")
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "index", index)

    @property
    def length(self) -> float:
        return 2.0**-self.level if self.side is Side.SPACE else 2.0**self.level

    @property
    def start(self) -> float:
        return self.index * self.length

    @property
    def end(self) -> float:
        return (self.index + 1) * self.length

    @property
    def center(self) -> float:
        return (self.index + 0.5) * self.length

    def contains(self, other: "DyadicInterval") -> bool:
        if other.side is not self.side:
            return False
        if self.side is Side.SPACE:
            return other.level >= self.level and (other.index >> (other.level - self.level)) == self.index
        return other.level <= self.level and (other.index >> (self.level - other.level)) == self.index

    def contains_frequency(self, n: int) -> bool:
        return self.side is Side.FREQUENCY and (int(n) >> self.level) == self.index

    def parent(self) -> "DyadicInterval":
        if self.side is Side.SPACE:
            if self.level == 0:
                raise ValueError("the full torus has no dyadic parent")
            return DyadicInterval(Side.SPACE, self.level - 1, self.index >> 1)
        return DyadicInterval(Side.FREQUENCY, self.level + 1, self.index >> 1)

    def sample_range(self, m: int) -> tuple[int, int]:
        """Half-open range of grid indices covered by a space interval."""
        if self.side is not Side.SPACE:
            raise ValueError("sample_range is only defined for space intervals")
        if self.level > m:
            raise ConfigurationError(f"interval level {self.level} finer than grid m={m}")
        w = 1 << (m - self.level)
        return self.index * w, (self.index + 1) * w

    def sample_slice(self, m: int) -> slice:
        return slice(*self.sample_range(m))

    def to_json(self) -> dict:
        return {"side": self.side.value, "level": self.level, "index": self.index}

    @classmethod
    def from_json(cls, rec: dict) -> "DyadicInterval":
        try:
            return cls(Side(rec["side"]), int(rec["level"]), int(rec["index"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed interval record {rec!r}: {exc}") from None

    def __repr__(self) -> str:
        tag = "S" if self.side is Side.SPACE else "F"
        return f"{tag}({self.level},{self.index})"


def space(level: int, index: int) -> DyadicInterval:
    return DyadicInterval(Side.SPACE, level, index)


def freq(level: int, index: int) -> DyadicInterval:
    return DyadicInterval(Side.FREQUENCY, level, index)


@dataclass(frozen=True)
class Tile:
    omega: DyadicInterval
    space: DyadicInterval

    def __post_init__(self):
        if self.omega.side is not Side.FREQUENCY or self.space.side is not Side.SPACE:
            raise ConfigurationError("tile needs a frequency interval and a space interval")
        if self.omega.level != self.space.level:
            raise ConfigurationError("tile intervals must have the same level (area one)")

    @property
    def level(self) -> int:
        return self.space.level

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.level, self.space.index, self.omega.index)

    def __lt__(self, other: "Tile") -> bool:
        return self.key < other.key

    def to_json(self) -> dict:
        return {"omega": self.omega.to_json(), "space": self.space.to_json()}

    @classmethod
    def from_json(cls, rec: dict) -> "Tile":
        return cls(DyadicInterval.from_json(rec["omega"]), DyadicInterval.from_json(rec["space"]))

    def __repr__(self) -> str:
        return f"Tile(k={self.level}, I={self.space.index}, w={self.omega.index})"


def scale_range(m: int) -> range:
    """Tile levels kept on a 2**m grid."""
    return range(MIN_TILE_LEVEL, m - TILE_LEVEL_MARGIN + 1)


def all_tiles(m: int, seq=None) -> list[Tile]:
    """Every tile with level in ``scale_range(m)`` and omega inside [0, N/2).

    The lattice does not depend on the lacunary sequence; ``seq`` is accepted
    for call-site symmetry only.
    """
    if m < 2 * MIN_TILE_LEVEL:
        raise ConfigurationError(f"tile lattice needs m >= {2 * MIN_TILE_LEVEL}, got {m}")
    half = 1 << (m - 1)
    tiles = []
    for k in scale_range(m):
        nfreq = half >> k
        for i in range(1 << k):
            I = space(k, i)
            tiles.extend(Tile(freq(k, j), I) for j in range(nfreq))
    return tiles


def _grid_exponent(selector: np.ndarray) -> int:
    N = len(selector)
    m = N.bit_length() - 1
    if N != 1 << m:
        raise ConfigurationError(f"selector length {N} is not a power of two")
    return m


def e_set(tile: Tile, selector: np.ndarray) -> np.ndarray:
    """Grid indices i with x_i in I_P and N(x_i) in omega_P."""
    m = _grid_exponent(selector)
    lo, hi = tile.space.sample_range(m)
    hit = (selector[lo:hi] >> tile.level) == tile.omega.index
    return lo + np.flatnonzero(hit)


def mass(tile: Tile, selector: np.ndarray) -> float:
    """A(P) = |E(P)| / |I_P|."""
    m = _grid_exponent(selector)
    return e_set(tile, selector).size / float(1 << (m - tile.level))


def masses(tiles: Sequence[Tile], selector: np.ndarray) -> np.ndarray:
    return np.array([mass(t, selector) for t in tiles])


def mass_bucket(a: float) -> int | None:
    """n with 2^(-n-1) < a <= 2^(-n); ``NULL_BUCKET`` for a = 0."""
    if a < 0 or a > 1:
        raise ValueError(f"mass must lie in [0, 1], got {a}")
    if a == 0:
        return NULL_BUCKET
    mant, e = math.frexp(a)  # a = mant * 2**e, mant in [0.5, 1)
    return -e + 1 if mant == 0.5 else -e


def mass_partition(tiles: Iterable[Tile], selector: np.ndarray) -> dict:
    buckets: dict = defaultdict(list)
    for t in tiles:
        buckets[mass_bucket(mass(t, selector))].append(t)
    return dict(buckets)


@dataclass(frozen=True)
class Tree:
    freq: int
    tiles: tuple[Tile, ...]
    top: DyadicInterval

    def __len__(self) -> int:
        return len(self.tiles)


def _common_ancestor(intervals: Iterable[DyadicInterval]) -> DyadicInterval:
    ivs = list(intervals)
    level = min(I.level for I in ivs)
    idx = {I.index >> (I.level - level) for I in ivs}
    while len(idx) > 1:
        level -= 1
        idx = {i >> 1 for i in idx}
    return space(level, idx.pop())


def decompose_trees(family: Iterable[Tile]) -> list[Tree]:
    """Greedy maximal trees.

    Repeatedly take the unassigned tile with the largest |I_P| (ties: lowest
    frequency index, then lowest space index), use the left endpoint of its
    omega as tree frequency and collect every unassigned tile whose omega
    contains it.
    """
    order = sorted(set(family), key=lambda t: (t.level, t.omega.index, t.space.index))
    by_cell: dict[tuple[int, int], list[Tile]] = defaultdict(list)
    for t in order:
        by_cell[(t.level, t.omega.index)].append(t)
    levels = sorted({t.level for t in order})
    assigned: set[Tile] = set()
    trees = []
    for root in order:
        if root in assigned:
            continue
        c = root.omega.index << root.level
        members = []
        for k in levels:
            for t in by_cell.get((k, c >> k), ()):
                if t not in assigned:
                    assigned.add(t)
                    members.append(t)
        trees.append(Tree(c, tuple(members), _common_ancestor(t.space for t in members)))
    return trees
