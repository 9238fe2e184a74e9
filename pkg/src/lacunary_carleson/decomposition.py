"""Level interval sets, the bad set, I_{P*} geometry and tile classification.

For a threshold lambda in (0, 1) the level-k collection holds the maximal
dyadic intervals I with mean(|f|, I) > lambda 2^-k. Every tile of the lattice
is then labelled as

* ``cluster``   when 0 lies in the 10*alpha dilation of omega_P,
* ``p2``/``p1`` relative to an anchor J in the level-k collection (the tile
  [[0, 1/|J|), J]) when some piece of I_{P*} contains J and every level-(k+1)
  interval meeting that piece contains it; ``p2`` if the doubled frequency
  intervals are disjoint, ``p1`` otherwise,
* ``residual``  with index l >= 1 when a piece of I_{P*} sits inside a single
  level-l interval and misses the level-(l-1) union, or index 0 when |f|
  vanishes on I_{P*} or I_{P*} lies in the dilated bad set.

Dilations b*I are taken about the centre on half-open intervals.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dyadic import DyadicInterval, Side, Tile, freq, space
from .errors import ConfigurationError, InvariantViolation
from .operators import STAR_OFFSETS
from .torus import GridFunction, LacunarySequence

__all__ = [
    "LevelSets",
    "FBad",
    "Label",
    "Classification",
    "level_intervals",
    "dyadic_sums",
    "maximal_intervals",
    "f_bad",
    "dilated_mask",
    "i_star",
    "anchor_tile",
    "is_cluster",
    "doubled_overlap",
    "classify",
    "level_shell_report",
    "BAD_DILATION",
]

BAD_DILATION = 1000
# levels beyond m are only needed for functions with tiny mass; stop here
_LEVEL_LIMIT_MARGIN = 60


def dyadic_sums(f: GridFunction) -> list[np.ndarray]:
    """sums[j][i] = sum of |f| over the samples of the level-j interval i."""
    sums = [None] * (f.m + 1)
    sums[f.m] = f.abs()
    for j in range(f.m - 1, -1, -1):
        sums[j] = sums[j + 1].reshape(-1, 2).sum(axis=1)
    return sums


def maximal_intervals(sums: Sequence[np.ndarray], threshold: float) -> list[DyadicInterval]:
    """Maximal dyadic intervals whose mean exceeds ``threshold`` (strictly)."""
    m = len(sums) - 1
    found = []
    blocked = np.zeros(1, dtype=bool)
    for j in range(m + 1):
        q = sums[j] > threshold * float(1 << (m - j))
        fresh = q & ~blocked
        found.extend(space(j, int(i)) for i in np.flatnonzero(fresh))
        if j < m:
            blocked = np.repeat(blocked | q, 2)
    found.sort(key=lambda I: I.index << (m - I.level))
    return found


def _union(m: int, intervals: Iterable[DyadicInterval]) -> np.ndarray:
    mask = np.zeros(1 << m, dtype=bool)
    for I in intervals:
        mask[I.sample_slice(m)] = True
    return mask


@dataclass
class LevelSets:
    lam: float
    m: int
    levels: list[list[DyadicInterval]]
    k_max: int
    _sums: list[np.ndarray] = field(repr=False)
    _extra: dict = field(default_factory=dict, repr=False)
    _masks: dict = field(default_factory=dict, repr=False)

    def intervals(self, k: int) -> list[DyadicInterval]:
        if k < 0:
            return []
        if k < len(self.levels):
            return self.levels[k]
        if k not in self._extra:
            self._extra[k] = maximal_intervals(self._sums, self.lam * 2.0**-k)
        return self._extra[k]

    def union_mask(self, k: int) -> np.ndarray:
        if k < 0:
            return np.zeros(1 << self.m, dtype=bool)
        if k not in self._masks:
            mask = _union(self.m, self.intervals(k))
            mask.setflags(write=False)
            self._masks[k] = mask
        return self._masks[k]

    def is_full(self, k: int) -> bool:
        return k >= 0 and bool(self.union_mask(k).all())

    @property
    def is_empty(self) -> bool:
        return not self._sums[0][0] > 0

    def last_level(self) -> int:
        """Smallest k whose union is the whole torus (or a hard limit for f = 0)."""
        if self.is_empty:
            return -1
        k = 0
        limit = self.m + _LEVEL_LIMIT_MARGIN
        while not self.is_full(k) and k < limit:
            k += 1
        return k

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "k_max": self.k_max,
            "levels": [[I.to_json() for I in lev] for lev in self.levels],
        }


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ConfigurationError(f"lambda must lie in (0, 1), got {lam}")
    return lam


def level_intervals(f: GridFunction, lam: float) -> LevelSets:
    lam = _check_lambda(lam)
    sums = dyadic_sums(f)
    levels = []
    k_max = f.m
    for k in range(f.m + 1):
        lev = maximal_intervals(sums, lam * 2.0**-k)
        levels.append(lev)
        if sum(2.0**-I.level for I in lev) == 1.0:
            k_max = k
            break
    return LevelSets(lam, f.m, levels, k_max, sums)


def dilated_mask(m: int, intervals: Iterable[DyadicInterval], factor: float) -> np.ndarray:
    """Union of the ``factor``-dilations (about the centre, periodic) as a sample mask."""
    N = 1 << m
    mask = np.zeros(N, dtype=bool)
    for J in intervals:
        lo, hi = J.sample_range(m)
        width = hi - lo
        if factor * width >= N:
            mask[:] = True
            return mask
        c = lo + width / 2.0
        half = factor * width / 2.0
        start = math.ceil(c - half)
        stop = math.ceil(c + half)
        mask[np.arange(start, stop) % N] = True
    return mask


@dataclass(frozen=True)
class FBad:
    mask: np.ndarray
    components: tuple[DyadicInterval, ...]
    enlarged: np.ndarray
    dilation: float


def f_bad(f: GridFunction, lam: float, dilation: float = BAD_DILATION, sums=None) -> FBad:
    """{M f > lambda/2} for the dyadic maximal function, and its dilation."""
    lam = _check_lambda(lam)
    sums = dyadic_sums(f) if sums is None else sums
    comps = maximal_intervals(sums, lam / 2.0)
    return FBad(_union(f.m, comps), tuple(comps), dilated_mask(f.m, comps, dilation), dilation)


def i_star(tile: Tile) -> list[DyadicInterval]:
    """The 14 dyadic pieces of I_{P*}, left arm then right arm."""
    k, idx = tile.level, tile.space.index
    return [space(k, idx + off) for off in STAR_OFFSETS]


def anchor_tile(J: DyadicInterval) -> Tile:
    """The tile with spatial interval J whose doubled frequency interval holds 0."""
    return Tile(freq(J.level, 0), J)


def is_cluster(tile: Tile, alpha: int) -> bool:
    """0 in the 10*alpha dilation of omega_P (half-open, about the centre)."""
    return 2 * tile.omega.index + 1 <= 10 * alpha


def doubled_overlap(tile: Tile, anchor: DyadicInterval) -> bool:
    """Whether 2*omega_P meets 2*omega_{P_O} for the anchor tile over ``anchor``."""
    j, kp, ko = tile.omega.index, tile.level, anchor.level
    lo_p = (2 * j - 1) << kp  # doubled endpoints, in units of 1/2
    hi_p = (2 * j + 3) << kp
    lo_o = -(1 << ko)
    hi_o = 3 << ko
    return lo_p < hi_o and lo_o < hi_p


@dataclass(frozen=True)
class Label:
    kind: str  # "cluster" | "p2" | "p1" | "residual"
    k: int | None = None
    anchor: DyadicInterval | None = None
    r: int | None = None

    def to_json(self) -> dict:
        return {
            "label": self.kind,
            "k": self.k,
            "P_O": None if self.anchor is None else anchor_tile(self.anchor).to_json(),
            "r": self.r,
        }


@dataclass
class Classification:
    tiles: list[Tile]
    labels: dict[Tile, tuple[Label, ...]]
    lam: float
    alpha: int
    levels: LevelSets
    fbad: FBad

    def multiplicity(self, tile: Tile) -> int:
        return len({lb.k for lb in self.labels[tile] if lb.kind in ("p1", "p2")})

    def max_multiplicity(self) -> int:
        return max((self.multiplicity(t) for t in self.tiles), default=0)

    def uncovered(self) -> list[Tile]:
        return [t for t in self.tiles if not self.labels[t]]

    def cluster(self) -> list[Tile]:
        return [t for t in self.tiles if any(lb.kind == "cluster" for lb in self.labels[t])]

    def residual(self, l: int | None = None) -> list[Tile]:
        return [
            t
            for t in self.tiles
            if any(lb.kind == "residual" and (l is None or lb.k == l) for lb in self.labels[t])
        ]

    def families(self, kind: str) -> dict[tuple[int, DyadicInterval], list[Tile]]:
        """(k, anchor) -> sorted tiles carrying a ``kind`` label for that pair."""
        fams: dict = defaultdict(set)
        for t in self.tiles:
            for lb in self.labels[t]:
                if lb.kind == kind:
                    fams[(lb.k, lb.anchor)].add(t)
        return {key: sorted(v) for key, v in sorted(fams.items(), key=lambda kv: (kv[0][0], kv[0][1].level, kv[0][1].index))}

    def check(self) -> None:
        missing = self.uncovered()
        if missing:
            raise InvariantViolation(f"{len(missing)} tiles carry no label, e.g. {missing[:3]}")
        worst = self.max_multiplicity()
        if worst > 14:
            raise InvariantViolation(f"tile multiplicity {worst} exceeds 14")

    def label_counts(self) -> Counter:
        c: Counter = Counter()
        for t in self.tiles:
            for lb in self.labels[t]:
                c[(lb.k if lb.kind != "cluster" else -1, lb.kind)] += 1
        return c

    def to_json(self) -> dict:
        rows = []
        for t in self.tiles:
            for lb in self.labels[t]:
                rec = {"tile": t.to_json()}
                rec.update(lb.to_json())
                rows.append(rec)
        return {
            "lambda": self.lam,
            "levels": [[I.to_json() for I in lev] for lev in self.levels.levels],
            "labels": rows,
            "stats": {
                "tiles": len(self.tiles),
                "cluster": len(self.cluster()),
                "residual": len(self.residual()),
                "max_multiplicity": self.max_multiplicity(),
                "uncovered": len(self.uncovered()),
            },
        }


@dataclass
class _PieceTable:
    """Per-level lookups for the dyadic pieces D of I_{P*} at one tile level."""

    level: int
    # (k, anchor) pairs for which D qualifies, indexed by D's index
    anchors: list[list[tuple[int, DyadicInterval]]]
    # residual index l >= 1 for D, or -1
    residual: np.ndarray
    # |f| mass on D, for the vanishing form of the level-0 residual
    mass: np.ndarray
    # D inside the dilated bad set
    in_bad: np.ndarray


def _piece_table(j: int, levels: LevelSets, k_last: int, sums, fbad: FBad) -> _PieceTable:
    m = levels.m
    n = 1 << j
    w = 1 << (m - j)
    # sub[k][i]: some interval of level k lies inside D_i; strict: and differs from D_i
    sub, strict, contained = [], [], []
    members: list[dict[int, list[DyadicInterval]]] = []
    for k in range(k_last + 2):
        s = np.zeros(n, dtype=bool)
        st = np.zeros(n, dtype=bool)
        inside = np.zeros(n, dtype=bool)
        mem: dict[int, list[DyadicInterval]] = defaultdict(list)
        for I in levels.intervals(k):
            if I.level >= j:
                i = I.index >> (I.level - j)
                s[i] = True
                if I.level > j:
                    st[i] = True
                mem[i].append(I)
            else:
                span = j - I.level
                inside[I.index << span : (I.index + 1) << span] = True
        sub.append(s)
        strict.append(st)
        contained.append(inside)
        members.append(mem)

    anchors: list[list[tuple[int, DyadicInterval]]] = [[] for _ in range(n)]
    for k in range(k_last + 1):
        if levels.is_full(k):
            continue  # families are empty when the level-k union is the torus
        ok = sub[k] & ~strict[k + 1]
        for i in np.flatnonzero(ok):
            anchors[i].extend((k, J) for J in members[k][i])

    residual = np.full(n, -1, dtype=np.int64)
    undecided = np.ones(n, dtype=bool)
    for k in range(k_last + 1):
        meets = levels.union_mask(k).reshape(n, w).any(axis=1)
        first = undecided & meets
        if k >= 1:
            residual[first & contained[k]] = k
        undecided &= ~meets

    return _PieceTable(
        level=j,
        anchors=anchors,
        residual=residual,
        mass=sums[j],
        in_bad=fbad.enlarged.reshape(n, w).all(axis=1),
    )


def classify(
    tiles: Sequence[Tile],
    f: GridFunction,
    lam: float,
    seq: LacunarySequence,
    *,
    levels: LevelSets | None = None,
    dilation: float = BAD_DILATION,
    check: bool = True,
) -> Classification:
    lam = _check_lambda(lam)
    alpha = seq.alpha if isinstance(seq, LacunarySequence) else int(seq)
    if levels is None:
        levels = level_intervals(f, lam)
    sums = levels._sums
    fbad = f_bad(f, lam, dilation, sums=sums)
    k_last = levels.last_level()

    tables = {j: _piece_table(j, levels, k_last, sums, fbad) for j in sorted({t.level for t in tiles})}

    labels: dict[Tile, tuple[Label, ...]] = {}
    for t in tiles:
        tab = tables[t.level]
        size = 1 << t.level
        pieces = [(t.space.index + off) % size for off in STAR_OFFSETS]
        out: list[Label] = []
        if is_cluster(t, alpha):
            out.append(Label("cluster"))
        else:
            for r, i in enumerate(pieces, start=1):
                for k, J in tab.anchors[i]:
                    out.append(Label("p1" if doubled_overlap(t, J) else "p2", k, J, r))
        if all(tab.mass[i] == 0 for i in pieces) or all(tab.in_bad[i] for i in pieces):
            out.append(Label("residual", 0))
        for r, i in enumerate(pieces, start=1):
            l = int(tab.residual[i])
            if l >= 1:
                out.append(Label("residual", l, None, r))
        labels[t] = tuple(out)

    result = Classification(list(tiles), labels, lam, alpha, levels, fbad)
    if check:
        result.check()
    return result


def level_shell_report(f: GridFunction, levels: LevelSets) -> dict:
    """Nesting of the unions and the pointwise bounds on level shells.

    On the shell between the level-l and level-(l-1) unions, |f| <= 2^(-l+1) lambda
    (general case); for l = 0 shells, i.e. outside the level-0 union, f = 0 is
    not claimed. For indicators the shell vanishing law says f = 0 on every
    shell between consecutive unions.
    """
    a = f.abs()
    nesting = True
    vanishing = True
    bound = True
    worst = 0.0
    for k in range(len(levels.levels) - 1):
        lo, hi = levels.union_mask(k), levels.union_mask(k + 1)
        if np.any(lo & ~hi):
            nesting = False
        shell = hi & ~lo
        if np.any(a[shell] != 0):
            vanishing = False
        l = k + 1
        cap = 2.0 ** (-l + 1) * levels.lam
        if shell.any():
            worst = max(worst, float(a[shell].max() / cap))
            if np.any(a[shell] > cap):
                bound = False
    indicator = bool(np.all((a == 0) | (a == 1)))
    return {
        "nesting": nesting,
        "shell_vanishing": vanishing if indicator else None,
        "shell_bound": bound,
        "shell_bound_worst_ratio": worst,
    }
