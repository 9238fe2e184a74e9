"""Greedy iterated covering by intervals with disjoint 100-fold dilations.

Each round walks the remaining intervals from longest to shortest (ties:
leftmost, then input order), selects the first one still available and
defers every interval whose dilation meets the selected one's dilation. The
deferred intervals form the pool of the next round.

All geometry is done in exact integer arithmetic on the finest level present.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import DyadicInterval, Side, space
from .errors import ConfigurationError, InvariantViolation

__all__ = [
    "CoverRounds",
    "DILATION",
    "ROUND_RATIO_FLOOR",
    "greedy_cover",
    "dilations_meet",
    "check_round_inequality",
    "msum_ratio",
    "random_antichain",
]

DILATION = 100
ROUND_RATIO_FLOOR = Fraction(1, 500)


def _geometry(intervals: Sequence[DyadicInterval], factor: int):
    """Centres and half-widths in units of 2^-(L+1), plus the circle length."""
    L = max(I.level for I in intervals)
    lev = np.array([I.level for I in intervals], dtype=np.int64)
    idx = np.array([I.index for I in intervals], dtype=np.int64)
    scale = np.left_shift(1, L - lev)
    centre = (2 * idx + 1) * scale
    half = factor * scale
    circle = 1 << (L + 1)
    return centre, half, circle


def _meet_matrix(intervals: Sequence[DyadicInterval], factor: int) -> np.ndarray:
    centre, half, circle = _geometry(intervals, factor)
    d = np.abs(centre[:, None] - centre[None, :]) % circle
    d = np.minimum(d, circle - d)
    full = 2 * half >= circle
    return (d < half[:, None] + half[None, :]) | full[:, None] | full[None, :]


def dilations_meet(a: DyadicInterval, b: DyadicInterval, factor: int = DILATION) -> bool:
    """Whether the centred ``factor``-dilations of two space intervals intersect."""
    return bool(_meet_matrix([a, b], factor)[0, 1])


@dataclass(frozen=True)
class CoverRounds:
    intervals: tuple[DyadicInterval, ...]
    rounds: tuple[tuple[int, ...], ...]  # input positions selected in each round

    @property
    def p(self) -> int:
        return len(self.rounds)

    def round_intervals(self, l: int) -> list[DyadicInterval]:
        return [self.intervals[i] for i in self.rounds[l]]

    def assignment(self) -> list[int]:
        out = [-1] * len(self.intervals)
        for l, sel in enumerate(self.rounds):
            for i in sel:
                out[i] = l
        return out

    def is_partition(self) -> bool:
        seen = [i for sel in self.rounds for i in sel]
        return sorted(seen) == list(range(len(self.intervals)))

    def rounds_disjoint(self, factor: int = DILATION) -> bool:
        if not self.intervals:
            return True
        meet = _meet_matrix(self.intervals, factor)
        for sel in self.rounds:
            sub = meet[np.ix_(sel, sel)]
            np.fill_diagonal(sub, False)
            if sub.any():
                return False
        return True

    def round_measures(self) -> list[Fraction]:
        """|union of round l| exactly (the dilations, hence the intervals, are disjoint)."""
        out = []
        for sel in self.rounds:
            union = _union_measure([self.intervals[i] for i in sel])
            out.append(union)
        return out


def _union_measure(intervals: Sequence[DyadicInterval]) -> Fraction:
    if not intervals:
        return Fraction(0)
    L = max(I.level for I in intervals)
    spans = sorted((I.index << (L - I.level), (I.index + 1) << (L - I.level)) for I in intervals)
    total, reach = 0, 0
    for a, b in spans:
        if b > reach:
            total += b - max(a, reach)
            reach = b
    return Fraction(total, 1 << L)


def greedy_cover(intervals: Sequence[DyadicInterval], factor: int = DILATION) -> CoverRounds:
    ivs = tuple(intervals)
    for I in ivs:
        if I.side is not Side.SPACE:
            raise ConfigurationError("greedy_cover takes space intervals")
    if not ivs:
        return CoverRounds((), ())
    meet = _meet_matrix(ivs, factor)
    L = max(I.level for I in ivs)
    order = sorted(range(len(ivs)), key=lambda i: (ivs[i].level, ivs[i].index << (L - ivs[i].level), i))
    pool = order
    rounds = []
    while pool:
        alive = np.zeros(len(ivs), dtype=bool)
        alive[pool] = True
        chosen = []
        for i in pool:
            if not alive[i]:
                continue
            chosen.append(i)
            alive &= ~meet[i]
        rounds.append(tuple(chosen))
        taken = set(chosen)
        pool = [i for i in pool if i not in taken]
    return CoverRounds(ivs, tuple(rounds))


def check_round_inequality(c: CoverRounds, floor: Fraction = ROUND_RATIO_FLOOR) -> Fraction:
    """min over l of |B_l| / sum_{r >= l} |B_r|; 1 for an empty cover."""
    meas = c.round_measures()
    if not meas:
        return Fraction(1)
    tail = Fraction(0)
    best = Fraction(1)
    for mu in reversed(meas):
        tail += mu
        best = min(best, mu / tail)
    if best < floor:
        raise InvariantViolation(f"round ratio {best} below {floor}")
    return best


def _arc_counts(prefix: np.ndarray, N: int, start: int, stop: int) -> int:
    """Number of marked samples in the periodic index range [start, stop)."""
    if stop - start >= N:
        return int(prefix[-1])
    a, b = start % N, stop % N
    if a < b or stop == start:
        return int(prefix[b] - prefix[a]) if a < b else 0
    return int(prefix[N] - prefix[a] + prefix[b])


def _dilated_range(I: DyadicInterval, m: int, factor: int) -> tuple[int, int]:
    lo, hi = I.sample_range(m)
    w = hi - lo
    # centre (lo + w/2) -/+ factor*w/2, rounded up to sample indices
    twice_c = 2 * lo + w
    start = -((-(twice_c - factor * w)) // 2)
    stop = -((-(twice_c + factor * w)) // 2)
    return start, stop


def msum_ratio(intervals: Sequence[DyadicInterval], G: np.ndarray, factor: int = DILATION) -> float:
    """sum_J |J|^1/2 |bJ cap G|^1/2 over |union J|^1/2 |union bJ cap G|^1/2.

    ``G`` is a boolean sample mask on a 2**m grid. Returns 0 when the right
    side vanishes.
    """
    G = np.asarray(G, dtype=bool)
    N = G.size
    m = N.bit_length() - 1
    ivs = list(intervals)
    if not ivs:
        return 0.0
    prefix = np.concatenate([[0], np.cumsum(G, dtype=np.int64)])
    lhs = 0.0
    cover = np.zeros(N + 1, dtype=np.int64)
    for I in ivs:
        start, stop = _dilated_range(I, m, factor)
        lhs += np.sqrt(2.0**-I.level * _arc_counts(prefix, N, start, stop) / N)
        if stop - start >= N:
            cover[0] += 1
            cover[N] -= 1
            continue
        a, b = start % N, stop % N
        if a < b:
            cover[a] += 1
            cover[b] -= 1
        else:
            cover[a] += 1
            cover[N] -= 1
            cover[0] += 1
            cover[b] -= 1
    enlarged = np.cumsum(cover[:N]) > 0
    rhs = np.sqrt(float(_union_measure(ivs)) * np.count_nonzero(enlarged & G) / N)
    return 0.0 if rhs == 0 else float(lhs / rhs)


def random_antichain(rng: np.random.Generator, max_level: int, size: int, mode: str = "uniform") -> list[DyadicInterval]:
    """Up to ``size`` pairwise disjoint dyadic intervals with levels <= max_level.

    ``uniform`` draws levels uniformly, ``clustered`` packs intervals near one
    point at geometrically shrinking sizes, ``mixed`` alternates the two.
    """
    if mode not in ("uniform", "clustered", "mixed"):
        raise ConfigurationError(f"unknown antichain mode {mode!r}")
    attempts = 8 * size
    centre = rng.random()
    uniform_level = rng.integers(1, max_level + 1, attempts)
    uniform_x = rng.random(attempts)
    cluster_level = rng.integers(min(3, max_level), max_level + 1, attempts)
    offset = rng.uniform(-1.0, 1.0, attempts)
    if mode == "uniform":
        clustered = np.zeros(attempts, dtype=bool)
    elif mode == "clustered":
        clustered = np.ones(attempts, dtype=bool)
    else:
        clustered = np.arange(1, attempts + 1) % 2 == 0
    level = np.where(clustered, cluster_level, uniform_level)
    spread = 2.0 ** -(cluster_level - 3.0)
    x = np.where(clustered, (centre + offset * spread) % 1.0, uniform_x)
    index = np.minimum((x * 2.0**level).astype(np.int64), (1 << level) - 1)

    chosen: list[DyadicInterval] = []
    occupied = np.zeros(1 << max_level, dtype=bool)  # finest cells covered so far
    shift = max_level - level
    lo = (index << shift).tolist()
    hi = ((index + 1) << shift).tolist()
    for lev, idx, a, b in zip(level.tolist(), index.tolist(), lo, hi):
        if len(chosen) >= size:
            break
        # dyadic intervals overlap only when nested, so a free span means disjoint
        if occupied[a:b].any():
            continue
        chosen.append(space(lev, idx))
        occupied[a:b] = True
    return chosen
