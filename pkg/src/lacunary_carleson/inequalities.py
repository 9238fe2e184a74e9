"""Lacunary exponential-sum inequalities evaluated as ratios.

Each check returns the left side of an inequality divided by its bound shape.
The constants are not known in closed form, so corpus maxima are recorded
and compared across grid refinements rather than against fixed numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .decomposition import level_intervals
from .dyadic import DyadicInterval
from .errors import ConfigurationError, FrequencyOverflowError
from .torus import (
    EXP_L2,
    GridFunction,
    LacunarySequence,
    character_phase,
    l_log_l,
    lp_norm,
    orlicz_norm,
)

__all__ = [
    "CoefficientVector",
    "lacunary_series",
    "zygmund_ratio",
    "khinchin_moment_ratio",
    "coeff_dual_ratio",
    "dyadic_bmo_norm",
    "general_coeff_bound_ratio",
    "CorpusRow",
    "zygmund_corpus",
    "khinchin_corpus",
    "coeff_dual_corpus",
    "bmo_corpus",
    "general_coeff_corpus",
    "corpus_maxima",
    "INEQUALITY_IDS",
    "STEP_RESOLUTION",
    "GENERAL_SEQUENCE",
]

# Corpus functions are built at this resolution so that refining the grid
# does not change them.
STEP_RESOLUTION = 8
# Frequencies c_l used by the general-case coefficient bound corpus.
GENERAL_SEQUENCE = LacunarySequence(2, 10)

INEQUALITY_IDS = ("zygmund", "khinchin", "coeff_dual", "bmo", "general_coeff")


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray
    seq: LacunarySequence

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if v.size != len(self.seq):
            raise ConfigurationError(f"{v.size} coefficients for a sequence of length {len(self.seq)}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("coefficients must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def scaled(self, c: complex) -> "CoefficientVector":
        return CoefficientVector(self.values * c, self.seq)


def lacunary_series(a: CoefficientVector, m: int) -> GridFunction:
    """sum_j a_j e_{n_j} on the 2**m grid."""
    N = 1 << m
    if a.seq.max >= N // 2:
        raise FrequencyOverflowError(f"frequency {a.seq.max} must be < N/2 = {N // 2}")
    out = np.zeros(N, dtype=np.complex128)
    for aj, n in zip(a.values, a.seq.values):
        out += aj * character_phase(n, N)
    return GridFunction(m, out)


def zygmund_ratio(a: CoefficientVector, m: int) -> float:
    """||sum a_j e_{n_j}||_{exp(L^2)} / ||a||_2."""
    norm = a.l2
    if norm == 0:
        return 0.0
    return orlicz_norm(lacunary_series(a, m), EXP_L2) / norm


def khinchin_moment_ratio(a: CoefficientVector, p: int, m: int) -> float:
    """||sum a_j e_{2^j}||_p / (sqrt(p) ||a||_2) for even p."""
    if int(p) != p or p < 2 or int(p) % 2:
        raise ConfigurationError(f"p must be an even integer >= 2, got {p}")
    if a.seq.alpha != 2:
        raise ConfigurationError("Khinchin moments use the frequencies 2^j")
    norm = a.l2
    if norm == 0:
        return 0.0
    return lp_norm(lacunary_series(a, m), int(p)) / (math.sqrt(p) * norm)


def _power_of_two_coeffs(f: GridFunction) -> np.ndarray:
    spec = np.fft.fft(f.samples) / f.N
    n = 1
    out = []
    while n < f.N // 2:
        out.append(spec[n])
        n *= 2
    return np.asarray(out)


def coeff_dual_ratio(f: GridFunction, alpha: float) -> float:
    """||(f^(2^j))_j||_2 / ||f||_{L (log L)^alpha}."""
    denom = orlicz_norm(f, l_log_l(alpha))
    if denom == 0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(_power_of_two_coeffs(f)) ** 2))) / denom


def dyadic_bmo_norm(f: GridFunction) -> float:
    """sup over dyadic I of the mean oscillation (1/|I|) int_I |f - f_I|."""
    x = f.samples
    best = 0.0
    for j in range(f.m + 1):
        blocks = x.reshape(1 << j, -1)
        osc = np.abs(blocks - blocks.mean(axis=1, keepdims=True)).mean(axis=1)
        best = max(best, float(osc.max()))
    return best


def general_coeff_bound_ratio(
    f: GridFunction,
    I: DyadicInterval,
    seq: LacunarySequence,
    k: int,
    lam: float,
) -> tuple[float, bool]:
    """Coefficient sum over the anchor interval against 2^-k lam sqrt(log(...)) |I|^1/2.

    Returns (ratio, degenerate). Frequencies of ``seq`` at or above N/2 are
    skipped. The logarithm is clamped below by log 2; ``degenerate`` flags
    2^-k lam >= ||f||_inf, where the bound shape is not meaningful.
    """
    N = f.N
    sl = I.sample_slice(f.m)
    x = f.samples[sl]
    idx = np.arange(sl.start, sl.stop)
    cs = [c for c in seq.values if c < N // 2]
    total = 0.0
    for c in cs:
        phase = np.exp(-2j * np.pi * ((c * idx) % N) / N)
        total += abs(np.sum(x * phase) / N) ** 2
    length = 2.0**-I.level
    lhs = math.sqrt(total / length)
    scale = 2.0**-k * lam
    top = float(f.abs().max())
    degenerate = scale >= top
    if top == 0:
        return 0.0, degenerate
    log_term = max(math.log(top / scale), math.log(2.0))
    rhs = scale * math.sqrt(log_term) * math.sqrt(length)
    return lhs / rhs, degenerate


# Corpora ---------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusRow:
    inequality: str
    seed: int
    param: str
    ratio: float
    flagged: bool = False

    def as_csv(self) -> list[str]:
        return [self.inequality, str(self.seed), self.param, repr(float(self.ratio)), str(int(self.flagged))]


def _random_coefficients(rng: np.random.Generator, J: int) -> np.ndarray:
    return rng.standard_normal(J) + 1j * rng.standard_normal(J)


def _step_function(rng: np.random.Generator, m: int, kind: str) -> GridFunction:
    """Random function constant on the 2**STEP_RESOLUTION dyadic cells."""
    if m < STEP_RESOLUTION:
        raise ConfigurationError(f"corpus grids need m >= {STEP_RESOLUTION}")
    cells = 1 << STEP_RESOLUTION
    if kind == "indicator":
        vals = np.zeros(cells)
        for _ in range(int(rng.integers(1, 6))):
            lev = int(rng.integers(1, STEP_RESOLUTION + 1))
            i = int(rng.integers(0, 1 << lev))
            w = cells >> lev
            vals[i * w : (i + 1) * w] = 1.0
    elif kind == "bounded":
        vals = rng.uniform(-1, 1, cells) + 1j * rng.uniform(-1, 1, cells)
    elif kind == "spike":
        vals = np.zeros(cells)
        vals[int(rng.integers(0, cells))] = float(rng.uniform(1, 100))
        vals += 0.01 * rng.random(cells)
    else:
        raise ConfigurationError(f"unknown step family {kind!r}")
    return GridFunction(m, np.repeat(vals, 1 << (m - STEP_RESOLUTION)))


def _draw_length(rng: np.random.Generator, m: int, max_J: int) -> int:
    # the draw ignores m so the same seed gives the same series on every grid
    if max_J > m - 1:
        raise ConfigurationError(f"max_J={max_J} needs m >= {max_J + 1}, got m={m}")
    return int(rng.integers(1, max_J + 1))


def _seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def zygmund_corpus(m: int, count: int, seed: int = 0, max_J: int = 12) -> Iterator[CorpusRow]:
    for s in _seeds(seed, count):
        rng = np.random.default_rng(s)
        J = _draw_length(rng, m, max_J)
        a = CoefficientVector(_random_coefficients(rng, J), LacunarySequence(2, J))
        yield CorpusRow("zygmund", s, f"J={J}", zygmund_ratio(a, m))


def khinchin_corpus(m: int, count: int, seed: int = 0, ps: Sequence[int] = (2, 4, 6, 8), max_J: int = 12) -> Iterator[CorpusRow]:
    for s in _seeds(seed, count):
        rng = np.random.default_rng(s)
        J = _draw_length(rng, m, max_J)
        a = CoefficientVector(_random_coefficients(rng, J), LacunarySequence(2, J))
        for p in ps:
            yield CorpusRow("khinchin", s, f"p={p}", khinchin_moment_ratio(a, p, m))


def coeff_dual_corpus(m: int, count: int, seed: int = 0, alphas: Sequence[float] = (0.5, 1.0)) -> Iterator[CorpusRow]:
    kinds = ("indicator", "bounded", "spike")
    for n, s in enumerate(_seeds(seed, count)):
        rng = np.random.default_rng(s)
        f = _step_function(rng, m, kinds[n % len(kinds)])
        for al in alphas:
            yield CorpusRow("coeff_dual", s, f"alpha={al:g}", coeff_dual_ratio(f, al))


def bmo_corpus(m: int, count: int, seed: int = 0, max_J: int = 12) -> Iterator[CorpusRow]:
    for s in _seeds(seed, count):
        rng = np.random.default_rng(s)
        J = _draw_length(rng, m, max_J)
        a = CoefficientVector(_random_coefficients(rng, J), LacunarySequence(2, J))
        a = a.scaled(1.0 / a.l2)
        yield CorpusRow("bmo", s, f"J={J}", dyadic_bmo_norm(lacunary_series(a, m)))


def general_coeff_corpus(m: int, count: int, seed: int = 0) -> Iterator[CorpusRow]:
    """Indicator functions, every interval of every level collection."""
    for s in _seeds(seed, count):
        rng = np.random.default_rng(s)
        f = _step_function(rng, m, "indicator")
        lam = float(rng.uniform(0.05, 0.95))
        levels = level_intervals(f, lam)
        worst, flagged = 0.0, False
        for k, lev in enumerate(levels.levels):
            for I in lev:
                r, deg = general_coeff_bound_ratio(f, I, GENERAL_SEQUENCE, k, lam)
                if not deg and r > worst:
                    worst = r
                flagged |= deg
        yield CorpusRow("general_coeff", s, f"lambda={lam:.6f}", worst, flagged)


def corpus_maxima(rows: Sequence[CorpusRow]) -> dict[str, float]:
    """Largest ratio per (inequality, parameter family) key."""
    out: dict[str, float] = {}
    for r in rows:
        key = r.inequality
        if r.inequality in ("khinchin", "coeff_dual"):
            key = f"{r.inequality}[{r.param}]"
        out[key] = max(out.get(key, 0.0), float(r.ratio))
    return dict(sorted(out.items()))
