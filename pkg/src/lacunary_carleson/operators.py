"""The linearized operator T, its tile pieces T_P and their adjoints.

With a frequency selector N(x) (one lacunary frequency per sample) and the
Riemann-sum quadrature of weight 1/N,

    T_P f(x)  = chi_E(P)(x) (1/N) sum_y exp(-2 pi i N(x) y) psi_k(x - y) f(y)
    T_P* g(y) = (1/N) sum_{x in E(P)} exp(+2 pi i N(x) y) psi_k(x - y) g(x)

where k is the tile level. T_P* is the exact conjugate transpose of T_P for
the grid inner product <u, v> = mean(u * conj(v)).

Single-tile routines evaluate these sums directly over the kernel window;
family routines group tiles by level and use one FFT convolution per
(level, frequency), then clip to the union of the I_{P*} sets.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .dyadic import DyadicInterval, Tile, Tree, e_set, scale_range
from .kernel import kernel_fft, kernel_window
from .torus import GridFunction, character_phase

__all__ = [
    "STAR_OFFSETS",
    "apply_T",
    "apply_T_P",
    "apply_T_P_star",
    "sum_T_P",
    "apply_T_star_family",
    "family_star_support",
    "inner",
    "lambda_proj",
    "tree_adjoint",
    "shifted_tree_adjoint",
    "t_c_approximant",
    "square_function",
    "residual_T_k",
]

# offsets (in units of |I_P|) of the 14 dyadic intervals making up I_{P*}
STAR_OFFSETS = tuple(range(-8, -1)) + tuple(range(2, 9))

_CHUNK = 1 << 18


def inner(u: GridFunction, v: GridFunction) -> complex:
    """Grid inner product mean(u * conj(v))."""
    return complex(np.mean(u.samples * np.conj(v.samples)))


def _combined_kernel_fft(m: int) -> np.ndarray:
    return sum(kernel_fft(m, k) for k in scale_range(m))


def apply_T(f: GridFunction, selector: np.ndarray) -> GridFunction:
    """Tf(x) = sum over kept scales of the modulated kernel integral at N(x)."""
    N = f.N
    K = _combined_kernel_fft(f.m)
    out = np.zeros(N, dtype=np.complex128)
    for n in np.unique(selector):
        h = f.samples * character_phase(-int(n), N)
        u = np.fft.ifft(np.fft.fft(h) * K) / N
        hit = selector == n
        out[hit] = u[hit]
    return GridFunction(f.m, out)


def _rows(idx: np.ndarray, width: int):
    step = max(1, _CHUNK // max(width, 1))
    for s in range(0, idx.size, step):
        yield idx[s : s + step]


def apply_T_P(f: GridFunction, tile: Tile, selector: np.ndarray) -> GridFunction:
    N = f.N
    out = np.zeros(N, dtype=np.complex128)
    E = e_set(tile, selector)
    if E.size:
        d, w = kernel_window(f.m, tile.level)
        for rows in _rows(E, d.size):
            y = (rows[:, None] - d[None, :]) % N
            n = selector[rows].astype(np.int64)[:, None]
            phase = np.exp(-2j * np.pi * ((n * y) % N) / N)
            out[rows] = (phase * w[None, :] * f.samples[y]).sum(axis=1) / N
    return GridFunction(f.m, out)


def apply_T_P_star(g: GridFunction, tile: Tile, selector: np.ndarray) -> GridFunction:
    N = g.N
    re = np.zeros(N)
    im = np.zeros(N)
    E = e_set(tile, selector)
    if E.size:
        d, w = kernel_window(g.m, tile.level)
        for rows in _rows(E, d.size):
            y = (rows[:, None] - d[None, :]) % N
            n = selector[rows].astype(np.int64)[:, None]
            vals = np.exp(2j * np.pi * ((n * y) % N) / N) * w[None, :] * g.samples[rows][:, None] / N
            re += np.bincount(y.ravel(), weights=vals.real.ravel(), minlength=N)
            im += np.bincount(y.ravel(), weights=vals.imag.ravel(), minlength=N)
    return GridFunction(g.m, re + 1j * im)


def sum_T_P(f: GridFunction, tiles: Iterable[Tile], selector: np.ndarray) -> GridFunction:
    """Sum of apply_T_P over a tile collection, accumulated in the given order."""
    acc = np.zeros(f.N, dtype=np.complex128)
    for t in tiles:
        acc += apply_T_P(f, t, selector).samples
    return GridFunction(f.m, acc)


def _by_level(family: Iterable[Tile]) -> dict[int, list[Tile]]:
    groups: dict[int, list[Tile]] = defaultdict(list)
    for t in family:
        groups[t.level].append(t)
    return groups


def _level_support(m: int, k: int, tiles: Sequence[Tile]) -> np.ndarray:
    coarse = np.zeros(1 << k, dtype=bool)
    idx = np.array([t.space.index for t in tiles], dtype=np.int64)
    for off in STAR_OFFSETS:
        coarse[(idx + off) % (1 << k)] = True
    return np.repeat(coarse, 1 << (m - k))


def family_star_support(m: int, family: Iterable[Tile]) -> np.ndarray:
    """Sample mask of the union of I_{P*} over the family."""
    mask = np.zeros(1 << m, dtype=bool)
    for k, tiles in _by_level(family).items():
        mask |= _level_support(m, k, tiles)
    return mask


def _level_e_mask(m: int, k: int, tiles: Sequence[Tile], selector: np.ndarray) -> np.ndarray:
    mask = np.zeros(1 << m, dtype=bool)
    w = 1 << (m - k)
    for t in tiles:
        lo = t.space.index * w
        mask[lo : lo + w] |= (selector[lo : lo + w] >> k) == t.omega.index
    return mask


def apply_T_star_family(g: GridFunction, family: Iterable[Tile], selector: np.ndarray) -> GridFunction:
    """sum of T_P* g over a family of tiles (duplicates counted once)."""
    m, N = g.m, g.N
    out = np.zeros(N, dtype=np.complex128)
    for k, tiles in sorted(_by_level(set(family)).items()):
        tiles = sorted(tiles)
        emask = _level_e_mask(m, k, tiles, selector)
        if not emask.any():
            continue
        h = np.where(emask, g.samples, 0)
        if not h.any():
            continue
        Kr = np.conj(kernel_fft(m, k))
        acc = np.zeros(N, dtype=np.complex128)
        for n in np.unique(selector[emask]):
            hn = np.where(selector == n, h, 0)
            acc += character_phase(int(n), N) * np.fft.ifft(np.fft.fft(hn) * Kr)
        out += np.where(_level_support(m, k, tiles), acc / N, 0)
    return GridFunction(m, out)


def lambda_proj(g: GridFunction, I: DyadicInterval) -> GridFunction:
    """Mean of g over I, times the indicator of I."""
    sl = I.sample_slice(g.m)
    out = np.zeros(g.N, dtype=np.complex128)
    out[sl] = g.samples[sl].mean()
    return GridFunction(g.m, out)


def tree_adjoint(g: GridFunction, tree: Tree, selector: np.ndarray) -> GridFunction:
    return apply_T_star_family(g, tree.tiles, selector)


def shifted_tree_adjoint(g: GridFunction, tree: Tree, selector: np.ndarray) -> GridFunction:
    """Adjoint of the tree demodulated to frequency 0: exp(-2 pi i c y) T_tree* g."""
    full = tree_adjoint(g, tree, selector)
    return GridFunction(g.m, full.samples * character_phase(-tree.freq, g.N))


def t_c_approximant(
    g: GridFunction,
    anchor: DyadicInterval,
    trees: Sequence[Tree],
    selector: np.ndarray,
) -> GridFunction:
    """sum over trees of exp(2 pi i c_l y) * Lambda_anchor(shifted tree adjoint)."""
    N = g.N
    out = np.zeros(N, dtype=np.complex128)
    for tree in trees:
        avg = lambda_proj(shifted_tree_adjoint(g, tree, selector), anchor)
        out += character_phase(tree.freq, N) * avg.samples
    return GridFunction(g.m, out)


def square_function(g: GridFunction, trees: Sequence[Tree], selector: np.ndarray) -> GridFunction:
    acc = np.zeros(g.N)
    for tree in trees:
        acc += np.abs(tree_adjoint(g, tree, selector).samples) ** 2
    return GridFunction(g.m, np.sqrt(acc))


def shell_interval_mask(m: int, tile_level: int, k: int, levels) -> np.ndarray:
    """Per-sample flag: the level-``tile_level`` dyadic interval through x lies
    inside the union at k and misses the union at k-1."""
    w = 1 << (m - tile_level)
    inside = levels.union_mask(k).reshape(-1, w).all(axis=1)
    clear = ~levels.union_mask(k - 1).reshape(-1, w).any(axis=1)
    return np.repeat(inside & clear, w)


def residual_T_k(
    g: GridFunction,
    k: int,
    levels,
    tiles: Iterable[Tile],
    selector: np.ndarray,
) -> GridFunction:
    """T_k* g = sum_P chi_P^k T_P* g.

    chi_P^k(x) = 1 iff x lies in one of the 14 pieces of I_{P*} that is inside
    the level-k union and disjoint from the level-(k-1) union. Since T_P* g is
    supported in I_{P*}, the mask only depends on the piece through x.
    """
    m = g.m
    out = np.zeros(g.N, dtype=np.complex128)
    for kp, group in sorted(_by_level(tiles).items()):
        shell = shell_interval_mask(m, kp, k, levels)
        if not shell.any():
            continue
        part = apply_T_star_family(g, group, selector).samples
        out += np.where(shell, part, 0)
    return GridFunction(m, out)
