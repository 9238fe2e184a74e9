from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from lacunary_carleson.dyadic import (
    NULL_BUCKET,
    DyadicInterval,
    Side,
    Tile,
    all_tiles,
    decompose_trees,
    e_set,
    freq,
    mass,
    mass_bucket,
    mass_partition,
    scale_range,
    space,
)
from lacunary_carleson.errors import ConfigurationError


def test_space_index_wraps_and_frequency_does_not():
    assert space(3, 9).index == 1
    assert freq(3, 9).index == 9
    with pytest.raises(ConfigurationError):
        space(-1, 0)


def test_interval_geometry():
    I = space(3, 5)
    assert (I.start, I.end, I.length, I.center) == (0.625, 0.75, 0.125, 0.6875)
    w = freq(4, 2)
    assert (w.start, w.end) == (32.0, 48.0)
    assert w.contains_frequency(32) and w.contains_frequency(47) and not w.contains_frequency(48)


@seed(1)
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 8), st.integers(0, 255), st.integers(0, 8), st.integers(0, 255))
def test_space_containment_matches_endpoints(l1, i1, l2, i2):
    a, b = space(l1, i1), space(l2, i2)
    fa = (Fraction(a.index, 1 << l1), Fraction(a.index + 1, 1 << l1))
    fb = (Fraction(b.index, 1 << l2), Fraction(b.index + 1, 1 << l2))
    assert a.contains(b) == (fa[0] <= fb[0] and fb[1] <= fa[1])


@seed(2)
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 6), st.integers(0, 63), st.integers(0, 6), st.integers(0, 63))
def test_frequency_containment_matches_endpoints(l1, i1, l2, i2):
    a, b = freq(l1, i1), freq(l2, i2)
    assert a.contains(b) == (a.start <= b.start and b.end <= a.end)


def test_parent_and_sample_range():
    I = space(4, 11)
    assert I.parent() == space(3, 5)
    assert freq(2, 3).parent() == freq(3, 1)
    assert I.sample_range(6) == (44, 48)
    with pytest.raises(ValueError):
        space(0, 0).parent()
    with pytest.raises(ConfigurationError):
        space(7, 0).sample_range(6)


def test_json_round_trip_and_malformed_records():
    P = Tile(freq(5, 3), space(5, 7))
    assert Tile.from_json(P.to_json()) == P
    with pytest.raises(ConfigurationError):
        DyadicInterval.from_json({"side": "space"})
    with pytest.raises(ValueError):
        DyadicInterval.from_json({"side": "time", "level": 1, "index": 0})


def test_tile_needs_area_one():
    with pytest.raises(ConfigurationError):
        Tile(freq(4, 0), space(5, 0))
    with pytest.raises(ConfigurationError):
        Tile(space(5, 0), space(5, 0))


def test_lattice_size_and_range():
    assert list(scale_range(12)) == [5, 6, 7]
    tiles = all_tiles(12)
    assert len(tiles) == 3 * 2048
    assert len(set(tiles)) == len(tiles)
    assert all(t.omega.end <= 2048 for t in tiles)
    with pytest.raises(ConfigurationError):
        all_tiles(9)


def test_e_sets_partition_each_level():
    m = 11
    rng = np.random.default_rng(0)
    sel = rng.choice([1, 2, 4, 8, 16, 32, 64, 128, 256, 512], 1 << m)
    tiles = all_tiles(m)
    for k in scale_range(m):
        hits = np.zeros(1 << m, dtype=int)
        for t in tiles:
            if t.level == k:
                hits[e_set(t, sel)] += 1
        assert np.all(hits == 1)


def test_e_set_matches_definition():
    m = 10
    rng = np.random.default_rng(1)
    sel = rng.integers(0, 512, 1 << m)
    P = Tile(freq(5, 3), space(5, 17))
    want = [i for i in range(1 << m) if P.space.start <= i / 1024 < P.space.end and P.omega.contains_frequency(sel[i])]
    assert list(e_set(P, sel)) == want
    assert mass(P, sel) == len(want) / 32


@pytest.mark.parametrize(
    "a, n",
    [(1.0, 0), (0.5, 1), (0.75, 0), (0.5000001, 0), (0.25, 2), (0.3, 1), (2.0**-40, 40)],
)
def test_mass_bucket_boundaries(a, n):
    assert mass_bucket(a) == n


@seed(4)
@settings(max_examples=100, deadline=None)
@given(st.floats(1e-12, 1.0))
def test_mass_bucket_brackets_the_mass(a):
    n = mass_bucket(a)
    assert 2.0 ** (-n - 1) < a <= 2.0**-n


def test_mass_bucket_null_and_range():
    assert mass_bucket(0.0) is NULL_BUCKET
    with pytest.raises(ValueError):
        mass_bucket(1.5)


def test_mass_partition_covers_all_tiles():
    m = 10
    sel = np.random.default_rng(2).choice([1, 2, 4, 64, 256], 1 << m)
    tiles = all_tiles(m)
    parts = mass_partition(tiles, sel)
    assert sum(len(v) for v in parts.values()) == len(tiles)


def test_trees_share_frequency_line_and_partition_family():
    m = 12
    rng = np.random.default_rng(3)
    tiles = all_tiles(m)
    fam = [tiles[i] for i in rng.integers(0, len(tiles), 400)]
    trees = decompose_trees(fam)
    members = [t for tr in trees for t in tr.tiles]
    assert sorted(members) == sorted(set(fam))
    for tr in trees:
        for t in tr.tiles:
            assert t.omega.contains_frequency(tr.freq)
            assert tr.top.contains(t.space)


def test_tree_root_is_the_largest_tile():
    a = Tile(freq(5, 2), space(5, 1))
    b = Tile(freq(6, 1), space(6, 7))  # omega [64, 128) contains 64
    trees = decompose_trees([b, a])
    assert trees[0].freq == 64 and len(trees[0]) == 2
    assert trees[0].top == space(3, 0)
