import json

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from lacunary_carleson.decomposition import (
    Classification,
    Label,
    anchor_tile,
    classify,
    dilated_mask,
    doubled_overlap,
    f_bad,
    i_star,
    is_cluster,
    level_intervals,
    level_shell_report,
)
from lacunary_carleson.dyadic import Tile, all_tiles, freq, space
from lacunary_carleson.errors import ConfigurationError, InvariantViolation
from lacunary_carleson.torus import GridFunction, LacunarySequence

from oracles import brute_classify, brute_dilated, brute_i_star, brute_level_set, brute_maximal_function


def dyadic_union(rng, m, pieces, lo=1, hi=None):
    hi = m - 1 if hi is None else hi
    mask = np.zeros(1 << m, dtype=bool)
    for _ in range(pieces):
        lev = int(rng.integers(lo, hi + 1))
        mask[space(lev, int(rng.integers(1 << lev))).sample_slice(m)] = True
    return mask


# level sets --------------------------------------------------------------------


def test_full_torus_level_zero():
    lv = level_intervals(GridFunction.constant(8, 1.0), 0.5)
    assert lv.levels[0] == [space(0, 0)]
    assert lv.k_max == 0


def test_small_interval_levels():
    f = GridFunction.interval_indicator(8, 0.0, 0.125)
    lv = level_intervals(f, 0.5)
    assert lv.levels[0] == [space(3, 0)]
    assert lv.levels[1] == [space(2, 0)]


def test_zero_function_has_no_levels():
    lv = level_intervals(GridFunction.zeros(8), 0.5)
    assert all(lev == [] for lev in lv.levels)
    assert lv.k_max == 8
    assert lv.last_level() == -1
    assert not lv.union_mask(3).any()


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.2, 1.5])
def test_lambda_must_be_inside_unit_interval(lam):
    with pytest.raises(ConfigurationError):
        level_intervals(GridFunction.zeros(8), lam)


@seed(21)
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99), st.booleans())
def test_level_sets_match_enumeration(s, lam, bounded):
    m = 7
    rng = np.random.default_rng(s)
    if bounded:
        a = rng.random(1 << m) * (rng.random(1 << m) < 0.2)
        f = GridFunction(m, a)
    else:
        f = GridFunction.indicator(m, dyadic_union(rng, m, 3))
    lv = level_intervals(f, lam)
    for k in range(lv.k_max + 3):
        assert lv.intervals(k) == sorted(brute_level_set(f.abs(), lam, k), key=lambda I: I.index << (m - I.level))


@seed(22)
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_level_set_invariants(s, lam):
    m = 9
    rng = np.random.default_rng(s)
    f = GridFunction(m, rng.random(1 << m) * (rng.random(1 << m) < 0.1))
    lv = level_intervals(f, lam)
    a = f.abs()
    for k, lev in enumerate(lv.levels):
        for I in lev:
            sl = I.sample_slice(m)
            assert a[sl].mean() > lam * 2.0**-k
            if I.level:
                assert a[I.parent().sample_slice(m)].mean() <= lam * 2.0**-k
            assert not any(J != I and I.contains(J) for J in lev)
        assert not np.any(lv.union_mask(k) & ~lv.union_mask(k + 1))
    rep = level_shell_report(f, lv)
    assert rep["nesting"] and rep["shell_bound"]


# bad set and I_{P*} -------------------------------------------------------------------


def test_bad_set_examples():
    assert not f_bad(GridFunction.zeros(8), 0.5).mask.any()
    f = GridFunction.interval_indicator(8, 0.0, 0.25)
    fb = f_bad(f, 0.25)
    assert fb.mask[:64].all()
    assert fb.enlarged.all()  # 1000 times any component covers the torus


@seed(23)
@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.98))
def test_bad_set_matches_maximal_function_scan(s, lam):
    m = 8
    rng = np.random.default_rng(s)
    f = GridFunction(m, rng.random(1 << m) * (rng.random(1 << m) < 0.15))
    fb = f_bad(f, lam, dilation=3)
    assert np.array_equal(fb.mask, brute_maximal_function(f.abs()) > lam / 2)
    assert np.array_equal(fb.enlarged, brute_dilated(m, fb.components, 3))


@pytest.mark.parametrize("factor", [1, 2, 3, 5, 7.5, 100])
def test_dilation_matches_circular_distance(factor):
    m = 9
    ivs = [space(4, 0), space(6, 63), space(7, 50)]
    assert np.array_equal(dilated_mask(m, ivs, factor), brute_dilated(m, ivs, factor))


def test_i_star_example_and_geometry():
    P = Tile(freq(5, 0), space(5, 0))
    idx = sorted(I.index for I in i_star(P))
    assert idx == [2, 3, 4, 5, 6, 7, 8, 24, 25, 26, 27, 28, 29, 30]


@seed(24)
@settings(max_examples=40, deadline=None)
@given(st.integers(5, 8), st.integers(0, 255))
def test_i_star_matches_geometric_definition(k, i):
    P = Tile(freq(k, 0), space(k, i))
    pieces = i_star(P)
    assert sorted(pieces, key=lambda I: I.index) == brute_i_star(P)
    assert len(set(pieces)) == 14
    assert sum(I.length for I in pieces) == 14 * P.space.length


# classification ----------------------------------------------------------------------


def test_zero_frequency_tiles_are_cluster():
    for k in (5, 6, 7):
        assert is_cluster(Tile(freq(k, 0), space(k, 0)), 2)
    assert is_cluster(Tile(freq(5, 9), space(5, 0)), 2)  # 9.5 <= 10
    assert not is_cluster(Tile(freq(5, 10), space(5, 0)), 2)


def test_anchor_tiles_hold_zero_in_doubled_frequency():
    J = space(7, 3)
    O = anchor_tile(J)
    assert O.omega.index == 0 and O.level == 7
    # 2*omega_P = [-|w|/2, 3|w|/2) around the centre of omega_P
    assert doubled_overlap(Tile(freq(5, 12), space(5, 0)), space(9, 0))  # [368, 432) vs [-256, 768)
    assert not doubled_overlap(Tile(freq(5, 12), space(5, 0)), space(6, 0))  # vs [-32, 96)


def test_zero_function_is_all_residual():
    m = 10
    tiles = all_tiles(m)
    cls = classify(tiles, GridFunction.zeros(m), 0.5, LacunarySequence.fitting(2, m))
    for t in tiles:
        kinds = {lb.kind for lb in cls.labels[t]}
        assert "residual" in kinds
        assert kinds <= {"residual", "cluster"}
    assert cls.max_multiplicity() == 0


def _compare(tiles, f, lam, alpha, dilation):
    cls = classify(tiles, f, lam, LacunarySequence.fitting(alpha, f.m), dilation=dilation)
    ref = brute_classify(tiles, f.abs(), lam, alpha, dilation)
    for t in tiles:
        assert {(lb.kind, lb.k, lb.anchor, lb.r) for lb in cls.labels[t]} == ref[t], t
    return cls


def test_quarter_interval_matches_brute_force():
    m = 10
    f = GridFunction.interval_indicator(m, 0.0, 0.25)
    cls = _compare(all_tiles(m), f, 0.25, 2, 1000)
    assert cls.levels.levels[0] == [space(1, 0)]
    assert cls.levels.levels[1] == [space(0, 0)]


@pytest.mark.parametrize("s, dilation", [(1, 1), (2, 3), (3, 1), (4, 1000), (5, 1)])
def test_random_indicators_match_brute_force(s, dilation):
    m = 10
    rng = np.random.default_rng(s)
    f = GridFunction.indicator(m, dyadic_union(rng, m, int(rng.integers(1, 5)), 2, 9))
    _compare(all_tiles(m), f, float(rng.uniform(0.05, 0.95)), 2, dilation)


def test_separated_labels_appear_on_fine_structure():
    # per 64-sample block: a full run of 8, a gap of 8, then every other sample
    block = np.zeros(64, dtype=bool)
    block[:8] = True
    block[16::2] = True
    m = 11
    f = GridFunction.indicator(m, np.tile(block, (1 << m) // 64))
    tiles = [t for t in all_tiles(m) if t.level == 5 and 10 <= t.omega.index <= 14 and t.space.index < 12]
    cls = _compare(tiles, f, 0.6, 2, 1)
    kinds = {lb.kind for t in tiles for lb in cls.labels[t]}
    assert {"p1", "p2"} <= kinds


def test_general_function_matches_brute_force():
    m = 10
    rng = np.random.default_rng(8)
    f = GridFunction(m, rng.random(1 << m) * (rng.random(1 << m) < 0.05) * 4)
    _compare(all_tiles(m), f, 0.3, 3, 1)


def test_coverage_violation_is_reported():
    m = 10
    f = GridFunction.interval_indicator(m, 0.0, 0.25)
    cls = classify(all_tiles(m), f, 0.25, LacunarySequence.fitting(2, m))
    broken = Classification(cls.tiles, dict(cls.labels), cls.lam, cls.alpha, cls.levels, cls.fbad)
    broken.labels[cls.tiles[0]] = ()
    with pytest.raises(InvariantViolation):
        broken.check()


@seed(25)
@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.98), st.sampled_from([1, 4, 1000]))
def test_coverage_multiplicity_and_shells(s, lam, dilation):
    m = 11
    rng = np.random.default_rng(s)
    f = GridFunction.indicator(m, dyadic_union(rng, m, int(rng.integers(1, 6)), 2, 10))
    cls = classify(all_tiles(m), f, lam, LacunarySequence.fitting(2, m), dilation=dilation)
    assert not cls.uncovered()
    assert cls.max_multiplicity() <= 14
    rep = level_shell_report(f, cls.levels)
    assert rep["nesting"] and rep["shell_vanishing"] and rep["shell_bound"]


def test_label_json_dump():
    m = 10
    f = GridFunction.interval_indicator(m, 0.0, 1 / 64)
    cls = classify(all_tiles(m), f, 0.4, LacunarySequence.fitting(2, m), dilation=1)
    doc = json.loads(json.dumps(cls.to_json()))
    assert doc["stats"]["tiles"] == len(cls.tiles)
    assert doc["stats"]["uncovered"] == 0
    assert {rec["label"] for rec in doc["labels"]} <= {"cluster", "p1", "p2", "residual"}
    assert Label("p2", 1, space(3, 0), 4).to_json()["P_O"]["omega"]["index"] == 0
