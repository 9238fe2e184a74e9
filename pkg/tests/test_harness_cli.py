import csv
import json
import math
from collections import Counter

import numpy as np
import pytest

from lacunary_carleson import harness
from lacunary_carleson.cli import EXIT_CONFIG, EXIT_OK, main
from lacunary_carleson.dyadic import all_tiles
from lacunary_carleson.errors import ConfigurationError, InvariantViolation
from lacunary_carleson.torus import GridFunction

from oracles import brute_classify, loglog


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# configuration ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text",
    [
        "bogus: 1\n",
        "m: 4\n",
        "m: 10.5\n",
        "alpha: 1\n",
        "s_values: []\n",
        "lam: 1.5\n",
        "family: sawtooth\n",
        "- 1\n- 2\n",
        "m: [unclosed\n",
        "J: 40\n",
    ],
)
def test_malformed_config_exits_2(tmp_path, text, capsys):
    assert main(["verify", "--config", write(tmp_path, "c.yaml", text), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["verify", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_thread_env_must_be_integer(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "many")
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_empty_config_file_uses_defaults(tmp_path):
    cfg = harness.load_config(write(tmp_path, "c.yaml", ""), "props")
    assert cfg.m == 12 and cfg.instances == 20
    assert harness.load_config(None, "sweep", m=12, J=10).m == 12


def test_config_json_round_trip(tmp_path):
    cfg = harness.load_config(None, "sweep", m=12, J=10)
    again = harness.load_config(write(tmp_path, "c.json", json.dumps(cfg.to_json())), "sweep")
    assert again == cfg


def test_report_rows_reject_bad_ratios():
    with pytest.raises(InvariantViolation):
        harness.ReportRow("x", "y", ratios={"r": float("nan")})
    with pytest.raises(InvariantViolation):
        harness.ReportRow("x", "y", ratios={"r": -1.0})


def test_baselines_are_packaged_and_frozen():
    base = harness.load_baselines()
    assert base["C_main"] > 0
    for key in ("full_dilation", "unit_dilation"):
        assert set(base["props"][key]) == set(harness.PROP_GROUPS)


# commands ----------------------------------------------------------------------------


def test_verify_default_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
    assert "verify: PASS" in capsys.readouterr().out
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["schema"] == harness.SCHEMA
    assert doc["summary"]["passed"]


def test_verify_is_byte_identical_across_runs_and_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--out", str(b), "--threads", "2"]) == EXIT_OK
    for name in ("verify.csv", "verify.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes().replace(b'"threads": 2', b'"threads": 1')


def test_sweep_writes_ten_rows_and_svg(tmp_path):
    cfg = write(tmp_path, "c.yaml", "m: 12\nJ: 10\ncompare_m: null\nfull_carleson: false\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--svg"]) == EXIT_OK
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10
    assert [r["instance"] for r in rows] == [f"s={s}" for s in range(1, 11)]
    for r in rows:
        assert float(r["ratio"]) >= 0 and float(r["ratio_gbar"]) >= 0
    svg = (tmp_path / "sweep.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_sweep_of_constant_function():
    # S_n 1 = 1 for every n, so W = 1 and the shape is log log 11
    cfg = harness.load_config(None, "sweep", m=10, J=9, s_values=[0], compare_m=None)
    (row,) = harness.sweep_main_theorem(cfg)
    assert math.isclose(row.ratios["ratio"], 1 / loglog(11.0), rel_tol=1e-12)
    assert row.measured["dominated"]


def test_sweep_threads_do_not_change_rows():
    cfg = harness.load_config(None, "sweep", m=11, J=10, s_values=[2, 5, 7], compare_m=None)
    one = [r.to_json() for r in harness.sweep_main_theorem(cfg)]
    two = [r.to_json() for r in harness.sweep_main_theorem(cfg.at(cfg.m, threads=3))]
    assert one == two


def test_props_of_zero_function_has_zero_masses():
    cfg = harness.load_config(None, "props", bad_dilation=1)
    G = np.zeros(1 << 12, dtype=bool)
    G[2048:] = True
    row = harness.proposition_report(cfg, GridFunction.zeros(12), G)
    assert all(v == 0.0 for v in row.ratios.values())


def test_props_disjoint_intervals_end_to_end():
    cfg = harness.load_config(None, "props", bad_dilation=1)
    F = np.zeros(1 << 12, dtype=bool)
    F[:64] = True
    G = np.zeros(1 << 12, dtype=bool)
    G[2048:3072] = True
    row = harness.proposition_report(cfg, GridFunction.indicator(12, F), G)
    assert set(row.ratios) == {f"{g}_ratio" for g in harness.PROP_GROUPS}
    assert row.measured["lambda"] == pytest.approx((64 / 4096) / 0.25)
    assert row.measured["G_measure"] > 0


def test_props_with_lowest_frequency_selector_leaves_only_cluster_tiles():
    cfg = harness.load_config(None, "props", bad_dilation=1)
    rng = np.random.default_rng(4)
    F, G = harness._mixed_cells(rng, 12)
    sel = np.ones(1 << 12, dtype=np.int64)
    row = harness.proposition_report(cfg, GridFunction.indicator(12, F), G, selector=sel)
    assert row.measured["p1_mass"] == 0.0 and row.measured["p2_mass"] == 0.0


def test_props_lambda_cap_is_flagged():
    cfg = harness.load_config(None, "props", bad_dilation=1)
    F = np.zeros(1 << 12, dtype=bool)
    F[:1024] = True
    G = np.zeros(1 << 12, dtype=bool)
    G[2048:2100] = True
    row = harness.proposition_report(cfg, GridFunction.indicator(12, F), G)
    assert row.measured["lambda_capped"] and row.measured["lambda"] == harness.LAMBDA_CAP


def test_props_instances_cycle_layouts():
    cfg = harness.load_config(None, "props", instances=6)
    names = [name.split(":")[0] for name, _, _ in harness.props_instances(cfg)]
    assert names == ["disjoint", "level", "mixed"] * 2


def test_decomposition_report_of_zero_function():
    cfg = harness.load_config(None, "decompose")
    rep = harness.decomposition_report(cfg, GridFunction.zeros(10), 0.25)
    assert rep["tree_counts"] == {}
    assert all(v for v in rep["invariants"].values() if v is not None)
    assert {e["label"] for e in rep["label_counts"]} <= {"cluster", "residual"}
    assert rep["max_multiplicity"] == 0


def test_decomposition_counts_match_reference_classifier():
    m = 10
    cfg = harness.load_config(None, "decompose")
    f = GridFunction.interval_indicator(m, 0.0, 0.25)
    rep = harness.decomposition_report(cfg, f, 0.25)
    got = Counter()
    for e in rep["label_counts"]:
        got[(e["label"], e["k"])] += e["count"]
    ref = brute_classify(all_tiles(m), f.abs(), 0.25, 2, harness.BAD_DILATION)
    want = Counter()
    for labels in ref.values():
        for kind, k, _, _ in labels:
            want[(kind, -1 if k is None else k)] += 1
    assert got == want
    assert rep["max_multiplicity"] <= 14


def test_decompose_command(tmp_path):
    assert main(["decompose", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "decompose.json").read_text())
    rep = doc["summary"]["reports"]["s=2"]
    assert all(v is not False for v in rep["invariants"].values())


def test_cover_stress_small(tmp_path):
    cfg = write(tmp_path, "c.yaml", "cover_instances: 40\ncover_max_intervals: 64\n")
    assert main(["cover-stress", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "cover-stress.json").read_text())
    assert doc["summary"]["instances"] == 40


def test_ineq_small(tmp_path):
    cfg = write(tmp_path, "c.yaml", "m: 10\ncompare_m: 12\nineq_count: 6\n")
    assert main(["ineq", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "ineq.json").read_text())
    assert set(doc["summary"]["maxima"]) == {"10", "12"}


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
    with pytest.raises(ConfigurationError):
        harness.load_config(None, "frobnicate")
