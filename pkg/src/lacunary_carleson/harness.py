"""Experiment driver: configs, function families, reports and output files.

Every experiment returns ``ReportRow`` objects whose CSV/JSON form is a pure
function of the config (wall-clock runtimes are kept in memory only), so two
runs with the same config write byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import yaml

from .covering import (
    ROUND_RATIO_FLOOR,
    check_round_inequality,
    greedy_cover,
    msum_ratio,
    random_antichain,
)
from .decomposition import (
    BAD_DILATION,
    classify,
    level_intervals,
    level_shell_report,
)
from .dyadic import all_tiles, decompose_trees, e_set, mass, mass_bucket, scale_range, space
from .errors import ConfigurationError, FrequencyOverflowError, InvariantViolation
from .inequalities import (
    bmo_corpus,
    coeff_dual_corpus,
    corpus_maxima,
    general_coeff_corpus,
    khinchin_corpus,
    zygmund_corpus,
)
from .kernel import kernel_sum, torus_offsets
from .operators import (
    apply_T,
    apply_T_P,
    apply_T_P_star,
    apply_T_star_family,
    inner,
    shell_interval_mask,
    sum_T_P,
    t_c_approximant,
)
from .torus import (
    GridFunction,
    LacunarySequence,
    full_carleson_maximal,
    linearize,
    partial_sums,
    weak_l1_norm,
)

__all__ = [
    "SCHEMA",
    "COMMANDS",
    "ExperimentConfig",
    "ReportRow",
    "load_config",
    "load_baselines",
    "bound_shape",
    "sweep_functions",
    "sweep_main_theorem",
    "props_instances",
    "proposition_report",
    "run_props",
    "decomposition_report",
    "run_decompose",
    "cover_stress",
    "inequality_report",
    "verify",
    "write_outputs",
    "LAMBDA_CAP",
    "THREADS_ENV",
]

SCHEMA = "lacunary-carleson/report/v1"
COMMANDS = ("sweep", "props", "decompose", "cover-stress", "ineq", "verify")
THREADS_ENV = "LACUNARY_THREADS"
MAX_M = 18
FAMILIES = ("dyadic", "indicator_union", "bounded", "spike")
# lambda = |F|/|G_bar| is capped here when G_bar is not larger than F
LAMBDA_CAP = 0.5


@dataclass
class ExperimentConfig:
    m: int = 14
    alpha: int = 2
    J: int | None = 12
    family: str = "dyadic"
    s_values: list[int] = field(default_factory=lambda: list(range(1, 11)))
    instances: int = 20
    seed: int = 0
    lam: float | None = None
    lambda_scale: float = 1.0
    bad_dilation: float = BAD_DILATION
    threads: int = 1
    svg: bool = False
    compare_m: int | None = None
    full_carleson: bool = True
    cover_instances: int = 10_000
    cover_max_intervals: int = 512
    ineq_count: int = 64

    def validate(self) -> "ExperimentConfig":
        ints = ("m", "alpha", "instances", "seed", "threads", "cover_instances", "cover_max_intervals", "ineq_count")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigurationError(f"{name} must be an integer, got {v!r}")
        if not 10 <= self.m <= MAX_M:
            raise ConfigurationError(f"m must lie in [10, {MAX_M}], got {self.m}")
        if self.compare_m is not None and not (isinstance(self.compare_m, int) and 10 <= self.compare_m <= MAX_M):
            raise ConfigurationError(f"compare_m must lie in [10, {MAX_M}], got {self.compare_m!r}")
        if self.alpha < 2:
            raise ConfigurationError(f"alpha must be >= 2, got {self.alpha}")
        if self.J is not None and (isinstance(self.J, bool) or not isinstance(self.J, int) or self.J < 1):
            raise ConfigurationError(f"J must be a positive integer or null, got {self.J!r}")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not isinstance(self.s_values, list) or not self.s_values:
            raise ConfigurationError("s_values must be a non-empty list")
        for s in self.s_values:
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s <= self.m:
                raise ConfigurationError(f"s_values entries must be integers in [0, m], got {s!r}")
        if self.lam is not None and not (isinstance(self.lam, (int, float)) and 0 < self.lam < 1):
            raise ConfigurationError(f"lam must lie in (0, 1), got {self.lam!r}")
        if not (isinstance(self.lambda_scale, (int, float)) and 0 < self.lambda_scale <= 1):
            raise ConfigurationError(f"lambda_scale must lie in (0, 1], got {self.lambda_scale!r}")
        if not (isinstance(self.bad_dilation, (int, float)) and self.bad_dilation >= 1):
            raise ConfigurationError(f"bad_dilation must be >= 1, got {self.bad_dilation!r}")
        for name in ("svg", "full_carleson"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigurationError(f"{name} must be a boolean")
        if self.threads < 1 or self.instances < 1 or self.cover_instances < 0 or self.ineq_count < 1:
            raise ConfigurationError("threads, instances and ineq_count must be positive")
        if self.cover_max_intervals < 1:
            raise ConfigurationError("cover_max_intervals must be positive")
        for mm in {self.m, self.compare_m or self.m}:
            try:
                self.sequence(mm)
            except FrequencyOverflowError as exc:
                raise ConfigurationError(str(exc)) from None
        return self

    def sequence(self, m: int | None = None) -> LacunarySequence:
        return LacunarySequence.fitting(self.alpha, self.m if m is None else m, self.J)

    def at(self, m: int, **changes) -> "ExperimentConfig":
        data = asdict(self)
        data.update(m=m, **changes)
        return ExperimentConfig(**data)

    def to_json(self) -> dict:
        return asdict(self)


_DEFAULTS: dict[str, dict[str, Any]] = {
    "sweep": dict(m=14, J=12, family="dyadic", compare_m=16),
    "props": dict(m=12, J=None, family="indicator_union", instances=20),
    "decompose": dict(m=10, J=None, family="dyadic", s_values=[2], lam=0.25, instances=1),
    "cover-stress": dict(m=14, cover_instances=10_000),
    "ineq": dict(m=12, J=None, ineq_count=64, compare_m=14),
    "verify": dict(
        m=10,
        J=None,
        s_values=[1, 2, 3, 4],
        instances=2,
        cover_instances=200,
        ineq_count=8,
        compare_m=None,
    ),
}


def load_config(path: str | os.PathLike | None, command: str, **overrides) -> ExperimentConfig:
    """Read a YAML (or JSON) mapping, layer it over the command defaults."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")
    data: dict[str, Any] = dict(_DEFAULTS[command])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigurationError("config must be a mapping of option names to values")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(map(str, unknown))}")
    return ExperimentConfig(**data).validate()


def load_baselines() -> dict:
    text = resources.files("lacunary_carleson").joinpath("data/baselines.json").read_text()
    return json.loads(text)


# Rows and output ---------------------------------------------------------------


@dataclass
class ReportRow:
    experiment: str
    instance: str
    inputs: dict[str, Any] = field(default_factory=dict)
    measured: dict[str, Any] = field(default_factory=dict)
    ratios: dict[str, float] = field(default_factory=dict)
    runtime: float = 0.0  # seconds; never written to disk

    def __post_init__(self):
        for k, v in self.ratios.items():
            if not (math.isfinite(v) and v >= 0):
                raise InvariantViolation(f"ratio {k} = {v} is not finite and nonnegative")

    def flat(self) -> dict[str, Any]:
        out = {"experiment": self.experiment, "instance": self.instance}
        out.update(self.inputs)
        out.update(self.measured)
        out.update(self.ratios)
        return out

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "instance": self.instance,
            "inputs": self.inputs,
            "measured": self.measured,
            "ratios": self.ratios,
        }


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    cols: list[str] = []
    for r in rows:
        for k in r.flat():
            if k not in cols:
                cols.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        flat = r.flat()
        w.writerow([_fmt(flat.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return float(obj)
    return obj


def write_outputs(
    out_dir: str | os.PathLike,
    name: str,
    rows: Sequence[ReportRow],
    summary: dict,
    cfg: ExperimentConfig,
    svg: Callable[[Path], None] | None = None,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    csv_path = out / f"{name}.csv"
    csv_path.write_text(rows_to_csv(rows))
    paths.append(csv_path)
    doc = {
        "schema": SCHEMA,
        "command": name,
        "config": cfg.to_json(),
        "summary": summary,
        "rows": [r.to_json() for r in rows],
    }
    json_path = out / f"{name}.json"
    json_path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n")
    paths.append(json_path)
    if svg is not None:
        svg_path = out / f"{name}.svg"
        svg(svg_path)
        paths.append(svg_path)
    return paths


def _line_plot(path: Path, series: dict[str, tuple[Sequence[float], Sequence[float]]], xlabel: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "lacunary-carleson", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (x, y) in series.items():
            ax.plot(x, y, marker="o", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _pmap(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


# Function families ---------------------------------------------------------------


def bound_shape(l1: float, linf: float, scale: float = 1.0) -> float:
    """l1 * log log(10 + scale * linf / l1), natural logarithms; 0 for l1 = 0."""
    if l1 == 0:
        return 0.0
    return l1 * math.log(math.log(10.0 + scale * linf / l1))


def _random_dyadic_union(rng: np.random.Generator, m: int, pieces: int, lo_level: int, hi_level: int, region=(0.0, 1.0)) -> np.ndarray:
    mask = np.zeros(1 << m, dtype=bool)
    a, b = region
    for _ in range(pieces):
        lev = int(rng.integers(lo_level, hi_level + 1))
        size = 2.0**-lev
        start = a + rng.random() * max(b - a - size, 0.0)
        I = space(lev, int(start * (1 << lev)))
        mask[I.sample_slice(m)] = True
    return mask


def _family_function(family: str, m: int, rng: np.random.Generator) -> GridFunction:
    res = min(m, 8)
    cells = 1 << res
    if family == "indicator_union":
        return GridFunction.indicator(m, _random_dyadic_union(rng, m, int(rng.integers(1, 5)), 2, min(m, 10)))
    if family == "bounded":
        vals = rng.uniform(0.0, 1.0, cells) * (rng.random(cells) < 0.3)
        vals[int(rng.integers(cells))] = 1.0
    elif family == "spike":
        vals = np.zeros(cells)
        vals[int(rng.integers(cells))] = float(2.0 ** rng.integers(1, 10))
        vals[int(rng.integers(cells))] += 1.0
    else:
        raise ConfigurationError(f"family {family!r} has no random generator")
    return GridFunction(m, np.repeat(vals, 1 << (m - res)).astype(np.complex128))


def sweep_functions(cfg: ExperimentConfig) -> list[tuple[str, GridFunction]]:
    if cfg.family == "dyadic":
        return [(f"s={s}", GridFunction.interval_indicator(cfg.m, 0.0, 2.0**-s)) for s in cfg.s_values]
    out = []
    for i, s in enumerate(_seeds(cfg.seed, cfg.instances)):
        out.append((f"seed={s}", _family_function(cfg.family, cfg.m, np.random.default_rng(s))))
    return out


# Main-theorem sweep -----------------------------------------------------------------


def _sweep_one(cfg: ExperimentConfig, seq: LacunarySequence, item) -> ReportRow:
    name, f = item
    t0 = time.perf_counter()
    rows = partial_sums(f, seq.values)
    lac = np.abs(rows).max(axis=0)
    W = weak_l1_norm(lac)
    a = f.abs()
    l1 = float(a.mean())
    linf = float(a.max())
    shape = bound_shape(l1, linf)
    ratio = W / shape if shape > 0 else 0.0
    v = np.sort(lac)[::-1]
    if v.size and v[0] > 0:
        i_star = int(np.argmax(v * np.arange(1, v.size + 1)))
        threshold = float(v[i_star])
        gbar = float(np.count_nonzero(lac >= threshold) / f.N)
    else:
        threshold, gbar = 0.0, 0.0
    measured: dict[str, Any] = {"W": W, "weak_threshold": threshold, "gbar_measure": gbar}
    # second normalization: |G_bar| / |F| inside the log log, G_bar the extremal level set
    gshape = bound_shape(l1, linf, gbar)
    ratios = {"ratio": ratio, "ratio_gbar": W / gshape if gshape > 0 else 0.0}
    if cfg.full_carleson:
        full = full_carleson_maximal(f).samples.real
        measured["dominated"] = bool(np.all(lac <= full))
        measured["W_full"] = weak_l1_norm(full)
    if l1 > 0:
        selector = linearize(f, seq)
        Tf = apply_T(f, selector)
        top = float(lac.max())
        measured["T_discrepancy"] = float(np.max(np.abs(np.abs(Tf.samples) - lac)) / top) if top > 0 else 0.0
    else:
        measured["T_discrepancy"] = 0.0
    return ReportRow(
        "sweep",
        name,
        inputs={"m": f.m, "alpha": seq.alpha, "J": seq.count, "F_measure": float(np.count_nonzero(a) / f.N), "l1": l1, "linf": linf},
        measured=measured,
        ratios=ratios,
        runtime=time.perf_counter() - t0,
    )


def sweep_main_theorem(cfg: ExperimentConfig) -> list[ReportRow]:
    seq = cfg.sequence()
    return _pmap(lambda item: _sweep_one(cfg, seq, item), sweep_functions(cfg), cfg.threads)


def sweep_summary(rows: Sequence[ReportRow], compare: Sequence[ReportRow] | None = None) -> dict:
    C = max((r.ratios["ratio"] for r in rows), default=0.0)
    out: dict[str, Any] = {
        "C_main": C,
        "dominated": all(r.measured.get("dominated", True) for r in rows),
    }
    if compare is not None:
        C2 = max((r.ratios["ratio"] for r in compare), default=0.0)
        out["C_main_refined"] = C2
        out["refinement_drift"] = abs(C2 / C - 1.0) if C > 0 else 0.0
    return out


def sweep_svg(rows: Sequence[ReportRow], compare: Sequence[ReportRow] | None = None):
    def draw(path: Path) -> None:
        series = {}
        for label, rs in (("m", rows), ("refined", compare or [])):
            pts = sorted((math.log(math.log(10.0 + r.inputs["linf"] / r.inputs["l1"])), r.ratios["ratio"]) for r in rs if r.inputs["l1"] > 0)
            if pts:
                tag = f"m={rs[0].inputs['m']}"
                series[tag] = ([p[0] for p in pts], [p[1] for p in pts])
        _line_plot(path, series, "log log(10 + |f|_inf/|f|_1)", "W / bound shape")

    return draw


# Proposition report -------------------------------------------------------------------


# Cells of length 2**-MIXED_CELL_LEVEL: fine pattern / spike / G_bar / empty.
MIXED_CELL_LEVEL = 5
MIXED_WEIGHTS = (0.3, 0.2, 0.3, 0.2)


def _mixed_cells(rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
    if m < MIXED_CELL_LEVEL + 6:
        raise ConfigurationError(f"mixed props instances need m >= {MIXED_CELL_LEVEL + 6}")
    N = 1 << m
    width = N >> MIXED_CELL_LEVEL
    period = width // 2
    # a solid run over the first eighth of each half cell, then every other sample
    pattern = np.zeros(period, dtype=bool)
    pattern[: period // 8] = True
    pattern[period // 4 :: 2] = True
    solid = bool(rng.integers(2))
    F = np.zeros(N, dtype=bool)
    G = np.zeros(N, dtype=bool)
    kinds = rng.choice(4, size=1 << MIXED_CELL_LEVEL, p=MIXED_WEIGHTS)
    for c, kind in enumerate(kinds):
        sl = slice(c * width, (c + 1) * width)
        if kind == 0:
            F[sl] = np.tile(pattern, 2) if solid else rng.random(width) < 0.5
        elif kind == 1:
            F[c * width : c * width + int(rng.integers(1, 5))] = True
        elif kind == 2:
            G[sl] = True
    return F, G


def props_instances(cfg: ExperimentConfig) -> list[tuple[str, GridFunction, np.ndarray]]:
    """Seeded (F, G_bar) pairs, cycling through three layouts.

    ``disjoint`` puts F in [0, 1/2) and a larger G_bar in [1/2, 1).
    ``level`` takes G_bar as the level set of the lacunary maximal function
    of chi_F at the threshold attaining the weak norm. ``mixed`` interleaves
    cells of length 1/32 holding fine structure, thin spikes or G_bar; this is
    the layout that puts high selector frequencies inside G, so the separated
    tile groups carry mass.
    """
    seq = cfg.sequence()
    out = []
    for i, s in enumerate(_seeds(cfg.seed, cfg.instances)):
        rng = np.random.default_rng(s)
        F = _random_dyadic_union(rng, cfg.m, int(rng.integers(1, 4)), 4, min(cfg.m - 2, 10), (0.0, 0.5))
        f = GridFunction.indicator(cfg.m, F)
        if i % 3 == 2:
            F, G = _mixed_cells(rng, cfg.m)
            f = GridFunction.indicator(cfg.m, F)
            mode = "mixed"
        elif i % 3 == 0:
            G = _random_dyadic_union(rng, cfg.m, int(rng.integers(1, 4)), 2, 6, (0.5, 1.0))
            if G.sum() <= F.sum():
                G[1 << (cfg.m - 1) :] = True
            mode = "disjoint"
        else:
            lac = np.abs(partial_sums(f, seq.values)).max(axis=0)
            v = np.sort(lac)[::-1]
            t = v[int(np.argmax(v * np.arange(1, v.size + 1)))]
            G = lac >= t
            mode = "level"
        out.append((f"{mode}:seed={s}", f, G))
    return out


def _family_mass(f_abs: np.ndarray, g: GridFunction, families: dict, selector: np.ndarray) -> float:
    acc = np.zeros(g.N, dtype=np.complex128)
    for (k, J), tiles in families.items():
        part = apply_T_star_family(g, tiles, selector).samples
        sl = J.sample_slice(g.m)
        acc[sl] += part[sl]
    return float(np.mean(f_abs * np.abs(acc)))


def _tree_approx_ratio(g: GridFunction, families: dict, selector: np.ndarray, limit: int = 8) -> float:
    """max over a few families of sup_J |T* g - T_c g| / sum_P (|J|/|I_P|)(|E(P) cap G|/|I_P|)."""
    best = 0.0
    G = g.abs() > 0
    for (k, J), tiles in list(families.items())[:limit]:
        trees = decompose_trees(tiles)
        full = apply_T_star_family(g, tiles, selector).samples
        approx = t_c_approximant(g, J, trees, selector).samples
        sl = J.sample_slice(g.m)
        lhs = float(np.max(np.abs(full[sl] - approx[sl])))
        rhs = 0.0
        for t in tiles:
            eg = np.count_nonzero(G[e_set(t, selector)]) / g.N
            rhs += (J.length / t.space.length) * (eg / t.space.length)
        if rhs > 0:
            best = max(best, lhs / rhs)
    return best


def proposition_report(
    cfg: ExperimentConfig,
    f: GridFunction,
    gbar: np.ndarray,
    instance: str = "",
    selector: np.ndarray | None = None,
) -> ReportRow:
    """Grouped masses against their bound shapes; the selector defaults to the linearization of f."""
    t0 = time.perf_counter()
    seq = cfg.sequence()
    a = f.abs()
    l1 = float(a.mean())
    linf = float(a.max())
    gbar = np.asarray(gbar, dtype=bool)
    gbar_measure = float(np.count_nonzero(gbar) / f.N)
    inputs = {
        "m": f.m,
        "alpha": seq.alpha,
        "J": seq.count,
        "bad_dilation": cfg.bad_dilation,
        "F_measure": float(np.count_nonzero(a) / f.N),
        "l1": l1,
        "linf": linf,
        "gbar_measure": gbar_measure,
    }
    zero_ratios = {"cluster_ratio": 0.0, "p2_ratio": 0.0, "p1_ratio": 0.0, "residual_ratio": 0.0}
    if l1 == 0 or gbar_measure == 0:
        measured = {"lambda": 0.0, "lambda_capped": False, "G_measure": 0.0, "G_fraction": 0.0,
                    "cluster_mass": 0.0, "p2_mass": 0.0, "p1_mass": 0.0, "residual_mass": 0.0,
                    "max_multiplicity": 0, "tree_approx_ratio": 0.0}
        return ReportRow("props", instance, inputs, measured, zero_ratios, time.perf_counter() - t0)

    raw = cfg.lambda_scale * l1 / gbar_measure
    lam = min(raw, LAMBDA_CAP) if raw >= 1 else raw
    capped = raw >= 1
    if selector is None:
        selector = linearize(f, seq)
    tiles = all_tiles(f.m)
    levels = level_intervals(f, lam)
    cls = classify(tiles, f, lam, seq, levels=levels, dilation=cfg.bad_dilation)
    G = gbar & ~cls.fbad.enlarged
    g = GridFunction.indicator(f.m, G)
    G_measure = float(np.count_nonzero(G) / f.N)

    cluster = cls.cluster()
    cluster_mass = float(np.mean(a * np.abs(apply_T_star_family(g, cluster, selector).samples)))
    p2 = cls.families("p2")
    p1 = cls.families("p1")
    p2_mass = _family_mass(a, g, p2, selector)
    p1_mass = _family_mass(a, g, p1, selector)

    residual = 0.0
    by_level = {}
    for t in tiles:
        by_level.setdefault(t.level, []).append(t)
    adj = {kp: apply_T_star_family(g, ts, selector).samples for kp, ts in by_level.items()}
    for k in range(1, levels.last_level() + 1):
        Tk = np.zeros(f.N, dtype=np.complex128)
        for kp, part in adj.items():
            Tk += np.where(shell_interval_mask(f.m, kp, k, levels), part, 0)
        residual += 2.0**-k * lam * float(np.mean(levels.union_mask(k) * np.abs(Tk)))

    shapes = {
        "cluster": l1,
        "p2": bound_shape(l1, linf, G_measure),
        "p1": l1,
        "residual": l1,
    }
    masses = {"cluster": cluster_mass, "p2": p2_mass, "p1": p1_mass, "residual": residual}
    ratios = {f"{k}_ratio": (masses[k] / shapes[k] if shapes[k] > 0 else 0.0) for k in shapes}
    measured = {
        "lambda": lam,
        "lambda_capped": capped,
        "G_measure": G_measure,
        "G_fraction": G_measure / gbar_measure,
        "cluster_mass": cluster_mass,
        "p2_mass": p2_mass,
        "p1_mass": p1_mass,
        "residual_mass": residual,
        "max_multiplicity": cls.max_multiplicity(),
        "tree_approx_ratio": _tree_approx_ratio(g, p2, selector) if G_measure > 0 else 0.0,
    }
    return ReportRow("props", instance, inputs, measured, ratios, time.perf_counter() - t0)


def run_props(cfg: ExperimentConfig) -> list[ReportRow]:
    items = props_instances(cfg)
    return _pmap(lambda it: proposition_report(cfg, it[1], it[2], it[0]), items, cfg.threads)


PROP_GROUPS = ("cluster", "p2", "p1", "residual")


def props_summary(rows: Sequence[ReportRow], baselines: dict | None = None) -> dict:
    maxima = {g: max((r.ratios[f"{g}_ratio"] for r in rows), default=0.0) for g in PROP_GROUPS}
    out: dict[str, Any] = {"max_ratio": maxima}
    if baselines is not None:
        out["within_baseline"] = {g: maxima[g] <= baselines[g] for g in PROP_GROUPS}
    return out


def props_svg(rows: Sequence[ReportRow]):
    def draw(path: Path) -> None:
        series = {}
        for g in PROP_GROUPS:
            pts = sorted(
                (math.log(math.log(10.0 + r.measured["G_measure"] / r.inputs["F_measure"])), r.ratios[f"{g}_ratio"])
                for r in rows
                if r.inputs["F_measure"] > 0
            )
            series[g] = ([p[0] for p in pts], [p[1] for p in pts])
        _line_plot(path, series, "log log(10 + |G|/|F|)", "group mass / bound shape")

    return draw


# Decomposition report ----------------------------------------------------------------------


def decomposition_report(cfg: ExperimentConfig, f: GridFunction, lam: float, selector: np.ndarray | None = None) -> dict:
    seq = cfg.sequence(f.m)
    if selector is None:
        selector = linearize(f, seq)
    tiles = all_tiles(f.m)
    levels = level_intervals(f, lam)
    cls = classify(tiles, f, lam, seq, levels=levels, dilation=cfg.bad_dilation, check=False)

    counts: Counter = Counter()
    mass_hist: Counter = Counter()
    for t in tiles:
        b = mass_bucket(mass(t, selector))
        mass_hist["null" if b is None else str(b)] += 1
        for lb in cls.labels[t]:
            counts[(lb.kind, -1 if lb.k is None else lb.k, "null" if b is None else str(b))] += 1
    mult_hist = Counter(cls.multiplicity(t) for t in tiles)

    tree_counts = {}
    smallosc_total = smallosc_ok = 0
    for kind in ("p1", "p2"):
        for (k, J), fam in cls.families(kind).items():
            trees = decompose_trees(fam)
            tree_counts[f"{kind}:k={k}:{J!r}"] = len(trees)
            if kind == "p1":
                for tr in trees:
                    smallosc_total += 1
                    smallosc_ok += tr.freq * J.length <= 0.5
    # level-set invariants: antichain, strict means, maximality
    sums_ok = True
    a = f.abs()
    for k, lev in enumerate(levels.levels):
        thr = lam * 2.0**-k
        for I in lev:
            sl = I.sample_slice(f.m)
            if not a[sl].sum() > thr * (sl.stop - sl.start):
                sums_ok = False
            if I.level > 0:
                ps = I.parent().sample_slice(f.m)
                if a[ps].sum() > thr * (ps.stop - ps.start):
                    sums_ok = False
        for x in lev:
            for y in lev:
                if x != y and x.contains(y):
                    sums_ok = False
    shells = level_shell_report(f, levels)
    invariants = {
        "coverage": not cls.uncovered(),
        "multiplicity_le_14": cls.max_multiplicity() <= 14,
        "level_sets_maximal": sums_ok,
        "nesting": shells["nesting"],
        "shell_bound": shells["shell_bound"],
        "shell_vanishing": shells["shell_vanishing"],
    }
    return {
        "lambda": lam,
        "k_max": levels.k_max,
        "tiles": len(tiles),
        "label_counts": [
            {"label": kind, "k": k, "mass_bucket": b, "count": c} for (kind, k, b), c in sorted(counts.items())
        ],
        "mass_histogram": dict(sorted(mass_hist.items())),
        "multiplicity_histogram": {str(k): v for k, v in sorted(mult_hist.items())},
        "max_multiplicity": cls.max_multiplicity(),
        "tree_counts": dict(sorted(tree_counts.items())),
        "smallosc_fraction": (smallosc_ok / smallosc_total) if smallosc_total else 1.0,
        "shell_bound_worst_ratio": shells["shell_bound_worst_ratio"],
        "invariants": invariants,
        "classification": cls.to_json(),
    }


def _decompose_lambda(cfg: ExperimentConfig) -> float:
    return 0.25 if cfg.lam is None else float(cfg.lam)


def run_decompose(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict]:
    lam = _decompose_lambda(cfg)
    rows, reports = [], {}
    for name, f in sweep_functions(cfg):
        t0 = time.perf_counter()
        rep = decomposition_report(cfg, f, lam)
        reports[name] = rep
        for rec in rep["label_counts"]:
            rows.append(
                ReportRow(
                    "decompose",
                    name,
                    inputs={"m": f.m, "lambda": lam},
                    measured={"label": rec["label"], "k": rec["k"], "mass_bucket": rec["mass_bucket"], "count": rec["count"],
                              "max_multiplicity": rep["max_multiplicity"]},
                    runtime=time.perf_counter() - t0,
                )
            )
    return rows, reports


# Covering stress ---------------------------------------------------------------------------


def _cover_one(m: int, max_intervals: int, s: int) -> ReportRow:
    t0 = time.perf_counter()
    rng = np.random.default_rng(s)
    mode = ("uniform", "clustered", "mixed")[int(rng.integers(3))]
    size = int(rng.integers(1, max_intervals + 1))
    ivs = random_antichain(rng, m, size, mode)
    cover = greedy_cover(ivs)
    partition = cover.is_partition()
    disjoint = cover.rounds_disjoint()
    ratio = check_round_inequality(cover, floor=Fraction(0))
    G = np.zeros(1 << m, dtype=bool)
    for _ in range(int(rng.integers(1, 6))):
        lo = int(rng.integers(1 << m))
        G[np.arange(lo, lo + int(rng.integers(1, 1 << (m - 2)))) % (1 << m)] = True
    ms = msum_ratio(ivs, G)
    return ReportRow(
        "cover-stress",
        f"seed={s}",
        inputs={"mode": mode, "intervals": len(ivs)},
        measured={"p": cover.p, "partition": partition, "disjoint": disjoint, "min_round_ratio": float(ratio)},
        ratios={"msum_ratio": ms},
        runtime=time.perf_counter() - t0,
    )


def cover_stress(cfg: ExperimentConfig) -> list[ReportRow]:
    seeds = _seeds(cfg.seed, cfg.cover_instances)
    return _pmap(lambda s: _cover_one(cfg.m, cfg.cover_max_intervals, s), seeds, cfg.threads)


def cover_summary(rows: Sequence[ReportRow]) -> dict:
    return {
        "instances": len(rows),
        "all_partition": all(r.measured["partition"] for r in rows),
        "all_disjoint": all(r.measured["disjoint"] for r in rows),
        "min_round_ratio": min((r.measured["min_round_ratio"] for r in rows), default=1.0),
        "round_ratio_floor": float(ROUND_RATIO_FLOOR),
        "max_msum_ratio": max((r.ratios["msum_ratio"] for r in rows), default=0.0),
        "max_rounds": max((r.measured["p"] for r in rows), default=0),
    }


# Inequality corpus -------------------------------------------------------------------------


def _ineq_rows(m: int, count: int, seed: int, max_J: int) -> list:
    rows = []
    rows += list(zygmund_corpus(m, count, seed, max_J=max_J))
    rows += list(khinchin_corpus(m, count, seed + 1, max_J=max_J))
    rows += list(coeff_dual_corpus(m, count, seed + 2))
    rows += list(bmo_corpus(m, count, seed + 3, max_J=max_J))
    rows += list(general_coeff_corpus(m, count, seed + 4))
    return rows


def inequality_report(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict]:
    max_J = min(12, cfg.m - 2)
    grids = [cfg.m] + ([cfg.compare_m] if cfg.compare_m else [])
    results = _pmap(lambda mm: _ineq_rows(mm, cfg.ineq_count, cfg.seed, max_J), grids, cfg.threads)
    rows = []
    for mm, corpus in zip(grids, results):
        for r in corpus:
            rows.append(
                ReportRow(
                    "ineq",
                    f"{r.inequality}:seed={r.seed}",
                    inputs={"m": mm, "inequality": r.inequality, "param": r.param},
                    measured={"flagged": r.flagged},
                    ratios={"ratio": float(r.ratio)},
                )
            )
    maxima = [corpus_maxima(c) for c in results]
    summary: dict[str, Any] = {"maxima": {str(g): mx for g, mx in zip(grids, maxima)}}
    if len(maxima) == 2:
        drift = {}
        for key, v in maxima[0].items():
            w = maxima[1].get(key, 0.0)
            drift[key] = abs(w / v - 1.0) if v > 0 else 0.0
        summary["drift"] = drift
    return rows, summary


# Full invariant suite ----------------------------------------------------------------------


def verify(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict]:
    """Small-scale run of every invariant; summary['passed'] is the verdict."""
    checks: dict[str, bool] = {}
    rows: list[ReportRow] = []
    m = cfg.m
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).generate_state(1)[0])

    K = m - 5
    y = torus_offsets(1 << m)
    sel = np.abs(y) >= 8 * 2.0**-K
    tele = float(np.max(np.abs(y[sel] * kernel_sum(y[sel], 0, K) - 1.0)))
    checks["kernel_telescoping"] = tele <= 1e-8
    rows.append(ReportRow("verify", "kernel_telescoping", measured={"value": tele, "passed": checks["kernel_telescoping"]}))

    seq = cfg.sequence()
    N = 1 << m
    worst_id = worst_adj = 0.0
    tiles = all_tiles(m)
    for _ in range(cfg.instances):
        f = GridFunction(m, rng.standard_normal(N) + 1j * rng.standard_normal(N))
        selector = rng.choice(np.asarray(seq.values), N)
        Tf = apply_T(f, selector).samples
        St = sum_T_P(f, tiles, selector).samples
        worst_id = max(worst_id, float(np.max(np.abs(Tf - St))))
        for t in [tiles[int(i)] for i in rng.integers(0, len(tiles), 8)]:
            g = GridFunction(m, rng.standard_normal(N) + 1j * rng.standard_normal(N))
            lhs = inner(apply_T_P(f, t, selector), g)
            rhs = inner(f, apply_T_P_star(g, t, selector))
            scale = math.sqrt(np.mean(f.abs() ** 2) * np.mean(g.abs() ** 2))
            worst_adj = max(worst_adj, abs(lhs - rhs) / scale)
    checks["decomposition_identity"] = worst_id <= 1e-10
    checks["adjointness"] = worst_adj <= 1e-10
    rows.append(ReportRow("verify", "decomposition_identity", measured={"value": worst_id, "passed": checks["decomposition_identity"]}))
    rows.append(ReportRow("verify", "adjointness", measured={"value": worst_adj, "passed": checks["adjointness"]}))

    cover_ok = True
    for i, f in enumerate([GridFunction.indicator(m, _random_dyadic_union(rng, m, 3, 2, m - 2)) for _ in range(cfg.instances)]):
        lam = float(rng.uniform(0.05, 0.95))
        rep = decomposition_report(cfg, f, lam)
        ok = all(v is not False for v in rep["invariants"].values())
        cover_ok &= ok
        rows.append(ReportRow("verify", f"classification:{i}", measured={"value": float(rep["max_multiplicity"]), "passed": ok}))
    checks["classification"] = cover_ok

    cov = cover_summary(cover_stress(cfg))
    checks["covering"] = cov["all_partition"] and cov["all_disjoint"] and cov["min_round_ratio"] >= float(ROUND_RATIO_FLOOR) and cov["max_msum_ratio"] <= 500
    rows.append(ReportRow("verify", "covering", measured={"value": cov["max_msum_ratio"], "passed": checks["covering"]}))

    sweep_rows = sweep_main_theorem(cfg.at(m, family="dyadic"))
    checks["domination"] = all(r.measured["dominated"] for r in sweep_rows)
    rows.append(ReportRow("verify", "domination", measured={"value": max(r.ratios["ratio"] for r in sweep_rows), "passed": checks["domination"]}))

    ineq_rows, ineq = inequality_report(cfg)
    kh2 = max(abs(r.ratios["ratio"] - 1 / math.sqrt(2)) for r in ineq_rows if r.inputs["param"] == "p=2")
    checks["khinchin_parseval"] = kh2 <= 1e-12
    rows.append(ReportRow("verify", "khinchin_parseval", measured={"value": kh2, "passed": checks["khinchin_parseval"]}))
    finite = all(math.isfinite(v) for mx in ineq["maxima"].values() for v in mx.values())
    checks["inequality_maxima_finite"] = finite
    rows.append(ReportRow("verify", "inequality_maxima_finite", measured={"value": float(finite), "passed": finite}))

    return rows, {"checks": checks, "passed": all(checks.values())}
