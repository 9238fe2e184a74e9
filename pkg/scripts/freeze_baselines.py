"""Recompute the regression constants and write them to the packaged baseline file.

Run after an audited change to the operators or the decomposition:

    python3 scripts/freeze_baselines.py

Each constant is the observed maximum rounded up to four significant digits.
"""

from __future__ import annotations

import json
from decimal import ROUND_CEILING, Decimal
from pathlib import Path

from lacunary_carleson import harness

TARGET = Path(__file__).resolve().parents[1] / "src" / "lacunary_carleson" / "data" / "baselines.json"
DIGITS = 4


def round_up(x: float, digits: int = DIGITS) -> float:
    if x <= 0:
        return 0.0
    d = Decimal(repr(x))
    q = Decimal(1).scaleb(d.adjusted() - digits + 1)
    return float((d / q).to_integral_value(ROUND_CEILING) * q)


def main() -> None:
    sweep_cfg = harness.load_config(None, "sweep", compare_m=None)
    sweep = harness.sweep_summary(harness.sweep_main_theorem(sweep_cfg))
    props = {}
    for key, dilation in (("full_dilation", harness.BAD_DILATION), ("unit_dilation", 1)):
        cfg = harness.load_config(None, "props", bad_dilation=dilation)
        maxima = harness.props_summary(harness.run_props(cfg))["max_ratio"]
        props[key] = {g: round_up(v) for g, v in maxima.items()}
    doc = {
        "C_main": round_up(sweep["C_main"]),
        "props": props,
        "observed": {"C_main": sweep["C_main"], "props_m": 12, "sweep_m": sweep_cfg.m},
    }
    TARGET.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(json.dumps(doc, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
