"""Rendering of PDR tables, oracle curves and comparisons."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Sequence

from .sim import CompareReport, PdrTable

DECIMALS = 5


def fmt(value: float) -> str:
    return f"{value:.{DECIMALS}f}"


def fmt_theta(theta: Fraction) -> str:
    return str(theta.numerator) if theta.denominator == 1 else f"{float(theta):g}"


def pdr_csv(table: PdrTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hop", "pdr"])
    for h, p in enumerate(table.per_hop_pdr, start=1):
        w.writerow([h, fmt(p)])
    return buf.getvalue()


def pdr_json(table: PdrTable, labels: Sequence[str] = (), theta: Fraction | None = None) -> str:
    doc = {
        "scenario_id": table.scenario_id,
        "frame_count": table.frame_count,
        "seed": table.seed,
        "theta": None if theta is None else fmt_theta(theta),
        "hops": [
            {
                "hop": h,
                "label": labels[h - 1] if h <= len(labels) else None,
                "delivered": d,
                "pdr": round(d / table.frame_count, DECIMALS),
            }
            for h, d in enumerate(table.delivered, start=1)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def render_pdr(table: PdrTable, fmt_name: str, labels: Sequence[str] = (), theta: Fraction | None = None) -> str:
    if fmt_name == "csv":
        return pdr_csv(table)
    if fmt_name == "json":
        return pdr_json(table, labels, theta)
    raise ValueError(f"unknown format {fmt_name!r}")


def text_table(rows: Sequence[Sequence[str]], header: Sequence[str]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths]), *map(line, rows)]) + "\n"


def pdr_text(table: PdrTable, labels: Sequence[str] = ()) -> str:
    rows = [
        [str(h), fmt(p), f"{100 * p:.3f}%", labels[h - 1] if h <= len(labels) else ""]
        for h, p in enumerate(table.per_hop_pdr, start=1)
    ]
    return text_table(rows, ["hop", "pdr", "percent", "segment"])


def curve_csv(curve: Sequence[float]) -> str:
    return "hop,pdr\n" + "".join(f"{h},{fmt(p)}\n" for h, p in enumerate(curve, start=1))


def curve_json(scenario_id: str, curve: Sequence[float], theta: Fraction, labels: Sequence[str], extra: dict) -> str:
    doc = {
        "scenario_id": scenario_id,
        "theta": fmt_theta(theta),
        "hops": [
            {"hop": h, "label": labels[h - 1] if h <= len(labels) else None, "pdr": p}
            for h, p in enumerate(curve, start=1)
        ],
        **extra,
    }
    return json.dumps(doc, indent=2) + "\n"


def compare_csv(report: CompareReport, oracle_delta_pp: Sequence[float] | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hop", "mc_delta_pp", "oracle_delta_pp"])
    for h, d in enumerate(report.per_hop_delta_pp, start=1):
        o = "" if oracle_delta_pp is None else fmt(oracle_delta_pp[h - 1])
        w.writerow([h, fmt(d), o])
    return buf.getvalue()


def compare_json(report: CompareReport, oracle_delta_pp: Sequence[float] | None) -> str:
    doc = {
        "a": report.a_id,
        "b": report.b_id,
        "end_to_end_delta_pp": round(report.end_to_end_delta_pp, DECIMALS),
        "per_hop_delta_pp": [round(d, DECIMALS) for d in report.per_hop_delta_pp],
        "oracle_per_hop_delta_pp": None if oracle_delta_pp is None else [round(d, DECIMALS) for d in oracle_delta_pp],
    }
    return json.dumps(doc, indent=2) + "\n"
