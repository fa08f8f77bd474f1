"""Report and plot-series emission."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from ..defenses import parse_defense
from ..metrics import psnr_for_plot
from .stats import aggregate_rows
from .sweep import SweepResult

CSV_FIELDS = [
    "defense", "attack", "family", "level", "parameter", "n", "n_error", "n_rejected",
    "n_correct", "n_escaped", "n_originally_correct", "n_escaped_originally_correct",
    "escape_rate", "defense_rate", "escape_rate_originally_correct",
    "mean_mse", "mean_psnr", "mean_ssim",
]
FIGURES = ("escape_by_level", "psnr_by_alpha", "ssim_by_alpha", "defense_by_ksize")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _open_out(path):
    # IoError contract: a missing parent directory raises instead of being created
    return open(Path(path), "w", newline="")


def emit_report(result: SweepResult, fmt: str, path) -> None:
    """``jsonl``: one record per line. ``csv``: one aggregate row per cell plus baseline."""
    if fmt == "jsonl":
        with _open_out(path) as fh:
            fh.write(result.to_jsonl())
    elif fmt == "csv":
        with _open_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for row in aggregate_rows(result):
                w.writerow([format_value(row[k]) for k in CSV_FIELDS])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_csv_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else None


def plot_series(result: SweepResult, figure: str) -> list[tuple[str, object, float]]:
    """``(series, x, y)`` points for one figure; PSNR is capped at 40 here only."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    points = []
    multi_defense = len({r.defense for r in result.records}) > 1
    if figure == "escape_by_level":
        for row in aggregate_rows(result):
            if row["family"] == "baseline" or row["escape_rate"] is None:
                continue
            series = row["family"] + (f"|{row['defense']}" if multi_defense else "")
            points.append((series, int(row["level"][1:]), row["escape_rate"]))
    elif figure in ("psnr_by_alpha", "ssim_by_alpha"):
        by_alpha: dict[float, list[float]] = {}
        for r in result.attacked:
            if r.family != "fusion" or r.quality is None:
                continue
            v = psnr_for_plot(r.quality.psnr) if figure == "psnr_by_alpha" else r.quality.ssim
            by_alpha.setdefault(float(r.parameter), []).append(v)
        metric = figure.split("_")[0]
        points = [(metric, a, _mean(vs)) for a, vs in sorted(by_alpha.items())]
    else:
        for row in aggregate_rows(result):
            if row["family"] == "baseline" or row["defense_rate"] is None:
                continue
            cfg = parse_defense(row["defense"])
            if cfg.filter == "none":
                continue
            points.append((f"{row['attack']}|{cfg.filter}", cfg.ksize, row["defense_rate"]))
        points.sort(key=lambda p: (p[0], p[1]))
    return points


def emit_plot_data(result: SweepResult, figure: str, path) -> None:
    """Write ``series,x,y`` rows (each series is an x/y curve)."""
    points = plot_series(result, figure)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "x", "y"])
        for series, x, y in points:
            w.writerow([series, format_value(x), format_value(y)])
