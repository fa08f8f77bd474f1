"""Escape rates, defense rates, confusion matrices and aggregate rows."""

from __future__ import annotations

import math

import numpy as np

from .sweep import SweepResult


class EmptyScope(ValueError):
    pass


def _judged(records):
    # backend errors carry no verdict either way
    return [r for r in records if r.status != "error"]


def _cells(result: SweepResult):
    cells: dict[tuple[str, str], list] = {}
    for r in _judged(result.attacked):
        cells.setdefault((r.family, r.level), []).append(r)
    return cells


def _check_single_defense(result):
    defenses = {r.defense for r in result.records}
    if len(defenses) > 1:
        raise ValueError(f"result mixes defenses {sorted(map(str, defenses))}; filter first")


def escape_rate(result: SweepResult, scope: str = "all") -> dict[tuple[str, str], float]:
    """Fraction of attacked records whose top-1 is wrong, per (family, level).

    ``scope="originally_correct"`` keeps only images whose baseline was correct.
    """
    if scope not in ("all", "originally_correct"):
        raise ValueError(f"unknown scope {scope!r}")
    _check_single_defense(result)
    rates = {}
    for key, recs in _cells(result).items():
        if scope == "originally_correct":
            recs = [r for r in recs if r.original_top1_correct]
        if recs:
            rates[key] = sum(not r.adv_top1_correct for r in recs) / len(recs)
    if not rates:
        raise EmptyScope(f"no attacked records in scope {scope!r}")
    return rates


def defense_rate(result: SweepResult) -> dict[tuple[str, str], float]:
    """Top-1 accuracy over attacked records, per (family, level)."""
    _check_single_defense(result)
    rates = {}
    for key, recs in _cells(result).items():
        rates[key] = sum(r.adv_top1_correct for r in recs) / len(recs)
    if not rates:
        raise EmptyScope("no attacked records")
    return rates


def baseline_accuracy(result: SweepResult) -> float:
    base = _judged(result.baselines)
    if not base:
        raise EmptyScope("no baseline records")
    return sum(r.original_top1_correct for r in base) / len(base)


def confusion_matrix(result: SweepResult, classes, attack: str | None = None,
                     include_baseline: bool = False):
    """Counts with rows = true class, columns = predicted class plus ``other``.

    Returns ``(column_labels, matrix)``; row ``i`` corresponds to ``classes[i]``.
    """
    classes = list(classes)
    cols = classes + ["other"]
    index = {c: i for i, c in enumerate(cols)}
    m = np.zeros((len(classes), len(cols)), dtype=np.int64)
    for r in _judged(result.records):
        if r.is_baseline and not include_baseline:
            continue
        if attack is not None and r.attack != attack:
            continue
        if r.class_name not in index or r.class_name == "other":
            continue
        m[index[r.class_name], index.get(r.predicted_class, len(cols) - 1)] += 1
    return cols, m


def _mean(values):
    values = list(values)
    if not values:
        return None
    if any(math.isinf(v) for v in values):
        return math.inf
    return math.fsum(values) / len(values)


def aggregate_rows(result: SweepResult) -> list[dict]:
    """One row per (defense, attack cell) plus one baseline row per defense.

    Rows carry raw counts alongside rates so every number is recomputable.
    """
    groups: dict[tuple, list] = {}
    for r in result.records:
        groups.setdefault((r.defense, r.attack), []).append(r)
    rows = []
    for (defense, attack), recs in groups.items():
        judged = _judged(recs)
        first = recs[0]
        n = len(judged)
        n_correct = sum(r.adv_top1_correct for r in judged)
        orig_ok = [r for r in judged if r.original_top1_correct]
        row = {
            "defense": defense or "none",
            "attack": attack,
            "family": first.family,
            "level": first.level,
            "parameter": first.parameter,
            "n": n,
            "n_error": len(recs) - n,
            "n_rejected": sum(r.status == "rejected" for r in judged),
            "n_correct": n_correct,
            "n_escaped": n - n_correct,
            "n_originally_correct": len(orig_ok),
            "n_escaped_originally_correct": sum(not r.adv_top1_correct for r in orig_ok),
            "escape_rate": (n - n_correct) / n if n else None,
            "defense_rate": n_correct / n if n else None,
            "escape_rate_originally_correct": (
                sum(not r.adv_top1_correct for r in orig_ok) / len(orig_ok) if orig_ok else None
            ),
            "mean_mse": _mean(r.quality.mse for r in recs if r.quality),
            "mean_psnr": _mean(r.quality.psnr for r in recs if r.quality),
            "mean_ssim": _mean(r.quality.ssim for r in recs if r.quality),
        }
        rows.append(row)
    return rows
