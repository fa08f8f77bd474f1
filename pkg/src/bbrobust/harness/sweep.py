"""Attack/defense sweeps over a dataset manifest."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..attacks import AttackSpec, apply_attack, grid_levels, validate_grid
from ..classifier.types import ClassifierError, match
from ..defenses import DefenseConfig, Rejected, preprocess
from ..imgcore import clip_to_standard, derive_seed, load_image
from ..metrics import QualityReport, quality

SCHEMA_VERSION = 1
BASELINE = "none"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRecord:
    image_id: str
    class_name: str
    attack: str  # canonical AttackSpec text, or "none" for the baseline
    family: str
    level: str
    parameter: object
    defense: str | None
    quality: QualityReport | None
    original_top1_correct: bool
    adv_top1_correct: bool
    top1: str | None
    predicted_class: str
    backend_id: str
    seed: int
    status: str = "ok"  # "ok" | "rejected" | "error"
    detail: str | None = None

    @property
    def is_baseline(self) -> bool:
        return self.attack == BASELINE

    def to_dict(self) -> dict:
        d = {
            "schema": SCHEMA_VERSION,
            "image_id": self.image_id,
            "class": self.class_name,
            "attack": self.attack,
            "family": self.family,
            "level": self.level,
            "parameter": self.parameter,
            "defense": self.defense,
            "quality": None if self.quality is None else self.quality.to_dict(),
            "original_top1_correct": self.original_top1_correct,
            "adv_top1_correct": self.adv_top1_correct,
            "top1": self.top1,
            "predicted_class": self.predicted_class,
            "backend_id": self.backend_id,
            "seed": self.seed,
            "status": self.status,
            "detail": self.detail,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {d.get('schema')!r}")
        q = d.get("quality")
        return cls(
            d["image_id"], d["class"], d["attack"], d["family"], d["level"], d["parameter"],
            d["defense"], None if q is None else QualityReport.from_dict(q),
            bool(d["original_top1_correct"]), bool(d["adv_top1_correct"]), d["top1"],
            d["predicted_class"], d["backend_id"], int(d["seed"]), d["status"], d.get("detail"),
        )


@dataclass
class SweepResult:
    records: list[SweepRecord] = field(default_factory=list)

    @property
    def attacked(self) -> list[SweepRecord]:
        return [r for r in self.records if not r.is_baseline]

    @property
    def baselines(self) -> list[SweepRecord]:
        return [r for r in self.records if r.is_baseline]

    def filter(self, defense="*", attack=None) -> "SweepResult":
        keep = [
            r for r in self.records
            if (defense == "*" or r.defense == defense)
            and (attack is None or r.attack == attack or r.is_baseline)
        ]
        return SweepResult(keep)

    def merge(self, other: "SweepResult") -> "SweepResult":
        return SweepResult(self.records + other.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "SweepResult":
        return cls([SweepRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()])

    def aggregates(self):
        from .stats import aggregate_rows

        return aggregate_rows(self)


def _predicted_class(cls, matchers) -> str:
    for name, m in matchers.items():
        if m.matches_name(cls.top1().name):
            return name
    return "other"


def _classify(backend, img, matcher, matchers):
    cls = backend.classify(img)
    return match(matcher, cls), cls.top1().name, _predicted_class(cls, matchers)


def run_attack_sweep(manifest, grid, backend, defense: DefenseConfig | None = None, seed: int = 0,
                     workers: int | None = None, strict: bool = False, size: int = 224,
                     backgrounds: dict | None = None, levels: dict | None = None) -> SweepResult:
    """Attack every manifest image with every grid cell and classify the results.

    Each image contributes one baseline record followed by one record per cell.
    Per-record seeds come from ``(seed, image id, cell)``, so any record can be
    regenerated alone. Backend failures become ``status="error"`` records unless
    ``strict``. ``levels`` overrides the level labels, e.g. to keep the labels
    of a larger grid when sweeping a subset of it.
    """
    grid = validate_grid(grid)
    if not manifest.entries:
        raise ValueError("manifest is empty")
    levels = {**grid_levels(grid), **(levels or {})}
    backgrounds = dict(backgrounds or {})
    for spec in grid:
        if spec.kind == "fusion" and spec.background not in backgrounds:
            backgrounds[spec.background] = load_image(spec.background)
    defense_text = None if defense is None else str(defense)
    matchers = manifest.matchers
    if workers is None:
        workers = getattr(backend, "max_inflight", None) or getattr(
            getattr(backend, "inner", None), "max_inflight", 1) or 1

    originals = {}

    def load(entry):
        originals[entry.image_id] = clip_to_standard(entry.load(), size)

    def classify_guarded(img, entry):
        try:
            ok, top1, pred = _classify(backend, img, matchers[entry.class_name], matchers)
            return "ok", ok, top1, pred, None
        except ClassifierError as exc:
            if strict:
                raise
            log.warning("backend error on %s: %s", entry.image_id, exc)
            return "error", False, None, "other", f"{type(exc).__name__}: {exc}"

    def baseline(entry):
        img = originals[entry.image_id]
        if defense is not None:
            img = preprocess(img, defense)
            if isinstance(img, Rejected):
                # an unattacked input rejected as cheating is a baseline failure
                return SweepRecord(entry.image_id, entry.class_name, BASELINE, "baseline", "L0",
                                   None, defense_text, None, False, False, None, "other",
                                   backend.backend_id, seed, "rejected", img.reason)
        status, ok, top1, pred, detail = classify_guarded(img, entry)
        return SweepRecord(entry.image_id, entry.class_name, BASELINE, "baseline", "L0", None,
                           defense_text, None, ok, ok, top1, pred, backend.backend_id, seed,
                           status, detail)

    def attacked(entry, spec: AttackSpec, base: SweepRecord):
        orig = originals[entry.image_id]
        rseed = derive_seed(seed, entry.image_id, str(spec))
        adv = apply_attack(orig, spec, rseed, backgrounds.get(spec.background))
        q = quality(adv, orig)
        common = dict(image_id=entry.image_id, class_name=entry.class_name, attack=str(spec),
                      family=spec.family, level=levels[spec], parameter=spec.parameter(),
                      defense=defense_text, quality=q,
                      original_top1_correct=base.original_top1_correct,
                      backend_id=backend.backend_id, seed=rseed)
        if defense is not None:
            adv = preprocess(adv, defense)
            if isinstance(adv, Rejected):
                # a rejected attack counts as defended
                return SweepRecord(adv_top1_correct=True, top1=None, predicted_class="other",
                                   status="rejected", detail=adv.reason, **common)
        status, ok, top1, pred, detail = classify_guarded(adv, entry)
        return SweepRecord(adv_top1_correct=ok, top1=top1, predicted_class=pred, status=status,
                           detail=detail, **common)

    entries = list(manifest.entries)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        list(pool.map(load, entries))
        bases = list(pool.map(baseline, entries))
        jobs = [(e, s, b) for e, b in zip(entries, bases) for s in grid]
        adv_records = list(pool.map(lambda job: attacked(*job), jobs))

    records = []
    per_image = len(grid)
    for i, base in enumerate(bases):
        records.append(base)
        records.extend(adv_records[i * per_image:(i + 1) * per_image])
    return SweepResult(records)
