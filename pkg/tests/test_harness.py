import csv
import json
import math

import numpy as np
import pytest

from bbrobust.attacks import AttackSpec, default_grid, fusion_grid
from bbrobust.classifier import (
    CachedBackend,
    ReferenceBackend,
    RemoteBackend,
    ResponseCache,
    Unavailable,
    train_reference,
)
from bbrobust.classifier.stub import StubServer
from bbrobust.defenses import DefenseConfig
from bbrobust.harness import (
    DuplicateEntry,
    EmptyScope,
    MissingFile,
    ParseError,
    SweepRecord,
    SweepResult,
    aggregate_rows,
    baseline_accuracy,
    confusion_matrix,
    defense_rate,
    emit_plot_data,
    emit_report,
    escape_rate,
    load_manifest,
    plot_series,
    read_csv_report,
    run_attack_sweep,
)
from bbrobust.imgcore import save_image
from bbrobust.metrics import QualityReport
from bbrobust.synthetic import DEFAULT_CLASSES, class_dataset, fusion_background, write_dataset

from .conftest import constant_image


def _const(color, n=32):
    return np.tile(np.array(color, dtype=np.uint8), (n, n, 1))


@pytest.fixture
def color_set(tmp_path):
    """Two constant-color images with a matching two-class reference model."""
    save_image(_const((200, 40, 40)), tmp_path / "r.png")
    save_image(_const((40, 40, 200)), tmp_path / "b.png")
    (tmp_path / "m.csv").write_text("path,class,synonyms\nr.png,red,crimson|scarlet\nb.png,blue,\n")
    model = train_reference([(_const((200, 40, 40)), "red"), (_const((40, 40, 200)), "blue")])
    return load_manifest(tmp_path / "m.csv"), ReferenceBackend(model)


# --- manifest --------------------------------------------------------------

def test_manifest_two_rows(color_set):
    manifest, _ = color_set
    assert len(manifest) == 2
    assert manifest.classes == ["red", "blue"]
    assert manifest.matchers["red"].synonyms == ("crimson", "scarlet")
    assert manifest.entries[0].image_id == "r.png"


def test_manifest_missing_file(tmp_path):
    (tmp_path / "m.csv").write_text("path,class,synonyms\nnope.png,cat,\n")
    with pytest.raises(MissingFile, match="nope.png"):
        load_manifest(tmp_path / "m.csv")


def test_manifest_duplicates(tmp_path):
    save_image(constant_image(1), tmp_path / "a.png")
    (tmp_path / "m.csv").write_text("path,class,synonyms\na.png,cat,\na.png,dog,\n")
    with pytest.raises(DuplicateEntry):
        load_manifest(tmp_path / "m.csv")


def test_manifest_parse_errors(tmp_path):
    (tmp_path / "m.csv").write_text("file,label\na.png,cat\n")
    with pytest.raises(ParseError):
        load_manifest(tmp_path / "m.csv")
    (tmp_path / "e.csv").write_text("path,class,synonyms\n")
    with pytest.raises(ParseError):
        load_manifest(tmp_path / "e.csv")


# --- sweep -----------------------------------------------------------------

def test_sweep_counts_and_order(color_set):
    manifest, backend = color_set
    grid = default_grid()
    result = run_attack_sweep(manifest, grid, backend, seed=1)
    assert len(result.records) == 34
    assert len(result.baselines) == 2 and len(result.attacked) == 32
    first = result.records[:17]
    assert first[0].is_baseline and first[0].image_id == "r.png"
    assert [r.attack for r in first[1:]] == [str(s) for s in grid]
    assert all(r.quality is not None for r in result.attacked)
    assert baseline_accuracy(result) == 1.0


def test_identity_cell_matches_baseline(color_set):
    manifest, backend = color_set
    result = run_attack_sweep(manifest, [AttackSpec("gaussian", var=0.0)], backend, seed=3)
    for r in result.attacked:
        assert r.adv_top1_correct == r.original_top1_correct
        assert r.quality.psnr == math.inf
    rates = escape_rate(result)
    assert rates[("gaussian", "L1")] == 1 - baseline_accuracy(result)


def test_sweep_deterministic_and_order_independent_of_workers(color_set):
    manifest, backend = color_set
    grid = default_grid()[:6]
    a = run_attack_sweep(manifest, grid, backend, seed=5, workers=1).to_jsonl()
    b = run_attack_sweep(manifest, grid, backend, seed=5, workers=4).to_jsonl()
    assert a == b
    c = run_attack_sweep(manifest, grid, backend, seed=6, workers=1).to_jsonl()
    assert a != c


def test_record_regenerable_alone(color_set):
    from bbrobust.attacks import apply_attack
    from bbrobust.imgcore import clip_to_standard, derive_seed

    manifest, backend = color_set
    spec = AttackSpec("saltpepper", amount=0.3)
    result = run_attack_sweep(manifest, [spec], backend, seed=8)
    rec = result.attacked[0]
    assert rec.seed == derive_seed(8, rec.image_id, str(spec))
    orig = clip_to_standard(manifest.entries[0].load())
    adv = apply_attack(orig, spec, rec.seed)
    from bbrobust.metrics import quality

    assert quality(adv, orig) == rec.quality


def test_sweep_with_defense_rejection(color_set):
    manifest, backend = color_set
    grid = [AttackSpec("mono", channel="red"), AttackSpec("rotate", degree=90.0)]
    cfg = DefenseConfig("none", reject_monochrome=True)
    result = run_attack_sweep(manifest, grid, backend, defense=cfg, seed=0)
    mono = [r for r in result.attacked if r.family == "mono"]
    assert all(r.status == "rejected" and r.adv_top1_correct for r in mono)
    assert defense_rate(result)[("mono", "L1")] == 1.0
    assert all(r.defense == "none:rejectmono" for r in result.records)


def test_rejected_baseline_is_failure(tmp_path):
    red = np.zeros((16, 16, 3), np.uint8)
    red[..., 0] = 180
    save_image(red, tmp_path / "r.png")
    (tmp_path / "m.csv").write_text("path,class,synonyms\nr.png,red,\n")
    model = train_reference([(red, "red"), (_const((0, 0, 90)), "blue")])
    cfg = DefenseConfig("none", reject_monochrome=True)
    result = run_attack_sweep(load_manifest(tmp_path / "m.csv"), [AttackSpec("gray")],
                              ReferenceBackend(model), defense=cfg)
    base = result.baselines[0]
    assert base.status == "rejected" and not base.original_top1_correct


def test_backend_errors_annotated(color_set):
    manifest, _ = color_set
    with StubServer() as srv:
        srv.fail_status, srv.fail_count = 500, -1
        backend = RemoteBackend(srv.url, backoff_base=0.0)
        result = run_attack_sweep(manifest, [AttackSpec("gray")], backend)
        assert all(r.status == "error" and "Unavailable" in r.detail for r in result.records)
        with pytest.raises(Unavailable):
            run_attack_sweep(manifest, [AttackSpec("gray")], backend, strict=True)
    with pytest.raises(EmptyScope):
        escape_rate(result)


def test_fusion_sweep_uses_background(color_set, tmp_path):
    manifest, backend = color_set
    save_image(fusion_background(1, 64), tmp_path / "bg.png")
    grid = fusion_grid(str(tmp_path / "bg.png"))
    result = run_attack_sweep(manifest, grid, backend)
    by_alpha = {r.parameter: r for r in result.attacked if r.image_id == "r.png"}
    assert by_alpha[1.0].quality.ssim == 1.0
    assert by_alpha[0.2].quality.ssim < by_alpha[0.8].quality.ssim


# --- statistics ------------------------------------------------------------

def rec(image, correct, orig=True, attack="gray", family="mono", level="L4", status="ok",
        cls="cat", pred=None, defense=None):
    q = None if attack == "none" else QualityReport(1.0, 48.0, 0.9)
    return SweepRecord(image, cls, attack, family, level, None, defense, q, orig, correct,
                       "x", pred or (cls if correct else "other"), "b", 0, status)


def test_escape_rate_counting():
    result = SweepResult([rec("a", True), rec("b", False), rec("c", True), rec("d", False)])
    assert escape_rate(result) == {("mono", "L4"): 0.5}
    assert escape_rate(SweepResult([rec("a", True), rec("b", True)])) == {("mono", "L4"): 0.0}


def test_escape_rate_originally_correct_scope():
    records = [rec("a", False), rec("b", False), rec("c", False), rec("d", True, orig=False)]
    result = SweepResult(records)
    assert escape_rate(result, "originally_correct") == {("mono", "L4"): 1.0}
    assert escape_rate(result, "all") == {("mono", "L4"): 0.75}


def test_defense_rate_complement():
    records = [rec(str(i), i != 0) for i in range(5)]
    result = SweepResult(records)
    assert escape_rate(result)[("mono", "L4")] == pytest.approx(0.2)
    assert defense_rate(result)[("mono", "L4")] == pytest.approx(0.8)
    for key, e in escape_rate(result).items():
        assert e + defense_rate(result)[key] == 1.0


def test_defense_rate_empty():
    with pytest.raises(EmptyScope):
        defense_rate(SweepResult([rec("a", True, attack="none", family="baseline")]))


def test_mixed_defenses_must_be_filtered():
    result = SweepResult([rec("a", True), rec("a", False, defense="median:ksize=3")])
    with pytest.raises(ValueError):
        escape_rate(result)
    assert escape_rate(result.filter(defense=None)) == {("mono", "L4"): 0.0}


def test_confusion_matrix():
    classes = ["cat", "dog"]
    perfect = SweepResult([rec("a", True, cls="cat"), rec("b", True, cls="dog")])
    cols, m = confusion_matrix(perfect, classes)
    assert cols == ["cat", "dog", "other"]
    np.testing.assert_array_equal(m, [[1, 0, 0], [0, 1, 0]])
    mixed = SweepResult([
        rec("a", False, cls="cat", pred="dog"), rec("b", False, cls="cat"),
        rec("c", True, cls="dog"), rec("d", True, cls="cat"),
    ])
    _, m = confusion_matrix(mixed, classes)
    np.testing.assert_array_equal(m, [[1, 1, 1], [0, 1, 0]])
    np.testing.assert_array_equal(m.sum(axis=1), [3, 1])


def test_confusion_rows_conserve_counts(color_set):
    manifest, backend = color_set
    result = run_attack_sweep(manifest, default_grid(), backend)
    _, m = confusion_matrix(result, manifest.classes)
    assert m.sum(axis=1).tolist() == [16, 16]


def test_four_class_confusion_setup(tmp_path):
    data = class_dataset(3, seed=1, size=48)
    manifest = load_manifest(write_dataset(tmp_path, data))
    assert manifest.classes == ["tench", "goldfish", "white shark", "cat"]
    model = train_reference(data)
    result = run_attack_sweep(manifest, [AttackSpec("rotate", degree=180.0)],
                              ReferenceBackend(model), size=48)
    cols, m = confusion_matrix(result, manifest.classes)
    assert m.shape == (4, 5) and m.sum() == 12
    np.testing.assert_array_equal(m.sum(axis=1), [3, 3, 3, 3])


# --- reports ---------------------------------------------------------------

def test_reports(color_set, tmp_path):
    manifest, backend = color_set
    result = run_attack_sweep(manifest, default_grid(), backend, seed=2)
    emit_report(result, "jsonl", tmp_path / "r.jsonl")
    emit_report(result, "csv", tmp_path / "r.csv")
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert len(lines) == len(result.records)
    assert all(json.loads(line)["schema"] == 1 for line in lines)
    rows = read_csv_report(tmp_path / "r.csv")
    assert len(rows) == 17
    assert rows[0]["attack"] == "none"
    # aggregates recomputed from the jsonl match the csv exactly
    reloaded = SweepResult.from_jsonl((tmp_path / "r.jsonl").read_text())
    assert reloaded.to_jsonl() == result.to_jsonl()
    emit_report(reloaded, "csv", tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_text() == (tmp_path / "r.csv").read_text()
    for row in rows[1:]:
        assert int(row["n"]) == int(row["n_correct"]) + int(row["n_escaped"])


def test_report_io_error(color_set, tmp_path):
    manifest, backend = color_set
    result = run_attack_sweep(manifest, [AttackSpec("gray")], backend)
    with pytest.raises(OSError):
        emit_report(result, "jsonl", tmp_path / "missing" / "r.jsonl")


def test_plot_data(color_set, tmp_path):
    manifest, backend = color_set
    save_image(fusion_background(1, 64), tmp_path / "bg.png")
    result = run_attack_sweep(manifest, fusion_grid(str(tmp_path / "bg.png")), backend)
    psnr_pts = plot_series(result, "psnr_by_alpha")
    assert [p[1] for p in psnr_pts] == [0.2, 0.4, 0.6, 0.8, 1.0]
    assert psnr_pts[-1][2] == 40.0
    assert all(r.quality.psnr == math.inf for r in result.attacked if r.parameter == 1.0)
    ssim_pts = plot_series(result, "ssim_by_alpha")
    assert ssim_pts[-1][2] == 1.0
    emit_plot_data(result, "psnr_by_alpha", tmp_path / "p.csv")
    with open(tmp_path / "p.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["series", "x", "y"] and rows[-1] == ["psnr", "1.0", "40.0"]
    esc = plot_series(result, "escape_by_level")
    assert [p[1] for p in esc] == [1, 2, 3, 4, 5]


def test_defense_by_ksize(color_set):
    manifest, backend = color_set
    grid = [AttackSpec("saltpepper", amount=0.1)]
    merged = SweepResult()
    for k in (3, 5, 7):
        merged = merged.merge(run_attack_sweep(manifest, grid, backend, DefenseConfig("median", k)))
    pts = plot_series(merged, "defense_by_ksize")
    assert [p[1] for p in pts] == [3, 5, 7]
    assert {p[0] for p in pts} == {"saltpepper:amount=0.1|median"}


def test_sweep_levels_override(tmp_path):
    from bbrobust.attacks import default_grid, grid_levels
    from bbrobust.classifier import ReferenceBackend, train_reference
    from bbrobust.harness import load_manifest, run_attack_sweep
    from bbrobust.synthetic import class_dataset, write_dataset

    data = class_dataset(1, seed=3, size=32)
    manifest = load_manifest(write_dataset(tmp_path, data))
    levels = {s: l for s, l in grid_levels(default_grid()).items() if l == "L3"}
    res = run_attack_sweep(manifest, list(levels), ReferenceBackend(train_reference(data)),
                           size=32, levels=levels)
    assert {r.level for r in res.attacked} == {"L3"}
