"""Command-line interface.

Verbs: perturb, metrics, sweep, defend, train-ref, predict-ref, stub-serve,
plot-data. Exit codes: 0 ok, 1 usage, 2 data error, 3 backend unavailable.

Attack specs use the canonical text form (``gaussian:var=0.05``,
``saltpepper:amount=0.01``, ``rotate:degree=45``, ``mono:channel=red``, ``gray``,
``fusion:alpha=0.2,bg=<path>``). Defense specs follow
``<none|gauss|median>[:ksize=N][,grayflag][,rejectmono]``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .attacks import InvalidParameter as AttackParamError
from .attacks import apply_attack, default_grid, fusion_grid, parse_attack
from .classifier import NetworkError, RefModel, open_backend, predict_reference, train_reference
from .classifier.stub import StubServer, load_fixture
from .defenses import AugmentConfig, InvalidParameter as DefenseParamError
from .defenses import Rejected, parse_defense, preprocess
from .harness import (
    ManifestError,
    SweepResult,
    emit_plot_data,
    emit_report,
    load_manifest,
    run_attack_sweep,
)
from .harness.report import FIGURES
from .imgcore import ImageError, clip_to_standard, load_image, save_image
from .metrics import ShapeMismatch, ImageTooSmall, quality

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

log = logging.getLogger("bbrobust")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--cache-dir", help="persistent classification cache directory")
    g.add_argument("--backend", help="'ref:<model.json>' or an http(s) endpoint")
    g.add_argument("--out", help="output file or directory")
    g.add_argument("--format", help="output format (png|ppm for images, jsonl|csv|both for reports)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="bbrobust", description="Black-box robustness evaluation toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("perturb", parents=[common], help="apply one attack to one image")
    p.add_argument("image")
    p.add_argument("--attack", required=True, help="attack spec, e.g. gaussian:var=0.05")
    p.add_argument("--clip", action="store_true", help="standardize to 224x224 first")

    p = sub.add_parser("metrics", parents=[common], help="MSE/PSNR/SSIM of two images")
    p.add_argument("reference")
    p.add_argument("candidate")

    p = sub.add_parser("sweep", parents=[common], help="attack sweep over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", default="default",
                   help="'default' (16 ST cells), 'fusion' (needs --background), or "
                        "';'-separated attack specs")
    p.add_argument("--background", help="background image for --grid fusion")
    p.add_argument("--alphas", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--defense", action="append", default=[],
                   help="defense spec; repeat for several sweeps ('none' = undefended)")
    p.add_argument("--workers", type=int)
    p.add_argument("--strict", action="store_true", help="abort on the first backend error")

    p = sub.add_parser("defend", parents=[common], help="apply a defense to images")
    p.add_argument("images", nargs="+")
    p.add_argument("--defense", required=True)

    p = sub.add_parser("train-ref", parents=[common], help="train the reference classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--augment", action="store_true", help="use the training augmentations")
    p.add_argument("--passes", type=int, default=1)

    p = sub.add_parser("predict-ref", parents=[common], help="classify with a reference model")
    p.add_argument("images", nargs="+")
    p.add_argument("--model", help="model path (alternative to --backend ref:<path>)")

    p = sub.add_parser("stub-serve", parents=[common], help="serve the fixture classifier")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--fixture", help="JSON mapping image digest -> response")
    p.add_argument("--model", help="reference model answering unknown images")

    p = sub.add_parser("plot-data", parents=[common], help="extract figure series")
    p.add_argument("records", help="records.jsonl from a sweep")
    p.add_argument("--figure", required=True, choices=FIGURES)
    return parser


def _require(value, flag):
    if not value:
        raise UsageError(f"{flag} is required")
    return value


def _emit_json(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_perturb(args):
    spec = parse_attack(args.attack)
    img = load_image(args.image)
    if args.clip:
        img = clip_to_standard(img)
    adv = apply_attack(img, spec, args.seed)
    out = _require(args.out, "--out")
    save_image(adv, out, args.format)
    _emit_json({"attack": str(spec), "out": out, "quality": quality(adv, img).to_dict()})


def cmd_metrics(args):
    a, b = load_image(args.reference), load_image(args.candidate)
    _emit_json(quality(a, b).to_dict())


def _grid(args):
    if args.grid == "default":
        return default_grid()
    if args.grid == "fusion":
        bg = _require(args.background, "--background")
        return fusion_grid(bg, tuple(float(a) for a in args.alphas.split(",")))
    return [parse_attack(s) for s in args.grid.split(";") if s.strip()]


def cmd_sweep(args):
    manifest = load_manifest(args.manifest)
    grid = _grid(args)
    backend = open_backend(_require(args.backend, "--backend"), args.cache_dir)
    defenses = [None if d == "none" else parse_defense(d) for d in (args.defense or ["none"])]
    result = SweepResult()
    for d in defenses:
        result = result.merge(run_attack_sweep(manifest, grid, backend, d, args.seed,
                                               workers=args.workers, strict=args.strict))
    out = Path(_require(args.out, "--out"))
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format or "both"
    if fmt not in ("jsonl", "csv", "both"):
        raise UsageError(f"report format must be jsonl, csv or both, not {fmt!r}")
    if fmt in ("jsonl", "both"):
        emit_report(result, "jsonl", out / "records.jsonl")
    if fmt in ("csv", "both"):
        emit_report(result, "csv", out / "aggregates.csv")
    n_err = sum(r.status == "error" for r in result.records)
    _emit_json({"records": len(result.records), "errors": n_err, "out": str(out),
                "cache_hits": getattr(backend, "hits", None),
                "cache_misses": getattr(backend, "misses", None)})


def cmd_defend(args):
    cfg = parse_defense(args.defense)
    out = Path(_require(args.out, "--out"))
    out.mkdir(parents=True, exist_ok=True)
    for path in args.images:
        res = preprocess(load_image(path), cfg)
        row = {"image": path, "defense": str(cfg)}
        if isinstance(res, Rejected):
            row["rejected"] = res.reason
        else:
            suffix = ".ppm" if args.format == "ppm" else ".png"
            dest = out / (Path(path).stem + suffix)
            save_image(res, dest, args.format)
            row["out"] = str(dest)
        _emit_json(row)


def cmd_train_ref(args):
    manifest = load_manifest(args.manifest)
    data = ((e.load(), e.class_name) for e in manifest.entries)
    model = train_reference(data, AugmentConfig() if args.augment else None, args.passes, args.seed)
    model.save(_require(args.out, "--out"))
    _emit_json({"classes": list(model.classes), "backend_id": model.backend_id, "out": args.out})


def cmd_predict_ref(args):
    path = args.model
    if path is None:
        spec = _require(args.backend, "--model or --backend ref:<path>")
        if not spec.startswith("ref:"):
            raise UsageError("predict-ref needs a reference backend (ref:<path>)")
        path = spec[4:]
    model = RefModel.load(path)
    for p in args.images:
        cls = predict_reference(model, clip_to_standard(load_image(p)))
        _emit_json({"image": p, **cls.to_dict()})


def cmd_stub_serve(args):
    fixture = load_fixture(args.fixture) if args.fixture else {}
    model = RefModel.load(args.model) if args.model else None
    server = StubServer((args.host, args.port), fixture, model)
    print(f"serving on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def cmd_plot_data(args):
    result = SweepResult.from_jsonl(Path(args.records).read_text())
    emit_plot_data(result, args.figure, _require(args.out, "--out"))


COMMANDS = {
    "perturb": cmd_perturb,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "defend": cmd_defend,
    "train-ref": cmd_train_ref,
    "predict-ref": cmd_predict_ref,
    "stub-serve": cmd_stub_serve,
    "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.verb](args)
    except (UsageError, AttackParamError, DefenseParamError) as exc:
        print(f"bbrobust: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NetworkError as exc:
        print(f"bbrobust: backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ImageError, ManifestError, ShapeMismatch, ImageTooSmall, OSError, ValueError) as exc:
        print(f"bbrobust: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
