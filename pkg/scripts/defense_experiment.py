"""Compare a plain reference model with an augmented model behind the recommended defense.

Trains both on the synthetic 4-class dataset, sweeps the default grid plus a
fusion cell, and prints defense rates per attack cell.

    python3 scripts/defense_experiment.py --train 50 --test 15 --out runs/defense
"""

import argparse
import tempfile
from pathlib import Path

from bbrobust.attacks import default_grid, fusion_grid
from bbrobust.classifier import ReferenceBackend, train_reference
from bbrobust.defenses import RECOMMENDED_DEFENSE, AugmentConfig
from bbrobust.harness import defense_rate, emit_report, load_manifest, run_attack_sweep
from bbrobust.imgcore import save_image
from bbrobust.synthetic import class_dataset, fusion_background, write_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", type=int, default=50, help="training images per class")
    ap.add_argument("--test", type=int, default=15, help="test images per class")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None, help="write records and aggregates here")
    args = ap.parse_args(argv)

    work = Path(args.out or tempfile.mkdtemp(prefix="defense_"))
    work.mkdir(parents=True, exist_ok=True)
    train = class_dataset(args.train, seed=args.seed + 1)
    std = ReferenceBackend(train_reference(train, seed=args.seed))
    aug = ReferenceBackend(train_reference(train, AugmentConfig(), seed=args.seed))
    manifest = load_manifest(write_dataset(work / "test", class_dataset(args.test, seed=args.seed + 2)))
    bg = work / "background.png"
    save_image(fusion_background(args.seed + 7), bg)
    grid = default_grid() + fusion_grid(str(bg), (0.2,))

    runs = {
        "Std": run_attack_sweep(manifest, grid, std, None, seed=args.seed),
        "Std+DA+NF": run_attack_sweep(manifest, grid, aug, RECOMMENDED_DEFENSE, seed=args.seed),
    }
    rates = {name: defense_rate(res) for name, res in runs.items()}
    print(f"{'cell':<14}" + "".join(f"{n:>12}" for n in rates))
    for key in rates["Std"]:
        print(f"{'/'.join(key):<14}" + "".join(f"{r[key]:>12.3f}" for r in rates.values()))
    if args.out:
        for name, res in runs.items():
            emit_report(res, "jsonl", work / f"{name}.jsonl")
            emit_report(res, "csv", work / f"{name}.csv")


if __name__ == "__main__":
    main()
