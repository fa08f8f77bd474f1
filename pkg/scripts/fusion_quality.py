"""Image quality of fused images as the fusion weight alpha varies.

    python3 scripts/fusion_quality.py --fixtures 5
"""

import argparse

import numpy as np

from bbrobust.attacks import image_fusion
from bbrobust.metrics import quality
from bbrobust.synthetic import fusion_background, natural_fixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixtures", type=int, default=5)
    ap.add_argument("--alphas", default="0.2,0.4,0.6,0.8,1.0")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    alphas = [float(a) for a in args.alphas.split(",")]
    bg = fusion_background(args.seed + 99)
    print("alpha        mse      psnr    ssim")
    for a in alphas:
        reps = [quality(image_fusion(natural_fixture(args.seed + i), bg, a), natural_fixture(args.seed + i))
                for i in range(args.fixtures)]
        m = np.mean([r.mse for r in reps])
        p = min(r.psnr for r in reps) if a == 1.0 else np.mean([r.psnr for r in reps])
        s = np.mean([r.ssim for r in reps])
        print(f"{a:5.2f} {m:10.2f} {p:9.2f} {s:7.4f}")


if __name__ == "__main__":
    main()
