"""How much each filter/kernel size recovers from salt-and-pepper and Gaussian noise.

    python3 scripts/filter_sweep.py --ksizes 3,5,7,11,17
"""

import argparse

import numpy as np

from bbrobust.attacks import gaussian_noise, salt_pepper
from bbrobust.defenses import apply_filter
from bbrobust.metrics import psnr, ssim
from bbrobust.synthetic import natural_fixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ksizes", default="3,5,7,11,17")
    ap.add_argument("--fixtures", type=int, default=3)
    ap.add_argument("--amount", type=float, default=0.02)
    ap.add_argument("--var", type=float, default=0.10)
    args = ap.parse_args(argv)

    ks = [int(k) for k in args.ksizes.split(",")]
    origs = [natural_fixture(i) for i in range(args.fixtures)]
    noisy = {
        "saltpepper": [salt_pepper(o, args.amount, seed=i) for i, o in enumerate(origs)],
        "gaussian": [gaussian_noise(o, 0.0, args.var, seed=i) for i, o in enumerate(origs)],
    }
    print("noise       filter  k    psnr    ssim")
    for attack, imgs in noisy.items():
        base_p = np.mean([psnr(n, o) for n, o in zip(imgs, origs)])
        base_s = np.mean([ssim(n, o) for n, o in zip(imgs, origs)])
        print(f"{attack:<11} {'none':<7} -  {base_p:6.2f}  {base_s:6.4f}")
        for name in ("median", "gauss"):
            for k in ks:
                out = [apply_filter(n, name, k) for n in imgs]
                p = np.mean([psnr(f, o) for f, o in zip(out, origs)])
                s = np.mean([ssim(f, o) for f, o in zip(out, origs)])
                print(f"{attack:<11} {name:<7} {k:<2} {p:6.2f}  {s:6.4f}")


if __name__ == "__main__":
    main()
