"""Compare the selected threshold with the best possible one on bimodal phantoms.

For every phantom the IoU of the selected mask is reported next to the
best IoU over all thresholds on the grid.
"""

import argparse

from gpcellseg.evaluation import iou
from gpcellseg.fast_gp import fit_mle, predict
from gpcellseg.synthetic import PhantomConfig, add_noise, phantom_cells
from gpcellseg.thresholding import binarize, select_threshold, threshold_tile

parser = argparse.ArgumentParser()
parser.add_argument("--seeds", type=int, default=20)
parser.add_argument("--size", type=int, default=180)
parser.add_argument("--radius", type=float, nargs=2, default=[24.0, 32.0])
parser.add_argument("--literal", action="store_true", help="also test the step leaving the peak")
args = parser.parse_args()

config = PhantomConfig(radius=tuple(args.radius), intensity=(0.9, 0.9), background=(0.1, 0.1))
for s in range(args.seeds):
    clean, labels = phantom_cells(args.size, args.size, 4, "disc", seed=s, config=config)
    Y = add_noise(clean, 0.05 if s % 2 == 0 else 0.1, seed=1000 + s)
    F = predict(Y, fit_mle(Y), want_variance=False).mean
    mask, trace = threshold_tile(F)
    if args.literal:
        mask = binarize(F, select_threshold(trace, straddle_peak=True))
    best = max(iou(labels > 0, binarize(F, a) > 0) for a in trace.alphas)
    print(f"seed {s:2d}: alpha*={trace.alpha_star:.3f} (index {trace.star_index}, peak {trace.peak_index}) "
          f"IoU {iou(labels > 0, mask > 0):.3f}  best {best:.3f}")
