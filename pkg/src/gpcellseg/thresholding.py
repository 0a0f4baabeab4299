"""Automated foreground threshold from the pixel-count curve of a denoised tile.

For thresholds ``alpha_m`` on [0, 1] the number of pixels whose normalized
predictive mean exceeds ``alpha_m`` is counted.  Its first differences are
smoothed with a 1-D GP and the threshold is the first ``alpha_m`` past the
peak of the smoothed differences at which they stop changing by more than
a fraction of their standard deviation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gpcellseg.fast_gp import fit_mle, predict
from gpcellseg.kernels import KernelFamily

log = logging.getLogger(__name__)

SMOOTHER_ETA_MAX = 1.0
# an extra start at about one grid spacing reaches the short-range basin
SMOOTHER_GAMMA_FRACTIONS = (1 / 100, 1 / 20, 1 / 5, 1 / 2)


@dataclass
class ThresholdTrace:
    """Count curve of one tile.

    ``diffs[m]`` and ``smoothed[m]`` belong to ``alphas[m + 1]``; the first
    threshold has no difference.
    """

    alphas: np.ndarray
    counts: np.ndarray
    diffs: Optional[np.ndarray] = None
    smoothed: Optional[np.ndarray] = None
    tau: Optional[float] = None
    alpha_star: Optional[float] = None
    star_index: Optional[int] = None  # index into diffs / smoothed
    flags: list = field(default_factory=list)

    @property
    def diff_alphas(self) -> np.ndarray:
        return self.alphas[1:]

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.smoothed))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "count", "diff", "smoothed_diff"])
            for m, a in enumerate(self.alphas):
                if m == 0 or self.diffs is None:
                    d = s = ""
                else:
                    d = int(self.diffs[m - 1])
                    s = "" if self.smoothed is None else repr(float(self.smoothed[m - 1]))
                w.writerow([repr(float(a)), int(self.counts[m]), d, s])


def count_curve(F_star, M: int = 100) -> ThresholdTrace:
    """Pixels with ``F / max(F) > alpha_m`` for ``M`` equally spaced ``alpha_m``."""
    F = np.asarray(F_star, dtype=float)
    alphas = np.linspace(0.0, 1.0, M)
    fmax = float(F.max())
    if not fmax > 0:
        trace = ThresholdTrace(alphas, np.zeros(M, dtype=np.int64))
        trace.diffs = np.zeros(M - 1, dtype=np.int64)
        trace.flags.append("nonpositive_max")
        return trace
    normalized = np.sort((F / fmax).ravel())
    # strict '>' : count of values above alpha
    counts = normalized.size - np.searchsorted(normalized, alphas, side="right")
    counts = counts.astype(np.int64)
    return ThresholdTrace(alphas, counts, diffs=counts[:-1] - counts[1:])


def smooth_diffs(trace: ThresholdTrace, family=KernelFamily.MATERN52) -> ThresholdTrace:
    """Fill ``trace.smoothed`` with the GP predictive mean of the differences on alpha."""
    if trace.diffs is None:
        raise ValueError("count_curve must run first")
    d = trace.diffs.astype(float)
    if d.size < 9:
        raise ValueError("need at least 10 thresholds to smooth")
    if np.all(d == d[0]):
        trace.smoothed = d.copy()
        trace.flags.append("constant_diffs")
        return trace
    coords = trace.diff_alphas
    # the nugget is capped so an isolated peak is attenuated, never erased
    params = fit_mle(d[:, None], family, coords1=coords, eta_max=SMOOTHER_ETA_MAX,
                     gamma_fractions=SMOOTHER_GAMMA_FRACTIONS)
    trace.smoothed = predict(d[:, None], params, want_variance=False, coords1=coords).mean[:, 0]
    return trace


def select_threshold(trace: ThresholdTrace, stabilization: float = 0.05,
                     min_index: int = -1, straddle_peak: bool = False) -> float:
    """Choose ``alpha*`` on the smoothed difference curve.

    The first difference index ``m`` after the peak of the smoothed curve
    (and after ``min_index``) with
    ``|smoothed[m] - smoothed[m-1]| < stabilization * tau`` is selected,
    ``tau`` being the sample standard deviation of the smoothed curve.

    By default the step from the peak itself to its right neighbour is not
    tested: near a flat-topped peak that step is close to zero and would
    select a threshold inside the background mode.  ``straddle_peak=True``
    tests it as well.
    """
    s = trace.smoothed
    if s is None:
        raise ValueError("smooth_diffs must run first")
    peak = int(np.argmax(s))
    last = s.size - 1
    tau = float(np.std(s, ddof=1))
    trace.tau = tau
    lo = max(peak, min_index) + 1
    first = lo if straddle_peak else lo + 1
    if tau == 0:
        idx = min(lo, last)
        trace.flags.append("zero_tau")
    else:
        step = np.abs(np.diff(s))  # step[m-1] = |s[m] - s[m-1]|
        candidates = [m for m in range(first, last + 1) if step[m - 1] < stabilization * tau]
        if candidates:
            idx = candidates[0]
        else:
            idx = _fallback(step, lo, last)
            trace.flags.append("no_stable_threshold")
    trace.star_index = idx
    trace.alpha_star = float(trace.diff_alphas[idx])
    return trace.alpha_star


def _fallback(step: np.ndarray, lo: int, last: int) -> int:
    # last local maximum of the step size past the peak, plus one
    ms = list(range(lo, last + 1))
    if not ms:
        return last
    vals = step[[m - 1 for m in ms]]
    best = ms[0]
    for i, m in enumerate(ms):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i + 1 < len(ms) else -np.inf
        if vals[i] >= left and vals[i] >= right:
            best = m
    return min(best + 1, last)


def binarize(F_star, alpha_star: float) -> np.ndarray:
    """1 where ``F > alpha_star * max(F)``."""
    if not 0.0 <= alpha_star <= 1.0:
        raise ValueError("alpha_star must lie in [0, 1]")
    F = np.asarray(F_star, dtype=float)
    return (F > alpha_star * F.max()).astype(np.uint8)


def threshold_tile(F_star, M: int = 100, stabilization: float = 0.05,
                   family=KernelFamily.MATERN52) -> tuple[np.ndarray, ThresholdTrace]:
    trace = count_curve(F_star, M)
    if "nonpositive_max" in trace.flags:
        return np.zeros(np.shape(F_star), dtype=np.uint8), trace
    smooth_diffs(trace, family)
    alpha = select_threshold(trace, stabilization)
    return binarize(F_star, alpha), trace
