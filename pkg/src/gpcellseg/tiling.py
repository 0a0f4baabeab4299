"""Non-overlapping tiling of large images and per-tile GP denoising.

Range parameters and nugget are fitted once and shared by every tile;
mean and variance are re-estimated per tile so brightness drifts across
the field of view are absorbed locally.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional

import numpy as np

from gpcellseg.fast_gp import GpHyperParams, PredictiveField, axis_eigens, fit_mle, predict
from gpcellseg.kernels import KernelFamily

log = logging.getLogger(__name__)

MIN_TILE = 16


def _split(n: int, target: int) -> list[int]:
    if n < MIN_TILE:
        return [n]
    k = max(1, math.ceil(n / target))
    k = min(k, n // MIN_TILE)
    base, extra = divmod(n, k)
    return [base + 1] * extra + [base] * (k - extra)


@dataclass(frozen=True)
class TileLayout:
    shape: tuple[int, int]
    row_sizes: tuple[int, ...]
    col_sizes: tuple[int, ...]

    @property
    def tile_rows(self) -> int:
        return len(self.row_sizes)

    @property
    def tile_cols(self) -> int:
        return len(self.col_sizes)

    @property
    def count(self) -> int:
        return self.tile_rows * self.tile_cols

    @property
    def origins(self) -> list[tuple[int, int]]:
        r0 = np.concatenate([[0], np.cumsum(self.row_sizes)[:-1]])
        c0 = np.concatenate([[0], np.cumsum(self.col_sizes)[:-1]])
        return [(int(r), int(c)) for r in r0 for c in c0]

    @property
    def dims(self) -> list[tuple[int, int]]:
        return [(r, c) for r in self.row_sizes for c in self.col_sizes]

    def slices(self) -> Iterator[tuple[slice, slice]]:
        for (r, c), (h, w) in zip(self.origins, self.dims):
            yield slice(r, r + h), slice(c, c + w)

    def to_json(self) -> str:
        d = asdict(self)
        d["origins"] = self.origins
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "TileLayout":
        d = json.loads(text)
        return cls(tuple(d["shape"]), tuple(d["row_sizes"]), tuple(d["col_sizes"]))


def make_layout(shape, target_tile: int = 100) -> TileLayout:
    """Near-square tiles of side about ``target_tile``; no side below 16 px.

    Each axis is cut into ``ceil(n / target_tile)`` pieces whose sizes
    differ by at most one pixel.
    """
    if target_tile < 1:
        raise ValueError("target tile side must be positive")
    n1, n2 = (int(s) for s in shape)
    return TileLayout((n1, n2), tuple(_split(n1, target_tile)), tuple(_split(n2, target_tile)))


@dataclass
class DenoisedTiles:
    layout: TileLayout
    params: GpHyperParams
    fields: list[PredictiveField]
    calibration_tile: int
    flags: dict[int, list[str]] = field(default_factory=dict)

    @property
    def mus(self) -> list[float]:
        return [f.mu for f in self.fields]

    @property
    def sigma2s(self) -> list[float]:
        return [f.sigma2 for f in self.fields]

    def stitch(self, what: str = "mean") -> np.ndarray:
        out = np.zeros(self.layout.shape)
        for sl, f in zip(self.layout.slices(), self.fields):
            out[sl] = getattr(f, what)
        return out


def calibration_tile(Y: np.ndarray, layout: TileLayout) -> int:
    """Index of the tile with the largest sample variance (first on ties)."""
    variances = [float(np.var(Y[sl])) for sl in layout.slices()]
    return int(np.argmax(variances))


def denoise(Y, layout: TileLayout, family=KernelFamily.MATERN52, want_variance: bool = False,
            params: Optional[GpHyperParams] = None) -> DenoisedTiles:
    """Fit shared ``(gamma, eta)`` on the calibration tile, then predict every tile."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != layout.shape:
        raise ValueError(f"layout is for {layout.shape}, image is {Y.shape}")
    tiles = list(layout.slices())
    calib = calibration_tile(Y, layout)
    if params is None:
        params = fit_mle(Y[tiles[calib]], family)
        log.info("shared fit on tile %d: gamma=%s eta=%.4g", calib, params.gammas, params.eta)

    cache: dict = {}
    fields, flags = [], {}
    g1, g2 = params.gammas
    for k, sl in enumerate(tiles):
        tile = Y[sl]
        if tile.shape not in cache:
            cache[tile.shape] = axis_eigens(tile.shape, params.kernel1.family, g1, g2)
        f = predict(tile, params, want_variance, eigen=cache[tile.shape])
        if f.degenerate:
            flags.setdefault(k, []).append("constant_tile")
        fields.append(f)
    return DenoisedTiles(layout, params, fields, calib, flags)
