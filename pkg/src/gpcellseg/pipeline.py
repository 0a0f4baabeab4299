"""Tile -> denoise -> threshold -> restitch -> label, with shared configuration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from gpcellseg.kernels import KernelFamily
from gpcellseg.segmentation import connected_components, distance_transform, filter_small, watershed
from gpcellseg.thresholding import ThresholdTrace, binarize, count_curve, select_threshold, smooth_diffs
from gpcellseg.tiling import DenoisedTiles, denoise, make_layout

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    kernel: str = "matern52"
    tile_side: int = 100
    alpha_grid: int = 100
    stabilization: float = 0.05
    small_fraction: float = 0.15
    boundary_fraction: float = 0.05
    watershed_tolerance: float = 1.0
    rethreshold_factor: float = 3.0
    connectivity: int = 8
    seed: int = 0

    def __post_init__(self):
        self.kernel = KernelFamily.parse(self.kernel).value
        if self.tile_side < 1 or self.alpha_grid < 10:
            raise ValueError("tile_side must be positive and alpha_grid at least 10")
        for name in ("stabilization", "small_fraction", "boundary_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.watershed_tolerance < 0 or self.rethreshold_factor <= 0:
            raise ValueError("watershed_tolerance and rethreshold_factor must be positive")
        if self.connectivity != 8:
            raise ValueError("only 8-connectivity is supported")

    @classmethod
    def field_types(cls) -> dict:
        defaults = cls()
        return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}

    @classmethod
    def from_mapping(cls, values: dict, base: Optional["PipelineConfig"] = None) -> "PipelineConfig":
        """Build from string or typed values, layered over ``base``."""
        types = cls.field_types()
        current = {f.name: getattr(base or cls(), f.name) for f in fields(cls)}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in types:
                raise KeyError(f"unknown configuration key {key!r}")
            if raw is None:
                continue
            current[name] = types[name](raw)
        return cls(**current)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return values


@dataclass
class SegmentationResult:
    labels: np.ndarray
    binary: np.ndarray
    denoised: Optional[DenoisedTiles]
    traces: list[ThresholdTrace]
    components: np.ndarray
    flags: dict = field(default_factory=dict)


def _tile_threshold(F: np.ndarray, config: PipelineConfig, family) -> ThresholdTrace:
    trace = count_curve(F, config.alpha_grid)
    if "nonpositive_max" in trace.flags:
        return trace
    smooth_diffs(trace, family)
    select_threshold(trace, config.stabilization)
    return trace


def segment_pipeline(Y, config: PipelineConfig = PipelineConfig()) -> SegmentationResult:
    """Full unsupervised segmentation of a grayscale image in [0, 1]."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    family = KernelFamily.parse(config.kernel)
    flags: dict = {}
    if not np.any(Y > 0) or np.ptp(Y) == 0:
        empty = np.zeros(Y.shape, dtype=np.int32)
        flags["image"] = ["no_signal"]
        return SegmentationResult(empty, empty.astype(np.uint8), None, [], empty, flags)

    layout = make_layout(Y.shape, config.tile_side)
    den = denoise(Y, layout, family)
    binary = np.zeros(Y.shape, dtype=np.uint8)
    traces, tile_masks = [], []
    for k, (sl, f) in enumerate(zip(layout.slices(), den.fields)):
        trace = _tile_threshold(f.mean, config, family)
        if trace.alpha_star is None:
            mask = np.zeros(f.mean.shape, dtype=np.uint8)
        else:
            mask = binarize(f.mean, trace.alpha_star)
        if trace.flags:
            flags.setdefault(k, []).extend(trace.flags)
        traces.append(trace)
        tile_masks.append(mask)

    counts = [int(connected_components(m).max()) for m in tile_masks]
    median = float(np.median(counts))
    for k, (sl, f) in enumerate(zip(layout.slices(), den.fields)):
        trace = traces[k]
        if (len(counts) > 1 and median > 0 and trace.star_index is not None
                and counts[k] > config.rethreshold_factor * median
                and trace.star_index < trace.smoothed.size - 1):
            select_threshold(trace, config.stabilization, min_index=trace.star_index)
            tile_masks[k] = binarize(f.mean, trace.alpha_star)
            flags.setdefault(k, []).append("rethresholded")
            log.info("tile %d re-thresholded to alpha=%.3f", k, trace.alpha_star)
        binary[sl] = tile_masks[k]

    components = connected_components(binary)
    labels = watershed(distance_transform(binary), tolerance=config.watershed_tolerance)
    labels = filter_small(labels, config.small_fraction, config.boundary_fraction)
    for k, fl in den.flags.items():
        flags.setdefault(k, []).extend(fl)
    return SegmentationResult(labels, binary, den, traces, components, flags)
