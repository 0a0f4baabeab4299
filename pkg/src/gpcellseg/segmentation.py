"""Object labeling of a binary mask: components, distance map, watershed, size filter."""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy import ndimage

EIGHT = np.ones((3, 3), dtype=bool)
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {m.shape}")
    return m.astype(bool)


def relabel_sequential(labels: np.ndarray) -> np.ndarray:
    """Renumber nonzero labels 1..K in raster order of first appearance."""
    flat = labels.ravel()
    nz = flat[flat > 0]
    if nz.size == 0:
        return np.zeros_like(labels, dtype=np.int32)
    _, first = np.unique(nz, return_index=True)
    order = nz[np.sort(first)]
    lut = np.zeros(int(labels.max()) + 1, dtype=np.int32)
    lut[order] = np.arange(1, order.size + 1, dtype=np.int32)
    return lut[labels]


def connected_components(mask) -> np.ndarray:
    """8-connected foreground components labelled 1..K in raster discovery order."""
    labels, _ = ndimage.label(_as_mask(mask), structure=EIGHT)
    return relabel_sequential(labels.astype(np.int32))


def distance_transform(mask) -> np.ndarray:
    """Exact Euclidean distance from each foreground pixel to the nearest background pixel.

    Pixels outside the image count as background, so a foreground pixel on
    the border is at distance 1.
    """
    m = _as_mask(mask)
    padded = np.pad(m, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


class _Basins:
    """Union-find over catch basins; the root always holds the deepest seed."""

    def __init__(self):
        self.parent: list[int] = [0]
        self.depth: list[float] = [np.inf]
        self.seed: list[tuple[float, float]] = [(np.nan, np.nan)]

    def new(self, depth: float, seed: tuple[float, float]) -> int:
        self.parent.append(len(self.parent))
        self.depth.append(depth)
        self.seed.append(seed)
        return len(self.parent) - 1

    def find(self, b: int) -> int:
        root = b
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[b] != root:
            self.parent[b], b = root, self.parent[b]
        return root

    def absorb(self, shallow: int, deep: int) -> None:
        self.parent[shallow] = deep


def nearest_seed(point, seeds: dict) -> int:
    """Key of the seed nearest to ``point``; the smallest key wins exact ties."""
    best, best_d = None, np.inf
    for key in sorted(seeds):
        d = np.hypot(point[0] - seeds[key][0], point[1] - seeds[key][1])
        if d < best_d:
            best, best_d = key, d
    return best


def watershed(dist, tolerance: float = 1.0, plateau_tol: float = 1e-9) -> np.ndarray:
    """Flood the negated distance map from its minima and label every foreground pixel.

    Pixels are visited level by level in increasing height.  Within a level
    labels spread breadth-first from already-flooded neighbours; pixels the
    flood cannot reach become new basins (one per connected plateau).  When
    a pixel touches several basins, any basin whose seed lies less than
    ``tolerance`` below that pixel is merged into the deepest one; if
    distinct basins remain, the pixel joins the one whose seed is nearest
    in Euclidean distance (lower basin on exact ties).
    """
    dist = np.asarray(dist, dtype=float)
    n1, n2 = dist.shape
    fg = dist > 0
    out = np.zeros((n1, n2), dtype=np.int64)
    if not fg.any():
        return out.astype(np.int32)

    height = -dist
    rows, cols = np.nonzero(fg)  # raster order
    order = np.argsort(height[rows, cols], kind="stable")
    rows, cols = rows[order], cols[order]
    hs = height[rows, cols]
    breaks = np.flatnonzero(np.diff(hs) > plateau_tol) + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [hs.size]])

    basins = _Basins()
    in_level = np.zeros((n1, n2), dtype=bool)
    queued = np.zeros((n1, n2), dtype=bool)

    def neighbours(r, c):
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < n1 and 0 <= cc < n2:
                yield rr, cc

    def resolve(r, c) -> int:
        roots = sorted({basins.find(out[q]) for q in neighbours(r, c) if out[q]})
        if len(roots) == 1:
            return roots[0]
        h = height[r, c]
        deepest = min(roots, key=lambda b: (basins.depth[b], b))
        merged = False
        for b in roots:
            if b != deepest and h - basins.depth[b] < tolerance:
                basins.absorb(b, deepest)
                merged = True
        if merged:
            return deepest
        return nearest_seed((r, c), {b: basins.seed[b] for b in roots})

    for lo, hi in zip(starts, stops):
        level = list(zip(rows[lo:hi].tolist(), cols[lo:hi].tolist()))
        for p in level:
            in_level[p] = True
        level.sort()  # raster order within the level
        queue = deque()
        for r, c in level:
            if any(out[q] for q in neighbours(r, c)):
                queue.append((r, c))
                queued[r, c] = True
        while queue:
            r, c = queue.popleft()
            out[r, c] = resolve(r, c)
            for q in neighbours(r, c):
                if in_level[q] and not out[q] and not queued[q]:
                    queued[q] = True
                    queue.append(q)
        # unreached plateau pieces are new minima
        for p in level:
            if out[p]:
                continue
            comp, stack = [p], [p]
            out[p] = -1
            while stack:
                r, c = stack.pop()
                for q in neighbours(r, c):
                    if in_level[q] and not out[q]:
                        out[q] = -1
                        comp.append(q)
                        stack.append(q)
            cr = float(np.mean([q[0] for q in comp]))
            cc = float(np.mean([q[1] for q in comp]))
            b = basins.new(float(height[p]), (cr, cc))
            for q in comp:
                out[q] = b
        for p in level:
            in_level[p] = False
            queued[p] = False

    roots = np.array([basins.find(b) for b in range(len(basins.parent))], dtype=np.int64)
    return relabel_sequential(roots[out].astype(np.int32))


def object_sizes(labels: np.ndarray) -> np.ndarray:
    """Pixel count per label; index 0 is background."""
    return np.bincount(labels.ravel(), minlength=int(labels.max()) + 1)


def touches_boundary(labels: np.ndarray) -> np.ndarray:
    flags = np.zeros(int(labels.max()) + 1, dtype=bool)
    edge = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    flags[np.unique(edge)] = True
    flags[0] = False
    return flags


def filter_small(labels, interior_fraction: float = 0.15, boundary_fraction: float = 0.05,
                 mean_area: float | None = None) -> np.ndarray:
    """Drop objects at most a fraction of the mean object area and relabel.

    Objects touching the image border use the smaller ``boundary_fraction``.
    ``mean_area`` defaults to the mean over the objects in ``labels``.
    """
    labels = np.asarray(labels)
    K = int(labels.max()) if labels.size else 0
    if K == 0:
        return labels.astype(np.int32)
    sizes = object_sizes(labels)[1:].astype(float)
    present = sizes > 0
    A = float(sizes[present].mean()) if mean_area is None else float(mean_area)
    border = touches_boundary(labels)[1:]
    cutoff = np.where(border, boundary_fraction * A, interior_fraction * A)
    keep = np.concatenate([[False], present & (sizes > cutoff)])
    return relabel_sequential(np.where(keep[labels], labels, 0).astype(np.int32))


def object_table(labels: np.ndarray) -> list[dict]:
    """Per-object pixel count, centroid, bounding box and border flag."""
    labels = np.asarray(labels)
    K = int(labels.max()) if labels.size else 0
    if K == 0:
        return []
    idx = np.arange(1, K + 1)
    sizes = object_sizes(labels)
    centroids = ndimage.center_of_mass(np.ones_like(labels), labels, idx)
    boxes = ndimage.find_objects(labels)
    border = touches_boundary(labels)
    table = []
    for k in idx:
        box = boxes[k - 1]
        table.append({
            "label": int(k),
            "pixel_count": int(sizes[k]),
            "centroid": [float(centroids[k - 1][0]), float(centroids[k - 1][1])],
            "bbox": [box[0].start, box[1].start, box[0].stop, box[1].stop] if box else None,
            "touches_boundary": bool(border[k]),
        })
    return table
