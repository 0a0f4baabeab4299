"""Ground-truth fields for the denoising and segmentation benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BraninParams:
    a: float = 1.0
    b: float = 5.1 / (4 * np.pi**2)
    c: float = 5.0 / np.pi
    r: float = 6.0
    s: float = 10.0
    t: float = 1.0 / (8 * np.pi)


def branin(x1, x2, p: BraninParams = BraninParams()):
    return p.a * (x2 - p.b * x1**2 + p.c * x1 - p.r) ** 2 + p.s * (1 - p.t) * np.cos(x1) + p.s


def branin_field(params: BraninParams = BraninParams(), n1: int = 100, n2: int = 100) -> np.ndarray:
    """Branin surface on a uniform ``n1 x n2`` grid over [-5, 10] x [0, 15].

    Rows follow ``x1``, columns follow ``x2``.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("grid needs at least two points per axis")
    x1 = np.linspace(-5.0, 10.0, n1)
    x2 = np.linspace(0.0, 15.0, n2)
    return branin(x1[:, None], x2[None, :], params)


@dataclass(frozen=True)
class DiffusionConfig:
    D: float = 1.0
    nx: int = 200
    nt: int = 200
    length: float = 1.0
    t_end: float = 0.2
    boundary: float = 1.0
    max_courant: float = 0.5

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.nt)


def diffusion_field(config: DiffusionConfig = DiffusionConfig()) -> np.ndarray:
    """Explicit finite-difference solution of ``f_t = D f_xx``; shape ``(nx, nt)``.

    ``f(x, 0) = 0`` in the interior, ``f(0, t) = boundary``, zero flux at
    ``x = length``.  Each output interval is sub-stepped so that
    ``D dt / dx^2 <= max_courant``.
    """
    if config.D <= 0 or config.nx < 3 or config.nt < 1:
        raise ValueError("invalid diffusion configuration")
    dx = config.length / (config.nx - 1)
    t = config.t
    out = np.empty((config.nx, config.nt))
    f = np.zeros(config.nx)
    f[0] = config.boundary
    out[:, 0] = f
    for k in range(1, config.nt):
        interval = t[k] - t[k - 1]
        nsub = max(1, int(np.ceil(config.D * interval / (config.max_courant * dx * dx))))
        lam = config.D * (interval / nsub) / (dx * dx)
        for _ in range(nsub):
            lap = np.empty_like(f)
            lap[1:-1] = f[2:] - 2 * f[1:-1] + f[:-2]
            lap[-1] = 2 * (f[-2] - f[-1])  # mirrored ghost node
            f[1:] += lam * lap[1:]
            f[0] = config.boundary
        out[:, k] = f
    return out


def add_noise(field, sigma0: float, seed=None) -> np.ndarray:
    """``field + N(0, sigma0^2)`` i.i.d.; reproducible for a fixed seed."""
    if sigma0 < 0:
        raise ValueError("sigma0 must be nonnegative")
    field = np.asarray(field, dtype=float)
    if sigma0 == 0:
        return field.copy()
    rng = np.random.default_rng(seed)
    return field + sigma0 * rng.standard_normal(field.shape)


# ---------------------------------------------------------------------------
# cell phantoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhantomConfig:
    radius: tuple[float, float] = (8.0, 14.0)
    intensity: tuple[float, float] = (0.7, 1.0)
    background: tuple[float, float] = (0.05, 0.15)
    margin: float = 3.0
    overlap_pairs: int = 0
    max_attempts: int = 10_000


def _shape_mask(rr, cc, center, radius, shape, rng):
    dr, dc = rr - center[0], cc - center[1]
    rho = np.hypot(dr, dc)
    if shape == "disc":
        return rho <= radius, rho / radius
    theta = np.arctan2(dr, dc)
    # star-shaped blob: low-order harmonic perturbation of the radius
    rad = np.full_like(theta, radius)
    for k in (2, 3):
        rad = rad + radius * rng.uniform(0.0, 0.08) * np.cos(k * theta + rng.uniform(0, 2 * np.pi))
    return rho <= rad, rho / rad


def phantom_cells(n1: int, n2: int, n_objects: int, shape: str = "disc", seed=None,
                  config: PhantomConfig = PhantomConfig()):
    """Bright objects on a dim background plus exact ground-truth labels.

    ``shape`` is ``"disc"`` or ``"blob"`` (irregular outline, intensity
    falling off toward the rim).  With ``config.overlap_pairs > 0`` that many
    pairs of objects are placed so that they touch; overlap pixels go to the
    nearer centre.  Returns ``(image, labels)``.
    """
    if shape not in ("disc", "blob"):
        raise ValueError(f"unknown phantom shape {shape!r}")
    rng = np.random.default_rng(seed)
    bg = rng.uniform(*config.background)
    image = np.full((n1, n2), bg)
    labels = np.zeros((n1, n2), dtype=np.int32)
    if n_objects == 0:
        return image, labels
    pairs = min(config.overlap_pairs, n_objects // 2)
    rr, cc = np.mgrid[0:n1, 0:n2].astype(float)

    placed: list[tuple[float, float, float]] = []  # centre row, col, radius
    groups: list[list[int]] = []

    def fits(r, c, rad, ignore=()):
        if r - rad < config.margin or r + rad > n1 - 1 - config.margin:
            return False
        if c - rad < config.margin or c + rad > n2 - 1 - config.margin:
            return False
        for i, (pr, pc, prad) in enumerate(placed):
            if i in ignore:
                continue
            if np.hypot(r - pr, c - pc) < rad + prad + config.margin:
                return False
        return True

    attempts = 0
    while len(placed) < n_objects:
        attempts += 1
        if attempts > config.max_attempts:
            raise RuntimeError(f"could not place {n_objects} objects in {n1}x{n2}")
        rad = rng.uniform(*config.radius)
        r = rng.uniform(rad + config.margin, n1 - 1 - rad - config.margin) if n1 - 1 > 2 * (rad + config.margin) else -1
        c = rng.uniform(rad + config.margin, n2 - 1 - rad - config.margin) if n2 - 1 > 2 * (rad + config.margin) else -1
        if r < 0 or c < 0 or not fits(r, c, rad):
            continue
        if len(groups) < pairs:
            # similar radii keep a distinct distance maximum in each object
            rad2 = float(np.clip(rad * rng.uniform(0.9, 1.1), *config.radius))
            sep = rng.uniform(0.8, 0.9) * (rad + rad2)
            ang = rng.uniform(0, 2 * np.pi)
            r2, c2 = r + sep * np.sin(ang), c + sep * np.cos(ang)
            placed.append((r, c, rad))
            if not fits(r2, c2, rad2, ignore=(len(placed) - 1,)):
                placed.pop()
                continue
            placed.append((r2, c2, rad2))
            groups.append([len(placed) - 2, len(placed) - 1])
        else:
            placed.append((r, c, rad))
            groups.append([len(placed) - 1])

    best = np.full((n1, n2), np.inf)
    for lab, (r, c, rad) in enumerate(placed, start=1):
        inside, rel = _shape_mask(rr, cc, (r, c), rad, shape, rng)
        peak = rng.uniform(*config.intensity)
        if shape == "blob":
            value = bg + (peak - bg) * (1.0 - 0.3 * np.clip(rel, 0, 1) ** 2)
        else:
            value = np.full((n1, n2), peak)
        d = np.hypot(rr - r, cc - c)
        take = inside & (d < best)
        best[take] = d[take]
        labels[take] = lab
        image[take] = value[take]
    return image, labels


def two_disc_phantom(n1: int = 64, n2: int = 80, radius: float = 12.0, separation: float = 20.0,
                     background: float = 0.1, intensity: float = 0.9):
    """Two equal overlapping discs on a horizontal line through the image centre.

    Returns ``(image, labels, centres)``; overlap pixels are labelled by the
    nearer centre.
    """
    rr, cc = np.mgrid[0:n1, 0:n2].astype(float)
    rc = (n1 - 1) / 2.0
    centres = [(rc, (n2 - 1) / 2.0 - separation / 2.0), (rc, (n2 - 1) / 2.0 + separation / 2.0)]
    d = np.stack([np.hypot(rr - r, cc - c) for r, c in centres])
    inside = d.min(axis=0) <= radius
    labels = np.where(inside, np.argmin(d, axis=0) + 1, 0).astype(np.int32)
    image = np.where(inside, intensity, background)
    return image, labels, centres
