"""Stationary 1-D correlation kernels for the two lattice axes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

SQRT5 = np.sqrt(5.0)


class KernelFamily(str, Enum):
    MATERN52 = "matern52"
    EXPONENTIAL = "exp"

    @classmethod
    def parse(cls, value: "str | KernelFamily") -> "KernelFamily":
        if isinstance(value, KernelFamily):
            return value
        aliases = {"matern": cls.MATERN52, "matern52": cls.MATERN52, "exp": cls.EXPONENTIAL,
                   "exponential": cls.EXPONENTIAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown kernel family {value!r}") from None


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its range parameter (in coordinate units)."""

    family: KernelFamily
    range: float

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        if not (np.isfinite(self.range) and self.range > 0):
            raise ValueError(f"kernel range must be positive and finite, got {self.range}")


def _eval(family: KernelFamily, gamma: float, d: np.ndarray) -> np.ndarray:
    if family is KernelFamily.MATERN52:
        s = SQRT5 * d / gamma
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    return np.exp(-d / gamma)


def kernel_eval(spec: KernelSpec, d):
    """Evaluate the correlation ``K(d)`` for a nonnegative distance (scalar or array)."""
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("kernel distances must be finite and nonnegative")
    out = _eval(spec.family, spec.range, arr)
    return float(out) if out.ndim == 0 else out


def default_grid(n: int) -> np.ndarray:
    """Integer pixel coordinates 1..n."""
    return np.arange(1, n + 1, dtype=float)


def check_grid(coords) -> np.ndarray:
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("axis grid must be a non-empty 1-D vector")
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise ValueError("axis grid must be strictly increasing")
    return x


def correlation_matrix(spec: KernelSpec, coords) -> np.ndarray:
    """Return ``R[i, k] = K(|x_i - x_k|)`` on one axis."""
    x = check_grid(coords)
    d = np.abs(x[:, None] - x[None, :])
    return _eval(spec.family, spec.range, d)
