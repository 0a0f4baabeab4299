"""Image and label-mask files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

MAX_LABEL = 65535


class ImageFormatError(OSError):
    pass


def load_image(path) -> np.ndarray:
    """Grayscale intensities in [0, 1] from an 8/16-bit PNG or TIFF.

    RGB(A) images are converted by the unweighted mean of the colour
    channels.  32-bit float TIFFs are returned unchanged.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from exc
    if mode == "F":
        return arr.astype(float)
    if mode in ("RGB", "RGBA"):
        return arr[..., :3].astype(float).mean(axis=2) / 255.0
    if mode in ("L", "P") and arr.dtype == np.uint8:
        return arr.astype(float) / 255.0
    if mode == "1":
        return arr.astype(float)
    if mode.startswith("I;16") or (mode == "I" and arr.max(initial=0) <= MAX_LABEL and arr.min(initial=0) >= 0):
        return arr.astype(float) / 65535.0
    raise ImageFormatError(f"unsupported image mode {mode!r} ({arr.dtype}) in {path}")


def save_image_float(array, path) -> None:
    """Write a float32 TIFF (values are not clipped)."""
    Image.fromarray(np.asarray(array, dtype=np.float32), mode="F").save(path)


def save_image_16bit(array, path) -> None:
    """Write intensities in [0, 1] as a 16-bit PNG (values clipped)."""
    arr = np.round(np.clip(np.asarray(array, dtype=float), 0, 1) * 65535).astype(np.uint16)
    Image.fromarray(arr).save(path)


def save_label_mask(mask, path) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("label mask must be 2-D")
    if mask.size and (mask.min() < 0 or mask.max() > MAX_LABEL):
        raise ValueError(f"labels must lie in [0, {MAX_LABEL}] for a 16-bit mask")
    Image.fromarray(mask.astype(np.uint16)).save(path)


def load_label_mask(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"cannot read label mask {path}: {exc}") from exc
    if arr.ndim != 2:
        raise ImageFormatError(f"label mask {path} is not single-channel")
    return arr.astype(np.int32)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
