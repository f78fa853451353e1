"""Input validation helpers shared by all pipeline stages.

Images are plain numpy arrays: RGB images are (H, W, 3) float64 with
intensities in [0, 255], gray planes are (H, W) float64, Bayer raws are
(H, W) float64 with even dims. Validators return float64 copies/views so
the numeric core can assume a single dtype.
"""

import numpy as np


def as_rgb_image(img, name="img"):
    """Coerce to a float64 (H, W, 3) array and check basic invariants."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"{name} must be at least 2x2, got {arr.shape[:2]}")
    return arr


def as_plane(img, name="plane"):
    """Coerce to a float64 (H, W) array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {arr.shape}")
    return arr


def as_raw(raw, name="raw"):
    """Coerce to a float64 (H, W) Bayer plane with even dimensions."""
    arr = as_plane(raw, name)
    if arr.shape[0] % 2 or arr.shape[1] % 2:
        raise ValueError(f"{name} must have even dims (RGGB tiling), got {arr.shape}")
    return arr


def check_range(arr, lo=0.0, hi=255.0, name="img"):
    """Raise if any value falls outside [lo, hi]."""
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise ValueError(
            f"{name} values must lie in [{lo}, {hi}], "
            f"got range [{arr.min()}, {arr.max()}]"
        )
    return arr


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise ValueError(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")


def check_label(label, n_classes, name="label"):
    label = int(label)
    if not 0 <= label < n_classes:
        raise ValueError(f"{name} must be in [0, {n_classes}), got {label}")
    return label
