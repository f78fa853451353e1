"""Bayer sensor readout, noise injection, demosaicing, and export steps.

The raw domain (single-plane RGGB readings) is where the optimized sensor
noise lives. demosaic_bilinear is linear and ships with an exact adjoint so
the adversarial loss gradient can be pulled back onto the noise tensor.
"""

import numpy as np

from .ops import conv2d, gaussian_kernel_2d
from .validation import as_raw, as_rgb_image, check_same_shape

# channel index per RGGB site parity: R at (even, even), B at (odd, odd),
# G on the quincunx in between
KERNEL_G = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]]) / 4.0
KERNEL_RB = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 4.0

DENOISE_KERNEL = gaussian_kernel_2d(3, 0.8)


def cfa_masks(h, w, row_offset=0, col_offset=0):
    """Boolean (R, G, B) site masks for an RGGB grid of shape (h, w)."""
    rows = (np.arange(h) + row_offset) % 2
    cols = (np.arange(w) + col_offset) % 2
    even_r = rows[:, None] == 0
    even_c = cols[None, :] == 0
    r = even_r & even_c
    b = ~even_r & ~even_c
    g = ~(r | b)
    return r, g, b


def bayer_cfa(img):
    """Sample an RGB image through the RGGB color filter array.

    Odd trailing rows/columns are cropped so the raw plane tiles evenly.
    """
    arr = as_rgb_image(img)
    h = arr.shape[0] - arr.shape[0] % 2
    w = arr.shape[1] - arr.shape[1] % 2
    arr = arr[:h, :w]
    r, g, b = cfa_masks(h, w)
    raw = np.where(r, arr[:, :, 0], np.where(g, arr[:, :, 1], arr[:, :, 2]))
    return raw


def add_noise_clamped(raw, delta, eps):
    """Apply sensor noise and clamp to the sensor range [0, 255].

    Returns (noisy, mask) where mask is 1.0 wherever the clamp passed the
    value through unchanged; the mask is the clamp subgradient used when
    pulling gradients back onto delta.
    """
    raw = as_raw(raw)
    delta = np.asarray(delta, dtype=np.float64)
    check_same_shape(raw, delta, "raw", "delta")
    if eps < 0:
        raise ValueError(f"noise budget must be >= 0, got {eps}")
    amax = np.abs(delta).max() if delta.size else 0.0
    if amax > eps:
        raise ValueError(f"noise exceeds budget: |delta|_inf = {amax} > eps = {eps}")
    v = raw + delta
    mask = ((v >= 0.0) & (v <= 255.0)).astype(np.float64)
    return np.clip(v, 0.0, 255.0), mask


def demosaic_bilinear(raw):
    """Classic bilinear demosaic of an RGGB raw plane to full RGB.

    The raw plane is extended by one sample with parity-preserving (odd)
    reflection so the CFA phase continues across the border; each channel's
    masked plane is then convolved with its interpolating stencil. Native
    sites reproduce the raw value exactly and the map is linear.
    """
    raw = as_raw(raw)
    h, w = raw.shape
    padded = np.pad(raw, 1, mode="reflect")
    masks = cfa_masks(h + 2, w + 2, row_offset=-1, col_offset=-1)
    out = np.empty((h, w, 3))
    for c, (mask, ker) in enumerate(zip(masks, (KERNEL_RB, KERNEL_G, KERNEL_RB))):
        plane = padded * mask
        acc = np.zeros((h, w))
        for u in range(3):
            for v in range(3):
                if ker[u, v]:
                    acc += ker[u, v] * plane[u : u + h, v : v + w]
        out[:, :, c] = acc
    return out


def demosaic_adjoint(grad_rgb):
    """Exact transpose of demosaic_bilinear onto the raw plane."""
    grad = np.asarray(grad_rgb, dtype=np.float64)
    if grad.ndim != 3 or grad.shape[2] != 3:
        raise ValueError(f"gradient must have shape (H, W, 3), got {grad.shape}")
    h, w = grad.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"gradient dims must be even, got {grad.shape[:2]}")
    masks = cfa_masks(h + 2, w + 2, row_offset=-1, col_offset=-1)
    scattered = np.zeros((h + 2, w + 2))
    for c, (mask, ker) in enumerate(zip(masks, (KERNEL_RB, KERNEL_G, KERNEL_RB))):
        acc = np.zeros((h + 2, w + 2))
        for u in range(3):
            for v in range(3):
                if ker[u, v]:
                    acc[u : u + h, v : v + w] += ker[u, v] * grad[:, :, c]
        scattered += acc * mask
    # fold the odd-reflection pad: padded index 0 mirrors raw index 1,
    # padded index n+1 mirrors raw index n-2 (dims are even, so n >= 2)
    out = scattered[1 : h + 1, 1 : w + 1].copy()
    out[1, :] += scattered[0, 1 : w + 1]
    out[h - 2, :] += scattered[h + 1, 1 : w + 1]
    out[:, 1] += scattered[1 : h + 1, 0]
    out[:, w - 2] += scattered[1 : h + 1, w + 1]
    out[1, 1] += scattered[0, 0]
    out[1, w - 2] += scattered[0, w + 1]
    out[h - 2, 1] += scattered[h + 1, 0]
    out[h - 2, w - 2] += scattered[h + 1, w + 1]
    return out


def denoise_export(img):
    """Deterministic export denoiser: per-channel 3x3 Gaussian, sigma 0.8.

    Runs only at final export, outside the attack's gradient loop.
    """
    arr = as_rgb_image(img)
    out = np.empty_like(arr)
    for c in range(3):
        out[:, :, c] = conv2d(arr[:, :, c], DENOISE_KERNEL)
    return out


def normalize_mean(adv, ref):
    """Shift adv so its global mean matches ref's, then clamp to [0, 255]."""
    adv = np.asarray(adv, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    shifted = adv + (ref.mean() - adv.mean())
    return np.clip(shifted, 0.0, 255.0)
