"""Linear spatial primitives: bilinear resize, projective warp, convolution.

Every operation here is linear in the pixel values (warp is affine when its
fill value is nonzero), works in float64, and the ones that sit on the
gradient path (resize, conv) have hand-written exact adjoints so that
<A x, y> == <x, A^T y> holds to machine precision. Coordinates use the
half-pixel-center convention: pixel (i, j) is centered at (i + 0.5, j + 0.5).
"""

from dataclasses import dataclass

import numpy as np

from .validation import as_plane


@dataclass(frozen=True)
class WarpSpec:
    """Geometry of a single capture warp.

    gamma: rotation in degrees (image content rotates by +gamma).
    k1, k2: radial distortion coefficients; the source radius is
        r_src = r * (1 + k1*r^2 + k2*r^4) with r normalized to the
        half-diagonal of the image.
    fill: intensity used for samples that fall outside the source.
    """

    gamma: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    fill: float = 0.0


def _interp_matrix(n_out, n_in):
    """Row-stochastic 1-D bilinear interpolation matrix (n_out x n_in)."""
    if n_out < 2 or n_in < 2:
        raise ValueError(f"resize dims must be >= 2, got {n_out} from {n_in}")
    coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    lo = np.floor(coords).astype(np.int64)
    frac = coords - lo
    lo_c = np.clip(lo, 0, n_in - 1)
    hi_c = np.clip(lo + 1, 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(mat, (rows, lo_c), 1.0 - frac)
    np.add.at(mat, (rows, hi_c), frac)
    return mat


def resize_bilinear(img, out_h, out_w):
    """Resize an (H, W) or (H, W, C) image with bilinear interpolation.

    Weights are convex, so [0, 255] inputs stay in [0, 255], and the
    identity size returns the input bitwise.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, C) image, got {arr.shape}")
    wr = _interp_matrix(out_h, arr.shape[0])
    wc = _interp_matrix(out_w, arr.shape[1])
    tmp = np.tensordot(wr, arr, axes=(1, 0))
    out = np.tensordot(wc, tmp, axes=(1, 1))
    # tensordot put the column axis first; restore (out_h, out_w[, C])
    return out.swapaxes(0, 1)


def resize_adjoint(grad_out, in_h, in_w):
    """Transpose of resize_bilinear: maps an output-shaped gradient back."""
    arr = np.asarray(grad_out, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, C) gradient, got {arr.shape}")
    wr = _interp_matrix(arr.shape[0], in_h)
    wc = _interp_matrix(arr.shape[1], in_w)
    tmp = np.tensordot(wr.T, arr, axes=(1, 0))
    out = np.tensordot(wc.T, tmp, axes=(1, 1))
    return out.swapaxes(0, 1)


def warp_projective(img, spec):
    """Inverse-mapped rotation + radial distortion with bilinear sampling.

    For each output pixel the centered coordinate is rotated by -gamma,
    pushed outward by the radial model, and the source is sampled
    bilinearly; taps outside the source contribute the fill value.
    """
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w = arr.shape[:2]
    cy, cx = h / 2.0, w / 2.0

    ii, jj = np.mgrid[0:h, 0:w]
    x = (jj + 0.5) - cx
    y = (ii + 0.5) - cy

    th = np.deg2rad(spec.gamma)
    cos_t, sin_t = np.cos(th), np.sin(th)
    xr = cos_t * x + sin_t * y
    yr = -sin_t * x + cos_t * y

    half_diag = np.hypot(cx, cy)
    r2 = (xr * xr + yr * yr) / (half_diag * half_diag)
    scale = 1.0 + spec.k1 * r2 + spec.k2 * r2 * r2

    xs = xr * scale + cx - 0.5
    ys = yr * scale + cy - 0.5

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    out = np.zeros_like(arr)
    fill = float(spec.fill)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            yi = y0 + dy
            xi = x0 + dx
            inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
            vals = arr[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1), :]
            vals = np.where(inside[:, :, None], vals, fill)
            out += (wy * wx)[:, :, None] * vals
    return out[:, :, 0] if squeeze else out


def conv2d(plane, kernel):
    """Cross-correlate a single plane with an odd-sized kernel.

    Borders use replicate (edge-clamp) padding, so constant planes map to
    constant planes scaled by the kernel sum.
    """
    arr = as_plane(plane)
    ker = np.asarray(kernel, dtype=np.float64)
    if ker.ndim != 2 or ker.shape[0] % 2 == 0 or ker.shape[1] % 2 == 0:
        raise ValueError(f"kernel must be 2-D with odd dims, got {ker.shape}")
    h, w = arr.shape
    kh, kw = ker.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(arr, ((ph, ph), (pw, pw)), mode="edge")
    out = np.zeros_like(arr)
    for u in range(kh):
        for v in range(kw):
            out += ker[u, v] * padded[u : u + h, v : v + w]
    return out


def conv2d_adjoint(grad_out, kernel):
    """Exact transpose of conv2d, including the replicate-padding fold."""
    grad = as_plane(grad_out, "grad_out")
    ker = np.asarray(kernel, dtype=np.float64)
    if ker.ndim != 2 or ker.shape[0] % 2 == 0 or ker.shape[1] % 2 == 0:
        raise ValueError(f"kernel must be 2-D with odd dims, got {ker.shape}")
    h, w = grad.shape
    kh, kw = ker.shape
    ph, pw = kh // 2, kw // 2
    scattered = np.zeros((h + 2 * ph, w + 2 * pw))
    for u in range(kh):
        for v in range(kw):
            scattered[u : u + h, v : v + w] += ker[u, v] * grad
    # fold the padded border back onto the edge pixels it was copied from
    rows = scattered[ph : ph + h, :].copy()
    if ph:
        rows[0, :] += scattered[:ph, :].sum(axis=0)
        rows[-1, :] += scattered[ph + h :, :].sum(axis=0)
    out = rows[:, pw : pw + w].copy()
    if pw:
        out[:, 0] += rows[:, :pw].sum(axis=1)
        out[:, -1] += rows[:, pw + w :].sum(axis=1)
    return out


def gaussian_kernel_2d(size, sigma):
    """Normalized odd-sized 2-D Gaussian stencil."""
    if size % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {size}")
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()
