"""What the camera optically sees when pointed at an LCD.

Three stages compose display_capture: resize the image to the monitor
resolution, explode every pixel into a 3x3 block of R/G/B subpixel columns,
then apply the shooting geometry (rotation + radial lens distortion).
All stages are linear in the pixel values for fixed parameters, which lets
the attack precompute the zero-noise capture once.
"""

from dataclasses import dataclass

import numpy as np

from .ops import WarpSpec, resize_bilinear, warp_projective
from .validation import as_rgb_image

GAMMA_RANGE = (-45.0, 45.0)


@dataclass(frozen=True)
class CaptureParams:
    """Non-optimized capture parameters.

    alpha: integer monitor size scale factor (>= 1, typically 1-4).
    gamma: rotation in degrees, or None to sample uniformly from
        [-45, 45] using `seed`.
    k1, k2: radial distortion coefficients.
    seed: RNG seed for the gamma draw (one draw per capture/attack).
    """

    alpha: int = 1
    gamma: float | None = None
    k1: float = 0.05
    k2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {self.alpha}")


def sample_gamma(params):
    """Uniform rotation draw in [-45, 45] degrees, deterministic per seed."""
    rng = np.random.default_rng(params.seed)
    return float(rng.uniform(*GAMMA_RANGE))


def resolve_gamma(params):
    """The rotation this capture will use: explicit if set, else sampled."""
    if params.gamma is not None:
        return float(params.gamma)
    return sample_gamma(params)


def subpixel_mosaic(img):
    """Expand every RGB pixel into a 3x3 block of single-color columns.

    Column 0 of each block carries (r, 0, 0), column 1 (0, g, 0), column 2
    (0, 0, b), identically across the 3 rows. Exactly one third of the
    intensity survives, which is why captured screens look darker.
    """
    arr = as_rgb_image(img)
    h, w = arr.shape[:2]
    out = np.zeros((3 * h, 3 * w, 3))
    for c in range(3):
        out[:, c::3, c] = np.repeat(arr[:, :, c], 3, axis=0)
    return out


def display_capture(img, params):
    """Stages 1-3 composed: resize -> subpixel mosaic -> geometric warp.

    Output dims are (3*alpha*H, 3*alpha*W, 3). Deterministic for a fixed
    (img, params) pair; the rotation angle is drawn once from params.seed
    when params.gamma is None.
    """
    arr = as_rgb_image(img)
    h, w = arr.shape[:2]
    sized = resize_bilinear(arr, params.alpha * h, params.alpha * w)
    mosaic = subpixel_mosaic(sized)
    spec = WarpSpec(gamma=resolve_gamma(params), k1=params.k1, k2=params.k2, fill=0.0)
    return warp_projective(mosaic, spec)
