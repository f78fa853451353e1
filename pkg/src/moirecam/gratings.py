"""Stripe gratings and their multiplicative superposition.

Superimposing two nearly-equal-frequency gratings produces a beat at the
difference frequency: the interference pattern a camera sees on a screen.
Used as a physics sanity check and for the `grating` CLI demo.
"""

from dataclasses import dataclass

import numpy as np

from .validation import check_same_shape


@dataclass(frozen=True)
class GratingSpec:
    """A cosine stripe pattern.

    frequency: cycles per pixel, in (0, 0.5] (at or below Nyquist).
    orientation: degrees; 0 varies along the x (column) axis.
    phase: radians.
    contrast: modulation depth in [0, 1].
    """

    frequency: float
    orientation: float = 0.0
    phase: float = 0.0
    contrast: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.frequency <= 0.5:
            raise ValueError(f"frequency must be in (0, 0.5], got {self.frequency}")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError(f"contrast must be in [0, 1], got {self.contrast}")


def render_grating(spec, h, w):
    """Render v(x, y) = 127.5 * (1 + contrast*cos(2*pi*f*(x cos t + y sin t) + phase))."""
    th = np.deg2rad(spec.orientation)
    ii, jj = np.mgrid[0:h, 0:w]
    arg = 2.0 * np.pi * spec.frequency * (jj * np.cos(th) + ii * np.sin(th))
    return 127.5 * (1.0 + spec.contrast * np.cos(arg + spec.phase))


def superimpose(a, b):
    """Multiplicative (transmittance) superposition of two gray patterns."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b, "a", "b")
    return np.clip(a * b / 255.0, 0.0, 255.0)


def beat_frequency(img, axis=1, low_pass_sigma=2.0):
    """Dominant low-frequency component of a striped pattern, cycles/pixel.

    The profile along `axis` (averaged over the other axis) is Fourier
    transformed and each bin's magnitude is weighted by a Gaussian optical
    low-pass, exp(-2*pi^2*sigma^2*f^2), modeling the blur that makes the
    beat -- not the carrier stripes -- the visually dominant structure.
    Returns the frequency of the strongest non-DC weighted bin.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a gray (H, W) image, got {arr.shape}")
    profile = arr.mean(axis=0 if axis == 1 else 1)
    n = profile.size
    spectrum = np.abs(np.fft.rfft(profile - profile.mean()))
    freqs = np.arange(spectrum.size) / n
    weights = np.exp(-2.0 * np.pi**2 * low_pass_sigma**2 * freqs**2)
    k = 1 + int(np.argmax((spectrum * weights)[1:]))
    return freqs[k]
