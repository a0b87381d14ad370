"""Canny edge extraction with density presets.

Pipeline: grayscale (luma) -> Gaussian blur -> Sobel gradients -> magnitude
scaled to [0, 255] -> non-maximum suppression over 4 quantized directions ->
hysteresis (weak pixels kept iff 8-connected to a strong pixel).

Everything is deterministic, and the whole pipeline commutes with
horizontal flips bit-exactly: the kernels fold symmetric taps pairwise, so
mirroring the input mirrors every intermediate array without rounding
drift, and the suppression rule treats both neighbours symmetrically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from genaug import _kernels
from genaug.errors import ValidationError

# Max Sobel response on 8-bit input is 4*255 per axis, so the magnitude
# ceiling is 4*255*sqrt(2); dividing by 4*sqrt(2) maps it onto [0, 255].
_MAGNITUDE_SCALE = 1.0 / (4.0 * math.sqrt(2.0))

_SOBEL_SMOOTH = np.array([2.0, 1.0])       # [1,2,1] as center-first half taps
_SOBEL_DERIV = np.array([1.0])             # [-1,0,1] as antisymmetric half taps


@dataclass(frozen=True)
class CannyPreset:
    name: str
    gaussian_sigma: float
    low_threshold: float
    high_threshold: float

    def validate(self) -> None:
        if self.gaussian_sigma <= 0:
            raise ValidationError(f"preset {self.name!r}: sigma must be > 0")
        if not 0 < self.low_threshold < self.high_threshold:
            raise ValidationError(
                f"preset {self.name!r}: need 0 < low < high, got "
                f"({self.low_threshold}, {self.high_threshold})")


def default_presets() -> list[CannyPreset]:
    """The four shipped density presets, densest first."""
    return [
        CannyPreset("dense", 1.4, 20.0, 60.0),
        CannyPreset("balanced", 1.4, 40.0, 100.0),
        CannyPreset("sparse", 1.4, 60.0, 140.0),
        CannyPreset("minimal", 1.4, 80.0, 180.0),
    ]


def load_presets(path: str | Path) -> list[CannyPreset]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    presets = [CannyPreset(name=p["name"], gaussian_sigma=float(p["gaussian_sigma"]),
                           low_threshold=float(p["low_threshold"]),
                           high_threshold=float(p["high_threshold"]))
               for p in data]
    for p in presets:
        p.validate()
    return presets


def resolve_preset(spec: str, presets: list[CannyPreset] | None = None) -> CannyPreset:
    """Look a preset up by name or numeric index."""
    presets = presets if presets is not None else default_presets()
    for p in presets:
        if p.name == spec:
            return p
    try:
        return presets[int(spec)]
    except (ValueError, IndexError):
        raise ValidationError(
            f"unknown preset {spec!r}; have "
            f"{[p.name for p in presets]} or indices 0..{len(presets) - 1}") from None


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299, 0.587, 0.114) to float64."""
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        f = img.astype(np.float64)
        return 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]
    raise ValidationError(f"expected HxW or HxWx3 image, got shape {img.shape}")


def gaussian_half_taps(sigma: float) -> np.ndarray:
    """Center-first half taps of a unit-sum Gaussian truncated at +-3 sigma."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be > 0, got {sigma}")
    radius = max(1, int(math.floor(3.0 * sigma)))
    half = np.exp(-0.5 * (np.arange(radius + 1) / sigma) ** 2)
    total = half[0] + 2.0 * half[1:].sum()
    return half / total


def _pad_reflect101(a: np.ndarray, ry: int, rx: int) -> np.ndarray:
    return np.pad(a, ((ry, ry), (rx, rx)), mode="reflect")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; color input is converted by luma first."""
    gray = to_gray(img)
    taps = gaussian_half_taps(sigma)
    r = taps.shape[0] - 1
    blurred = _kernels.correlate_sym_h(_pad_reflect101(gray, 0, r), taps)
    blurred = _kernels.correlate_sym_v(_pad_reflect101(blurred, r, 0), taps)
    return blurred


def sobel_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel x/y gradients with reflect-101 borders."""
    padded = _pad_reflect101(img, 1, 1)
    gx = _kernels.correlate_antisym_h(padded[1:-1, :], _SOBEL_DERIV)
    gx = _kernels.correlate_sym_v(_pad_reflect101(gx, 1, 0), _SOBEL_SMOOTH)
    gy = _kernels.correlate_antisym_v(padded[:, 1:-1], _SOBEL_DERIV)
    gy = _kernels.correlate_sym_h(_pad_reflect101(gy, 0, 1), _SOBEL_SMOOTH)
    return gx, gy


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Sobel magnitude of a (blurred) grayscale image, scaled to [0, 255]."""
    gx, gy = sobel_gradients(img)
    return np.sqrt(gx * gx + gy * gy) * _MAGNITUDE_SCALE


def canny(img: np.ndarray, preset: CannyPreset) -> np.ndarray:
    """Binary edge map with values in {0, 255}."""
    preset.validate()
    blurred = gaussian_blur(img, preset.gaussian_sigma)
    gx, gy = sobel_gradients(blurred)
    mag = np.sqrt(gx * gx + gy * gy) * _MAGNITUDE_SCALE
    keep = _kernels.nms_mask(mag, gx, gy)
    strong = ((keep == 1) & (mag >= preset.high_threshold)).astype(np.uint8)
    candidate = ((keep == 1) & (mag >= preset.low_threshold)).astype(np.uint8)
    edges = _kernels.hysteresis(strong, candidate)
    return edges * np.uint8(255)
