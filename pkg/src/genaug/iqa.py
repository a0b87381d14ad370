"""Image-quality metrics.

Full-reference: PSNR, SSIM, embedding (cosine) distance. No-reference:
total variation. Distribution-based: FID and KID over feature sets.
Plus bbox-cropped full-reference scoring for annotation-focused checks.

Learned perceptual metrics are deliberately not reimplemented; any external
embedding model can be plugged in through EmbeddingProvider (an HTTP
provider is included), and a hermetic hand-rolled descriptor keeps the
whole pipeline runnable offline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from genaug import _kernels
from genaug.edge import to_gray
from genaug.errors import ValidationError
from genaug.manifest import ShootAnnotation


@dataclass(frozen=True)
class MetricReport:
    metric_name: str
    value: float
    sample_sizes: tuple[int, ...] = ()
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FeatureSet:
    """Embedding vectors for a set of images, in id order."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # (n, d) float64
    provider_name: str

    def __post_init__(self) -> None:
        if len(self.ids) != self.vectors.shape[0]:
            raise ValidationError(
                f"{len(self.ids)} ids but {self.vectors.shape[0]} vectors")
        if not np.isfinite(self.vectors).all():
            raise ValidationError("feature vectors must be finite")

    def __len__(self) -> int:
        return len(self.ids)


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, img: np.ndarray) -> np.ndarray: ...


def build_feature_set(images: list[tuple[str, np.ndarray]],
                      provider: EmbeddingProvider) -> FeatureSet:
    vectors = np.stack([provider.embed(img) for _, img in images]) \
        if images else np.zeros((0, provider.dim))
    return FeatureSet(ids=tuple(i for i, _ in images), vectors=vectors,
                      provider_name=provider.name)


# ---------------------------------------------------------------------------
# Full-reference metrics


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    _check_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


@dataclass(frozen=True)
class SsimWindow:
    size: int = 11
    sigma: float = 1.5
    c1: float = (0.01 * 255.0) ** 2
    c2: float = (0.03 * 255.0) ** 2


def _window_mean(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = _kernels.correlate_sym_h(img, taps)
    return _kernels.correlate_sym_v(out, taps)


def ssim(a: np.ndarray, b: np.ndarray, win: SsimWindow | None = None) -> float:
    """Mean local SSIM over a sliding Gaussian window (valid region only)."""
    win = win or SsimWindow()
    _check_same_shape(a, b)
    ga, gb = to_gray(a), to_gray(b)
    if ga.shape[0] < win.size or ga.shape[1] < win.size:
        raise ValidationError(f"image {ga.shape} smaller than {win.size}px window")
    taps = gaussian_half_taps_for_window(win)
    mu_a = _window_mean(ga, taps)
    mu_b = _window_mean(gb, taps)
    e_aa = _window_mean(ga * ga, taps)
    e_bb = _window_mean(gb * gb, taps)
    e_ab = _window_mean(ga * gb, taps)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + win.c1) * (2.0 * cov + win.c2)
    den = (mu_a * mu_a + mu_b * mu_b + win.c1) * (var_a + var_b + win.c2)
    return float(np.mean(num / den))


def gaussian_half_taps_for_window(win: SsimWindow) -> np.ndarray:
    """Half taps for the SSIM window, truncated to the window size."""
    radius = win.size // 2
    half = np.exp(-0.5 * (np.arange(radius + 1) / win.sigma) ** 2)
    total = half[0] + 2.0 * half[1:].sum()
    return half / total


def total_variation(img: np.ndarray) -> float:
    """Anisotropic TV (forward differences) normalized by pixel count."""
    g = to_gray(img)
    dx = np.abs(np.diff(g, axis=1)).sum()
    dy = np.abs(np.diff(g, axis=0)).sum()
    return float((dx + dy) / g.size)


def embed_distance(a: np.ndarray, b: np.ndarray, provider: EmbeddingProvider) -> float:
    """Cosine distance 1 - cos between embeddings, computed as half the
    squared distance of the normalized vectors so d(x, x) is exactly 0."""
    return feature_distance(provider.embed(a), provider.embed(b))


def feature_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cannot take cosine distance of a zero-norm embedding")
    w = u / nu - v / nv
    return 0.5 * float(np.dot(w, w))


# ---------------------------------------------------------------------------
# Distribution-based metrics


def _check_compatible(a: FeatureSet, b: FeatureSet) -> None:
    if a.provider_name != b.provider_name:
        raise ValidationError(
            f"feature sets from different providers: "
            f"{a.provider_name!r} vs {b.provider_name!r}")
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise ValidationError(
            f"dimension mismatch: {a.vectors.shape[1]} vs {b.vectors.shape[1]}")


def fid(a: FeatureSet, b: FeatureSet) -> float:
    """Fréchet distance between Gaussian fits of two feature sets.

    Uses unbiased covariance; the matrix square root comes from the
    eigendecomposition of the symmetrized product, with negative
    eigenvalues clamped to zero.
    """
    _check_compatible(a, b)
    d = a.vectors.shape[1]
    for s in (a, b):
        if len(s) < 2:
            raise ValidationError("FID needs at least 2 samples per set")
        if len(s) < d + 1:
            warnings.warn(
                f"FID with {len(s)} samples in dimension {d} is strongly biased "
                f"(need >= {d + 1})", stacklevel=2)
    mu_a = a.vectors.mean(axis=0)
    mu_b = b.vectors.mean(axis=0)
    cov_a = np.cov(a.vectors, rowvar=False, ddof=1).reshape(d, d)
    cov_b = np.cov(b.vectors, rowvar=False, ddof=1).reshape(d, d)
    diff = mu_a - mu_b

    half_a = _psd_sqrt(cov_a)
    inner = half_a @ cov_b @ half_a
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    _clamp_warn(eigvals)
    trace_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    _clamp_warn(vals)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _clamp_warn(eigvals: np.ndarray) -> None:
    top = float(np.abs(eigvals).max(initial=0.0))
    worst = float(eigvals.min(initial=0.0))
    if worst < 0.0 and top > 0.0 and -worst > 1e-3 * top:
        warnings.warn(
            f"clamping negative eigenvalue {worst:.3e} (largest {top:.3e}) "
            "in covariance square root", stacklevel=3)


def _poly_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def kid(a: FeatureSet, b: FeatureSet) -> float:
    """Unbiased squared MMD with the cubic polynomial kernel, full sets."""
    _check_compatible(a, b)
    m, n = len(a), len(b)
    if m < 2 or n < 2:
        raise ValidationError("KID needs at least 2 samples per set")
    kxx = _poly_kernel(a.vectors, a.vectors)
    kyy = _poly_kernel(b.vectors, b.vectors)
    kxy = _poly_kernel(a.vectors, b.vectors)
    term_x = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    term_xy = 2.0 * kxy.mean()
    return float(term_x + term_y - term_xy)


# ---------------------------------------------------------------------------
# BBox-cropped full-reference scoring

FR_METRICS: dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "ssim": ssim,
    "psnr": psnr,
}


def cropped_fr_score(ref: np.ndarray, gen: np.ndarray,
                     anns: list[ShootAnnotation] | tuple[ShootAnnotation, ...],
                     metric: str = "ssim") -> MetricReport:
    """Evaluate a full-reference metric on each bbox crop pair and average."""
    _check_same_shape(ref, gen)
    if not anns:
        raise ValidationError("cropped scoring needs at least one bbox")
    if metric not in FR_METRICS:
        raise ValidationError(f"unknown FR metric {metric!r}; have {sorted(FR_METRICS)}")
    fn = FR_METRICS[metric]
    h, w = ref.shape[:2]
    values = []
    for ann in anns:
        b = ann.bbox
        if b.x < 0 or b.y < 0 or b.x + b.w > w or b.y + b.h > h:
            raise ValidationError(f"bbox ({b.x},{b.y},{b.w},{b.h}) outside {w}x{h} image")
        values.append(fn(ref[b.y:b.y + b.h, b.x:b.x + b.w],
                         gen[b.y:b.y + b.h, b.x:b.x + b.w]))
    mean = math.inf if any(math.isinf(v) for v in values) else sum(values) / len(values)
    return MetricReport(metric_name=f"cropped_{metric}", value=mean,
                        sample_sizes=(len(values),), params={"metric": metric})


# ---------------------------------------------------------------------------
# Hermetic embedding provider

BUILTIN_DESCRIPTOR_DIM = 48


class BuiltinDescriptor:
    """Deterministic 48-d image descriptor: per-channel 8-bin histograms,
    an 8-bin gradient-orientation histogram, and a 4x4 luma grid,
    L2-normalized. No learned weights; safe for hermetic runs."""

    name = "builtin-v1"
    dim = BUILTIN_DESCRIPTOR_DIM

    def embed(self, img: np.ndarray) -> np.ndarray:
        if img.ndim == 2:
            channels = [img, img, img]
        elif img.ndim == 3 and img.shape[2] == 3:
            channels = [img[:, :, c] for c in range(3)]
        else:
            raise ValidationError(f"expected HxW or HxWx3 image, got {img.shape}")
        parts = []
        npix = channels[0].size
        for ch in channels:
            hist, _ = np.histogram(ch, bins=8, range=(0, 256))
            parts.append(hist / npix)

        gray = to_gray(img)
        gx = np.diff(gray, axis=1, prepend=gray[:, :1])
        gy = np.diff(gray, axis=0, prepend=gray[:1, :])
        mag = np.hypot(gx, gy)
        ang = np.arctan2(gy, gx)  # [-pi, pi]
        bins = np.minimum((np.floor((ang + np.pi) / (2 * np.pi / 8))).astype(int), 7)
        orient = np.zeros(8)
        np.add.at(orient, bins.ravel(), mag.ravel())
        total = orient.sum()
        parts.append(orient / total if total > 0 else orient)

        h, w = gray.shape
        grid = np.zeros(16)
        ys = np.linspace(0, h, 5).astype(int)
        xs = np.linspace(0, w, 5).astype(int)
        for gy_i in range(4):
            for gx_i in range(4):
                block = gray[ys[gy_i]:ys[gy_i + 1], xs[gx_i]:xs[gx_i + 1]]
                grid[gy_i * 4 + gx_i] = block.mean() / 255.0 if block.size else 0.0
        parts.append(grid)

        vec = np.concatenate(parts)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


class RemoteEmbeddingProvider:
    """Embedding provider backed by an HTTP service.

    Protocol: POST <base_url>/embed with a PNG body; the response is JSON
    {"dim": d, "values": [...]}.
    """

    def __init__(self, base_url: str, name: str = "remote", timeout: float = 30.0):
        import httpx

        self.name = name
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout)
        self.dim = -1  # discovered on first call

    def embed(self, img: np.ndarray) -> np.ndarray:
        from genaug.raster import png_bytes

        resp = self._client.post(f"{self.base_url}/embed", content=png_bytes(img),
                                 headers={"content-type": "image/png"})
        resp.raise_for_status()
        payload = resp.json()
        vec = np.asarray(payload["values"], dtype=np.float64)
        if self.dim == -1:
            self.dim = int(payload["dim"])
        if vec.shape[0] != payload["dim"]:
            raise ValidationError("embedding service returned inconsistent dimension")
        return vec


def provider_from_config(cfg: dict) -> EmbeddingProvider:
    """{"type": "builtin"} or {"type": "remote", "url": ..., "name": ...}."""
    kind = cfg.get("type", "builtin")
    if kind == "builtin":
        return BuiltinDescriptor()
    if kind == "remote":
        return RemoteEmbeddingProvider(cfg["url"], name=cfg.get("name", "remote"))
    raise ValidationError(f"unknown provider type {kind!r}")
