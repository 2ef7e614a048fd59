"""Distortion metrics: MSE, PSNR, SSIM, weighted norm and PFFL."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall, ShapeMismatch
from .tensor_io import same_shape, to_luminance

PSNR_INF = float("inf")


@dataclass(frozen=True)
class SsimConfig:
    k1: float = 0.01
    k2: float = 0.03
    radius: int = 5
    sigma: float = 1.5
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ValueError("k1, k2 and dynamic_range must be positive")

    @property
    def window(self):
        return 2 * self.radius + 1


@dataclass(frozen=True)
class MetricReport:
    pffl: float
    mse: float
    psnr: float
    ssim: float

    def csv_row(self):
        return ",".join(fmt(v) for v in (self.pffl, self.mse, self.psnr, self.ssim))


def fmt(v):
    """Six significant digits; +inf as 'inf', missing values blank."""
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


def mse(a, b):
    same_shape(a, b)
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def psnr(a, b, max_i=1.0):
    if max_i <= 0:
        raise ValueError("max_i must be positive")
    return psnr_from_mse(mse(a, b), max_i)


def psnr_from_mse(m, max_i=1.0):
    if m == 0:
        return PSNR_INF
    return float(10.0 * np.log10(max_i * max_i / m))


def gaussian_window_1d(cfg):
    t = np.arange(-cfg.radius, cfg.radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / cfg.sigma) ** 2)
    return g / g.sum()


def _valid_filter(x, g):
    r = len(g) // 2
    out = ndimage.correlate1d(x, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim_map(a, b, cfg=None):
    """SSIM at every valid window position of two luminance planes."""
    cfg = cfg or SsimConfig()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    same_shape(a, b)
    if min(a.shape) < cfg.window:
        raise ImageTooSmall(f"{a.shape} is smaller than the {cfg.window}x{cfg.window} window")
    g = gaussian_window_1d(cfg)
    mu_a, mu_b = _valid_filter(a, g), _valid_filter(b, g)
    var_a = _valid_filter(a * a, g) - mu_a**2
    var_b = _valid_filter(b * b, g) - mu_b**2
    cov = _valid_filter(a * b, g) - mu_a * mu_b
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, cfg=None):
    """Mean SSIM over valid windows, computed on luminance."""
    same_shape(a, b)
    if np.ndim(a) == 3:
        a, b = to_luminance(a), to_luminance(b)
    return float(np.mean(ssim_map(a, b, cfg)))


def _broadcast(m, v):
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.shape != v.shape[-2:]:
        raise ShapeMismatch(f"penalty map {m.shape} does not match image {v.shape}")
    return m


def weighted_norm(v, m):
    """sqrt(sum (v * M)^2) with M broadcast over channels."""
    m = _broadcast(m, v)
    return float(np.sqrt(np.sum((np.asarray(v) * m) ** 2)))


def pffl(a, b, m):
    """Squared M-weighted Euclidean distance between two images."""
    same_shape(a, b)
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    m = _broadcast(m, d)
    return float(np.sum((d * m) ** 2))


def report(a, b, m, max_i=1.0, ssim_cfg=None):
    e = mse(a, b)
    return MetricReport(pffl=pffl(a, b, m), mse=e, psnr=psnr_from_mse(e, max_i),
                        ssim=ssim(a, b, ssim_cfg))
