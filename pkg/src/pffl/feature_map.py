"""Pixel-wise low-level feature classification and the sensitivity penalty map.

Pipeline: luminance -> oriented directional response -> threshold ->
local response density -> {smooth, edge, texture} labels -> penalty weights.

The directional response uses a steerable odd "step" template.  Its angular
profile is the Fourier series of ``sign(cos(phi))`` truncated to the first
``n_harmonics`` odd harmonics (k = 1, 3, ..., 2n-1), each harmonic carried by a
polynomial-times-Gaussian kernel ``Re/Im((x + iy)^k) G(r)``.  With a single
harmonic the template is the first derivative of a Gaussian and the
orientation maximum has the closed form ``hypot(Gx, Gy)``.
"""
import enum
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import ndimage

from .errors import DegenerateResponse, ShapeMismatch
from .tensor_io import check_image, to_luminance

N_ORIENTATIONS = 64
NEWTON_STEPS = 6


class FeatureLabel(enum.IntEnum):
    SMOOTH = 0
    EDGE = 1
    TEXTURE = 2


LABEL_COLORS = {
    FeatureLabel.SMOOTH: (0, 0, 0),
    FeatureLabel.EDGE: (0, 255, 0),
    FeatureLabel.TEXTURE: (255, 0, 0),
}


@dataclass(frozen=True)
class Quantile:
    q: float = 0.6

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {self.q}")


@dataclass(frozen=True)
class Absolute:
    sigma: float


@dataclass(frozen=True)
class FaConfig:
    n_harmonics: int = 2
    gaussian_scale: float = 1.0
    threshold_policy: object = field(default_factory=Quantile)

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.gaussian_scale <= 0:
            raise ValueError("gaussian_scale must be positive")


@dataclass(frozen=True)
class MuWeights:
    mu_smooth: float = 1.0
    mu_edge: float = 0.3
    mu_texture: float = 0.5

    def __post_init__(self):
        if min(self.mu_smooth, self.mu_edge, self.mu_texture) <= 0:
            raise ValueError("penalty weights must be positive")

    def as_tuple(self):
        return (self.mu_smooth, self.mu_edge, self.mu_texture)


@dataclass(frozen=True)
class SparsityConfig:
    r0: int | None = None  # None: width // 10
    s0: float = 0.4

    def __post_init__(self):
        if self.r0 is not None and self.r0 < 1:
            raise ValueError("r0 must be >= 1")
        if not 0.0 < self.s0 < 1.0:
            raise ValueError("s0 must lie in (0, 1)")

    def radius(self, width):
        return self.r0 if self.r0 is not None else max(1, width // 10)


# ---------------------------------------------------------------- kernels

def _gauss_1d(scale):
    radius = int(4.0 * scale + 0.5)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / scale) ** 2)
    return t, g / g.sum()


def _harmonic_terms(k):
    """Monomial expansion of (x + iy)^k as ([(coef, px, py)], [(coef, px, py)]) for Re, Im."""
    re, im = [], []
    for j in range(k + 1):
        c = comb(k, j) * (1j ** j)
        term_re, term_im = int(round(c.real)), int(round(c.imag))
        if term_re:
            re.append((term_re, k - j, j))
        if term_im:
            im.append((term_im, k - j, j))
    return re, im


def harmonic_orders(n_harmonics):
    return [2 * i + 1 for i in range(n_harmonics)]


def harmonic_weights(n_harmonics):
    # Fourier coefficients of sign(cos phi), rescaled so the first is 1
    return np.array([(-1) ** ((k - 1) // 2) / k for k in harmonic_orders(n_harmonics)])


def harmonic_kernels(k, scale):
    """Sampled 2-D (cos, sin) kernels of order ``k``; used for tests and plotting."""
    t, g = _gauss_1d(scale)
    x = t[None, :]
    y = t[:, None]
    z = (x + 1j * y) ** k * (g[None, :] * g[:, None])
    return z.real * _harmonic_gain(k, scale), z.imag * _harmonic_gain(k, scale)


def _harmonic_gain(k, scale):
    # order 1 becomes exactly d/dx of the sampled Gaussian; higher orders match its L2 energy
    t, g = _gauss_1d(scale)
    g2 = g[None, :] * g[:, None]
    x = t[None, :]
    y = t[:, None]
    e1 = np.sqrt(np.sum((x * g2) ** 2))
    ek = np.sqrt(np.sum((((x + 1j * y) ** k).real * g2) ** 2))
    return (e1 / ek) / scale**2


def _separable_response(plane, terms, t, g):
    out = np.zeros_like(plane)
    for coef, px, py in terms:
        kx = t**px * g
        ky = t**py * g
        tmp = ndimage.correlate1d(plane, kx, axis=1, mode="reflect")
        tmp = ndimage.correlate1d(tmp, ky, axis=0, mode="reflect")
        out += coef * tmp
    return out


def harmonic_responses(plane, cfg):
    """Per-order (cos, sin) filter responses, shape (n_harmonics, 2, H, W)."""
    plane = np.asarray(plane, dtype=np.float64)
    t, g = _gauss_1d(cfg.gaussian_scale)
    out = []
    for k in harmonic_orders(cfg.n_harmonics):
        re, im = _harmonic_terms(k)
        gain = _harmonic_gain(k, cfg.gaussian_scale)
        out.append((gain * _separable_response(plane, re, t, g),
                    gain * _separable_response(plane, im, t, g)))
    return np.asarray(out)


def oriented_response(resp, alpha, n_harmonics):
    """Template response R(alpha) for one angle (scalar) given harmonic responses."""
    w = harmonic_weights(n_harmonics)
    ks = harmonic_orders(n_harmonics)
    total = 0.0
    for wk, k, (c, s) in zip(w, ks, resp):
        total = total + wk * (np.cos(k * alpha) * c + np.sin(k * alpha) * s)
    return total


def _orientation_max(resp, n_harmonics):
    w = harmonic_weights(n_harmonics)[:, None]
    ks = np.asarray(harmonic_orders(n_harmonics), dtype=np.float64)[:, None]
    cs = resp[:, 0].reshape(len(ks), -1)
    ss = resp[:, 1].reshape(len(ks), -1)

    # |R| has period pi because only odd harmonics are present
    grid = np.arange(N_ORIENTATIONS) * (np.pi / N_ORIENTATIONS)
    vals = np.zeros((N_ORIENTATIONS, cs.shape[1]))
    for i, a in enumerate(grid):
        vals[i] = np.sum(w * (np.cos(ks * a) * cs + np.sin(ks * a) * ss), axis=0)
    best = np.argmax(np.abs(vals), axis=0)
    grid_max = np.abs(vals[best, np.arange(cs.shape[1])])

    # Newton on R'(alpha) = 0 around the best grid angle
    alpha = grid[best]
    half = 0.5 * np.pi / N_ORIENTATIONS
    lo, hi = alpha - half, alpha + half
    for _ in range(NEWTON_STEPS):
        cos_k, sin_k = np.cos(ks * alpha), np.sin(ks * alpha)
        d1 = np.sum(w * ks * (-sin_k * cs + cos_k * ss), axis=0)
        d2 = np.sum(-w * ks**2 * (cos_k * cs + sin_k * ss), axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d2 != 0, d1 / d2, 0.0)
        alpha = np.clip(alpha - step, lo, hi)
    refined = np.abs(np.sum(w * (np.cos(ks * alpha) * cs + np.sin(ks * alpha) * ss), axis=0))
    return np.maximum(grid_max, refined)


def fa_response(plane, cfg=None):
    """Orientation-maximal absolute template response at every pixel."""
    cfg = cfg or FaConfig()
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D plane, got {plane.shape}")
    resp = harmonic_responses(plane, cfg)
    if cfg.n_harmonics == 1:
        return np.hypot(resp[0, 0], resp[0, 1])
    return _orientation_max(resp, cfg.n_harmonics).reshape(plane.shape)


# ---------------------------------------------------------------- classification

def resolve_threshold(resp, policy):
    resp = np.asarray(resp, dtype=np.float64)
    if resp.size == 0:
        raise ValueError("empty response map")
    if isinstance(policy, Absolute):
        return float(policy.sigma)
    if isinstance(policy, Quantile):
        lo, hi = resp.min(), resp.max()
        if lo == hi:
            raise DegenerateResponse(float(lo))
        return float(np.quantile(resp.ravel(), policy.q, method="linear"))
    raise TypeError(f"unknown threshold policy {policy!r}")


def _box_sum(a, r0):
    """Sum over the clipped window |m-i| < r0, |n-j| < r0 via an integral image."""
    h, w = a.shape
    s = np.zeros((h + 1, w + 1), dtype=a.dtype)
    s[1:, 1:] = a.cumsum(0).cumsum(1)
    k = r0 - 1
    i0 = np.clip(np.arange(h) - k, 0, h)
    i1 = np.clip(np.arange(h) + k + 1, 0, h)
    j0 = np.clip(np.arange(w) - k, 0, w)
    j1 = np.clip(np.arange(w) + k + 1, 0, w)
    return (s[i1][:, j1] - s[i0][:, j1] - s[i1][:, j0] + s[i0][:, j0])


def sparsity_density(resp, sigma, r0):
    """Fraction of pixels with response >= sigma in each clipped local window."""
    if r0 < 1:
        raise ValueError("r0 must be >= 1")
    resp = np.asarray(resp)
    hits = (resp >= sigma).astype(np.int64)
    counts = _box_sum(np.ones_like(hits), r0)
    return _box_sum(hits, r0) / counts


def penalty_map(resp, dens, sigma, cfg, mu):
    resp = np.asarray(resp)
    dens = np.asarray(dens)
    if resp.shape != dens.shape:
        raise ShapeMismatch(f"{resp.shape} vs {dens.shape}")
    labels = np.full(resp.shape, FeatureLabel.SMOOTH, dtype=np.int8)
    active = resp >= sigma
    labels[active & (dens <= cfg.s0)] = FeatureLabel.EDGE
    labels[active & (dens > cfg.s0)] = FeatureLabel.TEXTURE
    weights = np.asarray(mu.as_tuple(), dtype=np.float64)
    return weights[labels], labels


def build_penalty(img, fa=None, sp=None, mu=None):
    """Full classifier: image -> (penalty map M, feature labels), both (H, W)."""
    fa = fa or FaConfig()
    sp = sp or SparsityConfig()
    mu = mu or MuWeights()
    img = check_image(img, min_size=8)
    plane = to_luminance(img)
    resp = fa_response(plane, fa)
    try:
        sigma = resolve_threshold(resp, fa.threshold_policy)
    except DegenerateResponse:
        labels = np.zeros(plane.shape, dtype=np.int8)
        return np.full(plane.shape, mu.mu_smooth), labels
    dens = sparsity_density(resp, sigma, sp.radius(plane.shape[1]))
    return penalty_map(resp, dens, sigma, sp, mu)


def label_image(labels):
    """False-colour RGB (3, H, W) rendering of a label map, values in [0, 1]."""
    labels = np.asarray(labels)
    out = np.zeros((3,) + labels.shape)
    for lab, rgb in LABEL_COLORS.items():
        mask = labels == lab
        for c in range(3):
            out[c][mask] = rgb[c] / 255.0
    return out
