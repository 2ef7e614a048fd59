"""Seeded synthetic images with known smooth / edge / texture regions.

Left third: gentle horizontal ramp.  Middle third: two plateaus separated by
one straight vertical step edge.  Right third: checkerboard with 2-pixel
squares.  A little seeded noise breaks exact ties in the response map.
"""
import numpy as np

from ..feature_map import FeatureLabel

UNKNOWN = -1


def tripartite(size=32, seed=0, channels=3, noise=0.003, margin=None):
    """Return ``(image, truth)``: a (C, H, W) image in [0, 1] and an (H, W) truth map.

    ``truth`` holds FeatureLabel values where the label is known by
    construction and ``UNKNOWN`` elsewhere (region borders, plateaus).
    """
    rng = np.random.default_rng(seed)
    h = w = int(size)
    if w < 24:
        raise ValueError("tripartite fixtures need size >= 24")
    c1, c2 = round(w / 3), round(2 * w / 3)
    if margin is None:
        margin = max(2, w // 16)

    base = rng.uniform(0.35, 0.5)
    ramp_span = rng.uniform(0.05, 0.1)
    step = rng.uniform(0.25, 0.35) * rng.choice([-1.0, 1.0])
    checker_amp = rng.uniform(0.2, 0.3)

    cols = np.arange(w)
    rows = np.arange(h)
    plane = np.empty((h, w))
    ramp = base + ramp_span * cols[:c1] / max(c1 - 1, 1)
    plane[:, :c1] = ramp[None, :]
    top = ramp[-1]
    edge_col = rng.integers(c1 + (c2 - c1) // 3, c2 - (c2 - c1) // 3 + 1)
    plane[:, c1:edge_col] = top
    plane[:, edge_col:c2] = top + step
    phase_r, phase_c = rng.integers(0, 4, size=2)
    checker = (((rows[:, None] + phase_r) // 2 + (cols[None, c2:] + phase_c) // 2) % 2) * 2.0 - 1.0
    plane[:, c2:] = 0.5 + checker_amp * checker

    truth = np.full((h, w), UNKNOWN, dtype=np.int8)
    inner = slice(margin, h - margin)
    truth[inner, margin:c1 - margin] = FeatureLabel.SMOOTH
    truth[inner, edge_col - 1:edge_col + 1] = FeatureLabel.EDGE
    truth[inner, c2 + margin:w - margin] = FeatureLabel.TEXTURE

    if channels == 1:
        img = plane[None]
    else:
        tint = 1.0 + rng.uniform(-0.05, 0.05, size=(3, 1, 1))
        img = plane[None] * tint
    img = img + noise * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0), truth


def fixture_set(count, size=32, seed=0, channels=3):
    """``count`` independent fixtures; fixture i uses seed ``seed + i``."""
    return [tripartite(size, seed + i, channels)[0] for i in range(count)]
