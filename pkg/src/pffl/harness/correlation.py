"""PFFL against PSNR/SSIM: projected descent on PFFL under a fixed referee metric."""
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConstraintUnattainable
from ..metrics import _broadcast, mse, pffl, psnr_from_mse, ssim

PSNR_TOL = 0.1
SSIM_TOL = 0.01


@dataclass(frozen=True)
class FixPsnr:
    target: float

    @property
    def target_mse(self):
        return 10.0 ** (-self.target / 10.0)


@dataclass(frozen=True)
class FixSsim:
    target: float
    tol: float = 1e-3
    max_bisect: int = 40


def _near(a, b, tol):
    # slack so that a grid value written as e.g. 0.99 counts as within 0.01 of 1
    return abs(a - b) <= tol + 1e-12


def seeded_noise(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


def _to_sphere(d, target_mse):
    return d * math.sqrt(target_mse / float(np.mean(d * d)))


def _ssim_scale(img, d, c):
    """Scale s with SSIM(img + s*d) = c.target, by bisection on s."""
    f = lambda s: ssim(img + s * d, img)
    lo, hi = 0.0, 1.0
    while f(hi) > c.target:
        hi *= 2.0
        if hi > 1e6:
            raise ConstraintUnattainable(f"SSIM {c.target} not reachable by scaling")
    for _ in range(c.max_bisect):
        mid = 0.5 * (lo + hi)
        v = f(mid)
        if abs(v - c.target) <= c.tol:
            return mid
        if v > c.target:
            lo = mid
        else:
            hi = mid
    raise ConstraintUnattainable(f"SSIM bisection did not reach {c.target} within {c.tol}")


def project(img, d, constraint):
    if isinstance(constraint, FixPsnr):
        return _to_sphere(d, constraint.target_mse)
    return d * _ssim_scale(img, d, constraint)


def descent_path(img, m, constraint, steps=200, step_size=0.05, seed=0, start=None):
    """Yield the perturbations visited by projected descent on PFFL.

    The gradient of PFFL with respect to the perturbation d is 2 M^2 d.  A
    step that does not lower PFFL is retried at half the size (up to ten
    times) before the descent stops.
    """
    img = np.asarray(img, dtype=np.float64)
    m2 = _broadcast(m, img) ** 2
    d = seeded_noise(img.shape, seed) if start is None else np.asarray(start, dtype=np.float64) - img
    d = project(img, d, constraint)
    yield d
    cur = float(np.sum(m2 * d * d))
    for _ in range(steps):
        h = step_size
        for _ in range(10):
            nd = project(img, d - h * 2.0 * m2 * d, constraint)
            val = float(np.sum(m2 * nd * nd))
            if val <= cur:
                break
            h *= 0.5
        else:
            return
        d, cur = nd, val
        yield d


def projected_pffl_descent(img, m, constraint, steps=200, step_size=0.05, seed=0, start=None):
    """Final image of ``descent_path``; 0 steps returns the projected start."""
    d = None
    for d in descent_path(img, m, constraint, steps, step_size, seed, start):
        pass
    return np.asarray(img, dtype=np.float64) + d


@dataclass
class CorrelationTable:
    psnr_grid: list
    ssim_grid: list
    cells: dict = field(default_factory=dict)   # (psnr, ssim) -> pffl or None

    def value(self, p, s):
        return self.cells.get((p, s))

    def column(self, p):
        return [self.cells.get((p, s)) for s in self.ssim_grid]

    def row(self, s):
        return [self.cells.get((p, s)) for p in self.psnr_grid]


def _column_hits(img, m, p, ssim_grid, steps, step_size, seed):
    """Lowest PFFL per SSIM grid value along one fixed-PSNR descent.

    The descent is followed while SSIM keeps rising; every iterate within
    SSIM_TOL of a grid value is a candidate for that cell.  Steps are
    shortened until SSIM moves by at most half that tolerance.
    """
    c = FixPsnr(p)
    hits = {}

    def visit(d):
        x = img + d
        s = ssim(x, img)
        if _near(psnr_from_mse(mse(x, img)), p, PSNR_TOL):
            for t in ssim_grid:
                if _near(s, t, SSIM_TOL):
                    v = pffl(x, img, m)
                    if t not in hits or v < hits[t]:
                        hits[t] = v
        return s

    m2 = _broadcast(m, img) ** 2
    d = _to_sphere(seeded_noise(img.shape, seed), c.target_mse)
    s = visit(d)
    cur = float(np.sum(m2 * d * d))
    for _ in range(steps):
        h = step_size
        for _ in range(12):
            nd = _to_sphere(d - h * 2.0 * m2 * d, c.target_mse)
            val = float(np.sum(m2 * nd * nd))
            ns = ssim(img + nd, img)
            # small SSIM moves, so every grid window is crossed by several iterates
            if val <= cur and abs(ns - s) <= 0.5 * SSIM_TOL:
                break
            h *= 0.5
        else:
            break
        if ns < s:
            break   # past the SSIM peak
        d, cur = nd, val
        s = visit(d)
    return hits


def correlation_study(img, m, psnr_grid, ssim_grid, steps=400, step_size=0.05, seed=0):
    """Table of achieved PFFL over (target PSNR, target SSIM); blanks are None.

    Each PSNR column follows one fixed-PSNR descent from seeded noise up to
    its SSIM peak and records the lowest PFFL among iterates whose SSIM is
    within 0.01 of a grid value.  An infinite PSNR target means no noise: PFFL 0 at SSIM 1.
    """
    if not len(psnr_grid) or not len(ssim_grid):
        raise ValueError("grids must be nonempty")
    img = np.asarray(img, dtype=np.float64)
    table = CorrelationTable(list(psnr_grid), list(ssim_grid))
    for p in table.psnr_grid:
        if math.isinf(p):
            hits = {t: 0.0 for t in table.ssim_grid if _near(1.0, t, SSIM_TOL)}
        else:
            hits = _column_hits(img, m, p, table.ssim_grid, steps, step_size, seed)
        for t in table.ssim_grid:
            table.cells[(p, t)] = hits.get(t)
    return table


def is_monotone(table):
    """(columns ok, rows ok): PFFL non-increasing in SSIM and in PSNR over filled cells."""
    def nonincreasing(vals):
        vals = [v for v in vals if v is not None]
        return all(b <= a for a, b in zip(vals, vals[1:]))
    ps = sorted(table.psnr_grid)
    ss = sorted(table.ssim_grid)
    cols = all(nonincreasing([table.cells.get((p, s)) for s in ss]) for p in ps)
    rows = all(nonincreasing([table.cells.get((p, s)) for p in ps]) for s in ss)
    return cols, rows
