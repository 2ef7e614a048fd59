"""Shared machinery for the hard-label attacks.

Attacks work on pixel-space images in [0, 1].  If a normalization spec is
given, images are normalized only when they are handed to the oracle.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import BudgetExhausted, InitFailure, InvalidStart, NotAdversarialDirection
from ..metrics import mse, pffl, psnr_from_mse, ssim
from ..tensor_io import normalize

OBJECTIVES = ("pffl", "l2", "linf")
NOISE_DISTS = ("gaussian", "uniform")
NOISE_MODES = ("sign_preserving", "literal")


@dataclass(frozen=True)
class Targeted:
    label: int

    def reached(self, y):
        return y == self.label


@dataclass(frozen=True)
class Untargeted:
    original: int

    def reached(self, y):
        return y != self.original


class Geometry:
    """Distance used by an attack.

    ``weighted``: ||v * M||_2 with M broadcast over channels; ``l2``: plain
    Euclidean norm (no M at all); ``linf``: max-norm.  The arithmetic of the
    weighted path with M = 1 is bit-identical to the l2 path.
    """

    def __init__(self, kind, m=None, shape=None):
        if kind not in ("weighted", "l2", "linf"):
            raise ValueError(f"unknown geometry {kind!r}")
        if kind == "weighted":
            if m is None or shape is None:
                raise ValueError("weighted geometry needs a penalty map and image shape")
            m = np.asarray(m, dtype=np.float64)
            if m.shape != tuple(shape[-2:]) or np.any(m <= 0):
                raise ValueError("penalty map must be positive and match the image plane")
            self.m = np.ascontiguousarray(np.broadcast_to(m, shape))
            self.m2 = self.m * self.m
        else:
            self.m = self.m2 = None
        self.kind = kind

    @classmethod
    def for_objective(cls, objective, m, shape):
        if objective == "pffl":
            return cls("weighted", m, shape)
        if objective in ("l2", "linf"):
            return cls(objective)
        raise ValueError(f"unknown objective {objective!r}")

    def norm(self, v):
        if self.kind == "linf":
            return float(np.max(np.abs(v)))
        if self.m is not None:
            v = v * self.m
        return math.sqrt(float(np.sum(v * v)))

    def dot(self, u, v):
        """Inner product whose induced norm is the weighted l2 norm."""
        if self.m2 is not None:
            return float(np.sum(u * self.m2 * v))
        return float(np.sum(u * v))

    def unit(self, v):
        n = self.norm(v)
        if not n > 0:
            raise ValueError("direction has zero norm")
        return v / n

    def transform(self, eta, mode="sign_preserving"):
        """Probe shaping: (eta / M)^2, optionally keeping the sign of eta."""
        t = eta / self.m if self.m is not None else eta
        t = t * t
        if mode == "sign_preserving":
            return np.sign(eta) * t
        if mode == "literal":
            return t
        raise ValueError(f"unknown noise mode {mode!r}")

    def scale(self, v):
        """Multiply by M (identity when unweighted)."""
        return v * self.m if self.m is not None else v

    def max_weight(self):
        return float(self.m.max()) if self.m is not None else 1.0


def draw_noise(rng, shape, dist="gaussian"):
    if dist == "gaussian":
        return rng.standard_normal(shape)
    if dist == "uniform":
        return rng.uniform(-1.0, 1.0, shape)
    raise ValueError(f"unknown noise distribution {dist!r}")


@dataclass
class TraceRecord:
    queries: int
    lam: float
    pffl: float
    mse: float
    psnr: float
    ssim: float
    image: Optional[np.ndarray] = field(default=None, repr=False)

    def fields(self):
        return (self.queries, self.lam, self.pffl, self.mse, self.psnr, self.ssim)


@dataclass
class AttackTrace:
    records: list
    x_adv: np.ndarray
    theta: Optional[np.ndarray]
    lam: float
    queries: int
    exhausted: bool = False

    def by_queries(self):
        return {r.queries: r for r in self.records}


class Problem:
    """One attack instance: oracle access, goal, geometry and best-so-far state.

    Every oracle call goes through ``is_adv``; adversarial points found along
    the way update the best-so-far image, and a trace record is taken when
    the ledger reaches a checkpoint.
    """

    def __init__(self, oracle, x_org, goal, geom, norm=None, checkpoints=(), m_report=None,
                 keep_images=True):
        self.oracle = oracle
        self.x_org = np.asarray(x_org, dtype=np.float64)
        self.goal = goal
        self.geom = geom
        self.norm = norm
        self.checkpoints = sorted(set(int(c) for c in checkpoints))
        if any(c < 1 for c in self.checkpoints):
            raise ValueError("checkpoints must be positive")
        self._pending = list(self.checkpoints)
        self.m_report = m_report if m_report is not None else np.ones(self.x_org.shape[-2:])
        self.keep_images = keep_images
        self.records = []
        self.best_x = None
        self.best_dist = math.inf

    def label(self, x):
        q = normalize(x, self.norm) if self.norm is not None else x
        return self.oracle.classify(q)

    def is_adv(self, x, dist=None):
        """Query the oracle; ``dist`` is the attack-geometry distance of x if known."""
        ok = self.goal.reached(self.label(x))
        if ok:
            if dist is None:
                dist = self.geom.norm(x - self.x_org)
            if dist < self.best_dist:
                self.best_dist = dist
                self.best_x = x
        self._checkpoint()
        return ok

    def set_best(self, x, dist):
        if dist < self.best_dist:
            self.best_dist, self.best_x = dist, x

    def _checkpoint(self):
        if not self._pending:
            return
        n = self.oracle.query_count()
        while self._pending and self._pending[0] <= n:
            c = self._pending.pop(0)
            if c == n and self.best_x is not None:
                self.records.append(self.record(n))

    def record(self, n):
        x = self.best_x
        e = mse(x, self.x_org)
        return TraceRecord(queries=n, lam=self.best_dist, pffl=pffl(x, self.x_org, self.m_report),
                           mse=e, psnr=psnr_from_mse(e), ssim=ssim(x, self.x_org),
                           image=x.copy() if self.keep_images else None)

    def ray(self, u, lam):
        """Clamped point x_org + lam * u for a unit-norm direction u."""
        return np.clip(self.x_org + lam * u, 0.0, 1.0)

    def ray_adv(self, u, lam):
        # lam is measured before clamping; clamping can only shorten the step
        return self.is_adv(self.ray(u, lam), dist=lam)

    def trace(self, theta=None, lam=math.inf, exhausted=False):
        x = self.best_x if self.best_x is not None else self.x_org.copy()
        return AttackTrace(records=self.records, x_adv=x, theta=theta, lam=self.best_dist,
                           queries=self.oracle.query_count(), exhausted=exhausted)


def check_start(prob, x_target, y_org=None):
    """Validate the attack preconditions (these classifications are counted)."""
    y = prob.label(prob.x_org)
    if isinstance(prob.goal, Untargeted):
        if y != prob.goal.original:
            raise InvalidStart(f"original image is classified {y}, expected {prob.goal.original}")
    elif prob.goal.reached(y) or (y_org is not None and y != y_org):
        raise InvalidStart(f"original image is classified {y}; it must be correct and not adversarial")
    if x_target is not None and not prob.is_adv(np.asarray(x_target, dtype=np.float64)):
        raise InvalidStart("target image does not satisfy the attack goal")


def boundary_distance(prob, theta, init=None, tol=1e-4, lam_max=None, growth=1.5,
                      init_adv=False):
    """Smallest lam (within tol) at which the ray x_org + lam * theta/||theta|| is adversarial.

    Starts at ``init`` (1.0 when cold), grows or shrinks geometrically by
    ``growth`` until the boundary is bracketed, then bisects.  With
    ``init_adv`` the caller vouches that ``init`` is already adversarial and
    that point is not re-queried.  Returns (lam, queries used).
    """
    q0 = prob.oracle.query_count()
    u = prob.geom.unit(theta)
    if lam_max is None:
        lam_max = 10.0 * prob.geom.norm(theta)
    lam = float(init) if init is not None else 1.0
    lam = min(lam, lam_max)
    if init_adv or prob.ray_adv(u, lam):
        hi = lam
        lo = hi / growth
        while prob.ray_adv(u, lo):
            hi = lo
            if hi <= tol:
                return hi, prob.oracle.query_count() - q0
            lo = hi / growth
    else:
        lo = lam
        hi = lam * growth
        while True:
            if hi >= lam_max:
                hi = lam_max
                if not prob.ray_adv(u, hi):
                    raise NotAdversarialDirection(f"no adversarial point up to lambda={lam_max:g}")
                break
            if prob.ray_adv(u, hi):
                break
            lo = hi
            hi *= growth
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if prob.ray_adv(u, mid):
            hi = mid
        else:
            lo = mid
    return hi, prob.oracle.query_count() - q0


def init_untargeted(prob, rng, dist="gaussian", max_tries=50):
    """Random start (eta / M)^2 rescaled into [0, 1], redrawn until adversarial."""
    shape = prob.x_org.shape
    for _ in range(max_tries):
        eta = draw_noise(rng, shape, dist)
        cand = prob.geom.transform(eta, "literal")
        top = cand.max()
        if top > 0:
            cand = cand / top
        if prob.is_adv(cand):
            return cand
    raise InitFailure(f"no adversarial start found in {max_tries} draws")
