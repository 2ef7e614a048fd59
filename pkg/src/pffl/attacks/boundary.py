"""Boundary Attack with penalty-map-weighted orthogonal and source steps."""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExhausted
from .common import Geometry, Problem, Untargeted, boundary_distance, check_start, init_untargeted


@dataclass
class BoundaryAttackConfig:
    gamma: float = 1e-2
    beta: float = 1e-2
    window: int = 30
    orth_target: float = 0.5
    source_target: float = 0.25
    grow: float = 1.1
    shrink: float = 0.9
    iterations: int = 100_000
    weighted_orth: bool = True
    tol: float = 1e-4
    init_tries: int = 50
    noise_dist: str = "gaussian"

    def __post_init__(self):
        if self.gamma <= 0 or self.beta <= 0 or self.window < 1:
            raise ValueError("need gamma > 0, beta > 0 and a positive window")
        if not (0 < self.orth_target < 1 and 0 < self.source_target < 1):
            raise ValueError("success targets must lie in (0, 1)")


def ba_orthogonal_step(x_org, x_i, gamma, geom, rng, weighted=True):
    """Random move on the sphere around x_org through x_i.

    The noise is made orthogonal to d = x_org - x_i (in the weighted inner
    product unless ``weighted`` is off), so the weighted distance to x_org is
    preserved exactly before clamping.
    """
    if gamma == 0:
        return np.array(x_i, dtype=np.float64, copy=True)
    d = x_org - x_i
    eta = rng.standard_normal(d.shape)
    if weighted:
        eta = eta - (geom.dot(eta, d) / geom.dot(d, d)) * d
    else:
        eta = eta - (float(np.sum(eta * d)) / float(np.sum(d * d))) * d
    r = geom.norm(d) / geom.norm(eta)
    return x_org + (gamma * r * eta - d) / math.sqrt(1.0 + gamma * gamma)


def ba_source_step(x_org, x_o, beta, geom):
    """Contraction x_o + beta * M * (x_org - x_o)."""
    if not 0 <= beta <= 1.0 / geom.max_weight():
        raise ValueError("beta must lie in [0, 1/max(M)]")
    return x_o + beta * geom.scale(x_org - x_o)


class _Rate:
    """Success counter that adapts a step size once per full window."""

    def __init__(self, window, target):
        self.window, self.target = window, target
        self.hits = self.n = 0

    def add(self, ok, value, grow, shrink):
        self.n += 1
        self.hits += bool(ok)
        if self.n < self.window:
            return value
        rate = self.hits / self.n
        self.hits = self.n = 0
        if rate > self.target:
            return value * grow
        if rate < self.target:
            return value * shrink
        return value


def run_boundary_attack(oracle, x_org, x_target, m, cfg=None, goal=None, checkpoints=(),
                        objective="pffl", seed=0, norm=None, y_org=None, m_report=None,
                        keep_images=True):
    """Boundary Attack; same calling convention and trace as ``run_signopt``.

    The start point is first pulled onto the boundary by a search along the
    segment from x_org to x_target.
    """
    cfg = cfg or BoundaryAttackConfig()
    if objective == "linf":
        raise ValueError("the boundary attack supports the pffl and l2 objectives only")
    x_org = np.asarray(x_org, dtype=np.float64)
    geom = Geometry.for_objective(objective, m, x_org.shape)
    prob = Problem(oracle, x_org, goal, geom, norm=norm, checkpoints=checkpoints,
                   m_report=m if m_report is None else m_report, keep_images=keep_images)
    rng = np.random.default_rng(seed)
    beta_cap = 1.0 / geom.max_weight()
    gamma, beta = cfg.gamma, min(cfg.beta, beta_cap)
    orth = _Rate(cfg.window, cfg.orth_target)
    src = _Rate(cfg.window, cfg.source_target)
    x_i = None
    try:
        check_start(prob, x_target, y_org)
        if x_target is None:
            if not isinstance(goal, Untargeted):
                raise ValueError("a targeted attack needs a target image")
            x_target = init_untargeted(prob, rng, cfg.noise_dist, cfg.init_tries)
        theta0 = np.asarray(x_target, dtype=np.float64) - x_org
        n0 = geom.norm(theta0)
        lam, _ = boundary_distance(prob, theta0, init=n0, tol=cfg.tol, lam_max=n0, init_adv=True)
        x_i = prob.ray(geom.unit(theta0), lam)
        prob.set_best(x_i, lam)
        for _ in range(cfg.iterations):
            cand = np.clip(ba_orthogonal_step(x_org, x_i, gamma, geom, rng, cfg.weighted_orth),
                           0.0, 1.0)
            ok = prob.is_adv(cand)
            gamma = orth.add(ok, gamma, cfg.grow, cfg.shrink)
            if not ok:
                continue
            x_i = cand
            cand = np.clip(ba_source_step(x_org, x_i, beta, geom), 0.0, 1.0)
            ok = prob.is_adv(cand)
            beta = min(src.add(ok, beta, cfg.grow, cfg.shrink), beta_cap)
            if ok:
                x_i = cand
    except BudgetExhausted:
        return prob.trace(x_i, exhausted=True)
    return prob.trace(x_i)
