"""Sign-OPT with a penalty-map-weighted boundary distance."""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExhausted
from .common import NOISE_DISTS, NOISE_MODES, Geometry, Problem, Untargeted, boundary_distance, \
    check_start, draw_noise, init_untargeted


@dataclass
class SignOptConfig:
    q: int = 20
    epsilon: float = 5e-3
    iterations: int = 10_000
    noise_dist: str = "gaussian"
    noise_mode: str = "sign_preserving"
    shrink: float = 0.7
    max_trials: int = 15
    tol: float = 1e-4
    growth: float = 1.5
    gamma0: float = 0.2
    exact: bool = False
    init_tries: int = 50

    def __post_init__(self):
        if self.q < 1 or self.epsilon <= 0 or self.tol <= 0 or self.max_trials < 1:
            raise ValueError("need q >= 1, epsilon > 0, tol > 0, max_trials >= 1")
        if not 0 < self.shrink < 1 or self.growth <= 1:
            raise ValueError("need 0 < shrink < 1 and growth > 1")
        if self.noise_dist not in NOISE_DISTS or self.noise_mode not in NOISE_MODES:
            raise ValueError(f"bad noise setting {self.noise_dist}/{self.noise_mode}")


class _State:
    """Mutable per-run state: direction, its boundary distance and step sizes."""

    def __init__(self, theta, g, eps):
        self.theta = theta
        self.g = g
        self.eps = eps
        self.gamma = None


def estimate_sign_gradient(prob, theta, g, cfg, rng, eps=None):
    """Averaged sign(g(theta + eps*u) - g(theta)) * u over cfg.q shaped probes.

    Each sign costs one query at the probe ray's point at distance g, unless
    ``cfg.exact`` asks for a full boundary search per probe.
    """
    geom = prob.geom
    eps = cfg.epsilon if eps is None else eps
    step = eps * geom.norm(theta)
    grad = np.zeros_like(theta)
    for _ in range(cfg.q):
        u = geom.unit(geom.transform(draw_noise(rng, theta.shape, cfg.noise_dist), cfg.noise_mode))
        probe = theta + step * u
        if cfg.exact:
            g_new, _ = boundary_distance(prob, probe, init=g, tol=cfg.tol, growth=cfg.growth)
            sign = -1.0 if g_new < g else 1.0
        else:
            sign = -1.0 if prob.ray_adv(geom.unit(probe), g) else 1.0
        grad += sign * u
    return grad / cfg.q


def line_search_step(prob, theta, grad, g, cfg, gamma=None):
    """Backtracking search along -grad.  Returns (theta, g, gamma, accepted)."""
    geom = prob.geom
    if g <= cfg.tol:
        return theta, g, gamma, False
    gn = geom.norm(grad)
    if not gn > 0:
        return theta, g, gamma, False
    if gamma is None:
        gamma = cfg.gamma0 * g / gn
    start = gamma
    for k in range(cfg.max_trials):
        cand = theta - gamma * grad
        if geom.norm(cand) > 0:
            u = geom.unit(cand)
            if prob.ray_adv(u, g):
                g_new, _ = boundary_distance(prob, cand, init=g, tol=cfg.tol, growth=cfg.growth,
                                             init_adv=True)
                if g_new < g:
                    if k == 0:
                        gamma /= cfg.shrink
                    # keep ||theta|| equal to its boundary distance
                    return u * g_new, g_new, gamma, True
        gamma *= cfg.shrink
    # a rejected search leaves the step size of the last accepted step in place
    return theta, g, start, False


def run_signopt(oracle, x_org, x_target, m, cfg=None, goal=None, checkpoints=(), objective="pffl",
                seed=0, norm=None, y_org=None, m_report=None, keep_images=True):
    """Hard-label Sign-OPT minimizing the geometry's distance to the boundary.

    ``x_target`` may be None for untargeted runs; a start is then drawn with
    ``init_untargeted``.  The returned trace holds the best adversarial point
    found; running out of budget ends the run normally.
    """
    cfg = cfg or SignOptConfig()
    x_org = np.asarray(x_org, dtype=np.float64)
    geom = Geometry.for_objective(objective, m, x_org.shape)
    prob = Problem(oracle, x_org, goal, geom, norm=norm, checkpoints=checkpoints,
                   m_report=m if m_report is None else m_report, keep_images=keep_images)
    rng = np.random.default_rng(seed)
    state = None
    try:
        check_start(prob, x_target, y_org)
        if x_target is None:
            if not isinstance(goal, Untargeted):
                raise ValueError("a targeted attack needs a target image")
            x_target = init_untargeted(prob, rng, cfg.noise_dist, cfg.init_tries)
        theta0 = np.asarray(x_target, dtype=np.float64) - x_org
        lam_max = 10.0 * geom.norm(theta0)
        g0, _ = boundary_distance(prob, theta0, init=geom.norm(theta0), tol=cfg.tol,
                                  lam_max=lam_max, growth=cfg.growth, init_adv=True)
        state = _State(geom.unit(theta0) * g0, g0, cfg.epsilon)
        prob.set_best(prob.ray(geom.unit(theta0), g0), g0)
        for _ in range(cfg.iterations):
            grad = estimate_sign_gradient(prob, state.theta, state.g, cfg, rng, state.eps)
            theta, g, state.gamma, ok = line_search_step(prob, state.theta, grad, state.g, cfg,
                                                         state.gamma)
            if ok:
                state.theta, state.g = theta, g
                prob.set_best(prob.ray(geom.unit(theta), g), g)
            else:
                state.eps *= 0.5
                if state.g <= cfg.tol:
                    break
    except BudgetExhausted:
        return prob.trace(state.theta if state else None, exhausted=True)
    return prob.trace(state.theta)
