"""Batch runner: one attack per image and objective, medians per checkpoint."""
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..attacks.boundary import BoundaryAttackConfig, run_boundary_attack
from ..attacks.common import OBJECTIVES, Targeted, Untargeted
from ..attacks.signopt import SignOptConfig, run_signopt
from ..errors import EmptyImageSet, PfflError
from ..feature_map import build_penalty
from ..oracle import open_oracle
from ..tensor_io import NormalizationSpec, load_png, normalize
from .fixtures import tripartite

log = logging.getLogger(__name__)


def lower_median(values):
    """Median; for an even count, the lower of the two middle elements."""
    v = sorted(values)
    if not v:
        raise ValueError("median of an empty sequence")
    return v[(len(v) - 1) // 2]


@dataclass
class ExperimentConfig:
    images: list
    oracle: str = "conv:seed=0,classes=10"
    algorithm: str = "signopt"
    objectives: list = field(default_factory=lambda: ["pffl", "l2"])
    goal: str = "untargeted"
    budget: int = 3200
    checkpoints: list = field(default_factory=lambda: [800, 1600, 2400, 3200])
    seed: int = 0
    normalization: str = "imagenet"
    penalty: str = "feature"
    labels: list = None
    attack: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ("signopt", "boundary"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.goal not in ("targeted", "untargeted"):
            raise ValueError(f"unknown goal {self.goal!r}")
        if isinstance(self.objectives, str):
            self.objectives = [self.objectives]
        bad = [o for o in self.objectives if o not in OBJECTIVES]
        if bad or not self.objectives:
            raise ValueError(f"bad objectives {self.objectives!r}")
        cps = list(self.checkpoints)
        if any(b <= a for a, b in zip(cps, cps[1:])) or not cps or cps[0] < 1:
            raise ValueError("checkpoints must be positive and strictly increasing")
        if cps[-1] > self.budget:
            raise ValueError("checkpoints must not exceed the budget")
        if self.penalty not in ("feature", "ones"):
            raise ValueError("penalty must be 'feature' or 'ones'")
        if self.normalization not in ("imagenet", "identity", "none"):
            raise ValueError("normalization must be imagenet, identity or none")
        if not self.images:
            raise EmptyImageSet("experiment has no images")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def norm_spec(self):
        if self.normalization == "imagenet":
            return NormalizationSpec()
        if self.normalization == "identity":
            return NormalizationSpec.identity()
        return None

    def attack_config(self):
        if self.algorithm == "signopt":
            return SignOptConfig(**self.attack)
        return BoundaryAttackConfig(**self.attack)


def expand_images(entries, base=None):
    """Resolve config image entries: PNG paths or {"fixture": "tripartite", ...} specs."""
    out = []
    for e in entries:
        if isinstance(e, str):
            p = Path(e)
            if base is not None and not p.is_absolute():
                p = Path(base) / p
            out.append(load_png(p))
        elif isinstance(e, dict) and e.get("fixture") == "tripartite":
            n = int(e.get("count", 1))
            s0 = int(e.get("seed", 0))
            for k in range(n):
                img, _ = tripartite(int(e.get("size", 32)), s0 + k, int(e.get("channels", 3)))
                out.append(img)
        else:
            raise ValueError(f"unrecognized image entry {e!r}")
    if not out:
        raise EmptyImageSet("experiment has no images")
    return out


@dataclass
class ReportRow:
    objective: str
    checkpoint: int
    median_ssim: float
    median_psnr: float
    median_pffl: float
    n_images: int


@dataclass
class ReportTable:
    rows: list
    traces: dict = field(default_factory=dict)     # (objective, index) -> AttackTrace
    failures: dict = field(default_factory=dict)   # (objective, index) -> message
    skipped: list = field(default_factory=list)

    def row(self, objective, checkpoint):
        for r in self.rows:
            if r.objective == objective and r.checkpoint == checkpoint:
                return r
        raise KeyError((objective, checkpoint))


def _run_one(cfg, oracle_proto, img, idx, labels, norm, acfg, target=None):
    """All objectives for one image; returns ({objective: trace | error}, skip reason)."""
    shape = img.shape
    probe = oracle_proto.fork() if oracle_proto is not None else open_oracle(cfg.oracle, shape)
    y = probe.classify(normalize(img, norm) if norm is not None else img)
    if labels is not None and y != labels[idx]:
        return None, f"image {idx} misclassified ({y} != {labels[idx]})"
    if cfg.penalty == "ones":
        m = np.ones(shape[-2:])
    else:
        m, _ = build_penalty(img)
    seed = cfg.seed ^ idx
    goal = Untargeted(y)
    if cfg.goal == "targeted":
        yt = probe.classify(normalize(target, norm) if norm is not None else target)
        if yt == y:
            return None, f"image {idx}: target image has the same label"
        goal = Targeted(yt)
    out = {}
    for obj in cfg.objectives:
        orc = (oracle_proto.fork(cfg.budget) if oracle_proto is not None
               else open_oracle(cfg.oracle, shape, cfg.budget))
        run = run_signopt if cfg.algorithm == "signopt" else run_boundary_attack
        try:
            out[obj] = run(orc, img, target, m, acfg, goal, cfg.checkpoints, objective=obj,
                           seed=seed, norm=norm, y_org=y, m_report=m, keep_images=False)
        except PfflError as exc:
            out[obj] = exc
    return out, None


def run_experiment(cfg, base_dir=None, images=None):
    """Run ``cfg`` and aggregate lower medians per (objective, checkpoint)."""
    imgs = images if images is not None else expand_images(cfg.images, base_dir)
    if not imgs:
        raise EmptyImageSet("experiment has no images")
    if cfg.labels is not None and len(cfg.labels) != len(imgs):
        raise ValueError("labels must match the number of images")
    norm = cfg.norm_spec()
    acfg = cfg.attack_config()
    proto = None
    if not cfg.oracle.startswith(("http://", "https://")):
        proto = open_oracle(cfg.oracle, imgs[0].shape)
    table = ReportTable(rows=[])
    for idx, img in enumerate(imgs):
        # targeted runs pair image i with image i+1
        target = imgs[(idx + 1) % len(imgs)] if cfg.goal == "targeted" else None
        res, skip = _run_one(cfg, proto, img, idx, cfg.labels, norm, acfg, target)
        if skip:
            log.warning("skipping %s", skip)
            table.skipped.append(idx)
            continue
        for obj, tr in res.items():
            if isinstance(tr, Exception):
                log.warning("image %d, %s: %s", idx, obj, tr)
                table.failures[(obj, idx)] = f"{type(tr).__name__}: {tr}"
            else:
                table.traces[(obj, idx)] = tr
    for obj in cfg.objectives:
        for c in cfg.checkpoints:
            recs = [tr.by_queries()[c] for (o, _), tr in sorted(table.traces.items())
                    if o == obj and c in tr.by_queries()]
            if recs:
                row = ReportRow(obj, c, lower_median([r.ssim for r in recs]),
                                lower_median([r.psnr for r in recs]),
                                lower_median([r.pffl for r in recs]), len(recs))
            else:
                nan = float("nan")
                row = ReportRow(obj, c, nan, nan, nan, 0)
            table.rows.append(row)
    return table
