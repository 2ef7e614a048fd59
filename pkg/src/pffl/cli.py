"""Command line entry point: ``pffl <command> ...``."""
import argparse
import logging
import signal
import sys
from pathlib import Path

import numpy as np

from .attacks.boundary import BoundaryAttackConfig, run_boundary_attack
from .attacks.common import Targeted, Untargeted
from .attacks.signopt import SignOptConfig, run_signopt
from .errors import PfflError
from .feature_map import build_penalty, label_image
from .harness.correlation import correlation_study, is_monotone
from .harness.experiment import ExperimentConfig, run_experiment
from .harness.fixtures import tripartite
from .harness.report import emit_report, write_csv
from .metrics import fmt, report
from .oracle import make_builtin, open_oracle
from .oracle.remote import serve
from .tensor_io import NormalizationSpec, load_png, normalize, read_tensor, save_png, write_tensor

log = logging.getLogger("pffl")


def _norm(name):
    return {"imagenet": NormalizationSpec(), "identity": NormalizationSpec.identity(),
            "none": None}[name]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _penalty_from(path, shape):
    m = read_tensor(path)
    if m.shape[0] != 1 or m.shape[1:] != tuple(shape[-2:]):
        raise PfflError(f"penalty tensor {m.shape} does not match image {shape}")
    return m[0].astype(np.float64)


def cmd_classify_features(args):
    img = load_png(args.image)
    m, labels = build_penalty(img)
    if args.out_labels:
        save_png(label_image(labels), args.out_labels)
    if args.out_penalty:
        write_tensor(m[None], args.out_penalty)
    counts = np.bincount(labels.ravel(), minlength=3)
    print(f"smooth={counts[0]} edge={counts[1]} texture={counts[2]}")


def cmd_evaluate(args):
    a, b = load_png(args.a), load_png(args.b)
    m = _penalty_from(args.penalty, a.shape) if args.penalty else build_penalty(a)[0]
    print(report(a, b, m).csv_row())


def cmd_serve_oracle(args):
    shape = tuple(_ints(args.shape))
    if len(shape) != 3:
        raise SystemExit("--shape needs C,H,W")
    oracle = make_builtin(args.kind, shape, seed=args.seed, num_classes=args.classes)
    server = serve(oracle, args.bind, background=False)

    def stop(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, stop)
    print(f"serving {args.kind} oracle {shape} on {server.url}/classify", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def cmd_attack(args):
    img = load_png(args.image)
    norm = _norm(args.normalization)
    oracle = open_oracle(args.oracle, img.shape, budget=args.budget)
    m = _penalty_from(args.penalty, img.shape) if args.penalty else build_penalty(img)[0]
    # labels of the inputs come from a separate session so they do not count against the budget
    side = open_oracle(args.oracle, img.shape)

    def label(x):
        return side.classify(normalize(x, norm) if norm is not None else x)

    y = label(img)
    if args.untargeted:
        goal, target = Untargeted(y), None
    else:
        target = load_png(args.target_image)
        goal = Targeted(label(target))
    cps = _ints(args.checkpoints) if args.checkpoints else [args.budget]
    if args.algo == "signopt":
        tr = run_signopt(oracle, img, target, m, SignOptConfig(), goal, cps,
                         objective=args.objective, seed=args.seed, norm=norm, y_org=y)
    else:
        tr = run_boundary_attack(oracle, img, target, m, BoundaryAttackConfig(), goal, cps,
                                 objective=args.objective, seed=args.seed, norm=norm, y_org=y)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_png(tr.x_adv, out / "adversarial.png")
    noise = tr.x_adv - img
    span = float(np.abs(noise).max())
    save_png(0.5 + 0.5 * noise / span if span > 0 else np.full_like(noise, 0.5), out / "noise.png")
    write_csv(out / "trace.csv", ["queries", "lambda", "pffl", "mse", "psnr_db", "ssim"],
              [[str(r.queries)] + [fmt(v) for v in r.fields()[1:]] for r in tr.records])
    final = report(img, tr.x_adv, m)
    print(f"queries={tr.queries} distance={fmt(tr.lam)} pffl={fmt(final.pffl)} "
          f"mse={fmt(final.mse)} psnr_db={fmt(final.psnr)} ssim={fmt(final.ssim)}")


def cmd_bench(args):
    cfg = ExperimentConfig.from_json(args.config)
    table = run_experiment(cfg, base_dir=Path(args.config).resolve().parent)
    out = args.out_dir or Path(args.config).resolve().parent
    for p in emit_report(table, out):
        print(p)


def cmd_correlate(args):
    img = load_png(args.image) if args.image else tripartite(32, args.seed, 3)[0]
    m = build_penalty(img)[0]
    table = correlation_study(img, m, _floats(args.psnr), _floats(args.ssim), seed=args.seed)
    cols, rows = is_monotone(table)
    for p in emit_report(table, args.out_dir):
        print(p)
    print(f"monotone in ssim: {cols}  monotone in psnr: {rows}")


def build_parser():
    ap = argparse.ArgumentParser(prog="pffl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify-features", help="label pixels and build the penalty map")
    p.add_argument("image")
    p.add_argument("--out-labels")
    p.add_argument("--out-penalty")
    p.set_defaults(func=cmd_classify_features)

    p = sub.add_parser("evaluate", help="pffl, mse, psnr and ssim between two PNGs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--penalty", help="PFT1 penalty map (default: built from the first image)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve-oracle", help="serve a builtin oracle over HTTP")
    p.add_argument("--kind", choices=["linear", "conv"], default="conv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--shape", default="3,32,32", help="C,H,W of accepted tensors")
    p.set_defaults(func=cmd_serve_oracle)

    p = sub.add_parser("attack", help="run one hard-label attack")
    p.add_argument("--algo", choices=["signopt", "boundary"], default="signopt")
    p.add_argument("--objective", choices=["pffl", "l2", "linf"], default="pffl")
    p.add_argument("--oracle", default="conv:seed=0,classes=10",
                   help="URL of a served oracle or a builtin spec like conv:seed=0,classes=10")
    p.add_argument("--image", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target-image")
    g.add_argument("--untargeted", action="store_true")
    p.add_argument("--budget", type=int, default=3200)
    p.add_argument("--checkpoints", default="800,1600,2400,3200")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--penalty")
    p.add_argument("--normalization", choices=["imagenet", "identity", "none"], default="imagenet")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("correlate", help="PFFL over a PSNR x SSIM grid")
    p.add_argument("--image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--psnr", default="20,22.5,25,27.5,30,32.5,35")
    p.add_argument("--ssim", default="0.75,0.8,0.85,0.88,0.9,0.92,0.94,0.95,0.96,0.97,0.98,0.99")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_correlate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PfflError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
