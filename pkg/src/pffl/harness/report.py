"""CSV and SVG output for experiment and correlation tables."""
import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from ..metrics import fmt
from .correlation import CorrelationTable
from .experiment import ReportTable

REPORT_HEADER = ["objective", "checkpoint_queries", "median_ssim", "median_psnr_db",
                 "median_pffl", "n_images"]
CORRELATION_HEADER = ["target_psnr_db", "target_ssim", "achieved_pffl"]
COLORS = {"pffl": "#d62728", "l2": "#1f77b4", "linf": "#2ca02c"}


def report_rows(table):
    return [[r.objective, str(r.checkpoint), fmt(r.median_ssim), fmt(r.median_psnr),
             fmt(r.median_pffl), str(r.n_images)] for r in table.rows]


def correlation_rows(table):
    return [[fmt(p), fmt(s), fmt(table.cells.get((p, s)))]
            for p in table.psnr_grid for s in table.ssim_grid]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _panel(rows, key, x0, y0, w, h, title):
    """One metric-vs-queries panel; returns SVG fragments."""
    out = [f'<g class="panel" data-metric="{key}">',
           f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#888"/>',
           f'<text x="{x0 + w / 2:.1f}" y="{y0 - 8}" text-anchor="middle">{escape(title)}</text>']
    pts = [(r.checkpoint, getattr(r, key)) for r in rows]
    finite = [v for _, v in pts if v is not None and math.isfinite(v)]
    xs = [c for c, _ in pts]
    if not finite:
        return out + ["</g>"]
    lo, hi = min(finite), max(finite)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    xlo, xhi = min(xs), max(xs)
    xspan = (xhi - xlo) or 1

    def px(c):
        return x0 + 10 + (w - 20) * (c - xlo) / xspan

    def py(v):
        return y0 + h - 10 - (h - 20) * (v - lo) / (hi - lo)

    out.append(f'<text x="{x0 - 4}" y="{y0 + 14}" text-anchor="end" font-size="10">{fmt(hi)}</text>')
    out.append(f'<text x="{x0 - 4}" y="{y0 + h - 4}" text-anchor="end" font-size="10">{fmt(lo)}</text>')
    for c in sorted(set(xs)):
        out.append(f'<text x="{px(c):.1f}" y="{y0 + h + 14}" text-anchor="middle" '
                   f'font-size="10">{c}</text>')
    for obj in dict.fromkeys(r.objective for r in rows):
        seq = [(r.checkpoint, getattr(r, key)) for r in rows if r.objective == obj]
        coords = " ".join(f"{px(c):.2f},{py(v):.2f}" for c, v in seq
                          if v is not None and math.isfinite(v))
        color = COLORS.get(obj, "#555")
        out.append(f'<polyline data-objective="{escape(obj)}" points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>')
    out.append("</g>")
    return out


def report_svg(table):
    w, h, pw, ph = 720, 320, 280, 220
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">']
    parts += _panel(table.rows, "median_ssim", 60, 40, pw, ph, "median SSIM vs queries")
    parts += _panel(table.rows, "median_psnr", 420, 40, pw, ph, "median PSNR (dB) vs queries")
    for i, obj in enumerate(dict.fromkeys(r.objective for r in table.rows)):
        x, y = 60 + 110 * i, 290
        parts.append(f'<rect x="{x}" y="{y}" width="12" height="12" fill="{COLORS.get(obj, "#555")}"/>')
        parts.append(f'<text x="{x + 18}" y="{y + 11}">{escape(obj)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(table, out_dir, stem=None):
    """Write a table to ``out_dir``; returns the list of files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(table, CorrelationTable):
        if not table.cells:
            raise ValueError("correlation table is empty")
        path = out / f"{stem or 'correlation'}.csv"
        write_csv(path, CORRELATION_HEADER, correlation_rows(table))
        return [path]
    if not isinstance(table, ReportTable) or not table.rows:
        raise ValueError("report table is empty")
    stem = stem or "report"
    csv_path, svg_path = out / f"{stem}.csv", out / f"{stem}.svg"
    write_csv(csv_path, REPORT_HEADER, report_rows(table))
    svg_path.write_text(report_svg(table))
    return [csv_path, svg_path]
