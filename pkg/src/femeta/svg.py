"""Minimal SVG 1.1 writers: forest plots and estimator-comparison panels."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .core import EffectScale, bounds_from_estimate

HEADER = ('<?xml version="1.0" encoding="UTF-8"?>\n'
          '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
          'viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif" font-size="12">\n')

UNBIASED_COLOR = "#d62728"
OPTIMAL_COLOR = "#1f77b4"


def _f(x):
    return f"{x:.2f}"


def _text(x, y, s, anchor="start", weight="normal", size=None):
    extra = f' font-size="{size}"' if size else ""
    return (f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" font-weight="{weight}"{extra}>'
            f"{escape(str(s))}</text>\n")


def _nice_ticks(lo, hi, n=5):
    span = hi - lo
    raw = span / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * max(1.0, span) else t)
        t += step
    return ticks


def _log_ticks(lo, hi):
    """Ratio-scale tick values for an axis spanning ``[lo, hi]`` in log units."""
    candidates = [0.01, 0.02, 0.05, 0.1, 0.2, 0.25, 0.5, 1, 2, 4, 5, 10, 20, 50, 100]
    ticks = [c for c in candidates if lo <= math.log(c) <= hi]
    return ticks[::2] if len(ticks) > 7 else ticks


def forest_svg(report) -> str:
    """Forest plot for an analysis report.

    Squares mark observed effects (area proportional to the weight under the
    first pooled model), diamonds the pooled estimates, and a dashed vertical
    line the null effect.  The plot area carries ``data-xmin``/``data-xmax``
    (analysis scale) and pixel extents so positions can be checked.
    """
    from .report import model_label

    ds, cfg = report.dataset, report.config
    tr = ds.scale.to_display
    log = ds.scale is EffectScale.LOG
    study_ci = [bounds_from_estimate(s.y, s.var, cfg.level) for s in ds.studies]
    null = 0.0
    xmin = min([lo for lo, _ in study_ci] + [r.ci_low for r in report.pooled] + [null])
    xmax = max([hi for _, hi in study_ci] + [r.ci_high for r in report.pooled] + [null])
    pad = 0.05 * (xmax - xmin or 1.0)
    xmin, xmax = xmin - pad, xmax + pad

    label_w, plot_w, value_w = 260, 340, 190
    row_h, top = 26, 50
    n_rows = ds.k + len(report.pooled) + 1
    width = label_w + plot_w + value_w + 20
    height = top + n_rows * row_h + 60
    x0 = label_w

    def px(v):
        return x0 + (v - xmin) / (xmax - xmin) * plot_w

    out = [HEADER.format(w=width, h=height)]
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    out.append(_text(10, 22, f"{report.name} ({report.measure}, {100 * cfg.level:g}% CI)", weight="bold", size=14))
    out.append(_text(10, top - 8, "Study", weight="bold"))
    out.append(_text(label_w + plot_w + 10, top - 8, f"{report.measure} [{100 * cfg.level:g}% CI]", weight="bold"))
    out.append(f'<g id="plot-area" data-xmin="{xmin!r}" data-xmax="{xmax!r}" '
               f'data-x0="{x0}" data-width="{plot_w}" data-scale="{ds.scale.value}">\n')

    bottom = top + n_rows * row_h
    nx = px(null)
    out.append(f'<line id="null-line" x1="{_f(nx)}" y1="{top}" x2="{_f(nx)}" y2="{bottom}" '
               'stroke="#555" stroke-dasharray="4,3"/>\n')

    w_ref = np.asarray(report.pooled[0].weights)
    max_side = 14.0
    for i, s in enumerate(ds.studies):
        cy = top + (i + 0.5) * row_h
        lo, hi = study_ci[i]
        out.append(_text(10, cy + 4, s.label))
        out.append(f'<line class="study-ci" x1="{_f(px(max(lo, xmin)))}" y1="{_f(cy)}" '
                   f'x2="{_f(px(min(hi, xmax)))}" y2="{_f(cy)}" stroke="black"/>\n')
        side = max(3.0, max_side * math.sqrt(w_ref[i] / w_ref.max()))
        out.append(f'<rect class="study-effect" x="{_f(px(s.y) - side / 2)}" y="{_f(cy - side / 2)}" '
                   f'width="{_f(side)}" height="{_f(side)}" fill="black"/>\n')
        out.append(_text(label_w + plot_w + 10, cy + 4,
                         f"{tr(s.y):.2f} [{tr(lo):.2f}, {tr(hi):.2f}]"))

    for j, r in enumerate(report.pooled):
        cy = top + (ds.k + 1 + j + 0.5) * row_h
        est, lo, hi = report.display(r.model)
        out.append(_text(10, cy + 4, model_label(r), weight="bold"))
        a, m, b = px(max(r.ci_low, xmin)), px(r.estimate), px(min(r.ci_high, xmax))
        h = 7
        out.append(f'<polygon class="pooled-effect" data-model="{r.model}" '
                   f'points="{_f(a)},{_f(cy)} {_f(m)},{_f(cy - h)} {_f(b)},{_f(cy)} {_f(m)},{_f(cy + h)}" '
                   'fill="#444" stroke="black"/>\n')
        out.append(_text(label_w + plot_w + 10, cy + 4, f"{est:.2f} [{lo:.2f}, {hi:.2f}]"))

    out.append(f'<line x1="{x0}" y1="{bottom}" x2="{x0 + plot_w}" y2="{bottom}" stroke="black"/>\n')
    if log:
        ticks = [(math.log(t), f"{t:g}") for t in _log_ticks(xmin, xmax)]
    else:
        ticks = [(t, f"{t:g}") for t in _nice_ticks(xmin, xmax)]
    for v, lab in ticks:
        out.append(f'<line x1="{_f(px(v))}" y1="{bottom}" x2="{_f(px(v))}" y2="{bottom + 5}" stroke="black"/>\n')
        out.append(_text(px(v), bottom + 18, lab, anchor="middle"))
    out.append("</g>\n</svg>\n")
    return "".join(out)


def grid_svg(rows, title="", axis_label="") -> str:
    """Three panels (MSE, squared bias, variance) against the grid axis.

    Unbiased estimator: red line, open circles.  Optimal estimator: blue
    line, filled circles.  Analytic rows are drawn when present, otherwise
    Monte Carlo rows.
    """
    methods = {r.method for r in rows}
    method = "analytic" if "analytic" in methods else "monte_carlo"
    rows = [r for r in rows if r.method == method]
    panels = (("mse", "MSE"), ("bias2", "Squared bias"), ("variance", "Variance"))
    pw, ph, margin = 260, 220, 50
    width = len(panels) * (pw + margin) + margin
    height = ph + 2 * margin + 30
    out = [HEADER.format(w=width, h=height)]
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.append(_text(width / 2, 22, title, anchor="middle", weight="bold", size=14))
    xs = sorted({r.axis_value for r in rows})
    xlo, xhi = xs[0], xs[-1] if xs[-1] > xs[0] else xs[0] + 1.0
    for p, (attr, name) in enumerate(panels):
        left = margin + p * (pw + margin)
        top = margin
        vals = [getattr(r, attr) for r in rows]
        ylo, yhi = 0.0, max(vals) * 1.05 if max(vals) > 0 else 1.0

        def px(x):
            return left + (x - xlo) / (xhi - xlo) * pw

        def py(y):
            return top + ph - (y - ylo) / (yhi - ylo) * ph

        out.append(f'<g class="panel" data-quantity="{attr}">\n')
        out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
        out.append(_text(left + pw / 2, top - 8, name, anchor="middle", weight="bold"))
        for t in _nice_ticks(xlo, xhi):
            out.append(_text(px(t), top + ph + 16, f"{t:g}", anchor="middle", size=10))
        for t in _nice_ticks(ylo, yhi, 4):
            out.append(_text(left - 4, py(t) + 3, f"{t:.3g}", anchor="end", size=10))
        out.append(_text(left + pw / 2, top + ph + 34, axis_label, anchor="middle"))
        for est, color, fill in (("unbiased", UNBIASED_COLOR, "white"), ("optimal", OPTIMAL_COLOR, OPTIMAL_COLOR)):
            pts = sorted((r.axis_value, getattr(r, attr)) for r in rows if r.estimator == est)
            if not pts:
                continue
            path = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in pts)
            out.append(f'<polyline class="{est}" points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>\n')
            for x, y in pts:
                out.append(f'<circle cx="{_f(px(x))}" cy="{_f(py(y))}" r="2.5" fill="{fill}" stroke="{color}"/>\n')
        out.append("</g>\n")
    ly = height - 14
    out.append(f'<circle cx="{margin}" cy="{ly - 4}" r="3" fill="white" stroke="{UNBIASED_COLOR}"/>\n')
    out.append(_text(margin + 8, ly, "unweighted (unbiased)"))
    out.append(f'<circle cx="{margin + 190}" cy="{ly - 4}" r="3" fill="{OPTIMAL_COLOR}" stroke="{OPTIMAL_COLOR}"/>\n')
    out.append(_text(margin + 198, ly, "optimal"))
    out.append("</svg>\n")
    return "".join(out)
