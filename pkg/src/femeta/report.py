"""CSV ingestion, multi-model analysis and report rendering.

Input CSV schema (header row required, ``#`` lines are comments)::

    study,effect,se,var,ci_low,ci_high,n

Each row gives exactly one of ``effect + se``, ``effect + var`` or
``ci_low + ci_high``.  On the log scale ``effect``, ``ci_low`` and
``ci_high`` are ratios (OR, RR) and are logged on input; ``se`` and ``var``
are taken to be on the log scale already.  When a CI is given, ``effect``
may also be present but is display-only; ``n`` is display-only too.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import weights as qp
from .core import (
    MODELS,
    Dataset,
    EffectScale,
    HeterogeneityStats,
    PooledResult,
    Study,
    bounds_from_estimate,
    ci_from_bounds,
    heterogeneity,
    require_pooling,
    validate,
)
from .errors import (
    InvalidBounds,
    MixedSpecification,
    NonPositiveRatio,
    ParseError,
    UnsupportedFormat,
)
from .estimators import Tau2Method, plugin_problem, pool, tau2

__all__ = [
    "AnalysisConfig",
    "Report",
    "ingest",
    "analyze",
    "render",
    "render_forest",
    "report_to_json",
    "report_from_json",
    "dataset_from_report",
    "BUILTIN_EXAMPLES",
    "load_example",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = "femeta.report/1"
FORMATS = ("text", "json", "csv", "svg")

MODEL_NAMES = {
    "common": "Common effect",
    "random": "Random effects",
    "fixed-unweighted": "Fixed effects, unweighted (L-M)",
    "fixed-weighted": "Fixed effects, weighted",
    "fixed-optimal": "Fixed effects, optimal",
}

# name -> (file, scale, measure)
BUILTIN_EXAMPLES = {
    "ding2018": ("ding2018.csv", EffectScale.LOG, "OR"),
    "shrestha2019-2": ("shrestha2019-2.csv", EffectScale.IDENTITY, "MD"),
    "armitage2019": ("armitage2019.csv", EffectScale.LOG, "RR"),
    "shrestha2019-3": ("shrestha2019-3.csv", EffectScale.IDENTITY, "MD"),
}


@dataclass(frozen=True)
class AnalysisConfig:
    models: tuple[str, ...] = MODELS
    level: float = 0.95
    tau2_method: Tau2Method = Tau2Method.DERSIMONIAN_LAIRD
    output: str = "text"

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValueError("at least one model must be requested")
        unknown = [m for m in models if m not in MODELS]
        if unknown:
            raise ValueError(f"unknown model(s) {unknown}; choose from {MODELS}")
        if self.output not in FORMATS:
            raise UnsupportedFormat(f"output must be one of {FORMATS}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "tau2_method", Tau2Method.parse(self.tau2_method))


# --------------------------------------------------------------------------- ingest

_COLUMNS = {"study", "label", "effect", "se", "var", "ci_low", "ci_high", "n"}


def _number(raw, name, line):
    try:
        x = float(raw)
    except ValueError:
        raise ParseError(f"column {name!r}: not a number: {raw!r}", line) from None
    if not math.isfinite(x):
        raise ParseError(f"column {name!r}: value must be finite", line)
    return x


def _to_log(x, name, line):
    if x <= 0:
        raise NonPositiveRatio(f"column {name!r}: ratio must be > 0 on the log scale, got {x!r}", line)
    return math.log(x)


def _parse_row(rec, lineno, scale, level):
    label = rec.get("study") or rec.get("label")
    if not label:
        raise ParseError("missing study label", lineno)
    has = {k for k, v in rec.items() if v not in (None, "")}
    specs = [s for s, cols in (("se", {"se"}), ("var", {"var"}), ("ci", {"ci_low", "ci_high"}))
             if cols & has]
    if len(specs) > 1:
        raise MixedSpecification(f"more than one variance specification ({', '.join(specs)})", lineno)
    if not specs:
        raise ParseError("no variance specification (se, var, or ci_low + ci_high)", lineno)
    log = scale is EffectScale.LOG
    spec = specs[0]
    if spec == "ci":
        if not {"ci_low", "ci_high"} <= has:
            raise ParseError("both ci_low and ci_high are required", lineno)
        lo = _number(rec["ci_low"], "ci_low", lineno)
        hi = _number(rec["ci_high"], "ci_high", lineno)
        if log:
            lo, hi = _to_log(lo, "ci_low", lineno), _to_log(hi, "ci_high", lineno)
            if "effect" in has:
                _to_log(_number(rec["effect"], "effect", lineno), "effect", lineno)
        try:
            y, var = ci_from_bounds(lo, hi, level)
        except InvalidBounds as exc:
            raise ParseError(str(exc), lineno) from None
    else:
        if "effect" not in has:
            raise ParseError(f"'{spec}' given without 'effect'", lineno)
        y = _number(rec["effect"], "effect", lineno)
        if log:
            y = _to_log(y, "effect", lineno)
        raw = _number(rec[spec], spec, lineno)
        if not raw > 0:
            raise ParseError(f"column {spec!r} must be > 0", lineno)
        var = raw * raw if spec == "se" else raw
    n = None
    if "n" in has:
        n_val = _number(rec["n"], "n", lineno)
        if n_val <= 0 or n_val != int(n_val):
            raise ParseError("n must be a positive integer", lineno)
        n = int(n_val)
    return Study(label, y, var, n)


def ingest(source, scale=EffectScale.IDENTITY, level=0.95) -> Dataset:
    """Read studies from a CSV path, file object or string.

    ``level`` is the confidence level of any CI bounds in the file.

    Raises
    ------
    ParseError
        Malformed rows; the message carries the 1-based line number.
    MixedSpecification, NonPositiveRatio
        Subclasses of ``ParseError``.
    """
    scale = EffectScale(scale)
    if isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and ("\n" in source or not source)):
        text = Path(source).read_text(encoding="utf-8")
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        text = source

    header = None
    studies = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if header is None:
            header = [c.lower() for c in cells]
            bad = [c for c in header if c not in _COLUMNS]
            if bad:
                raise ParseError(f"unknown column(s) {bad}", lineno)
            if not ({"study", "label"} & set(header)):
                raise ParseError("header must contain a 'study' column", lineno)
            continue
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(cells)}", lineno)
        studies.append(_parse_row(dict(zip(header, cells)), lineno, scale, level))
    if header is None:
        raise ParseError("missing header row", 1)
    return validate(Dataset(tuple(studies), scale))


def load_example(name: str) -> tuple[Dataset, str]:
    """Built-in dataset and its effect measure label."""
    try:
        fname, scale, measure = BUILTIN_EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(BUILTIN_EXAMPLES)}") from None
    text = resources.files("femeta").joinpath("data", fname).read_text(encoding="utf-8")
    return ingest(text, scale), measure


# --------------------------------------------------------------------------- analyze


@dataclass(frozen=True)
class Report:
    name: str
    measure: str
    dataset: Dataset
    config: AnalysisConfig
    pooled: tuple[PooledResult, ...]
    heterogeneity: HeterogeneityStats
    tau2: dict = field(default_factory=dict)  # method value -> estimate
    optimal: dict = field(default_factory=dict)

    @property
    def scale(self):
        return self.dataset.scale

    def result(self, model):
        for r in self.pooled:
            if r.model == model:
                return r
        raise KeyError(model)

    def display(self, model):
        """``(estimate, ci_low, ci_high)`` of a pooled row on the display scale."""
        r = self.result(model)
        tr = self.scale.to_display
        return tr(r.estimate), tr(r.ci_low), tr(r.ci_high)


def analyze(dataset: Dataset, config: AnalysisConfig | None = None, name: str = "dataset",
            measure: str | None = None) -> Report:
    """Run each requested model and gather heterogeneity diagnostics."""
    config = config or AnalysisConfig()
    require_pooling(dataset)
    pooled = tuple(pool(dataset, m, config.level, config.tau2_method) for m in config.models)
    problem = plugin_problem(dataset)
    factors = qp.correction_factors(problem)
    holds = bool((factors > 0).all())
    optimal = {"assumption_holds": holds, "correction_factors": [float(c) for c in factors]}
    if "fixed-optimal" in config.models:
        r = next(p for p in pooled if p.model == "fixed-optimal")
        optimal.update(solver=r.solver, active_set=list(r.active_set))
    if measure is None:
        measure = "ratio" if dataset.scale is EffectScale.LOG else "effect"
    return Report(
        name=name,
        measure=measure,
        dataset=dataset,
        config=config,
        pooled=pooled,
        heterogeneity=heterogeneity(dataset),
        tau2={m.value: tau2(dataset, m) for m in Tau2Method},
        optimal=optimal,
    )


# --------------------------------------------------------------------------- JSON


def report_to_dict(report: Report) -> dict:
    ds = report.dataset
    tr = ds.scale.to_display
    studies = []
    for i, s in enumerate(ds.studies):
        lo, hi = bounds_from_estimate(s.y, s.var, report.config.level)
        studies.append({
            "label": s.label, "y": s.y, "var": s.var, "n": s.n,
            "display": {"estimate": tr(s.y), "ci_low": tr(lo), "ci_high": tr(hi)},
            "weights": {r.model: r.weights[i] for r in report.pooled},
        })
    pooled = []
    for r in report.pooled:
        d = asdict(r)
        d["weights"] = list(r.weights)
        d["active_set"] = list(r.active_set)
        d["display"] = dict(zip(("estimate", "ci_low", "ci_high"), report.display(r.model)))
        pooled.append(d)
    return {
        "schema": SCHEMA_VERSION,
        "name": report.name,
        "measure": report.measure,
        "scale": ds.scale.value,
        "level": report.config.level,
        "tau2_method": report.config.tau2_method.value,
        "models": list(report.config.models),
        "studies": studies,
        "pooled": pooled,
        "heterogeneity": asdict(report.heterogeneity),
        "tau2": dict(report.tau2),
        "optimal": dict(report.optimal),
    }


def report_to_json(report: Report) -> str:
    return json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"


def dataset_from_report(doc) -> Dataset:
    """Rebuild the analysed dataset from a JSON report (string or dict)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    studies = tuple(Study(s["label"], s["y"], s["var"], s.get("n")) for s in doc["studies"])
    return Dataset(studies, EffectScale(doc["scale"]))


def report_from_json(doc) -> Report:
    """Inverse of :func:`report_to_json`; all floats round-trip exactly."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ParseError(f"unsupported report schema {doc.get('schema')!r}")
    config = AnalysisConfig(tuple(doc["models"]), doc["level"], doc["tau2_method"])
    pooled = []
    for p in doc["pooled"]:
        p = {k: v for k, v in p.items() if k != "display"}
        p["weights"] = tuple(p["weights"])
        p["active_set"] = tuple(p["active_set"])
        pooled.append(PooledResult(**p))
    return Report(
        name=doc["name"],
        measure=doc["measure"],
        dataset=dataset_from_report(doc),
        config=config,
        pooled=tuple(pooled),
        heterogeneity=HeterogeneityStats(**doc["heterogeneity"]),
        tau2=dict(doc["tau2"]),
        optimal=dict(doc["optimal"]),
    )


# --------------------------------------------------------------------------- CSV

CSV_COLUMNS = ("kind", "label", "model", "estimate", "variance", "ci_low", "ci_high", "weight", "tau2")


def report_to_csv(report: Report) -> str:
    """Long-format table on the analysis scale at full precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    level = report.config.level
    for i, s in enumerate(report.dataset.studies):
        lo, hi = bounds_from_estimate(s.y, s.var, level)
        for r in report.pooled:
            w.writerow(["study", s.label, r.model, repr(s.y), repr(s.var), repr(lo), repr(hi),
                        repr(r.weights[i]), ""])
    for r in report.pooled:
        w.writerow(["pooled", MODEL_NAMES[r.model], r.model, repr(r.estimate), repr(r.variance),
                    repr(r.ci_low), repr(r.ci_high), "", "" if r.tau2 is None else repr(r.tau2)])
    return buf.getvalue()


# --------------------------------------------------------------------------- text


def model_label(r: PooledResult) -> str:
    name = MODEL_NAMES[r.model]
    if r.model == "random":
        name += f" ({Tau2Method(r.tau2_method).short})"
    return name


def _fmt(x):
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _bar(lo, mid, hi, xmin, xmax, width, mark, null_pos):
    cells = [" "] * width

    def pos(x):
        return min(width - 1, max(0, int(round((x - xmin) / (xmax - xmin) * (width - 1)))))

    if null_pos is not None:
        cells[null_pos] = "┆"
    a, m, b = pos(lo), pos(mid), pos(hi)
    for j in range(a, b + 1):
        cells[j] = "─"
    cells[a] = "<" if lo < xmin else "├"
    cells[b] = ">" if hi > xmax else "┤"
    cells[m] = mark
    return "".join(cells)


def render_text(report: Report, color: bool | None = None, width: int = 31) -> str:
    """Fixed-width report with a character forest plot.

    ANSI bold is applied to headings only when ``color`` is true; the CLI
    enables it for terminals unless ``NO_COLOR`` is set.
    """
    bold = (lambda s: f"\033[1m{s}\033[0m") if color else (lambda s: s)
    ds, cfg = report.dataset, report.config
    tr = ds.scale.to_display
    pct = f"{cfg.level * 100:g}%"
    study_ci = [bounds_from_estimate(s.y, s.var, cfg.level) for s in ds.studies]
    lows = [lo for lo, _ in study_ci] + [r.ci_low for r in report.pooled]
    highs = [hi for _, hi in study_ci] + [r.ci_high for r in report.pooled]
    null = math.log(ds.scale.null_value) if ds.scale is EffectScale.LOG else 0.0
    xmin, xmax = min(min(lows), null), max(max(highs), null)
    pad = 0.02 * (xmax - xmin or 1.0)
    xmin, xmax = xmin - pad, xmax + pad
    null_pos = int(round((null - xmin) / (xmax - xmin) * (width - 1)))

    label_w = max(32, max(len(s.label) for s in ds.studies) + 2,
                  max(len(model_label(r)) for r in report.pooled) + 2)
    wcols = [("w " + _short(r.model), r) for r in report.pooled]
    lines = [
        bold(f"{report.name}: {report.measure}, {ds.scale.value} scale, k = {ds.k}, {pct} CI"),
        "",
    ]
    head = f"{'Study':<{label_w}}{report.measure:>8}  {pct + ' CI':<18}" + "".join(f"{c:>9}" for c, _ in wcols)
    lines.append(bold((head + "  " + "forest".center(width)).rstrip()))
    for i, s in enumerate(ds.studies):
        lo, hi = study_ci[i]
        row = f"{s.label:<{label_w}}{_fmt(tr(s.y)):>8}  {f'[{_fmt(tr(lo))}, {_fmt(tr(hi))}]':<18}"
        row += "".join(f"{100 * r.weights[i]:>8.1f}%" for _, r in wcols)
        row += "  " + _bar(lo, s.y, hi, xmin, xmax, width, "■", null_pos)
        lines.append(row.rstrip())
    lines.append("")
    lines.append(bold("Pooled"))
    blank = " " * (9 * len(wcols))
    for r in report.pooled:
        est, lo, hi = report.display(r.model)
        row = f"{model_label(r):<{label_w}}{_fmt(est):>8}  {f'[{_fmt(lo)}, {_fmt(hi)}]':<18}{blank}"
        row += "  " + _bar(r.ci_low, r.estimate, r.ci_high, xmin, xmax, width, "◆", null_pos)
        lines.append(row.rstrip())
    het = report.heterogeneity
    p = "p < 0.001" if het.p_value < 0.001 else f"p = {het.p_value:.3f}"
    lines += [
        "",
        bold("Heterogeneity"),
        f"  Q = {het.Q:.2f}, df = {het.df}, {p}, I² = {100 * het.I2:.1f}%",
        "  tau² (DL) = {:.4g}, tau² (PM) = {:.4g}".format(
            report.tau2[Tau2Method.DERSIMONIAN_LAIRD.value], report.tau2[Tau2Method.PAULE_MANDEL.value]),
        "",
        bold("Optimal weights"),
    ]
    if report.optimal["assumption_holds"]:
        lines.append("  positivity condition holds for every study: interior closed-form solution")
    else:
        bad = [ds.studies[i].label for i, c in enumerate(report.optimal["correction_factors"]) if c <= 0]
        lines.append(f"  positivity condition fails for: {', '.join(bad)}")
    if "active_set" in report.optimal and report.optimal["active_set"]:
        dropped = ", ".join(ds.studies[i].label for i in report.optimal["active_set"])
        lines.append(f"  constrained solution; zero weight for: {dropped}")
    return "\n".join(lines) + "\n"


def _short(model):
    return {"common": "CE", "random": "RE", "fixed-unweighted": "FU",
            "fixed-weighted": "FW", "fixed-optimal": "FO"}[model]


# --------------------------------------------------------------------------- dispatch


def render_forest(report: Report, fmt: str = "text", color: bool | None = None) -> bytes:
    """Forest plot as a text table or an SVG document."""
    if fmt == "text":
        return render_text(report, color).encode("utf-8")
    if fmt == "svg":
        from .svg import forest_svg

        return forest_svg(report).encode("utf-8")
    raise UnsupportedFormat(f"forest plots are rendered as 'text' or 'svg', not {fmt!r}")


def render(report: Report, fmt: str = "text", color: bool | None = None) -> bytes:
    if fmt in ("text", "svg"):
        return render_forest(report, fmt, color)
    if fmt == "json":
        return report_to_json(report).encode("utf-8")
    if fmt == "csv":
        return report_to_csv(report).encode("utf-8")
    raise UnsupportedFormat(f"unknown output format {fmt!r}; choose from {FORMATS}")


def models_from_arg(arg: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(arg, str):
        items = [a.strip() for a in arg.split(",") if a.strip()]
    else:
        items = list(arg)
    if items == ["all"]:
        return MODELS
    return tuple(items)
