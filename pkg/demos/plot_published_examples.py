"""
Pooling four published two- and three-study meta-analyses
=========================================================

Each built-in dataset was rebuilt from study-level confidence intervals.
Here we pool it under every model and compare the fixed-effects estimators
with the common-effect and random-effects answers.
"""
from pathlib import Path

from femeta import AnalysisConfig, analyze, load_example, render

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

###############################################################################
# The Ding data: two odds ratios that disagree strongly (I² near 96%).
# The common-effect answer is pulled toward the larger study, while the
# unweighted and optimal fixed-effects estimates sit near the middle.
dataset, measure = load_example("ding2018")
report = analyze(dataset, AnalysisConfig(), name="ding2018", measure=measure)
print(render(report, "text").decode())

for model in ("common", "fixed-unweighted", "fixed-optimal", "random"):
    est, lo, hi = report.display(model)
    print(f"{model:>17}: {measure} {est:.2f} [{lo:.2f}, {hi:.2f}]")

###############################################################################
# The optimal weights interpolate between inverse-variance and equal weights.
# The weight printed per model shows how far each estimator moves away from
# the precise study.
for r in report.pooled:
    print(r.model, [round(w, 3) for w in r.weights])

###############################################################################
# Paule-Mandel as the between-study variance estimator instead of
# DerSimonian-Laird.  With two studies both give the same tau².
pm = analyze(dataset, AnalysisConfig(models=("random",), tau2_method="pm"), name="ding2018", measure=measure)
print(pm.tau2)

###############################################################################
# The remaining three examples, written as SVG forest plots.
for name in ("shrestha2019-2", "armitage2019", "shrestha2019-3"):
    ds, m = load_example(name)
    rep = analyze(ds, name=name, measure=m)
    (out / f"{name}.svg").write_bytes(render(rep, "svg"))
    print(name, "I2 = %.1f%%" % (100 * rep.heterogeneity.I2))
