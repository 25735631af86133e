"""Meta-analysis with common-, random- and fixed-effects models.

The fixed-effects part includes an MSE-optimal weighted estimator of the
unweighted average effect, with closed-form weights when they are all
positive and a certified simplex-constrained QP otherwise.
"""
from .core import (
    MODELS,
    Dataset,
    EffectScale,
    HeterogeneityStats,
    PooledResult,
    Study,
    ci_from_bounds,
    heterogeneity,
    make_dataset,
    validate,
)
from .estimators import (
    Tau2Method,
    alpha_decomposition,
    common_effect,
    fixed_optimal,
    fixed_unweighted,
    fixed_weighted,
    pool,
    random_effects,
    tau2,
)
from .report import AnalysisConfig, analyze, ingest, load_example, render, render_forest
from .weights import WeightProblem, WeightSolution, solve, solve_qp

__version__ = "0.1.0"

__all__ = [
    "MODELS",
    "Dataset",
    "EffectScale",
    "HeterogeneityStats",
    "PooledResult",
    "Study",
    "ci_from_bounds",
    "heterogeneity",
    "make_dataset",
    "validate",
    "Tau2Method",
    "alpha_decomposition",
    "common_effect",
    "fixed_optimal",
    "fixed_unweighted",
    "fixed_weighted",
    "pool",
    "random_effects",
    "tau2",
    "AnalysisConfig",
    "analyze",
    "ingest",
    "load_example",
    "render",
    "render_forest",
    "WeightProblem",
    "WeightSolution",
    "solve",
    "solve_qp",
]
