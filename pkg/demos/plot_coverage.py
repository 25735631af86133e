"""
How often do the intervals cover their targets?
================================================

Normal-theory intervals for the common effect and for the unweighted average
of fixed effects hold their nominal level exactly.  The interval around the
optimal estimator ignores its bias, so its coverage is measured rather than
assumed.
"""
from femeta.simulation import Scenario, coverage_study

homogeneous = Scenario(theta=(0.3,) * 4, sigma=(0.5, 1.0, 2.0, 1.5), replicates=100_000, seed=1)
print("common effect, equal effects:  %.4f" % coverage_study(homogeneous, "common"))

fixed = Scenario(theta=(-2.0, 1.0, 4.0), sigma=(1.0, 2.0, 0.5), replicates=100_000, seed=2)
print("unweighted average:            %.4f" % coverage_study(fixed, "fixed-unweighted"))

###############################################################################
# The optimal estimator with weights from the true effects, and then with
# weights re-estimated from each simulated dataset (the plug-in rule used
# for real data).  The plug-in run solves one problem per replicate.  Weights
# that depend on the observed effects make the interval noticeably too short.
print("optimal, true weights:         %.4f" % coverage_study(fixed, "fixed-optimal"))
small = Scenario(fixed.theta, fixed.sigma, replicates=5_000, seed=3)
print("optimal, plug-in weights:      %.4f" % coverage_study(small, "fixed-optimal", plugin=True))

###############################################################################
# Spreading the effects out pushes the true optimal weights toward equal
# weights, so the bias stays small and coverage barely moves.
wide = Scenario(theta=(-6.0, 1.0, 9.0), sigma=(1.0, 2.0, 0.5), replicates=100_000, seed=4)
print("optimal, wide spread:          %.4f" % coverage_study(wide, "fixed-optimal"))
