# A small convergence study: fix the centers, refine the quadrature.
#
# The full-size version of this study is
#   sphg sweep-quadrature --x-sizes 961 --y-sizes 2562,10242,23042,40962
# which takes about a minute; this one is scaled down.
from sphg import ExperimentConfig, RuleCache, sweep_quadrature
from sphg.harness import condition_study, kappa_sensitivity

cfg = ExperimentConfig(problem=1, x_source="fibonacci", x_sizes=[250],
                       y_source="icosahedral", y_sizes=[642, 1442, 2562, 4842],
                       n_eval=20000)
rules = RuleCache()
rec = sweep_quadrature(cfg, rules)
for line in rec.summary_lines():
    print(line)
# steps where the quadrature is coarser than the center spacing are kept
# in the record but not in the fit
print("used in fit:", [s.info["fit"] for s in rec.steps])

# Condition numbers grow like q_X^-2 and barely notice the quadrature
cfg = ExperimentConfig(x_source="fibonacci", x_sizes=[100, 250, 625],
                       y_source="icosahedral", y_sizes=[2562, 4842])
rec = condition_study(cfg, rules)
print(f"kappa {[round(k, 1) for k in rec.kappas]}  slope vs 1/q {rec.rate:.2f}")
print("relative kappa change across Y:", {n: round(v, 4) for n, v in kappa_sensitivity(rec).items()})
