"""
Per-feature Welch screening
===========================

Each of the 12 features is compared between cases and controls with an
unequal-variance t-test, next to a per-class normality check.
"""

# %%
from kneetex.stats import screen_features, table_grid, welch_t_test
from kneetex.synth import CohortSpec, planted_cohort

r = welch_t_test([0, 1, 2], [3, 4, 5])
print(f"t={r.t_statistic:.4f} df={r.degrees_of_freedom:.2f} p={r.p_value:.4f}")

# %%
# A synthetic cohort where only H_F0 differs between the classes.
cohort = planted_cohort(CohortSpec.with_effects({"H_F0": -0.05}, seed=3))
rows = screen_features(cohort)
for row in rows[:3]:
    t = row.test
    print(f"{t.feature_name}: t={t.t_statistic:+.2f} p={t.p_value:.2g} normal={row.normal}")

# %%
# The same results as a 2 x 6 grid (rows H and E, columns ROIs).
print(table_grid(rows))
