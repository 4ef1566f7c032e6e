"""
Linear SVM and cross-validated AUC
==================================

An L1-loss linear SVM is fitted by dual coordinate descent on standardized
features, and scored by repeated stratified k-fold cross-validation.
"""

# %%
import numpy as np

from kneetex.dataset import parse_mask
from kneetex.evaluation import CvSpec, cv_auc, oof_scores, project_2d, roc_curve
from kneetex.svm import fit_standardized, svm_train
from kneetex.synth import CohortSpec, planted_cohort

rng = np.random.default_rng(0)
X = rng.normal(size=(40, 2))
y = np.where(X[:, 0] + 0.3 * rng.normal(size=40) > 0, 1.0, -1.0)
model = svm_train(X, y, C=1.0)
print("w", np.round(model.weights, 3), "b", round(model.bias, 3),
      "gap", f"{model.duality_gap:.1e}", "epochs", model.epochs)

# %%
# Cross-validated AUC of a feature subset on a planted cohort.
cohort = planted_cohort(CohortSpec.with_effects({"H_F0": -0.05, "E_T3": 0.3}, seed=1))
mask = parse_mask("H_F0+E_T3")
spec = CvSpec(folds=5, repeats=20, base_seed=1)
mean, std = cv_auc(cohort, mask, spec)
print(f"cv AUC {mean:.3f} +/- {std:.3f}")

# %%
# Pooled out-of-fold ROC for one repeat.
scores = oof_scores(cohort, mask, spec, repeat=0)
roc = roc_curve(scores, cohort.labels)
print("ROC points", len(roc.fpr), "AUC", round(roc.auc, 3))

# %%
# 2-D projection: x is the SVM decision direction.
rows = cohort.columns(mask)
fit = fit_standardized(rows, np.where(cohort.labels == 1, 1.0, -1.0))
proj = project_2d(rows, fit)
print("projected", proj.x.shape, "hyperplane at x =", round(proj.threshold, 3))
