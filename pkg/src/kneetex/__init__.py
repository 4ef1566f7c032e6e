"""Texture-based knee osteoarthritis detection from radiograph ROIs."""
__version__ = "0.1.0"

from .dataset import (FeatureMatrix, mask_features, mask_hex, parse_mask, read_features_csv,
                      write_features_csv)
from .evaluation import (CvSpec, auc, cv_auc, cv_aucs, mix64, oof_scores, project_2d, roc_curve,
                         stratified_kfold)
from .geometry import (LandmarkSet, OrientedRect, Patch, RoiLayout, build_layout, canonical_view,
                       extract_patch, femoral_rois, mirror_for_laterality, plateau_frame,
                       tibia_rois)
from .imageio import read_image
from .landmarks import load_landmarks
from .search import best_per_cardinality, rank_top, search_all, search_masks
from .stats import normality_check, screen_features, welch_t_test
from .svm import (decision_scores, fit_standardized, standardize_apply, standardize_fit,
                  svm_train)
from .synth import (CohortSpec, entropy_shaped_patch, fbm_patch, planted_cohort,
                    write_synthetic_cohort)
from .texture import FEATURE_NAMES, entropy, estimate_hurst, feature_vector, hurst
