import numpy as np
import pytest

from kneetex.dataset import FULL_MASK, mask_features, popcount
from kneetex.errors import KneeTexError
from kneetex.evaluation import CvSpec, cv_auc
from kneetex.search import (best_of, best_per_cardinality, masks_of_size, rank_top, search_all,
                            search_masks)
from kneetex.synth import CohortSpec, planted_cohort

CV = CvSpec(folds=5, repeats=2, base_seed=13)


@pytest.fixture(scope="module")
def small_cohort():
    spec = CohortSpec.with_effects({"H_F0": -0.06, "E_T3": 0.4}, n_case=20, n_control=24, seed=4)
    return planted_cohort(spec)


@pytest.fixture(scope="module")
def full_results(small_cohort):
    return search_all(small_cohort, CV)


def test_full_search_shape(full_results):
    assert len(full_results) == 4095
    assert [r.mask for r in full_results] == list(range(1, 4096))
    for r in full_results:
        assert r.cardinality == popcount(r.mask)
        assert 0.0 <= r.mean_auc <= 1.0


def test_singletons_match_cv_auc(small_cohort, full_results):
    for j in range(12):
        mask = 1 << j
        mean, std = cv_auc(small_cohort, mask, CV)
        r = full_results[mask - 1]
        assert (r.mean_auc, r.std_auc) == (mean, std)


def test_threads_identical(small_cohort):
    masks = range(1, 400)
    serial = search_masks(small_cohort, masks, CV, threads=1)
    parallel = search_masks(small_cohort, masks, CV, threads=4)
    assert serial == parallel


def test_resumed_ranges_identical(small_cohort, full_results):
    parts = (search_all(small_cohort, CV, mask_from=1, mask_to=777)
             + search_all(small_cohort, CV, mask_from=778, mask_to=FULL_MASK))
    assert parts == full_results


def test_on_chunk_streams_in_order(small_cohort):
    seen = []
    out = search_masks(small_cohort, range(1, 200), CV, threads=3,
                       on_chunk=lambda part: seen.extend(r.mask for r in part))
    assert seen == [r.mask for r in out] == list(range(1, 200))


def test_best_per_cardinality(full_results):
    best = best_per_cardinality(full_results)
    assert [b.cardinality for b in best] == list(range(1, 13))
    assert best[-1].mask == FULL_MASK
    for b in best:
        same = [r for r in full_results if r.cardinality == b.cardinality]
        assert b.mean_auc == max(r.mean_auc for r in same)
    assert sum(len(masks_of_size(n)) for n in range(1, 13)) == 4095


def test_best_pair_is_planted(full_results):
    best = best_per_cardinality(full_results)
    assert set(mask_features(best[1].mask)) == {"H_F0", "E_T3"}


def test_best_per_cardinality_needs_all(full_results):
    with pytest.raises(KneeTexError):
        best_per_cardinality(full_results[:-1])


def test_rank_top(full_results):
    assert rank_top(full_results, 1)[0] == best_of(full_results)
    assert len(rank_top(full_results, 5000)) == 4095
    top = rank_top(full_results, 5)
    assert all(a.mean_auc >= b.mean_auc for a, b in zip(top, top[1:]))
    for r in top:
        assert {"H_F0", "E_T3"} <= set(mask_features(r.mask))


def test_tie_break_lower_mask():
    from kneetex.search import SubsetResult
    rs = [SubsetResult(5, 0.7, 0.0), SubsetResult(3, 0.7, 0.0), SubsetResult(9, 0.6, 0.0)]
    assert best_of(rs).mask == 3


def test_bad_mask_range(small_cohort):
    with pytest.raises(KneeTexError):
        search_all(small_cohort, CV, mask_from=0)
    with pytest.raises(KneeTexError):
        search_masks(small_cohort, [4096], CV)


def test_non_monotone_best_sequence_is_reported_as_is():
    from kneetex.search import SubsetResult
    # best AUC rises to n=5 then drops at n=6; nothing may smooth it
    auc_by_n = {n: 0.6 + 0.05 * min(n, 5) - (0.2 if n == 6 else 0.0) for n in range(1, 13)}
    rs = [SubsetResult(m, auc_by_n[popcount(m)] - 1e-6 * m, 0.0) for m in range(1, FULL_MASK + 1)]
    best = [b.mean_auc for b in best_per_cardinality(rs)]
    assert best[5] < best[4]


@pytest.fixture(scope="module")
def full_cohort_pairs():
    """Best 2-subset and the cohort itself for 20 seeds at 67 cases / 86 controls."""
    out = []
    for seed in range(20):
        m = planted_cohort(CohortSpec.with_effects({"H_F0": -0.05, "E_T3": 0.3}, seed=seed))
        pairs = search_masks(m, masks_of_size(2), CvSpec(repeats=20, base_seed=seed))
        out.append((m, best_of(pairs)))
    return out


@pytest.mark.slow
def test_planted_pair_recovered_across_seeds(full_cohort_pairs):
    # the best 2-subset of the full table is the best of the 66 two-feature masks
    hits = sum(set(mask_features(b.mask)) == {"H_F0", "E_T3"} for _, b in full_cohort_pairs)
    assert hits >= 19


@pytest.mark.slow
def test_noise_feature_changes_auc_by_little(full_cohort_pairs):
    m, best = full_cohort_pairs[0]
    spec = CvSpec(repeats=100, base_seed=0)
    base, _ = cv_auc(m, best.mask, spec)
    for j in range(12):
        if not best.mask >> j & 1:
            noisy, _ = cv_auc(m, best.mask | 1 << j, spec)
            assert abs(noisy - base) < 0.05
