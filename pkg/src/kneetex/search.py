"""Exhaustive evaluation of feature subsets and best-per-cardinality summaries."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence


from .dataset import FULL_MASK, N_FEATURES, FeatureMatrix, popcount
from .errors import KneeTexError
from .evaluation import CvSpec, cv_aucs, fold_table
from .svm import DEFAULT_C

CHUNK = 64


@dataclass(frozen=True)
class SubsetResult:
    mask: int
    mean_auc: float
    std_auc: float

    @property
    def cardinality(self) -> int:
        return popcount(self.mask)


def resolve_threads(threads: int) -> int:
    if threads <= 0:
        return os.cpu_count() or 1
    return threads


def search_masks(matrix: FeatureMatrix, masks: Iterable[int], spec: CvSpec,
                 C: float = DEFAULT_C, threads: int = 1, pooled: bool = True,
                 on_chunk: Optional[Callable[[List[SubsetResult]], None]] = None
                 ) -> List[SubsetResult]:
    """Evaluate ``masks`` (sorted, de-duplicated) and return results in mask order.

    Work is cut into fixed chunks of consecutive masks. ``on_chunk`` receives
    each chunk's results in mask order, never out of order, so callers can
    stream them.
    """
    masks = sorted(set(int(m) for m in masks))
    for m in masks:
        if not 0 < m <= FULL_MASK:
            raise KneeTexError(f"mask {m} outside 1..{FULL_MASK}")
    folds = fold_table(matrix.labels, spec)

    def run(chunk):
        out = []
        for m in chunk:
            aucs = cv_aucs(matrix, m, spec, C=C, pooled=pooled, folds=folds)
            std = float(aucs.std(ddof=1)) if aucs.size > 1 else 0.0
            out.append(SubsetResult(m, float(aucs.mean()), std))
        return out

    chunks = [masks[i:i + CHUNK] for i in range(0, len(masks), CHUNK)]
    results: List[SubsetResult] = []
    n_threads = resolve_threads(threads)
    if n_threads == 1:
        mapped = map(run, chunks)
        pool = None
    else:
        pool = ThreadPoolExecutor(max_workers=n_threads)
        mapped = pool.map(run, chunks)
    try:
        for part in mapped:
            results.extend(part)
            if on_chunk is not None:
                on_chunk(part)
    finally:
        if pool is not None:
            pool.shutdown()
    return results


def search_all(matrix: FeatureMatrix, spec: CvSpec, C: float = DEFAULT_C, threads: int = 1,
               mask_from: int = 1, mask_to: int = FULL_MASK, **kw) -> List[SubsetResult]:
    """Cross-validated AUC of every mask in ``mask_from..mask_to`` (inclusive)."""
    if not 1 <= mask_from <= mask_to <= FULL_MASK:
        raise KneeTexError(f"mask range must satisfy 1 <= from <= to <= {FULL_MASK}")
    return search_masks(matrix, range(mask_from, mask_to + 1), spec, C=C, threads=threads, **kw)


def _better(a: SubsetResult, b: SubsetResult) -> bool:
    return a.mean_auc > b.mean_auc or (a.mean_auc == b.mean_auc and a.mask < b.mask)


def best_of(results: Iterable[SubsetResult]) -> SubsetResult:
    best = None
    for r in results:
        if best is None or _better(r, best):
            best = r
    if best is None:
        raise KneeTexError("no results")
    return best


def best_per_cardinality(results: Sequence[SubsetResult]) -> List[SubsetResult]:
    """Best mask for each subset size 1..12 (ties go to the lower mask)."""
    masks = {r.mask for r in results}
    if len(results) != FULL_MASK or masks != set(range(1, FULL_MASK + 1)):
        raise KneeTexError(f"need exactly one result for every mask 1..{FULL_MASK}, "
                           f"got {len(masks)} distinct of {len(results)}")
    by_n = {n: [] for n in range(1, N_FEATURES + 1)}
    for r in results:
        by_n[r.cardinality].append(r)
    return [best_of(by_n[n]) for n in range(1, N_FEATURES + 1)]


def rank_top(results: Sequence[SubsetResult], k: int) -> List[SubsetResult]:
    if not results:
        raise KneeTexError("no results to rank")
    ordered = sorted(results, key=lambda r: (-r.mean_auc, r.mask))
    return ordered[:max(k, 0)]


def masks_of_size(n: int) -> List[int]:
    return [m for m in range(1, FULL_MASK + 1) if popcount(m) == n]
