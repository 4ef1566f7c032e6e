"""Compiled inner loops: seeded shuffling, dual coordinate descent, rank AUC.

All kernels release the GIL so distinct work items can run on threads.
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(cache=True, nogil=True)
def _fmix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _shuffle(idx, state):
    # Fisher-Yates driven by a splitmix64 stream; returns the advanced state
    for i in range(idx.shape[0] - 1, 0, -1):
        state = state + _GOLDEN
        j = np.int64(_fmix(state) % np.uint64(i + 1))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
    return state


@njit(cache=True, nogil=True)
def _objectives(X, y, C, alpha, w):
    n, d = X.shape
    ww = 0.0
    for k in range(d):
        ww += w[k] * w[k]
    hinge = 0.0
    asum = 0.0
    for i in range(n):
        m = 0.0
        for k in range(d):
            m += w[k] * X[i, k]
        m = 1.0 - y[i] * m
        if m > 0.0:
            hinge += m
        asum += alpha[i]
    return 0.5 * ww + C * hinge, asum - 0.5 * ww


@njit(cache=True, nogil=True)
def dual_cd(X, y, C, tol, max_epochs, seed, alpha, w, history):
    """L1-loss linear SVM by dual coordinate descent with shrinking.

    ``alpha`` and ``w`` are updated in place (``w = sum alpha_i y_i x_i``).
    Stops once the duality gap over all rows satisfies
    ``primal - dual <= tol * primal``. Returns ``(epochs, primal, dual)``;
    ``history[e]`` receives the dual objective after epoch ``e``.
    """
    n, d = X.shape
    qii = np.empty(n)
    for i in range(n):
        s = 0.0
        for k in range(d):
            s += X[i, k] * X[i, k]
        qii[i] = s
    active = np.arange(n)
    n_active = n
    state = np.uint64(seed)
    pg_max_old = np.inf
    pg_min_old = -np.inf
    pg_eps = 1.0
    primal = 0.0
    dual = 0.0
    since_check = 0
    for epoch in range(max_epochs):
        state = _shuffle(active[:n_active], state)
        pg_max = -np.inf
        pg_min = np.inf
        t = 0
        while t < n_active:
            i = active[t]
            g = 0.0
            for k in range(d):
                g += w[k] * X[i, k]
            g = y[i] * g - 1.0
            a_old = alpha[i]
            pg = 0.0
            if a_old == 0.0:
                if g > pg_max_old:
                    n_active -= 1
                    active[t] = active[n_active]
                    active[n_active] = i
                    continue
                if g < 0.0:
                    pg = g
            elif a_old == C:
                if g < pg_min_old:
                    n_active -= 1
                    active[t] = active[n_active]
                    active[n_active] = i
                    continue
                if g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0 and qii[i] > 0.0:
                a_new = a_old - g / qii[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                step = (a_new - a_old) * y[i]
                for k in range(d):
                    w[k] += step * X[i, k]
                alpha[i] = a_new
            t += 1
        if epoch < history.shape[0]:
            ww = 0.0
            for k in range(d):
                ww += w[k] * w[k]
            asum = 0.0
            for i in range(n):
                asum += alpha[i]
            history[epoch] = asum - 0.5 * ww
        since_check += 1
        if pg_max - pg_min <= pg_eps or since_check >= 16 or n_active == 0:
            primal, dual = _objectives(X, y, C, alpha, w)
            since_check = 0
            if primal - dual <= tol * primal:
                return epoch + 1, primal, dual
            # gap not reached: tighten and re-examine every row
            if pg_max - pg_min <= pg_eps:
                pg_eps *= 0.1
            n_active = n
            pg_max_old = np.inf
            pg_min_old = -np.inf
            continue
        pg_max_old = pg_max if pg_max > 0.0 else np.inf
        pg_min_old = pg_min if pg_min < 0.0 else -np.inf
    primal, dual = _objectives(X, y, C, alpha, w)
    return max_epochs, primal, dual


@njit(cache=True, nogil=True)
def intensity_counts(px, n_bins):
    """Histogram of non-negative integers below ``n_bins``; empty if any is outside."""
    counts = np.zeros(n_bins, dtype=np.int64)
    for i in range(px.shape[0]):
        v = px[i]
        if v < 0 or v >= n_bins:
            return np.zeros(0, dtype=np.int64)
        counts[v] += 1
    return counts


@njit(cache=True, nogil=True)
def rank_auc(scores, positive):
    """Mann-Whitney AUC with tied scores credited one half."""
    n = scores.shape[0]
    order = np.argsort(scores, kind="mergesort")
    rank_sum = 0.0
    n_pos = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        mid = 0.5 * (i + j) + 1.0
        for t in range(i, j + 1):
            if positive[order[t]]:
                rank_sum += mid
                n_pos += 1
        i = j + 1
    n_neg = n - n_pos
    return (rank_sum - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg)


@njit(cache=True, nogil=True)
def _standardize_fold(X, train):
    n, d = X.shape
    Z = np.empty((n, d + 1))
    n_train = 0
    for i in range(n):
        if train[i]:
            n_train += 1
    for k in range(d):
        mu = 0.0
        for i in range(n):
            if train[i]:
                mu += X[i, k]
        mu /= n_train
        var = 0.0
        for i in range(n):
            if train[i]:
                var += (X[i, k] - mu) ** 2
        sd = np.sqrt(var / n_train)
        scale = 0.0 if sd <= 1e-12 * max(1.0, abs(mu)) else 1.0 / sd
        for i in range(n):
            Z[i, k] = (X[i, k] - mu) * scale
    for i in range(n):
        Z[i, d] = 1.0
    return Z


@njit(cache=True, nogil=True)
def cv_oof_scores(X, y, fold_of, n_folds, C, tol, max_epochs, seeds):
    """Out-of-fold decision scores for one fold assignment.

    Each fold standardizes on its training rows and trains with ``seeds[f]``.
    """
    n, d = X.shape
    scores = np.empty(n)
    history = np.empty(0)
    for f in range(n_folds):
        train = fold_of != f
        Z = _standardize_fold(X, train)
        Xt = Z[train]
        yt = y[train]
        alpha = np.zeros(Xt.shape[0])
        w = np.zeros(d + 1)
        dual_cd(Xt, yt, C, tol, max_epochs, seeds[f], alpha, w, history)
        for i in range(n):
            if not train[i]:
                s = 0.0
                for k in range(d + 1):
                    s += Z[i, k] * w[k]
                scores[i] = s
    return scores


@njit(cache=True, nogil=True)
def cv_repeat_aucs(X, y, folds, n_folds, C, tol, max_epochs, seeds, pooled):
    """One AUC per row of ``folds``; ``seeds`` has shape (repeats, n_folds)."""
    repeats, n = folds.shape
    positive = y > 0
    out = np.empty(repeats)
    for r in range(repeats):
        fold_of = folds[r]
        scores = cv_oof_scores(X, y, fold_of, n_folds, C, tol, max_epochs, seeds[r])
        if pooled:
            out[r] = rank_auc(scores, positive)
        else:
            acc = 0.0
            for f in range(n_folds):
                sel = fold_of == f
                acc += rank_auc(scores[sel], positive[sel])
            out[r] = acc / n_folds
    return out
