"""Reference implementations of the per-frame hot loops.

These are the semantics of record; the compiled module in _kernels_c.pyx
mirrors them exactly and is preferred at import time when available.
All three functions are pure.

Label codes follow core.StateLabel: 0 background, 1 initial,
2 transitioning, 3 end, 4 ambiguous.
"""

import numpy as np

BACKGROUND, INITIAL, TRANSITIONING, END, AMBIGUOUS = 0, 1, 2, 3, 4


def rule_labels(scores: np.ndarray, tau: float, delta: float) -> np.ndarray:
    """Thresholded piecewise rule mapping a T x 3 score matrix to labels.

    Branches in order, first match wins: background when the row sum falls
    below tau; a state when its score beats both others by strictly more
    than delta; ambiguous otherwise.
    """
    s = np.asarray(scores, dtype=np.float64)
    out = np.full(s.shape[0], AMBIGUOUS, dtype=np.int8)
    # assign later branches first so earlier branches overwrite on overlap,
    # reproducing elif semantics for any delta
    out[(s[:, 2] - s[:, 0] > delta) & (s[:, 2] - s[:, 1] > delta)] = END
    out[(s[:, 1] - s[:, 0] > delta) & (s[:, 1] - s[:, 2] > delta)] = TRANSITIONING
    out[(s[:, 0] - s[:, 1] > delta) & (s[:, 0] - s[:, 2] > delta)] = INITIAL
    out[s.sum(axis=1) < tau] = BACKGROUND
    return out


def causal_order(labels: np.ndarray) -> np.ndarray:
    """Demote order-violating state frames to ambiguous.

    Keeps a maximum-cardinality subsequence of state-labeled frames whose
    stages are non-decreasing (initial <= transitioning <= end); every other
    state frame becomes ambiguous. Background and ambiguous frames are left
    untouched and impose no ordering. Ties during backtracking prefer the
    lowest stage.
    """
    labels = np.asarray(labels, dtype=np.int8)
    state_pos = np.flatnonzero((labels >= INITIAL) & (labels <= END))
    m = len(state_pos)
    if m == 0:
        return labels.copy()
    stages = labels[state_pos].astype(np.int64) - 1  # 0=I, 1=T, 2=E

    # dp[i, g]: max frames kept among the first i+1 state frames with the
    # stage progression currently at g
    dp = np.zeros((m, 3), dtype=np.int64)
    for g in range(3):
        dp[0, g] = 1 if stages[0] == g else 0
    for i in range(1, m):
        best = dp[i - 1, 0]
        for g in range(3):
            if dp[i - 1, g] > best:
                best = dp[i - 1, g]
            dp[i, g] = best + (1 if stages[i] == g else 0)

    out = labels.copy()
    g = int(np.argmax(dp[m - 1]))  # argmax takes the lowest stage on ties
    for i in range(m - 1, -1, -1):
        if stages[i] != g:
            out[state_pos[i]] = AMBIGUOUS
        if i > 0:
            best, arg = dp[i - 1, 0], 0
            for h in range(1, g + 1):
                if dp[i - 1, h] > best:
                    best, arg = dp[i - 1, h], h
            g = arg
    return out


def ordered_decode_path(scores: np.ndarray) -> np.ndarray:
    """Best label sequence under the test-time ordering constraint.

    Maximizes the summed per-frame score of a sequence over columns
    (background, initial, transitioning, end) subject to: background is
    allowed anywhere; among non-background frames every initial precedes
    every transitioning precedes every end. Dynamic program over stages
    (pre-initial, initial, transitioning, end); transition ties prefer
    staying in the current stage, emission ties prefer background.
    """
    s = np.asarray(scores, dtype=np.float64)
    T = s.shape[0]
    # emission score per stage: stage 0 emits background only; stage g >= 1
    # emits background or state g, whichever scores higher
    emit = np.empty((T, 4), dtype=np.float64)
    emit[:, 0] = s[:, 0]
    emit[:, 1:] = np.maximum(s[:, 0:1], s[:, 1:])

    dp = np.empty((T, 4), dtype=np.float64)
    dp[0] = emit[0]
    for t in range(1, T):
        best = dp[t - 1, 0]
        for g in range(4):
            if dp[t - 1, g] > best:
                best = dp[t - 1, g]
            dp[t, g] = best + emit[t, g]

    out = np.zeros(T, dtype=np.int8)
    g = int(np.argmax(dp[T - 1]))  # argmax takes the lowest stage on ties
    for t in range(T - 1, -1, -1):
        if g > 0 and s[t, g] > s[t, 0]:
            out[t] = g
        if t > 0:
            # highest predecessor stage on ties, so g itself wins when tied
            best, arg = dp[t - 1, 0], 0
            for h in range(1, g + 1):
                if dp[t - 1, h] >= best:
                    best, arg = dp[t - 1, h], h
            g = arg
    return out
