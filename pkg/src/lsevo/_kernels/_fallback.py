"""Pure-numpy implementations of the hot kernels.

Semantics are identical to the compiled extension: same tie-breaks (first
index wins every argmax), same threshold rule, same update order. On 0/1 and
other dyadic-grid inputs the floating-point results are bit-identical to the
compiled path; on arbitrary float inputs they may differ in the last ulp
because numpy reduces sums pairwise.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def sqdist_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(x), len(y))."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    xx = np.einsum("ij,ij->i", x, x)
    yy = np.einsum("ij,ij->i", y, y)
    d = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d, 0.0, out=d)
    return d


def greedy_select(fps, util, lam, n_select):
    """Greedy utility-under-novelty-constraint selection.

    Round 0 picks pure argmax utility. Every later round recomputes each
    remaining candidate's novelty (min squared distance to the selected set),
    sets the threshold to ``lam * max(novelty)`` over remaining candidates,
    and picks the highest-utility candidate above the threshold. When nothing
    passes (only possible when max novelty is 0) it falls back to pure argmax
    utility. Returns (indices, thresholds, chosen novelty, fallback flags);
    thresholds[0] is NaN.
    """
    fps = np.ascontiguousarray(fps, dtype=np.float64)
    util = np.ascontiguousarray(util, dtype=np.float64)
    n = fps.shape[0]
    rounds = min(int(n_select), n) if n_select > 0 else 0

    sel = np.empty(rounds, dtype=np.int64)
    thresholds = np.empty(rounds, dtype=np.float64)
    chosen_unc = np.empty(rounds, dtype=np.float64)
    fallback = np.zeros(rounds, dtype=np.uint8)

    active = np.ones(n, dtype=bool)
    unc = np.full(n, np.inf)

    for r in range(rounds):
        if r == 0:
            pick = int(np.where(active, util, -np.inf).argmax())
            thresholds[0] = np.nan
        else:
            tau = lam * float(unc[active].max())
            eligible = active & (unc > tau)
            if eligible.any():
                pick = int(np.where(eligible, util, -np.inf).argmax())
            else:
                pick = int(np.where(active, util, -np.inf).argmax())
                fallback[r] = 1
            thresholds[r] = tau
        sel[r] = pick
        chosen_unc[r] = unc[pick]
        active[pick] = False
        if r + 1 < rounds:
            row = ((fps - fps[pick]) ** 2).sum(axis=1)
            np.minimum(unc, row, out=unc)

    return sel, thresholds, chosen_unc, fallback
