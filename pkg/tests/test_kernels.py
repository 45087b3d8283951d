"""Backend equivalence: compiled and numpy kernels match a scalar reference.

On 0/1 and half-integer grids every float op is exact, so the comparison is
bitwise, not approximate.
"""

import math

import numpy as np
import pytest

from lsevo._kernels import _fallback

BACKENDS = [_fallback]
try:
    from lsevo._kernels import _compiled

    BACKENDS.append(_compiled)
except ImportError:
    pass


def ref_sqdist(a, b):
    acc = 0.0
    for x, y in zip(a, b):
        d = x - y
        acc += d * d
    return acc


def ref_greedy_select(fps, util, lam, n_select):
    """Scalar-python reference for the constrained greedy selection."""
    n = len(fps)
    rounds = min(n_select, n)
    active = [True] * n
    unc = [math.inf] * n
    sel, thresholds, chosen, fallback = [], [], [], []

    def argmax_util(allowed):
        best, best_u = -1, -math.inf
        for i in range(n):
            if allowed[i] and util[i] > best_u:
                best, best_u = i, util[i]
        return best

    for r in range(rounds):
        if r == 0:
            pick = argmax_util(active)
            thresholds.append(math.nan)
            fallback.append(False)
        else:
            tau = lam * max(unc[i] for i in range(n) if active[i])
            eligible = [active[i] and unc[i] > tau for i in range(n)]
            if any(eligible):
                pick = argmax_util(eligible)
                fallback.append(False)
            else:
                pick = argmax_util(active)
                fallback.append(True)
            thresholds.append(tau)
        sel.append(pick)
        chosen.append(unc[pick])
        active[pick] = False
        for i in range(n):
            if active[i]:
                unc[i] = min(unc[i], ref_sqdist(fps[i], fps[pick]))
    return sel, thresholds, chosen, fallback


def grid_pool(rng, n, d, half_grid):
    if half_grid:
        return rng.integers(0, 7, size=(n, d)).astype(np.float64) / 2.0
    return rng.integers(0, 2, size=(n, d)).astype(np.float64)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
class TestSqdistMatrix:
    def test_matches_reference(self, backend):
        rng = np.random.default_rng(0)
        x = grid_pool(rng, 13, 7, half_grid=True)
        y = grid_pool(rng, 9, 7, half_grid=True)
        out = backend.sqdist_matrix(x, y)
        for i in range(13):
            for j in range(9):
                assert out[i, j] == ref_sqdist(x[i], y[j])

    def test_zero_diagonal(self, backend):
        x = grid_pool(np.random.default_rng(1), 6, 5, half_grid=False)
        d = backend.sqdist_matrix(x, x)
        assert np.all(np.diag(d) == 0.0)
        assert np.array_equal(d, d.T)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
@pytest.mark.parametrize("half_grid", [False, True])
def test_greedy_select_matches_reference(backend, half_grid):
    rng = np.random.default_rng(99)
    for trial in range(30):
        n = int(rng.integers(1, 60))
        d = int(rng.integers(1, 12))
        fps = grid_pool(rng, n, d, half_grid)
        util = rng.random(n)
        if trial % 3 == 0:
            # duplicate utilities and fingerprints to exercise tie-breaks
            util = np.round(util, 1)
            fps[rng.integers(0, n)] = fps[rng.integers(0, n)]
        n_select = int(rng.integers(1, n + 5))
        lam = float(rng.choice([0.0, 0.35, 0.6, 0.9]))
        sel, thr, unc, fb = backend.greedy_select(fps, util, lam, n_select)
        rsel, rthr, runc, rfb = ref_greedy_select(fps.tolist(), util.tolist(), lam, n_select)
        assert sel.tolist() == rsel
        assert np.array_equal(thr, np.array(rthr), equal_nan=True)
        assert unc.tolist() == runc
        assert fb.astype(bool).tolist() == rfb


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_greedy_select_degenerate_sizes(backend):
    fps = np.array([[0.0, 1.0]])
    sel, thr, unc, fb = backend.greedy_select(fps, np.array([0.5]), 0.35, 3)
    assert sel.tolist() == [0]
    sel, *_ = backend.greedy_select(fps, np.array([0.5]), 0.35, 0)
    assert sel.tolist() == []


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backends_agree_bitwise_on_grids():
    rng = np.random.default_rng(5)
    for half_grid in (False, True):
        fps = grid_pool(rng, 80, 16, half_grid)
        util = rng.random(80)
        a = _fallback.greedy_select(fps, util, 0.35, 40)
        b = BACKENDS[1].greedy_select(fps, util, 0.35, 40)
        for x, y in zip(a, b):
            assert np.array_equal(x, y, equal_nan=True)
        assert np.array_equal(_fallback.sqdist_matrix(fps[:20], fps), BACKENDS[1].sqdist_matrix(fps[:20], fps))
