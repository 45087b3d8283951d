"""Oracle proxy: utility surrogate, novelty-based uncertainty, greedy screening.

The pre-screener picks the next population from the candidate pool without
spending any assessment budget. Exploitation comes from a k-NN regressor over
fingerprints predicting combined fitness; exploration comes from a per-round
novelty constraint: a candidate is only eligible if its minimum squared
distance to the already-selected offspring exceeds a fraction of the round's
maximum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as kernels
from .core import BITSTRING, REAL_VECTOR, AssessedRecord, Candidate

logger = logging.getLogger(__name__)

WEIGHTINGS = ("uniform", "inverse_distance")


class UnsupportedDomainError(ValueError):
    """Raised for candidates with no locally computable fingerprint."""


def fingerprint(candidate: Candidate) -> np.ndarray:
    """Feature vector of a candidate: identity features for both toy domains.

    Token candidates have no local feature map; their fingerprints come from
    the external assessor alongside the scores.
    """
    if candidate.kind == BITSTRING:
        return candidate.bits_array()
    if candidate.kind == REAL_VECTOR:
        return candidate.vector_array()
    raise UnsupportedDomainError(
        "token candidates have no local fingerprint; use the one supplied by the external assessor"
    )


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance between two fingerprints."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"fingerprint length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.dot(d, d))


def uncertainty(x: np.ndarray, selected: Sequence[np.ndarray]) -> float:
    """Novelty of ``x``: min distance to the selected set, +inf when it is empty."""
    if len(selected) == 0:
        return math.inf
    return min(distance(x, s) for s in selected)


@dataclass(frozen=True)
class UtilityModel:
    """k-NN regressor over (fingerprint, fitness) pairs.

    Nearest neighbors are ranked by (distance, call_id); with inverse-distance
    weighting an exact fingerprint match short-circuits to that record's
    fitness (lowest call_id wins if several match exactly).
    """

    fingerprints: np.ndarray
    fitness: np.ndarray
    call_ids: np.ndarray
    k: int
    weighting: str

    @property
    def dim(self) -> int:
        return self.fingerprints.shape[1]


def fit_utility(
    assessed: Sequence[AssessedRecord], k: int = 5, weighting: str = "inverse_distance"
) -> UtilityModel:
    """Build the utility model from every assessed record so far."""
    if len(assessed) == 0:
        raise ValueError("cannot fit a utility model on an empty training set")
    if k < 1:
        raise ValueError("k must be >= 1")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")
    fps = np.stack([r.fingerprint for r in assessed]).astype(np.float64)
    fit = np.array([r.fitness for r in assessed], dtype=np.float64)
    ids = np.array([r.call_id for r in assessed], dtype=np.int64)
    return UtilityModel(fps, fit, ids, k, weighting)


def _neighbor_order(dist_row: np.ndarray, call_ids: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows, ordered by (distance, call_id)."""
    n = dist_row.shape[0]
    if n <= k:
        return np.lexsort((call_ids, dist_row))
    kth = np.partition(dist_row, k - 1)[k - 1]
    near = np.flatnonzero(dist_row <= kth)
    order = near[np.lexsort((call_ids[near], dist_row[near]))]
    return order[:k]


def _combine_neighbors(dists: np.ndarray, fits: np.ndarray, weighting: str) -> float:
    # plain sequential float arithmetic, reproducible against a scalar reference
    if weighting == "inverse_distance":
        if dists[0] == 0.0:
            return float(fits[0])
        num = 0.0
        den = 0.0
        for d, f in zip(dists.tolist(), fits.tolist()):
            w = 1.0 / d
            num += w * f
            den += w
        return num / den
    acc = 0.0
    for f in fits.tolist():
        acc += f
    return acc / dists.shape[0]


def predict_utility_many(model: UtilityModel, queries: np.ndarray) -> np.ndarray:
    """Predicted fitness for a batch of query fingerprints."""
    q = np.ascontiguousarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != model.dim:
        raise ValueError(f"query fingerprints of shape {q.shape} do not match model dim {model.dim}")
    out = np.empty(q.shape[0], dtype=np.float64)
    # chunk the distance matrix to keep peak memory around 32 MB
    chunk = max(1, (1 << 22) // max(1, model.fingerprints.shape[0]))
    for start in range(0, q.shape[0], chunk):
        block = kernels.sqdist_matrix(q[start : start + chunk], model.fingerprints)
        for i in range(block.shape[0]):
            idx = _neighbor_order(block[i], model.call_ids, model.k)
            out[start + i] = _combine_neighbors(block[i][idx], model.fitness[idx], model.weighting)
    return out


def predict_utility(model: UtilityModel, x: np.ndarray) -> float:
    """Predicted fitness for one query fingerprint."""
    return float(predict_utility_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


@dataclass(frozen=True)
class ScreeningConfig:
    """Greedy-selection knobs: novelty weight and how many offspring to keep."""

    lam: float = 0.35
    n_select: int = 1

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise ValueError(f"lambda must be in [0, 1), got {self.lam}")
        if self.n_select < 1:
            raise ValueError("n_select must be positive")


@dataclass(frozen=True)
class RoundTrace:
    """One greedy-selection round; threshold is None for the first round."""

    threshold: float | None
    uncertainty: float
    utility: float
    fallback: bool


@dataclass(frozen=True)
class ScreenStats:
    mean_threshold: float
    fallback_count: int


def select_offspring(
    candidates: Sequence[Candidate], model: UtilityModel, cfg: ScreeningConfig
) -> tuple[list[Candidate], list[RoundTrace]]:
    """Pick ``cfg.n_select`` offspring greedily (or all candidates when fewer).

    Each round recomputes novelty against the already-selected set; ties in
    utility break by pool order. The same pool position is never picked twice,
    but identical payloads at different positions can both be selected when
    everything else duplicates the selected set.
    """
    if len(candidates) == 0:
        raise ValueError("cannot screen an empty candidate list")
    fps = np.stack([fingerprint(c) for c in candidates])
    utils = predict_utility_many(model, fps)
    sel, thresholds, chosen_unc, fallback = kernels.greedy_select(fps, utils, cfg.lam, cfg.n_select)
    rounds = [
        RoundTrace(
            threshold=None if i == 0 else float(thresholds[i]),
            uncertainty=float(chosen_unc[i]),
            utility=float(utils[sel[i]]),
            fallback=bool(fallback[i]),
        )
        for i in range(sel.shape[0])
    ]
    return [candidates[i] for i in sel], rounds


def _stats_from_rounds(rounds: Sequence[RoundTrace]) -> ScreenStats:
    taus = [r.threshold for r in rounds if r.threshold is not None]
    mean_tau = float(sum(taus) / len(taus)) if taus else 0.0
    return ScreenStats(mean_tau, sum(1 for r in rounds if r.fallback))


class SurrogateScreener:
    """Population selector backed by the utility model.

    ``mode`` selects the ablation behavior: "full" applies the complete
    utility-under-novelty rule, "utility" ranks purely by predicted fitness,
    "uncertainty" picks the most novel candidate each round.
    """

    def __init__(
        self,
        config: ScreeningConfig,
        k: int = 5,
        weighting: str = "inverse_distance",
        mode: str = "full",
    ):
        if mode not in ("full", "utility", "uncertainty"):
            raise ValueError(f"unknown screener mode {mode!r}")
        if weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {weighting!r}")
        self.config = config
        self.k = k
        self.weighting = weighting
        self.mode = mode
        self._n_seen = 0
        self._fps: np.ndarray | None = None
        self._fit = np.empty(0, dtype=np.float64)
        self._ids = np.empty(0, dtype=np.int64)

    def _absorb(self, archive: Sequence[AssessedRecord]) -> None:
        # append-only training set; records never change once assessed
        new = archive[self._n_seen :]
        if not new:
            return
        if self._fps is None:
            dim = new[0].fingerprint.shape[0]
            self._fps = np.empty((0, dim), dtype=np.float64)
        add_fps = np.stack([r.fingerprint for r in new]).astype(np.float64)
        self._fps = np.concatenate([self._fps, add_fps])
        self._fit = np.concatenate([self._fit, [r.fitness for r in new]])
        self._ids = np.concatenate([self._ids, np.array([r.call_id for r in new], dtype=np.int64)])
        self._n_seen = len(archive)

    def model(self) -> UtilityModel:
        if self._n_seen == 0:
            raise ValueError("no assessed records absorbed yet")
        return UtilityModel(self._fps, self._fit, self._ids, self.k, self.weighting)

    def screen(
        self, candidates: Sequence[Candidate], archive: Sequence[AssessedRecord], iteration: int
    ) -> tuple[list[Candidate], ScreenStats]:
        if len(candidates) == 0:
            raise ValueError("cannot screen an empty candidate pool")
        self._absorb(archive)
        if self.mode == "uncertainty":
            return self._screen_uncertainty(candidates)
        model = self.model()
        if self.mode == "utility":
            fps = np.stack([fingerprint(c) for c in candidates])
            utils = predict_utility_many(model, fps)
            order = np.argsort(-utils, kind="stable")[: self.config.n_select]
            return [candidates[i] for i in order], ScreenStats(0.0, 0)
        selected, rounds = select_offspring(candidates, model, self.config)
        return selected, _stats_from_rounds(rounds)

    def _screen_uncertainty(self, candidates: Sequence[Candidate]) -> tuple[list[Candidate], ScreenStats]:
        # greedy farthest-point traversal; round 0 degenerates to pool order
        fps = np.stack([fingerprint(c) for c in candidates]).astype(np.float64)
        n = fps.shape[0]
        rounds = min(self.config.n_select, n)
        active = np.ones(n, dtype=bool)
        unc = np.full(n, np.inf)
        picked: list[int] = []
        for r in range(rounds):
            pick = int(np.where(active, unc, -np.inf).argmax())
            picked.append(pick)
            active[pick] = False
            if r + 1 < rounds:
                row = ((fps - fps[pick]) ** 2).sum(axis=1)
                np.minimum(unc, row, out=unc)
        return [candidates[i] for i in picked], ScreenStats(0.0, 0)


class TruncationScreener:
    """No pre-screener: next population is the candidate pool truncated in order."""

    def __init__(self, n_select: int):
        if n_select < 1:
            raise ValueError("n_select must be positive")
        self.n_select = n_select

    def screen(
        self, candidates: Sequence[Candidate], archive: Sequence[AssessedRecord], iteration: int
    ) -> tuple[list[Candidate], ScreenStats]:
        if len(candidates) == 0:
            raise ValueError("cannot screen an empty candidate pool")
        return list(candidates[: self.n_select]), ScreenStats(0.0, 0)
