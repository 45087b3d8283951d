"""Reporting metrics: top-K mean fitness and mean pairwise diversity."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .core import AssessedRecord

logger = logging.getLogger(__name__)


def _best_per_key(archive: Sequence[AssessedRecord]) -> list[AssessedRecord]:
    best: dict[str, AssessedRecord] = {}
    for r in archive:
        key = r.candidate.canonical_key
        cur = best.get(key)
        if cur is None or r.fitness > cur.fitness or (r.fitness == cur.fitness and r.call_id < cur.call_id):
            best[key] = r
    return sorted(best.values(), key=lambda r: (-r.fitness, r.call_id))


def top_k_means(archive: Sequence[AssessedRecord], ks: Sequence[int]) -> dict[int, float]:
    """Mean fitness of the top-k distinct candidates, for several k in one pass.

    Distinct by canonical key (best record per key); a k larger than the
    number of distinct candidates averages over all of them with a warning.
    """
    if len(archive) == 0:
        raise ValueError("cannot rank an empty archive")
    if any(k < 1 for k in ks):
        raise ValueError("k must be positive")
    ranked = _best_per_key(archive)
    out = {}
    for k in ks:
        if k > len(ranked):
            logger.warning("only %d distinct candidates for top-%d; averaging over all", len(ranked), k)
        top = ranked[:k]
        out[k] = sum(r.fitness for r in top) / len(top)
    return out


def top_k_mean(archive: Sequence[AssessedRecord], k: int) -> float:
    return top_k_means(archive, [k])[k]


def diversity(records: Sequence[AssessedRecord]) -> float:
    """Mean squared-Euclidean fingerprint distance over all unordered pairs."""
    n = len(records)
    if n < 2:
        raise ValueError("diversity needs at least two records")
    fps = np.stack([r.fingerprint for r in records]).astype(np.float64)
    sq = np.einsum("ij,ij->i", fps, fps)
    d = sq[:, None] + sq[None, :] - 2.0 * (fps @ fps.T)
    np.maximum(d, 0.0, out=d)
    total = (d.sum() - np.trace(d)) / 2.0
    return float(total / (n * (n - 1) / 2))
