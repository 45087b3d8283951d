"""Shared domain types: candidates, assessed records, fitness combination, elites.

A candidate is one point of the observation space. Three payload variants are
supported: a 0/1 bitstring, a real vector, or an opaque token string (used with
external assessors, e.g. a molecular line notation). Every candidate carries a
deterministic ``canonical_key`` used for identity and deduplication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BITSTRING = "bitstring"
REAL_VECTOR = "real_vector"
TOKEN = "token"

COMBINERS = ("sum", "mean", "product")


@dataclass(frozen=True)
class Candidate:
    """Immutable search-space point with a canonical identity key."""

    kind: str
    payload: str | tuple[float, ...]
    canonical_key: str = field(init=False, compare=False)

    def __post_init__(self):
        if self.kind == BITSTRING:
            if not isinstance(self.payload, str) or len(self.payload) < 1:
                raise ValueError("bitstring payload must be a non-empty str")
            if set(self.payload) - {"0", "1"}:
                raise ValueError(f"bitstring payload contains non-binary chars: {self.payload!r}")
            key = "b:" + self.payload
        elif self.kind == REAL_VECTOR:
            if not isinstance(self.payload, tuple) or len(self.payload) < 1:
                raise ValueError("real vector payload must be a non-empty tuple")
            if not all(math.isfinite(x) for x in self.payload):
                raise ValueError("real vector payload must be finite")
            # repr() round-trips float64 exactly, so equal payloads give equal keys
            key = "r:" + ",".join(repr(x) for x in self.payload)
        elif self.kind == TOKEN:
            if not isinstance(self.payload, str) or not self.payload:
                raise ValueError("token payload must be a non-empty str")
            key = "t:" + self.payload
        else:
            raise ValueError(f"unknown candidate kind: {self.kind!r}")
        object.__setattr__(self, "canonical_key", key)

    @classmethod
    def from_bits(cls, bits: str) -> "Candidate":
        return cls(BITSTRING, bits)

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> "Candidate":
        return cls(REAL_VECTOR, tuple(float(v) for v in values))

    @classmethod
    def from_token(cls, token: str) -> "Candidate":
        return cls(TOKEN, token)

    def bits_array(self) -> np.ndarray:
        """Bitstring payload as a float64 0/1 vector."""
        if self.kind != BITSTRING:
            raise ValueError(f"not a bitstring candidate: {self.kind}")
        return (np.frombuffer(self.payload.encode("ascii"), dtype=np.uint8) - ord("0")).astype(np.float64)

    def vector_array(self) -> np.ndarray:
        if self.kind != REAL_VECTOR:
            raise ValueError(f"not a real vector candidate: {self.kind}")
        return np.asarray(self.payload, dtype=np.float64)


@dataclass(frozen=True)
class AssessedRecord:
    """One unit of oracle spend: a candidate with its scores and fitness.

    ``call_id`` is globally unique per assessment debit and doubles as the
    deterministic tie-breaker everywhere ranking happens.
    """

    candidate: Candidate
    fingerprint: np.ndarray
    scores: tuple[float, ...]
    fitness: float
    iteration: int
    call_id: int


def combine_scores(scores: Sequence[float], combiner: str = "mean") -> float:
    """Collapse per-objective scores into a scalar fitness.

    ``sum`` and ``product`` are provided for parity with raw multi-objective
    combination; ``mean`` is the default so fitness stays in [0, 1].
    """
    if len(scores) == 0:
        raise ValueError("cannot combine an empty score vector")
    if not all(math.isfinite(s) for s in scores):
        raise ValueError(f"non-finite objective score in {list(scores)!r}")
    if combiner == "sum":
        return float(sum(scores))
    if combiner == "mean":
        return float(sum(scores) / len(scores))
    if combiner == "product":
        return float(math.prod(scores))
    raise ValueError(f"unknown combiner {combiner!r}, expected one of {COMBINERS}")


def select_elites(assessed: Sequence[AssessedRecord], n_elite: int) -> list[AssessedRecord]:
    """Pick the ``n_elite`` highest-fitness records.

    Ordered by descending fitness, ties broken by ascending call_id so the
    first-assessed record wins; fully deterministic.
    """
    if n_elite < 1:
        raise ValueError("n_elite must be positive")
    if n_elite > len(assessed):
        raise ValueError(f"n_elite={n_elite} exceeds number of assessed records ({len(assessed)})")
    ranked = sorted(assessed, key=lambda r: (-r.fitness, r.call_id))
    return ranked[:n_elite]
