"""Encoder/decoder abstraction between observation space and latent space.

Stands in for a pre-trained deep generative model. Two deterministic toy
models are built in: ``continuous_identity`` (latent space is the observation
space) and ``bitstring_threshold`` (bit i embeds to +/-bit_scale, decodes by
sign). The ``external`` kind forwards encode/decode over the assessor wire
protocol so a real generative back-end can be plugged in unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import rng
from .core import BITSTRING, REAL_VECTOR, TOKEN, Candidate

CONTINUOUS_IDENTITY = "continuous_identity"
BITSTRING_THRESHOLD = "bitstring_threshold"
EXTERNAL = "external"


@dataclass(frozen=True)
class GenerativeModelSpec:
    """Latent-space geometry of the (toy or external) generative model.

    ``bit_scale`` is how far from the decision boundary a bit embeds; it sets
    how large a latent move must be to flip a bit.
    """

    kind: str
    dim: int
    bit_scale: float = 1.0
    client: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (CONTINUOUS_IDENTITY, BITSTRING_THRESHOLD, EXTERNAL):
            raise ValueError(f"unknown generative model kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.bit_scale <= 0:
            raise ValueError("bit_scale must be > 0")
        if self.kind == EXTERNAL and self.client is None:
            raise ValueError("external generative model requires a wire client")


def encode(model: GenerativeModelSpec, candidate: Candidate) -> np.ndarray:
    """Map a candidate to its latent vector."""
    if model.kind == CONTINUOUS_IDENTITY:
        if candidate.kind != REAL_VECTOR:
            raise ValueError(f"continuous model expects real vector candidates, got {candidate.kind}")
        z = candidate.vector_array()
    elif model.kind == BITSTRING_THRESHOLD:
        if candidate.kind != BITSTRING:
            raise ValueError(f"bitstring model expects bitstring candidates, got {candidate.kind}")
        bits = candidate.bits_array()
        if bits.shape[0] != model.dim:
            raise ValueError(f"bitstring length {bits.shape[0]} != model dim {model.dim}")
        return np.where(bits > 0, model.bit_scale, -model.bit_scale)
    else:
        if candidate.kind != TOKEN:
            raise ValueError(f"external model expects token candidates, got {candidate.kind}")
        z = np.asarray(model.client.encode([candidate.payload])[0], dtype=np.float64)
    if z.shape[0] != model.dim:
        raise ValueError(f"candidate dimension {z.shape[0]} != model dim {model.dim}")
    return z


def decode(model: GenerativeModelSpec, z: np.ndarray) -> Candidate:
    """Map a latent vector back to a candidate. Total on finite input, deterministic."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != model.dim:
        raise ValueError(f"latent vector of shape {z.shape} does not match model dim {model.dim}")
    if not np.all(np.isfinite(z)):
        raise ValueError("latent vector has non-finite entries")
    if model.kind == CONTINUOUS_IDENTITY:
        return Candidate.from_vector(z)
    if model.kind == BITSTRING_THRESHOLD:
        # strict > 0 so an exactly-zero coordinate decodes to bit 0
        bits = "".join("1" if v > 0.0 else "0" for v in z)
        return Candidate.from_bits(bits)
    return Candidate.from_token(model.client.decode([z.tolist()])[0])


def sample_prior(model: GenerativeModelSpec, n: int, seed: int) -> np.ndarray:
    """``n`` latent vectors from the standard-normal prior, shape (n, dim)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return rng.prior_normals(seed, n, model.dim)
