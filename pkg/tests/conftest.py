import numpy as np
import pytest

from lsevo.core import AssessedRecord, Candidate


@pytest.fixture
def make_record():
    """Build an AssessedRecord with sensible defaults for unit tests."""

    def build(fitness, call_id, fingerprint=None, bits=None, iteration=1, scores=None):
        if bits is None:
            bits = format(call_id % 256, "08b")
        cand = Candidate.from_bits(bits)
        fp = np.asarray(fingerprint, dtype=np.float64) if fingerprint is not None else cand.bits_array()
        return AssessedRecord(
            candidate=cand,
            fingerprint=fp,
            scores=scores if scores is not None else (fitness,),
            fitness=fitness,
            iteration=iteration,
            call_id=call_id,
        )

    return build
