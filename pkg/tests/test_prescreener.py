import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsevo.core import Candidate
from lsevo.prescreener import (
    ScreeningConfig,
    SurrogateScreener,
    TruncationScreener,
    UnsupportedDomainError,
    distance,
    fingerprint,
    fit_utility,
    predict_utility,
    predict_utility_many,
    select_offspring,
    uncertainty,
)


class TestFingerprint:
    def test_bits_identity(self):
        assert fingerprint(Candidate.from_bits("1011")).tolist() == [1, 0, 1, 1]

    def test_vector_identity(self):
        assert fingerprint(Candidate.from_vector([0.2, -0.7])).tolist() == [0.2, -0.7]

    def test_equal_candidates_equal_fingerprints(self):
        a = fingerprint(Candidate.from_bits("0110"))
        b = fingerprint(Candidate.from_bits("0110"))
        assert np.array_equal(a, b)

    def test_token_unsupported(self):
        with pytest.raises(UnsupportedDomainError):
            fingerprint(Candidate.from_token("CCO"))


class TestDistance:
    def test_identity_is_zero(self):
        assert distance(np.array([1.0, 0, 1]), np.array([1.0, 0, 1])) == 0.0

    def test_single_coordinate(self):
        assert distance(np.array([1.0, 0, 1]), np.array([0.0, 0, 1])) == 1.0

    def test_hand_enumerated(self):
        a, b = [1.0, 1, 0, 0], [0.0, 0, 1, 1]
        expected = sum((x - y) ** 2 for x, y in zip(a, b))
        assert distance(np.array(a), np.array(b)) == expected == 4.0

    def test_symmetric(self):
        a = np.array([0.5, 2.0])
        b = np.array([1.5, -1.0])
        assert distance(a, b) == distance(b, a)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            distance(np.array([1.0]), np.array([1.0, 2.0]))


class TestUncertainty:
    def test_empty_selected_is_infinite(self):
        assert uncertainty(np.array([1.0, 0.0]), []) == math.inf

    def test_single_element(self):
        assert uncertainty(np.array([1.0, 1.0]), [np.array([0.0, 0.0])]) == 2.0

    def test_min_over_two(self):
        sel = [np.array([0.0, 0.0]), np.array([1.0, 1.0])]
        assert uncertainty(np.array([1.0, 0.0]), sel) == 1.0

    def test_non_increasing_as_selected_grows(self):
        rng = np.random.default_rng(3)
        x = rng.random(4)
        sel = [rng.random(4) for _ in range(6)]
        vals = [uncertainty(x, sel[:i]) for i in range(len(sel) + 1)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def ref_knn_predict(train, query, k, weighting):
    """Exhaustive-scan reference: sort every row by (distance, call_id)."""
    scored = []
    for fp, fit, cid in train:
        d = sum((a - b) ** 2 for a, b in zip(fp, query))
        scored.append((d, cid, fit))
    scored.sort(key=lambda t: (t[0], t[1]))
    neigh = scored[: min(k, len(scored))]
    if weighting == "inverse_distance":
        if neigh[0][0] == 0.0:
            return neigh[0][2]
        num = den = 0.0
        for d, _, fit in neigh:
            w = 1.0 / d
            num += w * fit
            den += w
        return num / den
    acc = 0.0
    for _, _, fit in neigh:
        acc += fit
    return acc / len(neigh)


class TestUtilityModel:
    def test_single_record_is_constant(self, make_record):
        model = fit_utility([make_record(0.42, 0, fingerprint=[1.0, 0.0])], k=5)
        assert predict_utility(model, np.array([0.0, 1.0])) == 0.42
        assert predict_utility(model, np.array([1.0, 0.0])) == 0.42

    def test_exact_match_short_circuits(self, make_record):
        records = [
            make_record(0.9, 0, fingerprint=[1.0, 1.0]),
            make_record(0.2, 1, fingerprint=[0.0, 0.0]),
        ]
        model = fit_utility(records, k=2, weighting="inverse_distance")
        assert predict_utility(model, np.array([1.0, 1.0])) == 0.9
        assert predict_utility(model, np.array([0.0, 0.0])) == 0.2

    def test_equidistant_uniform_mean(self, make_record):
        records = [
            make_record(0.2, 0, fingerprint=[0.0, 0.0]),
            make_record(0.8, 1, fingerprint=[2.0, 0.0]),
        ]
        model = fit_utility(records, k=2, weighting="uniform")
        assert predict_utility(model, np.array([1.0, 0.0])) == 0.5

    def test_zero_distance_tie_breaks_by_call_id(self, make_record):
        records = [
            make_record(0.7, 5, fingerprint=[1.0, 0.0]),
            make_record(0.3, 2, fingerprint=[1.0, 0.0]),
        ]
        model = fit_utility(records, k=2, weighting="inverse_distance")
        assert predict_utility(model, np.array([1.0, 0.0])) == 0.3

    def test_matches_exhaustive_scan(self, make_record):
        rng = np.random.default_rng(17)
        records = []
        for cid in range(50):
            fp = rng.integers(0, 5, size=6) / 2.0
            records.append(make_record(float(rng.random()), cid, fingerprint=fp))
        train = [(r.fingerprint.tolist(), r.fitness, r.call_id) for r in records]
        for weighting in ("uniform", "inverse_distance"):
            model = fit_utility(records, k=5, weighting=weighting)
            queries = rng.integers(0, 5, size=(200, 6)) / 2.0
            got = predict_utility_many(model, queries)
            for i, q in enumerate(queries):
                assert got[i] == ref_knn_predict(train, q.tolist(), 5, weighting)

    def test_predictions_bounded_by_training_range(self, make_record):
        rng = np.random.default_rng(23)
        records = [
            make_record(float(rng.random()), cid, fingerprint=rng.integers(0, 2, size=8).astype(float))
            for cid in range(30)
        ]
        model = fit_utility(records, k=5)
        lo = min(r.fitness for r in records)
        hi = max(r.fitness for r in records)
        preds = predict_utility_many(model, rng.integers(0, 2, size=(100, 8)).astype(float))
        assert np.all(preds >= lo - 1e-12) and np.all(preds <= hi + 1e-12)

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            fit_utility([], k=5)

    def test_query_dimension_mismatch(self, make_record):
        model = fit_utility([make_record(0.5, 0, fingerprint=[1.0, 0.0])], k=1)
        with pytest.raises(ValueError):
            predict_utility(model, np.array([1.0, 0.0, 0.0]))


def exact_match_model(fps, utilities):
    """k=1 model whose predictions at the given fingerprints are the given values."""
    from lsevo.core import AssessedRecord

    records = [
        AssessedRecord(
            candidate=Candidate.from_bits("".join(str(int(v)) for v in fp)),
            fingerprint=np.asarray(fp, dtype=np.float64),
            scores=(u,),
            fitness=u,
            iteration=0,
            call_id=i,
        )
        for i, (fp, u) in enumerate(zip(fps, utilities))
    ]
    return fit_utility(records, k=1, weighting="inverse_distance")


class TestSelectOffspring:
    def test_spec_walkthrough(self):
        fps = [[0, 0], [0, 1], [1, 0], [1, 1]]
        utilities = [0.9, 0.8, 0.7, 0.1]
        candidates = [Candidate.from_bits("".join(str(b) for b in fp)) for fp in fps]
        model = exact_match_model(fps, utilities)
        selected, rounds = select_offspring(candidates, model, ScreeningConfig(lam=0.6, n_select=2))
        assert [c.payload for c in selected] == ["00", "11"]
        assert rounds[0].threshold is None
        assert rounds[0].uncertainty == math.inf
        assert rounds[1].threshold == pytest.approx(0.6 * 2.0)
        assert rounds[1].uncertainty == 2.0
        assert not rounds[1].fallback

    def test_identical_candidates_fall_back_to_duplicates(self):
        candidates = [Candidate.from_bits("101")] * 4
        model = exact_match_model([[1, 0, 1]], [0.5])
        selected, rounds = select_offspring(candidates, model, ScreeningConfig(lam=0.35, n_select=3))
        assert [c.payload for c in selected] == ["101", "101", "101"]
        assert [r.fallback for r in rounds] == [False, True, True]

    def test_lambda_zero_orders_by_utility(self):
        rng = np.random.default_rng(11)
        fps = rng.permutation(np.eye(8)).tolist()  # all distinct, orthogonal
        utilities = rng.random(8).tolist()
        candidates = [Candidate.from_bits("".join(str(int(v)) for v in fp)) for fp in fps]
        model = exact_match_model(fps, utilities)
        selected, rounds = select_offspring(candidates, model, ScreeningConfig(lam=0.0, n_select=5))
        utils = [r.utility for r in rounds]
        assert utils == sorted(utils, reverse=True)

    def test_empty_pool_rejected(self):
        model = exact_match_model([[1, 0]], [0.5])
        with pytest.raises(ValueError):
            select_offspring([], model, ScreeningConfig(lam=0.35, n_select=1))

    def test_trace_certifies_threshold_rule(self):
        rng = np.random.default_rng(29)
        fps = rng.integers(0, 2, size=(40, 10)).astype(float)
        utilities = rng.random(40)
        candidates = [Candidate.from_bits("".join(str(int(v)) for v in fp)) for fp in fps]
        from lsevo.core import AssessedRecord

        records = [
            AssessedRecord(candidates[i], fps[i], (utilities[i],), utilities[i], 0, i)
            for i in range(40)
        ]
        model = fit_utility(records, k=3)
        _, rounds = select_offspring(candidates, model, ScreeningConfig(lam=0.35, n_select=20))
        for r in rounds[1:]:
            if not r.fallback:
                assert r.uncertainty > r.threshold

    def test_novelty_constraint_raises_selected_spread(self):
        # min pairwise distance under lam=0.35 >= under lam=0 in nearly all pools
        rng = np.random.default_rng(41)
        hits = 0
        trials = 100
        for _ in range(trials):
            fps = rng.integers(0, 2, size=(30, 12)).astype(float)
            utilities = rng.random(30).tolist()
            candidates = [Candidate.from_bits("".join(str(int(v)) for v in fp)) for fp in fps]
            model = exact_match_model(fps.tolist(), utilities)

            def min_pairwise(lam):
                sel, _ = select_offspring(candidates, model, ScreeningConfig(lam=lam, n_select=6))
                pts = [fingerprint(c) for c in sel]
                return min(
                    distance(a, b) for i, a in enumerate(pts) for b in pts[i + 1 :]
                )

            if min_pairwise(0.35) >= min_pairwise(0.0):
                hits += 1
        assert hits >= 95


class TestScreeners:
    def _pool(self, rng, n=20, dim=8):
        fps = rng.integers(0, 2, size=(n, dim)).astype(float)
        return [Candidate.from_bits("".join(str(int(v)) for v in fp)) for fp in fps]

    def _archive(self, make_record, rng, n=30, dim=8):
        return [
            make_record(float(rng.random()), cid, fingerprint=rng.integers(0, 2, size=dim).astype(float))
            for cid in range(n)
        ]

    def test_truncation_takes_pool_prefix(self, make_record):
        rng = np.random.default_rng(0)
        pool = self._pool(rng)
        picked, stats = TruncationScreener(5).screen(pool, [], 1)
        assert picked == pool[:5]
        assert stats.fallback_count == 0

    def test_utility_mode_is_descending(self, make_record):
        rng = np.random.default_rng(1)
        pool = self._pool(rng)
        archive = self._archive(make_record, rng)
        screener = SurrogateScreener(ScreeningConfig(lam=0.0, n_select=6), mode="utility")
        picked, _ = screener.screen(pool, archive, 1)
        model = screener.model()
        utils = [predict_utility(model, fingerprint(c)) for c in picked]
        assert utils == sorted(utils, reverse=True)

    def test_uncertainty_mode_spreads(self, make_record):
        rng = np.random.default_rng(2)
        pool = self._pool(rng, n=30)
        archive = self._archive(make_record, rng)
        unc = SurrogateScreener(ScreeningConfig(lam=0.35, n_select=6), mode="uncertainty")
        util = SurrogateScreener(ScreeningConfig(lam=0.0, n_select=6), mode="utility")
        picked_unc, _ = unc.screen(pool, archive, 1)
        picked_util, _ = util.screen(pool, archive, 1)

        def min_pairwise(cands):
            pts = [fingerprint(c) for c in cands]
            return min(distance(a, b) for i, a in enumerate(pts) for b in pts[i + 1 :])

        assert min_pairwise(picked_unc) >= min_pairwise(picked_util)

    def test_incremental_training_matches_fit_utility(self, make_record):
        rng = np.random.default_rng(3)
        archive = self._archive(make_record, rng, n=40)
        screener = SurrogateScreener(ScreeningConfig(lam=0.35, n_select=4))
        screener.screen(self._pool(rng), archive[:25], 1)
        screener.screen(self._pool(rng), archive, 2)
        incremental = screener.model()
        scratch = fit_utility(archive, k=5)
        assert np.array_equal(incremental.fingerprints, scratch.fingerprints)
        assert np.array_equal(incremental.fitness, scratch.fitness)
        assert np.array_equal(incremental.call_ids, scratch.call_ids)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.35, 0.7]))
def test_selection_respects_round_budget(seed, lam):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 25))
    fps = rng.integers(0, 2, size=(n, 6)).astype(float)
    utilities = rng.random(n).tolist()
    candidates = [Candidate.from_bits("".join(str(int(v)) for v in fp)) for fp in fps]
    model = exact_match_model(fps.tolist(), utilities)
    n_select = int(rng.integers(1, 30))
    selected, rounds = select_offspring(candidates, model, ScreeningConfig(lam=lam, n_select=n_select))
    assert len(selected) == len(rounds) == min(n_select, n)
