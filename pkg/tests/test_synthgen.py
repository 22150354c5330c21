import numpy as np
import pytest

from eclipse.dime import eclipse_score, moon_centroid, prf_centroid, select_dimensions
from eclipse.metrics import average_precision
from eclipse.retrieval import DimensionMask, rerank, top_k
from eclipse.synthgen import SynthSpec, generate


def small_spec(**overrides):
    base = dict(
        dim=32,
        planted_size=4,
        queries=4,
        relevant_per_query=3,
        irrelevant_per_query=22,
        noise_sigma=0.0,
        seed=13,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestSpecValidation:
    def test_planted_must_fit(self):
        with pytest.raises(ValueError):
            small_spec(planted_size=32)
        with pytest.raises(ValueError):
            small_spec(planted_size=40)

    def test_counts_positive(self):
        with pytest.raises(ValueError):
            small_spec(queries=0)
        with pytest.raises(ValueError):
            small_spec(relevant_per_query=0)

    def test_sigma_non_negative(self):
        with pytest.raises(ValueError):
            small_spec(noise_sigma=-0.1)


class TestDeterminism:
    def test_identical_specs_identical_output(self):
        a = generate(small_spec(noise_sigma=0.3))
        b = generate(small_spec(noise_sigma=0.3))
        assert a.corpus.data.tobytes() == b.corpus.data.tobytes()
        assert a.queries.data.tobytes() == b.queries.data.tobytes()
        assert a.corpus.ids == b.corpus.ids
        assert a.planted == b.planted
        assert a.qrels == b.qrels

    def test_counter_streams_are_query_local(self):
        # adding queries must not disturb earlier queries' rows
        small = generate(small_spec(queries=2, noise_sigma=0.2))
        large = generate(small_spec(queries=4, noise_sigma=0.2))
        np.testing.assert_array_equal(small.queries.data, large.queries.data[:2])
        np.testing.assert_array_equal(
            small.corpus.data, large.corpus.data[: small.corpus.n]
        )

    def test_different_seeds_differ(self):
        a = generate(small_spec(seed=1, noise_sigma=0.1))
        b = generate(small_spec(seed=2, noise_sigma=0.1))
        assert a.corpus.data.tobytes() != b.corpus.data.tobytes()


class TestStructure:
    def test_shapes_and_ids(self):
        collection = generate(small_spec())
        spec = small_spec()
        assert collection.queries.n == spec.queries
        assert collection.corpus.n == spec.queries * (
            spec.relevant_per_query + spec.irrelevant_per_query
        )
        assert collection.corpus.dim == spec.dim
        assert set(collection.planted) == set(collection.queries.ids)

    def test_qrels_grades(self):
        collection = generate(small_spec())
        for (qid, did), grade in collection.qrels.judgments.items():
            assert grade == (2 if "_rel" in did else 0)
            assert did.startswith(qid)

    def test_planted_sets_have_requested_size(self):
        collection = generate(small_spec())
        for dims in collection.planted.values():
            assert len(dims) == small_spec().planted_size
            assert len(set(dims)) == len(dims)

    def test_irrelevant_docs_avoid_planted_dims_at_sigma_zero(self):
        collection = generate(small_spec())
        for qid, dims in collection.planted.items():
            for did in collection.corpus.ids:
                if did.startswith(qid) and "_irr" in did:
                    row = collection.corpus.row(did)
                    assert np.all(row[list(dims)] == 0.0)


class TestNoiselessSeparation:
    def test_top_ranks_are_relevant_and_ap_is_one(self):
        collection = generate(small_spec())
        for qid in collection.queries.ids:
            pool = top_k(collection.queries.row(qid), collection.corpus, 50, query_id=qid)
            relevant = {d for d, g in collection.qrels.judged(qid).items() if g >= 2}
            assert set(pool.doc_ids[: len(relevant)]) == relevant
            assert average_precision(pool, collection.qrels) == 1.0

    def test_contrastive_importance_recovers_planted_dims(self):
        collection = generate(small_spec())
        spec = small_spec()
        for qid in collection.queries.ids:
            query_vec = collection.queries.row(qid)
            pool = top_k(query_vec, collection.corpus, 50, query_id=qid)
            sun = prf_centroid(pool, collection.corpus, k_plus=2)
            moon = moon_centroid(pool, collection.corpus, k_minus=3)
            importance = eclipse_score(query_vec, sun, moon, alpha=1.0, beta=1.0)
            top_r = set(np.argsort(-importance, kind="stable")[: spec.planted_size])
            assert top_r == set(collection.planted[qid])

    def test_masked_retrieval_on_planted_dims_is_perfect(self):
        collection = generate(small_spec())
        for qid in collection.queries.ids:
            mask = DimensionMask(
                selected=np.array(collection.planted[qid]), dim=small_spec().dim
            )
            ranking = rerank(
                collection.queries.row(qid), collection.corpus, mask, depth=50, query_id=qid
            )
            assert average_precision(ranking, collection.qrels) == 1.0

    def test_select_dimensions_pipeline_matches_planted(self):
        collection = generate(small_spec())
        spec = small_spec()
        fraction = spec.planted_size / spec.dim
        for qid in collection.queries.ids:
            query_vec = collection.queries.row(qid)
            pool = top_k(query_vec, collection.corpus, 50, query_id=qid)
            sun = prf_centroid(pool, collection.corpus, k_plus=2)
            moon = moon_centroid(pool, collection.corpus, k_minus=3)
            mask = select_dimensions(
                eclipse_score(query_vec, sun, moon, alpha=1.0, beta=1.0), fraction
            )
            assert set(int(i) for i in mask.selected) == set(collection.planted[qid])
