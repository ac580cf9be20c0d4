import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlpgnav.embedding import (CameraObservation, EmbeddingError,
                               EmbeddingVector, PromptPair, SyntheticProvider,
                               cosine_similarity)


def test_vector_rejects_zero_and_nonfinite():
    with pytest.raises(EmbeddingError):
        EmbeddingVector(np.zeros(4))
    with pytest.raises(EmbeddingError):
        EmbeddingVector(np.array([1.0, np.nan]))


def test_cosine_matches_manual_formula():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.standard_normal(32)
        b = rng.standard_normal(32)
        got = cosine_similarity(EmbeddingVector(a), EmbeddingVector(b))
        expect = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        assert got == pytest.approx(expect, abs=1e-12)
        assert -1.0 <= got <= 1.0


def test_cosine_length_mismatch_raises():
    with pytest.raises(EmbeddingError):
        cosine_similarity(EmbeddingVector(np.ones(3)),
                          EmbeddingVector(np.ones(4)))


def test_cosine_self_similarity_is_one():
    v = EmbeddingVector(np.array([3.0, -4.0, 12.0]))
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)


def test_prompt_pair_formatting():
    p = PromptPair.for_object("coffee table")
    assert p.positive == "A photo of coffee table"
    assert p.negative == "A photo of something else"
    with pytest.raises(EmbeddingError):
        PromptPair.for_object("   ")


def test_provider_is_deterministic():
    a = SyntheticProvider()
    b = SyntheticProvider()
    obs = CameraObservation.of([("lamp", 0.4), ("sofa", 0.1)], (1, 2, 3))
    assert np.array_equal(a.embed_image(obs).values, b.embed_image(obs).values)
    assert np.array_equal(a.embed_text("A photo of lamp").values,
                          b.embed_text("A photo of lamp").values)
    assert a.dimension == b.dimension == 512


def test_text_prompt_maps_to_label_direction():
    prov = SyntheticProvider()
    pair = PromptPair.for_object("oven")
    pos = prov.embed_text(pair.positive)
    neg = prov.embed_text(pair.negative)
    # full view of the object alone aligns almost entirely with its prompt
    full = prov.embed_image(CameraObservation.of([("oven", 1.0)]))
    assert cosine_similarity(full, pos) > 0.99
    assert cosine_similarity(full, neg) < 0.2
    # empty view is exactly the negative-prompt direction
    empty = prov.embed_image(CameraObservation.of([]))
    assert cosine_similarity(empty, neg) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.05, 0.45), st.floats(0.5, 1.0))
def test_more_visible_area_scores_higher(small, large):
    prov = SyntheticProvider()
    pos = prov.embed_text("A photo of cradle")
    lo = prov.embed_image(CameraObservation.of([("cradle", small)]))
    hi = prov.embed_image(CameraObservation.of([("cradle", large)]))
    assert cosine_similarity(hi, pos) > cosine_similarity(lo, pos)


def test_context_separates_identical_object_views():
    prov = SyntheticProvider()
    obs_a = CameraObservation.of([("tv", 0.3)], (0, 0, 0))
    obs_b = CameraObservation.of([("tv", 0.3)], (5, 5, 4))
    sim = cosine_similarity(prov.embed_image(obs_a), prov.embed_image(obs_b))
    assert sim < 0.99


def test_negative_fraction_rejected():
    prov = SyntheticProvider()
    with pytest.raises(EmbeddingError):
        prov.embed_image(CameraObservation.of([("tv", -0.1)]))


def test_embeddings_are_unit_norm():
    prov = SyntheticProvider()
    v = prov.embed_image(CameraObservation.of([("a", 0.2), ("b", 0.7)], (1,)))
    assert v.norm == pytest.approx(1.0, abs=1e-12)
