"""Tests for preference training, tagging, retrieval, and neighbors."""

import numpy as np
import pytest
from scipy.special import expit

from aesthmine.apps import (
    AttributeIndex,
    PreferenceModel,
    QuerySpec,
    build_index,
    load_preference_model,
    nearest_neighbors,
    parse_query,
    predict_preference,
    retrieve,
    save_preference_model,
    tag_image,
    train_preference_classifier,
)
from aesthmine.attribmine import Polarity
from aesthmine.corpus import Corpus, DataSplit, ImageRecord, ScoreDistribution
from aesthmine.errors import DataError, LabelingError, QueryError
from aesthmine.visattr import (
    AttributeBank,
    AttributeModel,
    FeatureStore,
    TrainMeta,
    build_attribute_bank,
    embed,
)


def make_model(label, polarity, auc, weights, bias=0.0):
    return AttributeModel(label=label, polarity=polarity,
                          weights=np.asarray(weights, dtype=float),
                          bias=float(bias), auc=auc, meta=TrainMeta())


def toy_bank():
    """One beautiful detector for axis 0, one ugly detector for axis 1."""
    return build_attribute_bank(
        [make_model("very sharp", Polarity.BEAUTIFUL, 0.9, (4.0, 0.0)),
         make_model("too dark", Polarity.UGLY, 0.8, (0.0, 4.0))],
        k_per_polarity=1)


def record_with_mean(image_id, mean, tags=()):
    counts = [0] * 10
    counts[int(mean) - 1] = 1
    return ImageRecord(image_id=image_id,
                       scores=ScoreDistribution(counts=tuple(counts)),
                       semantic_tags=frozenset(tags))


def preference_setup(n_train=20, n_val=10, beautiful_val_only=False):
    """Beautiful images sit on axis 0, bad images on axis 1."""
    rng = np.random.default_rng(13)
    store = FeatureStore(2)
    records = []
    train_ids, val_ids = set(), set()
    total = n_train + n_val
    for i in range(total):
        beautiful = i % 2 == 0
        image_id = f"im{i:03d}"
        base = np.array([1.0, 0.0]) if beautiful else np.array([0.0, 1.0])
        store.add(image_id, base + rng.uniform(-0.05, 0.05, 2))
        records.append(record_with_mean(image_id, 7 if beautiful else 3))
        if i < n_train:
            train_ids.add(image_id)
        elif beautiful_val_only and not beautiful:
            train_ids.add(image_id)
        else:
            val_ids.add(image_id)
    split = DataSplit(train_ids=frozenset(train_ids),
                      validation_ids=frozenset(val_ids),
                      test_ids=frozenset())
    return toy_bank(), store, Corpus(records), split


# -------------------------------------------------------------- preference


def test_preference_separates_constructed_corpus():
    bank, store, corpus, split = preference_setup()
    model = train_preference_classifier(bank, store, corpus, split, delta=1.0,
                                        meta=TrainMeta(seed=3))
    assert model.auc == 1.0
    assert model.dim == bank.embedding_dim == 2
    beautiful_vec = embed(bank, store.get("im000"))
    bad_vec = embed(bank, store.get("im001"))
    assert predict_preference(model, beautiful_vec) > 0.5
    assert predict_preference(model, bad_vec) < 0.5


def test_oversized_delta_names_it():
    bank, store, corpus, split = preference_setup()
    with pytest.raises(LabelingError, match="delta=8"):
        train_preference_classifier(bank, store, corpus, split, delta=8.0)


def test_single_class_training_split_rejected():
    bank, store, _, split = preference_setup()
    all_beautiful = Corpus([record_with_mean(f"im{i:03d}", 7) for i in range(30)])
    with pytest.raises(LabelingError, match="training"):
        train_preference_classifier(bank, store, all_beautiful, split, delta=1.0)


def test_single_class_validation_split_rejected():
    bank, store, corpus, split = preference_setup(beautiful_val_only=True)
    with pytest.raises(LabelingError, match="validation"):
        train_preference_classifier(bank, store, corpus, split, delta=1.0)


def test_preference_probability_order_matches_margin_order():
    rng = np.random.default_rng(4)
    model = PreferenceModel(weights=rng.normal(size=4), bias=0.3, auc=0.5,
                            delta=1.0, meta=TrainMeta())
    vecs = rng.uniform(0, 1, size=(12, 4))
    margins = vecs @ model.weights + model.bias
    probs = [predict_preference(model, v) for v in vecs]
    assert list(np.argsort(margins)) == list(np.argsort(probs))


def test_preference_deterministic():
    bank, store, corpus, split = preference_setup()
    m1 = train_preference_classifier(bank, store, corpus, split, 1.0, TrainMeta(seed=9))
    m2 = train_preference_classifier(bank, store, corpus, split, 1.0, TrainMeta(seed=9))
    np.testing.assert_array_equal(m1.weights, m2.weights)
    assert m1.bias == m2.bias and m1.auc == m2.auc


def test_predict_preference_dim_mismatch():
    model = PreferenceModel(weights=np.zeros(2), bias=0.0, auc=0.5,
                            delta=0.0, meta=TrainMeta())
    with pytest.raises(ValueError):
        predict_preference(model, [1.0, 2.0, 3.0])


def test_preference_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    model = PreferenceModel(weights=rng.normal(size=3), bias=-0.125, auc=0.875,
                            delta=1.5, meta=TrainMeta(epochs=4, seed=11))
    p1, p2 = tmp_path / "pref1.json", tmp_path / "pref2.json"
    save_preference_model(model, p1)
    loaded = load_preference_model(p1)
    save_preference_model(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(loaded.weights, model.weights)
    assert loaded.meta == model.meta and loaded.delta == 1.5


def test_load_preference_model_malformed(tmp_path):
    path = tmp_path / "pref.json"
    path.write_text("[]")
    with pytest.raises(DataError):
        load_preference_model(path)
    path.write_text('{"weights": [0.1]}')
    with pytest.raises(DataError):
        load_preference_model(path)


# ----------------------------------------------------------------- tagging


def test_tag_orders_by_reactivity():
    bank = build_attribute_bank(
        [make_model("very sharp", Polarity.BEAUTIFUL, 0.9, (2.0, 0.0)),
         make_model("too dark", Polarity.UGLY, 0.8, (0.0, 3.0))],
        k_per_polarity=1)
    tags = tag_image(bank, [1.0, 1.0], m=2)
    # sigmoid(3) > sigmoid(2), so the ugly attribute reacts harder
    assert tags == ["too dark", "very sharp"]
    assert tag_image(bank, [1.0, 1.0], m=1) == ["too dark"]


def test_tag_ties_fall_to_bank_rank():
    bank = build_attribute_bank(
        [make_model("b1", Polarity.BEAUTIFUL, 0.9, (1.0, 0.0)),
         make_model("b2", Polarity.BEAUTIFUL, 0.7, (1.0, 0.0)),
         make_model("u1", Polarity.UGLY, 0.8, (1.0, 0.0))],
        k_per_polarity=2)
    # identical weights -> identical probabilities -> bank order decides
    assert tag_image(bank, [0.5, 0.2], m=3) == ["b1", "b2", "u1"]


def test_tag_prefix_property():
    rng = np.random.default_rng(6)
    models = [make_model(f"b{i}", Polarity.BEAUTIFUL, 0.9, rng.normal(size=3))
              for i in range(3)]
    models += [make_model(f"u{i}", Polarity.UGLY, 0.8, rng.normal(size=3))
               for i in range(3)]
    bank = build_attribute_bank(models, k_per_polarity=3)
    x = rng.normal(size=3)
    previous = []
    for m in range(bank.embedding_dim + 1):
        current = tag_image(bank, x, m)
        assert current[: len(previous)] == previous
        previous = current


def test_tag_m_bounds():
    bank = toy_bank()
    assert tag_image(bank, [0.0, 0.0], m=0) == []
    with pytest.raises(ValueError):
        tag_image(bank, [0.0, 0.0], m=3)
    with pytest.raises(ValueError):
        tag_image(bank, [0.0, 0.0], m=-1)


# ------------------------------------------------------------------ queries


def hand_index(ids, attr_cols, sem_cols=None):
    labels = list(attr_cols)
    vectors = np.column_stack([np.asarray(attr_cols[l], dtype=float) for l in labels])
    sem = {t: np.asarray(v, dtype=float) for t, v in (sem_cols or {}).items()}
    return AttributeIndex(ids=list(ids), vectors=vectors,
                          attribute_labels=labels, semantic_scores=sem)


def test_parse_query_resolves_namespaces_case_insensitively():
    index = hand_index(["a"], {"great colors": [0.5]}, {"landscape": [0.5]})
    spec = parse_query("Landscape AND GREAT COLORS", index, top_k=5)
    assert spec.semantic_terms == ("landscape",)
    assert spec.attribute_terms == ("great colors",)
    assert spec.top_k == 5


def test_parse_query_unknown_term_lists_known_labels():
    index = hand_index(["a"], {"great colors": [0.5]}, {"landscape": [0.5]})
    with pytest.raises(QueryError) as err:
        parse_query("sunset glow", index, top_k=5)
    assert "great colors" in str(err.value)
    assert "landscape" in str(err.value)


def test_parse_query_lowercase_and_is_not_a_separator():
    index = hand_index(["a"], {"great colors": [0.5]}, {"landscape": [0.5]})
    with pytest.raises(QueryError):
        parse_query("landscape and great colors", index, top_k=5)


def test_parse_query_attribute_namespace_wins():
    index = hand_index(["a"], {"sunset": [0.5]}, {"sunset": [0.9]})
    spec = parse_query("sunset", index, top_k=1)
    assert spec.attribute_terms == ("sunset",)
    assert spec.semantic_terms == ()


def test_parse_query_rejects_empty():
    index = hand_index(["a"], {"x": [0.5]})
    with pytest.raises(QueryError):
        parse_query("   ", index, top_k=5)


def test_query_spec_validation():
    with pytest.raises(ValueError):
        QuerySpec(attribute_terms=(), semantic_terms=(), top_k=5)
    with pytest.raises(ValueError):
        QuerySpec(attribute_terms=("x",), semantic_terms=(), top_k=0)


# ---------------------------------------------------------------- retrieval


def test_retrieve_single_term_sorts_by_probability():
    index = hand_index(["a", "b", "c"], {"glow": [0.2, 0.9, 0.5]})
    ranked = retrieve(index, QuerySpec(("glow",), (), top_k=3))
    assert [r[0] for r in ranked] == ["b", "c", "a"]
    assert [r[1] for r in ranked] == [0.9, 0.5, 0.2]


def test_retrieve_product_tie_breaks_by_id():
    index = hand_index(["a", "b"], {"glow": [0.5, 0.9]}, {"landscape": [0.9, 0.5]})
    ranked = retrieve(index, QuerySpec(("glow",), ("landscape",), top_k=2))
    assert ranked == [("a", 0.45), ("b", 0.45)]


def test_retrieve_hand_computed_products():
    index = hand_index(["x", "y", "z"],
                       {"glow": [0.9, 0.6, 0.3], "calm": [0.2, 0.7, 0.8]})
    ranked = retrieve(index, QuerySpec(("glow", "calm"), (), top_k=3))
    # products: x 0.18, y 0.42, z 0.24
    assert [r[0] for r in ranked] == ["y", "z", "x"]
    np.testing.assert_allclose([r[1] for r in ranked], [0.42, 0.24, 0.18])


def test_retrieve_is_query_permutation_invariant():
    rng = np.random.default_rng(15)
    n = 40
    index = hand_index(
        [f"i{k:02d}" for k in range(n)],
        {"one": rng.uniform(0, 1, n), "two": rng.uniform(0, 1, n),
         "three": rng.uniform(0, 1, n)},
        {"sem": rng.uniform(0, 1, n)})
    base = retrieve(index, QuerySpec(("one", "two", "three"), ("sem",), top_k=n))
    for perm in [("three", "one", "two"), ("two", "three", "one")]:
        other = retrieve(index, QuerySpec(perm, ("sem",), top_k=n))
        assert other == base


def test_retrieve_probability_one_term_is_neutral():
    rng = np.random.default_rng(16)
    n = 25
    index = hand_index([f"i{k:02d}" for k in range(n)],
                       {"real": rng.uniform(0, 1, n), "always": np.ones(n)})
    with_pad = retrieve(index, QuerySpec(("real", "always"), (), top_k=n))
    without = retrieve(index, QuerySpec(("real",), (), top_k=n))
    assert with_pad == without


def test_retrieve_truncates_to_top_k():
    index = hand_index(["a", "b", "c", "d"], {"glow": [0.1, 0.4, 0.3, 0.2]})
    ranked = retrieve(index, QuerySpec(("glow",), (), top_k=2))
    assert [r[0] for r in ranked] == ["b", "c"]


def test_retrieve_unknown_term_raises():
    index = hand_index(["a"], {"glow": [0.5]})
    with pytest.raises(QueryError):
        retrieve(index, QuerySpec(("missing",), (), top_k=1))
    with pytest.raises(QueryError):
        retrieve(index, QuerySpec((), ("missing",), top_k=1))


# ------------------------------------------------------------- index build


def tagged_setup():
    rng = np.random.default_rng(23)
    store = FeatureStore(2)
    records = []
    train_ids = set()
    for i in range(24):
        image_id = f"im{i:03d}"
        landscape = i % 2 == 0
        base = np.array([1.0, 0.0]) if landscape else np.array([0.0, 1.0])
        store.add(image_id, base + rng.uniform(-0.05, 0.05, 2))
        records.append(record_with_mean(
            image_id, 6, tags=("landscape",) if landscape else ("portrait",)))
        if i < 16:
            train_ids.add(image_id)
    split = DataSplit(train_ids=frozenset(train_ids),
                      validation_ids=frozenset(),
                      test_ids=frozenset())
    return toy_bank(), store, Corpus(records), split


def test_build_index_trains_usable_semantic_classifiers():
    bank, store, corpus, split = tagged_setup()
    index = build_index(bank, store, corpus, split, TrainMeta(seed=5))
    assert index.ids == sorted(store.ids())
    assert index.attribute_labels == ["very sharp", "too dark"]
    assert set(index.semantic_scores) == {"landscape", "portrait"}
    assert index.skipped_tags == ()
    ranked = retrieve(index, parse_query("landscape", index, top_k=12))
    returned = {r[0] for r in ranked}
    expected = {f"im{i:03d}" for i in range(24) if i % 2 == 0}
    assert returned == expected


def test_build_index_skips_tag_without_training_positives(caplog):
    bank, store, corpus, split = tagged_setup()
    records = corpus.records
    records.append(record_with_mean("im_extra", 6, tags=("nightshot",)))
    store.add("im_extra", [0.5, 0.5])
    # im_extra stays outside the training split, so nightshot cannot train
    with caplog.at_level("WARNING"):
        index = build_index(bank, store, Corpus(records), split, TrainMeta(seed=5))
    assert index.skipped_tags == ("nightshot",)
    assert "nightshot" not in index.semantic_scores
    with pytest.raises(QueryError):
        parse_query("nightshot", index, top_k=3)


def test_index_shape_validation():
    with pytest.raises(ValueError):
        AttributeIndex(ids=["a", "b"], vectors=np.zeros((1, 2)),
                       attribute_labels=["x", "y"], semantic_scores={})
    with pytest.raises(ValueError):
        AttributeIndex(ids=["a"], vectors=np.zeros((1, 1)),
                       attribute_labels=["x"],
                       semantic_scores={"t": np.zeros(2)})


def test_index_vector_for_unknown_id():
    index = hand_index(["a"], {"x": [0.5]})
    with pytest.raises(QueryError):
        index.vector_for("zzz")


# --------------------------------------------------------------- neighbors


def line_index():
    return hand_index(["a", "b", "c", "d"], {"x": [0.0, 1.0, 2.0, 3.0]})


def test_neighbors_on_a_line_follow_coordinates():
    ranked = nearest_neighbors(line_index(), "a", m=3)
    assert ranked == [("b", 1.0), ("c", 2.0), ("d", 3.0)]


def test_neighbors_exclude_query_and_rank_duplicates_first():
    index = hand_index(["a", "b", "c"], {"x": [0.7, 0.7, 0.1]})
    ranked = nearest_neighbors(index, "a", m=2)
    assert ranked[0] == ("b", 0.0)
    assert ranked[1][0] == "c"


def test_neighbors_saturate_at_corpus_size():
    assert len(nearest_neighbors(line_index(), "b", m=3)) == 3
    assert len(nearest_neighbors(line_index(), "b", m=99)) == 3


def test_neighbors_tie_breaks_by_id():
    index = hand_index(["mid", "aa", "zz"], {"x": [1.0, 0.5, 1.5]})
    ranked = nearest_neighbors(index, "mid", m=2)
    assert [r[0] for r in ranked] == ["aa", "zz"]
    assert ranked[0][1] == ranked[1][1] == 0.5


def test_neighbors_argument_errors():
    with pytest.raises(QueryError):
        nearest_neighbors(line_index(), "nope", m=1)
    with pytest.raises(ValueError):
        nearest_neighbors(line_index(), "a", m=-1)
    assert nearest_neighbors(line_index(), "a", m=0) == []


def test_neighbors_in_embedded_space_match_construction():
    bank, store, corpus, split = tagged_setup()
    index = build_index(bank, store, corpus, split, TrainMeta(seed=5))
    # im000 is a landscape-type image; its neighborhood should be landscapes
    ranked = nearest_neighbors(index, "im000", m=5)
    assert all(int(r[0][2:]) % 2 == 0 for r in ranked)
