import numpy as np
import pytest

from flakecause.errors import DataError
from flakecause.fewshot import (
    Prediction,
    SupportCategory,
    SupportSet,
    classify,
    load_support,
    save_support,
    select_support,
)
from flakecause.siamese import (
    SiameseModel,
    TrainingConfig,
    cosine_sim,
    forward,
    forward_many,
    train,
)


def identity_model(dim):
    return SiameseModel(
        W=np.eye(dim), b=np.zeros(dim), input_dim=dim, output_dim=dim, seed=0
    )


class TestSelectSupport:
    def test_collinear_midpoint_is_medoid(self):
        model = identity_model(2)
        ids = ["left", "mid", "right"]
        vectors = np.array([[1.0, 0.5], [2.0, 0.5], [3.0, 0.5]])
        support = select_support(ids, vectors, ["c"] * 3, model, k=1)
        assert support.categories["c"].ids == ("mid",)

    def test_k_at_least_class_size_keeps_whole_class(self):
        model = identity_model(2)
        ids = ["a", "b", "c"]
        vectors = np.array([[1.0, 0.1], [0.5, 1.0], [2.0, 2.0]])
        support = select_support(ids, vectors, ["c"] * 3, model, k=10)
        assert set(support.categories["c"].ids) == {"a", "b", "c"}

    def test_matches_brute_force_centrality(self):
        rng = np.random.default_rng(3)
        model = identity_model(6)
        ids = [f"t{i}" for i in range(10)]
        vectors = rng.normal(size=(10, 6))
        support = select_support(ids, vectors, ["c"] * 10, model, k=2)

        outputs = [forward(model, v) for v in vectors]
        scores = []
        for i in range(10):
            sims = [
                cosine_sim(outputs[i], outputs[j]) for j in range(10) if j != i
            ]
            scores.append(sum(sims) / len(sims))
        expected = [ids[i] for i in np.argsort(-np.asarray(scores), kind="stable")[:2]]
        assert list(support.categories["c"].ids) == expected

    def test_exemplar_count_per_category(self):
        model = identity_model(3)
        ids = [f"t{i}" for i in range(7)]
        vectors = np.random.default_rng(0).normal(size=(7, 3))
        labels = ["a", "a", "a", "a", "b", "b", "b"]
        support = select_support(ids, vectors, labels, model, k=3)
        assert len(support.categories["a"].ids) == 3
        assert len(support.categories["b"].ids) == 3

    def test_singleton_category_kept(self):
        model = identity_model(2)
        vectors = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        support = select_support(["a1", "a2", "b1"], vectors, ["a", "a", "b"], model, k=5)
        assert support.categories["b"].ids == ("b1",)

    def test_k_zero_rejected(self):
        model = identity_model(2)
        with pytest.raises(DataError, match="k"):
            select_support(["a"], np.array([[1.0, 0.0]]), ["c"], model, k=0)

    def test_empty_input_rejected(self):
        model = identity_model(2)
        with pytest.raises(DataError):
            select_support([], np.zeros((0, 2)), [], model, k=1)

    def test_vectors_are_unit_norm(self):
        model = identity_model(3)
        vectors = np.random.default_rng(1).normal(size=(4, 3)) * 7.0
        support = select_support(["a", "b", "c", "d"], vectors, ["x"] * 4, model, k=4)
        norms = np.linalg.norm(support.categories["x"].vectors, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-6)


def small_support(model, points):
    """points: {category: list of input vectors}"""
    ids, vectors, labels = [], [], []
    for name, vecs in points.items():
        for i, v in enumerate(vecs):
            ids.append(f"{name}{i}")
            vectors.append(v)
            labels.append(name)
    return select_support(ids, np.asarray(vectors), labels, model, k=5)


class TestClassify:
    def test_query_equal_to_exemplar(self):
        model = identity_model(2)
        support = small_support(
            model, {"c": [np.array([1.0, 0.0])], "d": [np.array([0.0, 1.0])]}
        )
        pred = classify(np.array([1.0, 0.0]), model, support, test_id="q")
        assert pred.top == "c"
        assert pred.score("c") == pytest.approx(1.0, abs=1e-9)
        assert pred.test_id == "q"

    def test_single_category_always_wins(self):
        model = identity_model(2)
        support = small_support(model, {"only": [np.array([0.0, 1.0])]})
        pred = classify(np.array([1.0, 0.0]), model, support)
        assert pred.top == "only"
        assert len(pred.ranking) == 1

    def test_one_entry_per_category(self):
        model = identity_model(2)
        support = small_support(
            model,
            {
                "a": [np.array([1.0, 0.0]), np.array([0.9, 0.1])],
                "b": [np.array([0.0, 1.0])],
            },
        )
        pred = classify(np.array([0.5, 0.5]), model, support)
        assert [name for name, _ in pred.ranking] == sorted({"a", "b"})
        assert len(pred.ranking) == 2

    def test_scores_sorted_descending_with_name_ties(self):
        model = identity_model(2)
        shared = np.array([1.0, 1.0])
        support = small_support(model, {"zeta": [shared], "alpha": [shared.copy()]})
        pred = classify(np.array([1.0, 0.0]), model, support)
        assert pred.ranking[0][0] == "alpha"
        assert pred.ranking[0][1] == pred.ranking[1][1]

    def test_exemplar_duplication_never_changes_scores(self):
        model = identity_model(3)
        rng = np.random.default_rng(2)
        base = {
            "a": [rng.normal(size=3) for _ in range(3)],
            "b": [rng.normal(size=3) for _ in range(3)],
        }
        support = small_support(model, base)
        duplicated = {
            "a": base["a"] + [base["a"][0]],
            "b": base["b"],
        }
        support_dup = small_support(model, duplicated)
        query = rng.normal(size=3)
        p1 = classify(query, model, support)
        p2 = classify(query, model, support_dup)
        assert {c: s for c, s in p1.ranking} == pytest.approx(
            {c: s for c, s in p2.ranking}
        )

    def test_exemplar_order_free(self):
        model = identity_model(3)
        rng = np.random.default_rng(4)
        vecs = [rng.normal(size=3) for _ in range(4)]
        s1 = small_support(model, {"a": vecs, "b": [rng.normal(size=3)]})
        reordered = SupportSet(
            output_dim=s1.output_dim,
            categories={
                "a": SupportCategory(
                    ids=s1.categories["a"].ids[::-1],
                    vectors=s1.categories["a"].vectors[::-1].copy(),
                ),
                "b": s1.categories["b"],
            },
        )
        query = rng.normal(size=3)
        assert classify(query, model, s1).ranking == classify(
            query, model, reordered
        ).ranking

    def test_mean_aggregation(self):
        model = identity_model(2)
        support = small_support(
            model, {"a": [np.array([1.0, 0.0]), np.array([0.0, 1.0])]}
        )
        query = np.array([1.0, 0.0])
        pred = classify(query, model, support, aggregate="mean")
        assert pred.score("a") == pytest.approx(0.5, abs=1e-12)

    def test_unknown_aggregation_rejected(self):
        model = identity_model(2)
        support = small_support(model, {"a": [np.array([1.0, 0.0])]})
        with pytest.raises(DataError, match="aggregation"):
            classify(np.array([1.0, 0.0]), model, support, aggregate="median")

    def test_query_scale_invariance_with_zero_bias(self):
        model = identity_model(3)
        rng = np.random.default_rng(5)
        support = small_support(
            model, {"a": [rng.normal(size=3)], "b": [rng.normal(size=3)]}
        )
        query = rng.normal(size=3)
        p1 = classify(query, model, support)
        p2 = classify(3.5 * query, model, support)
        assert p1.ranking == p2.ranking


class TestFourClusters:
    def test_heldout_accuracy(self):
        rng = np.random.default_rng(7)
        dim, per_class = 32, 30
        centers = rng.normal(size=(4, dim))
        centers = 3.0 * centers / np.linalg.norm(centers, axis=1, keepdims=True)
        names = ["w", "x", "y", "z"]
        X, labels, ids = [], [], []
        for name, center in zip(names, centers):
            pts = center + 0.3 * rng.normal(size=(per_class, dim))
            X.extend(pts)
            labels.extend([name] * per_class)
            ids.extend(f"{name}{i}" for i in range(per_class))
        X = np.asarray(X)
        train_idx = [i for i in range(len(X)) if i % 3 != 0]
        test_idx = [i for i in range(len(X)) if i % 3 == 0]
        config = TrainingConfig(num_pairs=2000, seed=1)
        model = train(
            X[train_idx], [labels[i] for i in train_idx], config, output_dim=16
        )
        support = select_support(
            [ids[i] for i in train_idx],
            X[train_idx],
            [labels[i] for i in train_idx],
            model,
            k=5,
        )
        hits = sum(
            classify(X[i], model, support).top == labels[i] for i in test_idx
        )
        assert hits / len(test_idx) >= 0.95


class TestSerialization:
    def test_round_trip(self, tmp_path):
        model = identity_model(3)
        rng = np.random.default_rng(0)
        support = small_support(
            model,
            {"a": [rng.normal(size=3) for _ in range(2)], "b": [rng.normal(size=3)]},
        )
        path = tmp_path / "support.json"
        save_support(support, path)
        loaded = load_support(path)
        assert loaded.output_dim == support.output_dim
        for name in support.categories:
            assert loaded.categories[name].ids == support.categories[name].ids
            assert np.allclose(
                loaded.categories[name].vectors, support.categories[name].vectors
            )
        query = rng.normal(size=3)
        before = classify(query, model, support).ranking
        after = classify(query, model, loaded).ranking
        assert [c for c, _ in after] == [c for c, _ in before]
        assert [s for _, s in after] == pytest.approx([s for _, s in before])

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "support.json"
        path.write_text("[")
        with pytest.raises(DataError, match="malformed"):
            load_support(path)

    def test_non_unit_vectors_rejected(self, tmp_path):
        path = tmp_path / "support.json"
        path.write_text(
            '{"output_dim": 2, "categories": {"a": {"ids": ["x"], "vectors": [[3.0, 4.0]]}}}'
        )
        with pytest.raises(DataError, match="non-unit"):
            load_support(path)

    def test_empty_support_rejected(self):
        with pytest.raises(DataError, match="no categories"):
            SupportSet(output_dim=2, categories={})
