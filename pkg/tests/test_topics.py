"""pLSA EM: likelihood behavior, invariants, and topic inspection."""

import numpy as np
import pytest

from aesthmine.textfeat import TermKind, Vocabulary, vectorize_counts, vectorize_tfidf
from aesthmine.topics import fit_plsa, save_topics_report, top_terms
from aesthmine.corpus import Corpus
from oracles import plsa_loglik_bruteforce
from test_corpus import make_record
from test_optim import dense_matrix


def random_counts_matrix(rng, n_docs, n_words, max_count=6):
    counts = rng.integers(0, max_count, size=(n_docs, n_words)).astype(float)
    # ensure no all-zero corpus
    if counts.sum() == 0:
        counts[0, 0] = 1.0
    return dense_matrix(counts, np.full(n_docs, 5.0))


def two_block_matrix(docs_per_block=6, words_per_block=5, count=4):
    n_docs = 2 * docs_per_block
    n_words = 2 * words_per_block
    counts = np.zeros((n_docs, n_words))
    counts[:docs_per_block, :words_per_block] = count
    counts[docs_per_block:, words_per_block:] = count
    return dense_matrix(counts, np.full(n_docs, 5.0))


class TestFitPlsa:
    def test_single_topic_collapses_to_word_frequency(self):
        rng = np.random.default_rng(1)
        matrix = random_counts_matrix(rng, 8, 6)
        model = fit_plsa(matrix, K=1, iters=5, seed=0)
        counts = matrix.to_dense()
        freq = counts.sum(axis=0) / counts.sum()
        np.testing.assert_allclose(model.p_w_given_z[0], freq, atol=1e-12)

    def test_two_blocks_recover_block_topics(self):
        matrix = two_block_matrix()
        model = fit_plsa(matrix, K=2, iters=100, seed=3)
        block_a = set(range(5))
        for z in range(2):
            phi = model.p_w_given_z[z]
            mass_a = phi[list(block_a)].sum()
            assert max(mass_a, 1 - mass_a) >= 0.95

    def test_loglik_non_decreasing(self):
        rng = np.random.default_rng(2)
        for seed in range(5):
            matrix = random_counts_matrix(rng, 10, 8)
            model = fit_plsa(matrix, K=3, iters=50, seed=seed)
            diffs = np.diff(model.loglik_trace)
            assert np.all(diffs >= -1e-8)

    def test_loglik_matches_bruteforce(self):
        rng = np.random.default_rng(4)
        matrix = random_counts_matrix(rng, 7, 9)
        model = fit_plsa(matrix, K=3, iters=10, seed=1)
        oracle = plsa_loglik_bruteforce(
            matrix.to_dense(), model.p_z_given_d, model.p_w_given_z
        )
        assert model.loglik_trace[-1] == pytest.approx(oracle, abs=1e-9)

    def test_rows_stochastic_after_each_iteration(self):
        rng = np.random.default_rng(5)
        matrix = random_counts_matrix(rng, 6, 7)
        for iters in range(1, 6):
            model = fit_plsa(matrix, K=4, iters=iters, seed=2)
            np.testing.assert_allclose(
                model.p_w_given_z.sum(axis=1), np.ones(4), atol=1e-9
            )
            np.testing.assert_allclose(
                model.p_z_given_d.sum(axis=1), np.ones(6), atol=1e-9
            )

    def test_topic_permutation_symmetry(self):
        rng = np.random.default_rng(6)
        matrix = random_counts_matrix(rng, 6, 8)
        K = 3
        theta0 = rng.uniform(0.1, 1.0, size=(6, K))
        phi0 = rng.uniform(0.1, 1.0, size=(K, 8))
        perm = np.array([2, 0, 1])
        base = fit_plsa(matrix, K=K, iters=20, seed=0, init=(theta0, phi0))
        permuted = fit_plsa(
            matrix, K=K, iters=20, seed=0, init=(theta0[:, perm], phi0[perm, :])
        )
        np.testing.assert_allclose(
            permuted.p_w_given_z, base.p_w_given_z[perm, :], atol=1e-10
        )
        np.testing.assert_allclose(
            permuted.p_z_given_d, base.p_z_given_d[:, perm], atol=1e-10
        )

    def test_converges_and_stops_early(self):
        matrix = two_block_matrix(docs_per_block=3, words_per_block=3)
        model = fit_plsa(matrix, K=2, iters=500, seed=0)
        assert model.converged
        assert len(model.loglik_trace) - 1 < 500

    def test_empty_doc_rows_stay_stochastic(self):
        counts = np.array([[2.0, 1.0], [0.0, 0.0], [1.0, 3.0]])
        matrix = dense_matrix(counts, np.full(3, 5.0))
        model = fit_plsa(matrix, K=2, iters=10, seed=0)
        np.testing.assert_allclose(model.p_z_given_d.sum(axis=1), np.ones(3), atol=1e-9)

    def test_rejects_empty_matrix(self):
        with pytest.raises(ValueError):
            fit_plsa(dense_matrix(np.zeros((0, 0)), np.empty(0)), K=2)

    def test_rejects_fractional_counts(self):
        corpus = Corpus([
            make_record("a", comments=["great shot here"]),
            make_record("b", comments=["great light"]),
        ])
        vocab = Vocabulary.from_terms(["great", "light", "shot"], TermKind.UNIGRAM)
        with pytest.raises(ValueError):
            fit_plsa(vectorize_tfidf(corpus, vocab), K=2)
        # the counts form of the same corpus is accepted
        fit_plsa(vectorize_counts(corpus, vocab), K=2, iters=2)

    def test_rejects_bad_k(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError):
            fit_plsa(random_counts_matrix(rng, 3, 3), K=0)


class TestTopTerms:
    def fit_small(self):
        rng = np.random.default_rng(8)
        matrix = random_counts_matrix(rng, 6, 4)
        terms = ["alpha", "beta", "delta", "gamma"]
        return fit_plsa(matrix, K=2, iters=20, seed=0), terms

    def test_modal_word(self):
        model, terms = self.fit_small()
        (term, prob), = top_terms(model, 0, 1, terms)
        assert prob == pytest.approx(model.p_w_given_z[0].max())

    def test_full_distribution_sums_to_one(self):
        model, terms = self.fit_small()
        out = top_terms(model, 1, len(terms), terms)
        assert len(out) == len(terms)
        assert sum(p for _, p in out) == pytest.approx(1.0)
        probs = [p for _, p in out]
        assert probs == sorted(probs, reverse=True)

    def test_uniform_topic_ties_lexicographic(self):
        model, terms = self.fit_small()
        model.p_w_given_z[0] = np.full(4, 0.25)
        out = top_terms(model, 0, 2, terms)
        assert [t for t, _ in out] == ["alpha", "beta"]

    def test_topic_out_of_range(self):
        model, terms = self.fit_small()
        with pytest.raises(ValueError):
            top_terms(model, 5, 1, terms)


class TestTopicsReport:
    def test_report_written_and_deterministic(self, tmp_path):
        rng = np.random.default_rng(9)
        matrix = random_counts_matrix(rng, 6, 5)
        terms = [f"t{k}" for k in range(5)]
        model = fit_plsa(matrix, K=2, iters=10, seed=4)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_topics_report(model, terms, p1, top=3)
        save_topics_report(model, terms, p2, top=3)
        assert p1.read_bytes() == p2.read_bytes()
        text = p1.read_text()
        assert text.startswith("topics 2\n")
        assert "topic 0" in text and "topic 1" in text
