"""Distribution fitting, goodness of fit, gap labeling, challenge rollups."""

import numpy as np
import pytest

from aesthmine.corpus import Corpus, ScoreDistribution, UNASSIGNED_CHALLENGE
from aesthmine.errors import DegenerateDistributionError
from aesthmine.scorestats import (
    AestheticLabel,
    Family,
    FittedDistribution,
    binarize_labels,
    binned_density,
    challenge_stats,
    fit_distribution,
    gof_rmse,
    goodness_report,
)
from aesthmine.synthetic import synthetic_histograms
from oracles import gaussian_pdf
from test_corpus import make_record


def hist_from_density(dens, total=10**6):
    counts = tuple(int(round(p * total)) for p in np.asarray(dens) / np.sum(dens))
    return ScoreDistribution(counts)


def self_hist(family, params, total=10**9):
    """Histogram drawn exactly from a family member's binned density."""
    fit = FittedDistribution(family, params)
    return hist_from_density(binned_density(fit), total=total), fit


class TestFitDistribution:
    def test_gaussian_self_consistency(self):
        dens = [gaussian_pdf(s, 5.0, 1.0) for s in range(1, 11)]
        d = hist_from_density(dens)
        fit = fit_distribution(d, Family.GAUSSIAN)
        mu, sigma = fit.params
        assert abs(mu - 5.0) <= 0.05
        assert abs(sigma - 1.0) <= 0.05

    def test_all_votes_one_score_degenerate(self):
        counts = [0] * 10
        counts[6] = 200
        with pytest.raises(DegenerateDistributionError):
            fit_distribution(ScoreDistribution(tuple(counts)), Family.GAUSSIAN)

    def test_single_vote_rejected(self):
        counts = [0] * 10
        counts[4] = 1
        with pytest.raises(ValueError):
            fit_distribution(ScoreDistribution(tuple(counts)), Family.GAUSSIAN)

    def test_skewed_low_mean_prefers_gamma(self):
        # mass concentrated near scores 1-2, long right tail
        d = ScoreDistribution((320, 250, 140, 80, 40, 20, 10, 5, 3, 2))
        gamma_fit = fit_distribution(d, Family.GAMMA)
        gauss_fit = fit_distribution(d, Family.GAUSSIAN)
        assert gof_rmse(d, gamma_fit) < gof_rmse(d, gauss_fit)

    def test_gamma_moment_formulas(self):
        d = ScoreDistribution((50, 90, 70, 40, 20, 10, 5, 2, 2, 1))
        fit = fit_distribution(d, Family.GAMMA)
        m = d.mean - 1.0
        v = d.variance
        assert fit.params[0] == pytest.approx(m * m / v)
        assert fit.params[1] == pytest.approx(v / m)

    def test_reflection_commutes_with_gamma_fit(self):
        d = ScoreDistribution((2, 3, 5, 10, 20, 40, 80, 140, 250, 320))
        mirrored = ScoreDistribution(tuple(reversed(d.counts)))
        refl = fit_distribution(d, Family.REFLECTED_GAMMA)
        plain = fit_distribution(mirrored, Family.GAMMA)
        assert refl.params == pytest.approx(plain.params)
        np.testing.assert_allclose(
            binned_density(refl), binned_density(plain)[::-1], atol=1e-12
        )


class TestGofRmse:
    def test_perfect_fit_is_zero(self):
        fit = FittedDistribution(Family.GAUSSIAN, (5.2, 1.1))
        d = hist_from_density(binned_density(fit), total=10**12)
        assert gof_rmse(d, fit) < 1e-10

    def test_uniform_vs_peaked_gaussian(self):
        d = ScoreDistribution((100,) * 10)
        fit = FittedDistribution(Family.GAUSSIAN, (5.0, 0.3))
        assert gof_rmse(d, fit) > 0.1

    def test_shape_below_one_boundary_bin_finite(self):
        fit = FittedDistribution(Family.GAMMA, (0.7, 1.5))
        dens = binned_density(fit)
        assert np.all(np.isfinite(dens))
        assert dens.sum() == pytest.approx(1.0)
        # the same guard applies at the top edge for the reflected family
        refl = FittedDistribution(Family.REFLECTED_GAMMA, (0.7, 1.5))
        assert np.all(np.isfinite(binned_density(refl)))

    @pytest.mark.parametrize(
        "family,params",
        [
            (Family.GAUSSIAN, (5.2, 1.1)),
            (Family.GAMMA, (2.0, 0.8)),
            (Family.REFLECTED_GAMMA, (1.6, 0.9)),
        ],
    )
    def test_own_density_histogram_scores_zero(self, family, params):
        d, fit = self_hist(family, params, total=10**12)
        assert gof_rmse(d, fit) < 1e-10

    @pytest.mark.parametrize("params", [(5.5, 0.95), (5.0, 0.9)])
    def test_gaussian_refit_self_consistent(self, params):
        # refitting a histogram drawn from a mid-scale Gaussian recovers a
        # fit whose density matches that histogram
        d, _ = self_hist(Family.GAUSSIAN, params)
        refit = fit_distribution(d, Family.GAUSSIAN)
        assert gof_rmse(d, refit) <= 1e-6

    @pytest.mark.parametrize("family", [Family.GAMMA, Family.REFLECTED_GAMMA])
    def test_gamma_refit_self_consistent(self, family):
        # center-sampled discretization biases Gamma moments near the
        # support edge, which floors refit RMSE around 3e-5: Gamma
        # histograms never reproduce themselves to the Gaussian's 1e-6
        # no matter the shape, so this bound is the family's attainable one
        d, _ = self_hist(family, (22.5, 0.2))
        refit = fit_distribution(d, family)
        assert gof_rmse(d, refit) <= 1e-4


class TestGoodnessReport:
    def test_identifies_generating_family(self):
        correct = 0
        histograms = synthetic_histograms(30, seed=5)
        for family, d in histograms:
            if goodness_report(d).best_family is family:
                correct += 1
        assert correct / len(histograms) >= 0.9

    def test_rmse_keys_cover_families(self):
        _, d = synthetic_histograms(1, seed=0)[0]
        report = goodness_report(d)
        assert set(report.rmse) == set(Family)
        assert report.rmse[report.best_family] == min(report.rmse.values())


class TestBinarizeLabels:
    def corpus_with_means(self, means):
        recs = []
        for i, mean in enumerate(means):
            # two votes straddling the target mean
            lo = int(np.floor(mean))
            hi = int(np.ceil(mean))
            counts = [0] * 10
            if lo == hi:
                counts[lo - 1] = 2
            else:
                frac = mean - lo
                counts[lo - 1] = int(round((1 - frac) * 100))
                counts[hi - 1] = 100 - counts[lo - 1]
            recs.append(make_record(f"i{i}", counts=tuple(counts)))
        return Corpus(recs)

    def test_mean_6_delta_1_beautiful(self):
        corpus = self.corpus_with_means([6.0])
        assert binarize_labels(corpus, 1.0)["i0"] is AestheticLabel.BEAUTIFUL

    def test_mean_5_delta_1_discarded(self):
        corpus = self.corpus_with_means([5.0])
        assert binarize_labels(corpus, 1.0)["i0"] is AestheticLabel.DISCARDED

    def test_delta_zero_mean_5_beautiful(self):
        corpus = self.corpus_with_means([5.0])
        assert binarize_labels(corpus, 0.0)["i0"] is AestheticLabel.BEAUTIFUL

    def test_boundary_thresholds_exact(self):
        corpus = self.corpus_with_means([5.5, 4.5, 5.49, 4.51])
        labels = binarize_labels(corpus, 1.0)
        assert labels["i0"] is AestheticLabel.BEAUTIFUL  # exactly theta1
        assert labels["i1"] is AestheticLabel.BAD  # exactly theta2
        assert labels["i2"] is AestheticLabel.DISCARDED
        assert labels["i3"] is AestheticLabel.DISCARDED

    def test_partition_and_gap_monotonicity(self):
        rng = np.random.default_rng(11)
        means = rng.uniform(1.5, 9.5, size=60)
        corpus = self.corpus_with_means(means)
        narrow = binarize_labels(corpus, 0.5)
        wide = binarize_labels(corpus, 2.0)
        assert set(narrow) == set(corpus.ids())
        discarded_narrow = {k for k, v in narrow.items() if v is AestheticLabel.DISCARDED}
        discarded_wide = {k for k, v in wide.items() if v is AestheticLabel.DISCARDED}
        assert discarded_narrow <= discarded_wide

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            binarize_labels(Corpus([]), -0.1)


class TestChallengeStats:
    def test_two_image_average(self):
        c4 = [0] * 10
        c4[3] = 10
        c6 = [0] * 10
        c6[5] = 10
        corpus = Corpus([
            make_record("a", counts=tuple(c4), challenge_id="X"),
            make_record("b", counts=tuple(c6), challenge_id="X"),
        ])
        stats = challenge_stats(corpus)
        assert stats["X"].mean_of_means == pytest.approx(5.0)
        assert stats["X"].n_images == 2

    def test_empty_corpus(self):
        assert challenge_stats(Corpus([])) == {}

    def test_unassigned_grouping(self):
        corpus = Corpus([make_record("a"), make_record("b", challenge_id="X")])
        stats = challenge_stats(corpus)
        assert stats[UNASSIGNED_CHALLENGE].n_images == 1
        assert stats["X"].n_images == 1

    def test_variance_u_shape_preserved(self):
        def rec(rid, counts, cid):
            return make_record(rid, counts=tuple(counts), challenge_id=cid)

        mid = [0, 0, 0, 10, 30, 30, 10, 0, 0, 0]  # tight around 5
        low = [30, 10, 5, 3, 2, 1, 1, 1, 1, 1]  # spread, mean near 2
        high = list(reversed(low))
        corpus = Corpus([
            rec("m1", mid, "mid"), rec("m2", mid, "mid"),
            rec("l1", low, "low"), rec("l2", low, "low"),
            rec("h1", high, "high"), rec("h2", high, "high"),
        ])
        stats = challenge_stats(corpus)
        assert stats["low"].mean_of_variances > stats["mid"].mean_of_variances
        assert stats["high"].mean_of_variances > stats["mid"].mean_of_variances
        assert stats["low"].mean_of_means < 5 < stats["high"].mean_of_means
