"""Parametric models of vote histograms, labeling, and challenge rollups.

Vote histograms over the 1..10 scale are fit by moment matching with one
of three families: Gaussian for the symmetric middle of the quality
range, Gamma (shifted to start at the bottom score) for right-skewed
low-mean histograms, and a reflected Gamma for left-skewed high-mean
ones, where the reflection maps a score s to (s_min + s_max) - s.

Goodness of fit compares the normalized histogram against the fitted
density sampled at the ten bin centers and renormalized to sum one.
Binary labels come from a gap rule: beautiful above 5 + delta/2, bad
below 5 - delta/2, discarded inside the gap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm as norm_dist

from .corpus import (
    SCORE_MAX,
    SCORE_MIN,
    UNASSIGNED_CHALLENGE,
    Corpus,
    ScoreDistribution,
)
from .errors import DegenerateDistributionError, NumericError

BIN_CENTERS = np.arange(SCORE_MIN, SCORE_MAX + 1, dtype=float)
PIVOT = 5.0


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    GAMMA = "gamma"
    REFLECTED_GAMMA = "reflected_gamma"


class AestheticLabel(enum.Enum):
    BEAUTIFUL = "beautiful"
    BAD = "bad"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class FittedDistribution:
    family: Family
    params: tuple[float, float]  # (mu, sigma) or (shape, scale)
    support: tuple[int, int] = (SCORE_MIN, SCORE_MAX)

    def __post_init__(self):
        if self.params[1] <= 0 or (
            self.family is not Family.GAUSSIAN and self.params[0] <= 0
        ):
            raise ValueError("distribution parameters must be positive")


def _moments(d: ScoreDistribution) -> tuple[float, float]:
    if d.total_votes < 2:
        raise ValueError("need at least two votes to fit a distribution")
    mean = d.mean
    var = d.variance
    if var == 0:
        raise DegenerateDistributionError(
            "all votes on one score: zero variance"
        )
    return mean, var


def fit_distribution(d: ScoreDistribution, family: Family) -> FittedDistribution:
    """Moment-matching fit of one family to a vote histogram.

    Gamma families work on the score shifted to start at zero; the
    reflected family fits the mirrored histogram, so its parameters
    describe the reflected variable.
    """
    mean, var = _moments(d)
    if family is Family.GAUSSIAN:
        return FittedDistribution(family, (mean, float(np.sqrt(var))))
    if family is Family.GAMMA:
        m = mean - SCORE_MIN
    else:  # reflected: moments of (s_min + s_max) - s
        m = (SCORE_MIN + SCORE_MAX) - mean - SCORE_MIN
    if m <= 0:
        raise DegenerateDistributionError(
            "non-positive shifted mean: moment estimates undefined"
        )
    shape = m * m / var
    scale = var / m
    return FittedDistribution(family, (float(shape), float(scale)))


def _pointwise_density(fit: FittedDistribution, s: np.ndarray) -> np.ndarray:
    if fit.family is Family.GAUSSIAN:
        mu, sigma = fit.params
        return norm_dist.pdf(s, loc=mu, scale=sigma)
    shape, scale = fit.params
    if fit.family is Family.GAMMA:
        x = s - SCORE_MIN
    else:
        x = (SCORE_MIN + SCORE_MAX) - s - SCORE_MIN
    return gamma_dist.pdf(x, shape, scale=scale)


def binned_density(fit: FittedDistribution) -> np.ndarray:
    """Fitted density at bin centers 1..10, renormalized to sum 1.

    A Gamma with shape < 1 diverges at the support edge, so a
    non-finite boundary value is replaced by the cell-averaged mass of
    the half-cell next to the edge (2 * CDF at 0.5).
    """
    dens = _pointwise_density(fit, BIN_CENTERS)
    bad = ~np.isfinite(dens)
    if np.any(bad):
        shape, scale = fit.params
        edge = 2.0 * gamma_dist.cdf(0.5, shape, scale=scale)
        dens = np.where(bad, edge, dens)
    total = dens.sum()
    if not np.isfinite(total) or total <= 0:
        raise NumericError("fitted density vanishes on the score bins")
    return dens / total


def gof_rmse(d: ScoreDistribution, fit: FittedDistribution) -> float:
    """RMSE between the normalized histogram and the binned fit density."""
    observed = d.normalized()
    expected = binned_density(fit)
    return float(np.sqrt(np.mean((observed - expected) ** 2)))


@dataclass
class GofReport:
    rmse: dict[Family, float]
    best_family: Family


def goodness_report(d: ScoreDistribution) -> GofReport:
    """Fit all three families and rank by RMSE; ties keep enum order."""
    rmse = {family: gof_rmse(d, fit_distribution(d, family)) for family in Family}
    best = min(Family, key=lambda f: rmse[f])
    return GofReport(rmse=rmse, best_family=best)


def binarize_labels(
    corpus: Corpus, delta: float
) -> dict[str, AestheticLabel]:
    """Gap labeling around the scale midpoint.

    theta1 = 5 + delta/2 and theta2 = 5 - delta/2; beautiful at or above
    theta1 (checked first, so delta=0 sends mean exactly 5 to
    beautiful), bad at or below theta2, discarded between.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    theta1 = PIVOT + delta / 2.0
    theta2 = PIVOT - delta / 2.0
    labels = {}
    for rec in corpus:
        mean = rec.scores.mean
        if mean >= theta1:
            labels[rec.image_id] = AestheticLabel.BEAUTIFUL
        elif mean <= theta2:
            labels[rec.image_id] = AestheticLabel.BAD
        else:
            labels[rec.image_id] = AestheticLabel.DISCARDED
    return labels


@dataclass
class ChallengeStats:
    challenge_id: str
    n_images: int
    mean_of_means: float
    mean_of_variances: float


def challenge_stats(corpus: Corpus) -> dict[str, ChallengeStats]:
    """Per-challenge aggregation of image mean scores and variances.

    Images without a challenge are pooled under a reserved id.
    """
    groups: dict[str, list[tuple[float, float]]] = {}
    for rec in corpus:
        cid = rec.challenge_id if rec.challenge_id is not None else UNASSIGNED_CHALLENGE
        groups.setdefault(cid, []).append((rec.scores.mean, rec.scores.variance))
    out = {}
    for cid, pairs in groups.items():
        means = [p[0] for p in pairs]
        variances = [p[1] for p in pairs]
        out[cid] = ChallengeStats(
            challenge_id=cid,
            n_images=len(pairs),
            mean_of_means=float(np.mean(means)),
            mean_of_variances=float(np.mean(variances)),
        )
    return out
