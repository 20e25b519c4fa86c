"""Deterministic synthetic corpora and fixtures.

Everything here exists so that mining behavior can be verified against
constructions whose ground truth is known: planted regression signals,
synonym groups with controlled edit distances, histograms drawn from
known score-distribution families, and images whose features are
generated from the very attributes the pipeline should rediscover. All
generators are pure functions of their seed.
"""

from __future__ import annotations

import string

import numpy as np

from .attribmine import CandidateTerm
from .corpus import CommentRecord, Corpus, ImageRecord, Phase, ScoreDistribution
from .scorestats import Family, FittedDistribution, binned_density

_LETTERS = string.ascii_lowercase


def synonym_candidates(
    n_groups: int, variants_per_group: int = 3, seed: int = 0
) -> tuple[list[CandidateTerm], list[int]]:
    """Candidate bigrams whose second words form planted synonym groups.

    Group g's words are base_g plus variants made by appending one
    letter, so within a group all pairwise edit distances are <= 1.
    Bases are built as x*6 + y*6 over distinct letter pairs, which keeps
    any two bases >= 6 apart and therefore members of different groups
    >= 4 apart. Returns the candidates and their true group index.
    """
    if n_groups > len(_LETTERS) ** 2:
        raise ValueError("too many groups for the base-word alphabet")
    if variants_per_group < 1 or variants_per_group > len(_LETTERS):
        raise ValueError("variants_per_group out of range")
    rng = np.random.default_rng(seed)
    cands = []
    truth = []
    weight = 1.0
    for g in range(n_groups):
        a, b = divmod(g, len(_LETTERS))
        base = _LETTERS[a] * 6 + _LETTERS[b] * 6
        words = [base] + [
            base + _LETTERS[v] for v in range(variants_per_group - 1)
        ]
        for word in words:
            first = _LETTERS[int(rng.integers(len(_LETTERS)))] * 3
            cands.append(CandidateTerm(term=(first, word), weight=weight))
            truth.append(g)
            weight += 0.001  # distinct non-zero weights, stable order
    return cands, truth


def synthetic_histograms(
    n: int, seed: int = 0, n_votes: int = 20000
) -> list[tuple[Family, ScoreDistribution]]:
    """Vote histograms drawn from a known family, cycling the families.

    Each histogram is a multinomial sample of the family's binned
    density. Parameter ranges keep the families distinguishable: Gamma
    shapes stay small enough to be visibly skewed, Gaussians sit in the
    symmetric middle of the scale.
    """
    rng = np.random.default_rng(seed)
    out = []
    families = list(Family)
    for i in range(n):
        family = families[i % len(families)]
        if family is Family.GAUSSIAN:
            params = (rng.uniform(4.0, 6.0), rng.uniform(0.9, 1.5))
        else:
            params = (rng.uniform(1.2, 3.0), rng.uniform(0.5, 1.0))
        dens = binned_density(FittedDistribution(family, params))
        counts = rng.multinomial(n_votes, dens)
        out.append((family, ScoreDistribution(tuple(int(c) for c in counts))))
    return out


def _code(i: int) -> str:
    """Three-letter base-26 code for index ``i`` (aaa, aab, ...)."""
    a, rest = divmod(i, 26 * 26)
    b, c = divmod(rest, 26)
    return _LETTERS[a] + _LETTERS[b] + _LETTERS[c]


def histogram_for_mean(mean: float, total: int = 1_000_000) -> ScoreDistribution:
    """A two-bin vote histogram whose mean score is ``mean``.

    Mass is split between floor(mean) and floor(mean)+1 so that the
    histogram mean matches ``mean`` to within 1/(2*total). ``mean`` must
    lie strictly inside (1, 10) far enough from the ends for both bins
    to exist.
    """
    low = int(np.floor(mean))
    low = min(max(low, 1), 9)
    at_low = int(round(total * (low + 1 - mean)))
    at_low = min(max(at_low, 0), total)
    counts = [0] * 10
    counts[low - 1] = at_low
    counts[low] = total - at_low
    return ScoreDistribution(tuple(counts))


def attribute_recovery_corpus(
    n_docs: int = 2000,
    n_phrases: int = 500,
    n_planted: int = 20,
    noise: float = 0.3,
    phrases_per_doc: int = 20,
    seed: int = 0,
) -> tuple[Corpus, dict[tuple[str, str], float]]:
    """A comment corpus whose mean scores are driven by planted bigrams.

    Every phrase is a two-word bigram built from globally unique words,
    so each phrase maps to exactly one vocabulary column. Each document
    carries ``phrases_per_doc`` distinct phrases, one per comment. A
    random subset of ``n_planted`` phrases gets a nonzero weight: the
    first half positive, the second half negative, with magnitudes
    spread over [1.0, 1.9] so document signals rarely tie. The
    document's mean score is 5 plus the sum of its planted weights plus
    Gaussian noise, realized as a two-bin vote histogram. Returns the
    corpus and the planted weight per phrase.
    """
    rng = np.random.default_rng(seed)
    phrases = [("f" + _code(i), "s" + _code(i)) for i in range(n_phrases)]
    chosen = sorted(int(i) for i in rng.choice(n_phrases, size=n_planted, replace=False))
    half = n_planted // 2
    planted = {}
    for rank, idx in enumerate(chosen):
        magnitude = 1.0 + 0.1 * (rank if rank < half else rank - half)
        planted[phrases[idx]] = magnitude if rank < half else -magnitude

    records = []
    for d in range(n_docs):
        picks = rng.choice(n_phrases, size=phrases_per_doc, replace=False)
        signal = sum(planted.get(phrases[int(i)], 0.0) for i in picks)
        mean = 5.0 + signal + float(rng.normal(0.0, noise))
        mean = float(np.clip(mean, 1.02, 9.98))
        comments = tuple(
            CommentRecord(text=" ".join(phrases[int(i)]), phase=Phase.DURING)
            for i in picks
        )
        records.append(
            ImageRecord(
                image_id=f"d{d:04d}",
                scores=histogram_for_mean(mean),
                comments=comments,
            )
        )
    return Corpus(records), planted


def _concept_corpus(
    n_images: int,
    n_beautiful: int,
    n_ugly: int,
    feature_dim: int,
    n_fillers: int,
    n_votes: int,
    featureless: int,
    id_prefix: str,
    feature_decimals: int | None,
    seed: int,
) -> tuple[Corpus, dict]:
    """Images whose comments and features share planted visual concepts.

    Each concept c has a latent side (beautiful or ugly), two synonym
    surface forms (second words at edit distance 1 of each other and
    >= 4 from every other concept), and a unit feature prototype. An
    image's latent quality q ~ U(-1, 1) sets both its mean score
    (5 + 1.8 q + noise) and each concept's activation probability:
    beautiful concepts fire more often when q is high, ugly ones when q
    is low. An active concept contributes one comment (a random one of
    its two forms) and adds its prototype to the feature vector, so the
    same hidden state is recoverable from text mining and learnable
    from features. Filler phrases fire at a flat rate and carry no
    signal.
    """
    rng = np.random.default_rng(seed)
    n_concepts = n_beautiful + n_ugly
    forms: list[list[tuple[str, str]]] = []
    for c in range(n_concepts):
        a, b = divmod(c, 26)
        base = _LETTERS[a] * 6 + _LETTERS[b] * 6
        second_words = [base, base + "x"]
        forms.append(
            [
                ("w" + _code(2 * c + k), second_words[k])
                for k in range(2)
            ]
        )
    fillers = [("g" + _code(i), "h" + _code(i)) for i in range(n_fillers)]
    protos = rng.normal(size=(n_concepts, feature_dim))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)

    tags = ("landscape", "portrait", "cityscape")
    skip_features = set(
        int(i) for i in rng.choice(n_images, size=featureless, replace=False)
    )
    records = []
    quality = {}
    for i in range(n_images):
        image_id = f"{id_prefix}{i:04d}"
        q = float(rng.uniform(-1.0, 1.0))
        quality[image_id] = q
        p_beau = 0.05 + 0.65 * (q + 1.0) / 2.0
        p_ugly = 0.05 + 0.65 * (1.0 - q) / 2.0
        active = [
            c
            for c in range(n_concepts)
            if rng.random() < (p_beau if c < n_beautiful else p_ugly)
        ]
        comments = []
        for c in active:
            form = forms[c][int(rng.integers(2))]
            phase = Phase.DURING if rng.random() < 0.7 else Phase.AFTER
            comments.append(CommentRecord(text=" ".join(form), phase=phase))
        for f in fillers:
            if rng.random() < 0.25:
                comments.append(CommentRecord(text=" ".join(f), phase=Phase.DURING))
        x = 0.35 * rng.normal(size=feature_dim)
        for c in active:
            x += protos[c] * (0.8 + 0.4 * float(rng.random()))
        mean = 5.0 + 1.8 * q + float(rng.normal(0.0, 0.15))
        mean = float(np.clip(mean, 1.05, 9.95))
        if q > 0.3:
            tag = tags[0]
        elif q < -0.3:
            tag = tags[2]
        else:
            tag = tags[1]
        if feature_decimals is not None:
            x = np.round(x, feature_decimals)
        records.append(
            ImageRecord(
                image_id=image_id,
                scores=histogram_for_mean(mean, total=n_votes),
                comments=tuple(comments),
                semantic_tags=frozenset({tag}),
                challenge_id=f"ch{i % 5:02d}",
                features=None if i in skip_features else tuple(float(v) for v in x),
            )
        )
    meta = {
        "beautiful_forms": [forms[c] for c in range(n_beautiful)],
        "ugly_forms": [forms[c] for c in range(n_beautiful, n_concepts)],
        "filler_forms": fillers,
        "prototypes": protos,
        "quality": quality,
    }
    return Corpus(records), meta


def e2e_corpus(n_images: int = 1000, seed: int = 0) -> tuple[Corpus, dict]:
    """A full-size concept corpus for exercising the whole pipeline.

    1000 images, six beautiful and six ugly concepts with two synonym
    forms each, 256-dimensional features, and 200 votes per image. See
    :func:`_concept_corpus` for the generative story.
    """
    return _concept_corpus(
        n_images=n_images,
        n_beautiful=6,
        n_ugly=6,
        feature_dim=256,
        n_fillers=20,
        n_votes=200,
        featureless=5,
        id_prefix="img",
        feature_decimals=None,
        seed=seed,
    )


def tiny_corpus(n_images: int = 140, seed: int = 0) -> tuple[Corpus, dict]:
    """A small concept corpus suitable for bundling and fast tests.

    Two beautiful and two ugly concepts, 32-dimensional features
    rounded to six decimals so the serialized form stays compact, and a
    handful of records that deliberately lack features so reader
    warning paths get exercised.
    """
    return _concept_corpus(
        n_images=n_images,
        n_beautiful=2,
        n_ugly=2,
        feature_dim=32,
        n_fillers=6,
        n_votes=200,
        featureless=4,
        id_prefix="t",
        feature_decimals=6,
        seed=seed,
    )
