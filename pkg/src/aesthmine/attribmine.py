"""Turning regression weights into named textual attributes.

The chain: take the strongest positively and negatively weighted bigrams
from the sparse regression, build a similarity matrix over each polarity
using the edit distance between second words only (first words are
modifiers like "great"/"nice" and would keep synonyms apart), cluster
with the normalized-Laplacian spectral method, and name each cluster by
its heaviest member. An image supports an attribute when any member
bigram occurs in its comments, which pools the supporting images of all
synonyms in a cluster.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, ImageRecord
from .errors import DataError
from .optim import ElasticNetModel
from .textfeat import Term, Vocabulary, term_from_text, term_to_text, tokenize

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 1.0
KMEANS_RESTARTS = 20
KMEANS_MAX_ITER = 300


class Polarity(enum.Enum):
    BEAUTIFUL = "beautiful"
    UGLY = "ugly"


@dataclass(frozen=True)
class CandidateTerm:
    """A bigram with its regression weight; sign fixes the polarity."""

    term: tuple[str, str]
    weight: float

    def __post_init__(self):
        if self.weight == 0:
            raise ValueError("candidate weight must be non-zero")

    @property
    def polarity(self) -> Polarity:
        return Polarity.BEAUTIFUL if self.weight > 0 else Polarity.UGLY

    @property
    def second(self) -> str:
        return self.term[1]


@dataclass
class CandidateSelection:
    beautiful: list[CandidateTerm]
    ugly: list[CandidateTerm]
    shortfall_beautiful: bool
    shortfall_ugly: bool

    @property
    def all(self) -> list[CandidateTerm]:
        return self.beautiful + self.ugly


def select_candidates(
    model: ElasticNetModel, vocab: Vocabulary, k_per_polarity: int
) -> CandidateSelection:
    """Top bigrams by weight: descending for beautiful, ascending for ugly.

    Unigram terms never become candidates. If a polarity has fewer than
    k non-zero bigram weights, all available are returned and the
    shortfall is flagged.
    """
    if k_per_polarity < 1:
        raise ValueError("k_per_polarity must be >= 1")
    if len(vocab) != len(model.beta):
        raise ValueError("vocabulary does not match model dimensionality")
    bigram_idx = [
        j for j, t in enumerate(vocab.terms)
        if isinstance(t, tuple) and model.beta[j] != 0
    ]
    pos = [j for j in bigram_idx if model.beta[j] > 0]
    neg = [j for j in bigram_idx if model.beta[j] < 0]
    # ties in weight break on the bigram text for reproducibility
    pos.sort(key=lambda j: (-model.beta[j], term_to_text(vocab.terms[j])))
    neg.sort(key=lambda j: (model.beta[j], term_to_text(vocab.terms[j])))

    beautiful = [
        CandidateTerm(vocab.terms[j], float(model.beta[j]))
        for j in pos[:k_per_polarity]
    ]
    ugly = [
        CandidateTerm(vocab.terms[j], float(model.beta[j]))
        for j in neg[:k_per_polarity]
    ]
    short_b = len(beautiful) < k_per_polarity
    short_u = len(ugly) < k_per_polarity
    if short_b or short_u:
        logger.warning(
            "candidate shortfall: %d beautiful, %d ugly of %d requested",
            len(beautiful), len(ugly), k_per_polarity,
        )
    return CandidateSelection(beautiful, ugly, short_b, short_u)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        curr = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            curr[j] = min(
                prev[j] + 1,
                curr[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
        prev = curr
    return prev[-1]


def similarity_matrix(
    cands: Sequence[CandidateTerm], sigma: float = DEFAULT_SIGMA
) -> np.ndarray:
    """S_ij = exp(-levenshtein(second_i, second_j)/sigma); first words ignored."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if len({c.polarity for c in cands}) > 1:
        raise ValueError("candidates must share polarity")
    seconds = [c.second for c in cands]
    n = len(seconds)
    S = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            S[i, j] = S[j, i] = math.exp(-levenshtein(seconds[i], seconds[j]) / sigma)
    return S


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float]:
    k = len(centers)
    n = len(X)
    prev = None
    labels = np.zeros(n, dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        d2 = (
            np.sum(X**2, axis=1)[:, None]
            - 2 * X @ centers.T
            + np.sum(centers**2, axis=1)[None, :]
        )
        labels = np.argmin(d2, axis=1)
        # refill each empty cluster with the currently worst-fit point
        moved: set[int] = set()
        for c in range(k):
            if not np.any(labels == c):
                gaps = d2[np.arange(n), labels].copy()
                if moved:
                    gaps[list(moved)] = -np.inf
                worst = int(np.argmax(gaps))
                labels[worst] = c
                centers[c] = X[worst]
                moved.add(worst)
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels
        for c in range(k):
            centers[c] = X[labels == c].mean(axis=0)
    inertia = float(np.sum((X - centers[labels]) ** 2))
    return labels, inertia


def _kmeans(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    best_labels = None
    best_inertia = np.inf
    for _ in range(KMEANS_RESTARTS):
        centers = _kmeans_pp_init(X, k, rng)
        labels, inertia = _lloyd(X, centers.copy())
        if inertia < best_inertia - 1e-12:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel clusters in order of first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    isolated: tuple[int, ...]

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels.tolist()))


def spectral_cluster(S: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    """Normalized-Laplacian spectral clustering.

    D^{-1/2} S D^{-1/2}, top-k eigenvectors, L2-normalized rows, then
    k-means (seeded k-means++ with restarts). Items with zero row sum
    cannot be normalized; each becomes its own cluster up front and is
    reported. Labels are renumbered by first appearance, so the output
    is invariant to eigenvector sign and uniform scaling of S.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("similarity matrix must be square")
    if not np.allclose(S, S.T, atol=1e-10):
        raise ValueError("similarity matrix must be symmetric")
    if np.any(S < 0):
        raise ValueError("similarity entries must be non-negative")
    n = S.shape[0]
    if not (1 <= k <= n):
        raise ValueError("need 1 <= k <= n")

    row_sums = S.sum(axis=1)
    isolated = tuple(int(i) for i in np.flatnonzero(row_sums == 0))
    if isolated:
        logger.warning("%d isolated item(s) form singleton clusters", len(isolated))
    active = np.flatnonzero(row_sums > 0)

    labels = np.full(n, -1, dtype=int)
    for rank, i in enumerate(isolated):
        labels[i] = rank
    offset = len(isolated)

    if len(active):
        k_eff = max(1, min(k - len(isolated), len(active)))
        Sa = S[np.ix_(active, active)]
        d = Sa.sum(axis=1)
        inv_sqrt = 1.0 / np.sqrt(d)
        L = Sa * inv_sqrt[:, None] * inv_sqrt[None, :]
        eigvals, eigvecs = np.linalg.eigh(L)
        V = eigvecs[:, np.argsort(eigvals)[::-1][:k_eff]]
        # fix eigenvector signs: largest-magnitude entry made positive
        for col in range(V.shape[1]):
            pivot = int(np.argmax(np.abs(V[:, col])))
            if V[pivot, col] < 0:
                V[:, col] = -V[:, col]
        norms = np.linalg.norm(V, axis=1)
        norms[norms == 0] = 1.0
        V = V / norms[:, None]
        sub = _kmeans(V, k_eff, np.random.default_rng(seed))
        labels[active] = sub + offset

    return ClusterAssignment(labels=_canonical_labels(labels), isolated=isolated)


@dataclass
class AttributeCluster:
    """Synonym group of same-polarity candidate bigrams with a label."""

    members: list[CandidateTerm]
    label: tuple[str, str]
    polarity: Polarity

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must have members")
        if any(m.polarity != self.polarity for m in self.members):
            raise ValueError("cluster members must share polarity")
        if self.label not in {m.term for m in self.members}:
            raise ValueError("label must be a member bigram")

    @property
    def label_text(self) -> str:
        return term_to_text(self.label)


def _deterministic_label(members: Sequence[CandidateTerm]) -> tuple[str, str]:
    best = min(members, key=lambda m: (-abs(m.weight), term_to_text(m.term)))
    return best.term


def cluster_candidates(
    cands: Sequence[CandidateTerm],
    n_clusters: int,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
) -> list[AttributeCluster]:
    """Similarity + spectral clustering for one polarity's candidates."""
    if not cands:
        return []
    n_clusters = min(n_clusters, len(cands))
    S = similarity_matrix(cands, sigma)
    assignment = spectral_cluster(S, n_clusters, seed)
    groups: dict[int, list[CandidateTerm]] = {}
    for cand, lab in zip(cands, assignment.labels):
        groups.setdefault(int(lab), []).append(cand)
    clusters = []
    for lab in sorted(groups):
        members = sorted(
            groups[lab], key=lambda m: (-abs(m.weight), term_to_text(m.term))
        )
        clusters.append(
            AttributeCluster(
                members=members,
                label=_deterministic_label(members),
                polarity=members[0].polarity,
            )
        )
    return clusters


def name_clusters(
    clusters: Sequence[AttributeCluster],
    random_draw: bool = False,
    seed: int | None = None,
) -> list[AttributeCluster]:
    """Label each cluster: by default the max-|weight| member (ties to the
    lexicographically smaller bigram); optionally a seeded uniform draw."""
    rng = np.random.default_rng(seed) if random_draw else None
    out = []
    for cluster in clusters:
        if rng is not None:
            label = cluster.members[int(rng.integers(len(cluster.members)))].term
        else:
            label = _deterministic_label(cluster.members)
        out.append(
            AttributeCluster(
                members=list(cluster.members), label=label, polarity=cluster.polarity
            )
        )
    return out


@dataclass
class TextualAttribute:
    """A named cluster plus the images whose comments support it."""

    cluster: AttributeCluster
    positive_ids: frozenset[str]

    @property
    def label(self) -> str:
        return self.cluster.label_text

    @property
    def polarity(self) -> Polarity:
        return self.cluster.polarity


def record_bigrams(record: ImageRecord) -> set[tuple[str, str]]:
    """All consecutive token pairs in the record's comments, per comment."""
    pairs: set[tuple[str, str]] = set()
    for comment in record.comments:
        tokens = tokenize(comment.text)
        pairs.update(zip(tokens, tokens[1:]))
    return pairs


def assign_positive_images(
    clusters: Sequence[AttributeCluster], corpus: Corpus
) -> list[TextualAttribute]:
    """An image is positive for a cluster when any member bigram appears
    as a consecutive pair in one of its comments."""
    member_sets = [{m.term for m in c.members} for c in clusters]
    positives: list[set[str]] = [set() for _ in clusters]
    for record in corpus:
        pairs = record_bigrams(record)
        if not pairs:
            continue
        for i, members in enumerate(member_sets):
            if pairs & members:
                positives[i].add(record.image_id)
    return [
        TextualAttribute(cluster=c, positive_ids=frozenset(p))
        for c, p in zip(clusters, positives)
    ]


def save_candidates(selection: CandidateSelection, path: str | Path) -> None:
    """Header with shortfall flags, then one JSON line per candidate in
    selection order (beautiful first)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "shortfall_beautiful": selection.shortfall_beautiful,
            "shortfall_ugly": selection.shortfall_ugly,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for cand in selection.all:
            obj = {
                "beta": float(cand.weight),
                "polarity": cand.polarity.value,
                "term": term_to_text(cand.term),
            }
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def load_candidates(path: str | Path) -> CandidateSelection:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines:
            raise DataError(f"{path}: empty candidate file")
        header = lines[0]
        beautiful: list[CandidateTerm] = []
        ugly: list[CandidateTerm] = []
        for obj in lines[1:]:
            cand = CandidateTerm(term_from_text(obj["term"]), float(obj["beta"]))
            if Polarity(obj["polarity"]) is not cand.polarity:
                raise DataError(
                    f"{path}: candidate {obj['term']!r} polarity disagrees "
                    "with its weight sign"
                )
            (beautiful if cand.polarity is Polarity.BEAUTIFUL else ugly).append(cand)
        return CandidateSelection(
            beautiful=beautiful,
            ugly=ugly,
            shortfall_beautiful=bool(header["shortfall_beautiful"]),
            shortfall_ugly=bool(header["shortfall_ugly"]),
        )
    except DataError:
        raise
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad candidate file: {exc}") from exc


def save_clusters(clusters: Sequence[AttributeCluster], path: str | Path) -> None:
    """Like save_attributes but before image assignment: no positive_ids."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for cluster in clusters:
            obj = {
                "label": cluster.label_text,
                "members": [
                    {"term": term_to_text(m.term), "beta": m.weight}
                    for m in cluster.members
                ],
                "polarity": cluster.polarity.value,
            }
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def load_clusters(path: str | Path) -> list[AttributeCluster]:
    path = Path(path)
    clusters = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                members = [
                    CandidateTerm(term_from_text(m["term"]), float(m["beta"]))
                    for m in obj["members"]
                ]
                clusters.append(
                    AttributeCluster(
                        members=members,
                        label=term_from_text(obj["label"]),
                        polarity=Polarity(obj["polarity"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path}:{line_no}: bad cluster record: {exc}") from exc
    return clusters


def save_attributes(attrs: Sequence[TextualAttribute], path: str | Path) -> None:
    """One JSON object per line: label, polarity, members, positive ids."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for attr in attrs:
            obj = {
                "label": attr.label,
                "polarity": attr.polarity.value,
                "members": [
                    {"term": term_to_text(m.term), "beta": m.weight}
                    for m in attr.cluster.members
                ],
                "positive_ids": sorted(attr.positive_ids),
            }
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def load_attributes(path: str | Path) -> list[TextualAttribute]:
    path = Path(path)
    attrs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                members = [
                    CandidateTerm(term_from_text(m["term"]), float(m["beta"]))
                    for m in obj["members"]
                ]
                cluster = AttributeCluster(
                    members=members,
                    label=term_from_text(obj["label"]),
                    polarity=Polarity(obj["polarity"]),
                )
                attrs.append(
                    TextualAttribute(
                        cluster=cluster,
                        positive_ids=frozenset(obj["positive_ids"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise DataError(f"{path}:{line_no}: bad attribute record: {exc}") from exc
    return attrs
