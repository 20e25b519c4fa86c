"""Applications over the attribute bank.

Covers the three downstream uses of a trained bank: a binary aesthetic
preference model over attribute vectors, attribute tagging for single
images, and joint attribute/semantic retrieval with product fusion, plus
nearest neighbors in attribute space.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .corpus import Corpus, DataSplit
from .errors import DataError, LabelingError, QueryError
from .scorestats import AestheticLabel, binarize_labels
from .visattr import (
    AttributeBank,
    FeatureStore,
    TrainMeta,
    attribute_seed,
    compute_auc,
    embed,
    embed_store,
    fit_logistic_sgd,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreferenceModel:
    """Logistic beautiful-vs-bad model over attribute vectors."""

    weights: np.ndarray
    bias: float
    auc: float
    delta: float
    meta: TrainMeta

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite 1-D vector")
        object.__setattr__(self, "weights", w)
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def predict_preference(model: PreferenceModel, attribute_vector) -> float:
    """Probability that the image is beautiful rather than bad."""
    x = np.asarray(attribute_vector, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"vector has shape {x.shape}, model expects ({model.dim},)")
    return float(expit(float(np.dot(model.weights, x)) + model.bias))


def _labeled_rows(
    labels: dict[str, AestheticLabel],
    ids: Iterable[str],
    vectors: dict[str, np.ndarray],
) -> tuple[list[str], np.ndarray]:
    kept = sorted(
        i
        for i in ids
        if i in vectors and labels.get(i, AestheticLabel.DISCARDED) is not AestheticLabel.DISCARDED
    )
    y = np.array(
        [1.0 if labels[i] is AestheticLabel.BEAUTIFUL else -1.0 for i in kept]
    )
    return kept, y


def train_preference_classifier(
    bank: AttributeBank,
    store: FeatureStore,
    corpus: Corpus,
    split: DataSplit,
    delta: float,
    meta: TrainMeta = TrainMeta(),
) -> PreferenceModel:
    """Fit the preference model on gap-labeled attribute vectors.

    Images whose mean vote falls inside the delta gap are discarded from
    both training and validation; each remaining split must keep both
    classes or a LabelingError names the offending delta.
    """
    labels = binarize_labels(corpus, delta)
    ids, rows = embed_store(bank, store)
    vectors = dict(zip(ids, rows))

    train_ids, y_train = _labeled_rows(labels, split.train_ids, vectors)
    val_ids, y_val = _labeled_rows(labels, split.validation_ids, vectors)
    for name, y in (("training", y_train), ("validation", y_val)):
        if y.size == 0 or np.all(y == 1.0) or np.all(y == -1.0):
            raise LabelingError(
                f"delta={delta} leaves fewer than two classes in the {name} split"
            )

    X_train = np.stack([vectors[i] for i in train_ids])
    n_pos = int((y_train > 0).sum())
    n_neg = y_train.size - n_pos
    pos_weight = n_neg / n_pos if n_neg else 1.0
    w, b = fit_logistic_sgd(X_train, y_train, meta, pos_weight=pos_weight)

    probe = PreferenceModel(weights=w, bias=b, auc=0.5, delta=delta, meta=meta)
    val_scores = {i: predict_preference(probe, vectors[i]) for i in val_ids}
    pos = [val_scores[i] for i, yy in zip(val_ids, y_val) if yy > 0]
    neg = [val_scores[i] for i, yy in zip(val_ids, y_val) if yy < 0]
    return dataclasses.replace(probe, auc=compute_auc(pos, neg))


def save_preference_model(model: PreferenceModel, path: str | Path) -> None:
    obj = {
        "auc": float(model.auc),
        "bias": float(model.bias),
        "delta": float(model.delta),
        "train_meta": {
            "epochs": model.meta.epochs,
            "eta0": model.meta.eta0,
            "lam": model.meta.lam,
            "seed": model.meta.seed,
        },
        "weights": [float(v) for v in model.weights],
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")


def load_preference_model(path: str | Path) -> PreferenceModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        tm = obj["train_meta"]
        return PreferenceModel(
            weights=np.asarray(obj["weights"], dtype=float),
            bias=float(obj["bias"]),
            auc=float(obj["auc"]),
            delta=float(obj["delta"]),
            meta=TrainMeta(
                epochs=int(tm["epochs"]),
                eta0=float(tm["eta0"]),
                lam=float(tm["lam"]),
                seed=int(tm["seed"]),
            ),
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed preference model file: {exc}") from exc


def tag_image(bank: AttributeBank, x, m: int) -> list[str]:
    """Labels of the m most reactive attributes; ties fall to bank rank."""
    if not 0 <= m <= bank.embedding_dim:
        raise ValueError(f"m must lie in [0, {bank.embedding_dim}]")
    probs = embed(bank, x)
    order = np.argsort(-probs, kind="stable")
    return [bank.models[int(i)].label for i in order[:m]]


@dataclass(frozen=True)
class QuerySpec:
    """Parsed retrieval query: resolved terms per namespace plus a cutoff."""

    attribute_terms: tuple[str, ...]
    semantic_terms: tuple[str, ...]
    top_k: int

    def __post_init__(self):
        if not self.attribute_terms and not self.semantic_terms:
            raise ValueError("query needs at least one term")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class AttributeIndex:
    """Read-only retrieval index: attribute vectors plus semantic scores."""

    ids: list[str]
    vectors: np.ndarray
    attribute_labels: list[str]
    semantic_scores: dict[str, np.ndarray]
    skipped_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.vectors.shape != (len(self.ids), len(self.attribute_labels)):
            raise ValueError("vector block shape disagrees with ids and labels")
        for tag, scores in self.semantic_scores.items():
            if scores.shape != (len(self.ids),):
                raise ValueError(f"semantic scores for {tag!r} have wrong length")

    def vector_for(self, image_id: str) -> np.ndarray:
        try:
            row = self.ids.index(image_id)
        except ValueError:
            raise QueryError(f"unknown image id {image_id!r}") from None
        return self.vectors[row]


def build_index(
    bank: AttributeBank,
    store: FeatureStore,
    corpus: Corpus,
    split: DataSplit,
    meta: TrainMeta = TrainMeta(),
    ids: Sequence[str] | None = None,
) -> AttributeIndex:
    """Embed every image and train one semantic classifier per corpus tag.

    Semantic classifiers reuse the attribute SGD machinery with
    semantic_tags as labels; tags without a positive training image are
    skipped with a warning rather than failing the build.
    """
    ordered, vectors = embed_store(bank, store, ids)
    train_ids = sorted(i for i in store.ids() if i in split.train_ids and i in corpus)
    tags = sorted({t for rec in corpus for t in rec.semantic_tags})

    semantic_scores: dict[str, np.ndarray] = {}
    skipped: list[str] = []
    X_train = (
        np.stack([store.get(i) for i in train_ids]) if train_ids else np.empty((0, store.dim))
    )
    X_index = np.stack([store.get(i) for i in ordered])
    for tag in tags:
        y = np.array(
            [1.0 if tag in corpus.get(i).semantic_tags else -1.0 for i in train_ids]
        )
        n_pos = int((y > 0).sum())
        if n_pos == 0:
            logger.warning("semantic tag %r has no training positives; skipped", tag)
            skipped.append(tag)
            continue
        n_neg = y.size - n_pos
        pos_weight = n_neg / n_pos if n_neg else 1.0
        tag_meta = dataclasses.replace(
            meta, seed=attribute_seed(meta.seed, f"semantic:{tag}")
        )
        w, b = fit_logistic_sgd(X_train, y, tag_meta, pos_weight=pos_weight)
        semantic_scores[tag] = expit(X_index @ w + b)

    return AttributeIndex(
        ids=list(ordered),
        vectors=vectors,
        attribute_labels=[m.label for m in bank.models],
        semantic_scores=semantic_scores,
        skipped_tags=tuple(skipped),
    )


def parse_query(text: str, index: AttributeIndex, top_k: int) -> QuerySpec:
    """Split on the AND keyword and resolve each term case-insensitively.

    Attribute labels are checked before semantic tags; an unresolvable
    term raises a QueryError listing every known label.
    """
    raw_terms = [t.strip() for t in re.split(r"\s+AND\s+", text.strip()) if t.strip()]
    if not raw_terms:
        raise QueryError("query has no terms")
    attr_lookup = {label.lower(): label for label in index.attribute_labels}
    sem_lookup = {tag.lower(): tag for tag in index.semantic_scores}
    attribute_terms: list[str] = []
    semantic_terms: list[str] = []
    for term in raw_terms:
        folded = term.lower()
        if folded in attr_lookup:
            attribute_terms.append(attr_lookup[folded])
        elif folded in sem_lookup:
            semantic_terms.append(sem_lookup[folded])
        else:
            known = sorted(attr_lookup.values()) + sorted(sem_lookup.values())
            raise QueryError(
                f"unknown query term {term!r}; known labels: {', '.join(known)}"
            )
    return QuerySpec(
        attribute_terms=tuple(attribute_terms),
        semantic_terms=tuple(semantic_terms),
        top_k=top_k,
    )


def retrieve(index: AttributeIndex, query: QuerySpec) -> list[tuple[str, float]]:
    """Product-fused ranking: multiply term probabilities, sort descending.

    Multiplication approximates AND over the query terms; ties break on
    image_id so rankings are reproducible. Terms are folded in sorted order
    because float products are commutative but not associative, and query
    permutations must yield bitwise-identical scores.
    """
    scores = np.ones(len(index.ids))
    for term in sorted(query.attribute_terms):
        try:
            col = index.attribute_labels.index(term)
        except ValueError:
            raise QueryError(f"unknown attribute term {term!r}") from None
        scores = scores * index.vectors[:, col]
    for term in sorted(query.semantic_terms):
        if term not in index.semantic_scores:
            raise QueryError(f"unknown semantic term {term!r}")
        scores = scores * index.semantic_scores[term]
    ranked = sorted(zip(index.ids, scores), key=lambda pair: (-pair[1], pair[0]))
    return [(image_id, float(score)) for image_id, score in ranked[: query.top_k]]


def nearest_neighbors(
    index: AttributeIndex, query_id: str, m: int
) -> list[tuple[str, float]]:
    """Closest images in attribute space, ascending distance, query excluded."""
    if m < 0:
        raise ValueError("m must be >= 0")
    q = index.vector_for(query_id)
    dists = np.sqrt(((index.vectors - q) ** 2).sum(axis=1))
    ranked = sorted(
        (
            (image_id, float(d))
            for image_id, d in zip(index.ids, dists)
            if image_id != query_id
        ),
        key=lambda pair: (pair[1], pair[0]),
    )
    return ranked[:m]
