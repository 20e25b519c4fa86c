"""Image features and per-attribute logistic classifiers.

Images are summarised by a fixed-width descriptor. A small builtin extractor
covers corpora that ship raw pixels; externally computed vectors of any fixed
dimension plug in through the same feature store. Each textual attribute gets
a one-vs-rest logistic classifier trained with plain SGD, classifiers are
ranked by validation AUC, and the best per polarity form a bank whose stacked
probabilities give every image a compact attribute vector.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy.special import expit
from scipy.stats import rankdata

from .attribmine import Polarity, TextualAttribute
from .corpus import Corpus, DataSplit
from .errors import DataError, UntrainableAttributeError

logger = logging.getLogger(__name__)

N_COLOR_BINS = 8
N_ORIENT_BINS = 8
N_REGIONS = 8
BUILTIN_DIM = N_REGIONS * (3 * N_COLOR_BINS + N_ORIENT_BINS)
BUILTIN_EXTRACTOR_ID = "builtin-256"
PRECOMPUTED_EXTRACTOR_ID = "precomputed"

DEFAULT_EPOCHS = 10
DEFAULT_ETA0 = 0.1
DEFAULT_LAMBDA = 1e-5

# ITU-R 601 luma weights for the grayscale used by the gradient histograms.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FeatureVector:
    """Dense descriptor for one image."""

    values: np.ndarray
    extractor_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("feature values must be a non-empty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _load_rgb(image) -> np.ndarray:
    if isinstance(image, np.ndarray):
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError("pixel array must have shape (height, width, 3)")
        if image.dtype != np.uint8:
            raise ValueError("pixel array must be uint8")
        return image
    if isinstance(image, Image.Image):
        return np.asarray(image.convert("RGB"), dtype=np.uint8)
    if isinstance(image, (str, Path)):
        try:
            with Image.open(image) as im:
                return np.asarray(im.convert("RGB"), dtype=np.uint8)
        except FileNotFoundError:
            raise
        except OSError as exc:
            raise OSError(f"cannot decode image file {image}: {exc}") from exc
    raise ValueError(f"unsupported image source {type(image).__name__}")


def _region_slices(h: int, w: int) -> list[tuple[slice, slice]]:
    """Whole image, four quadrants, three horizontal strips, in that order."""
    hh, hw = h // 2, w // 2
    regions = [
        (slice(0, h), slice(0, w)),
        (slice(0, hh), slice(0, hw)),
        (slice(0, hh), slice(hw, w)),
        (slice(hh, h), slice(0, hw)),
        (slice(hh, h), slice(hw, w)),
    ]
    for rows in np.array_split(np.arange(h), 3):
        regions.append((slice(int(rows[0]), int(rows[-1]) + 1), slice(0, w)))
    return regions


def _color_block(region: np.ndarray) -> np.ndarray:
    out = np.empty(3 * N_COLOR_BINS)
    for c in range(3):
        counts = np.bincount(
            (region[..., c] // 32).ravel().astype(np.intp), minlength=N_COLOR_BINS
        )
        out[c * N_COLOR_BINS : (c + 1) * N_COLOR_BINS] = counts[:N_COLOR_BINS]
    return out / out.sum()


def _orientation_block(gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    mag = np.hypot(gx, gy)
    if mag.sum() <= 0.0:
        return np.zeros(N_ORIENT_BINS)
    ang = np.arctan2(gy, gx)
    # angle +pi lands exactly on the upper edge; fold it into the last bin
    idx = np.floor((ang + np.pi) / (2.0 * np.pi / N_ORIENT_BINS)).astype(np.intp)
    idx = np.clip(idx, 0, N_ORIENT_BINS - 1)
    hist = np.bincount(idx.ravel(), weights=mag.ravel(), minlength=N_ORIENT_BINS)
    return hist / hist.sum()


def extract_builtin_features(image) -> FeatureVector:
    """256-dim descriptor: per-region color and gradient-orientation histograms.

    Eight regions (whole, 4 quadrants, 3 horizontal strips) each contribute a
    24-dim per-channel color histogram (pixel value // 32) and an 8-dim
    magnitude-weighted gradient-orientation histogram; every block is L1
    normalised, with all-zero gradient blocks left at zero.
    """
    arr = _load_rgb(image)
    h, w = arr.shape[:2]
    if h < 3 or w < 3:
        raise ValueError(f"image must be at least 3x3 pixels, got {h}x{w}")
    luma = arr.astype(float) @ _LUMA_WEIGHTS
    # gradient of the full image once; regions slice the field so tiny
    # quadrants never fall below the two samples central differences need
    gy, gx = np.gradient(luma)
    blocks = []
    for rs, cs in _region_slices(h, w):
        blocks.append(_color_block(arr[rs, cs]))
        blocks.append(_orientation_block(gy[rs, cs], gx[rs, cs]))
    return FeatureVector(values=np.concatenate(blocks), extractor_id=BUILTIN_EXTRACTOR_ID)


class FeatureStore:
    """Id-keyed feature vectors sharing one dimension."""

    def __init__(self, dim: int, extractor_id: str = PRECOMPUTED_EXTRACTOR_ID):
        if dim <= 0:
            raise ValueError("feature dimension must be positive")
        self.dim = int(dim)
        self.extractor_id = extractor_id
        self._vectors: dict[str, np.ndarray] = {}

    def add(self, image_id: str, values) -> None:
        if image_id in self._vectors:
            raise ValueError(f"duplicate feature entry for {image_id!r}")
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(
                f"feature for {image_id!r} has shape {v.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError(f"feature for {image_id!r} contains non-finite values")
        self._vectors[image_id] = v

    def get(self, image_id: str) -> np.ndarray:
        return self._vectors[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def ids(self) -> list[str]:
        return list(self._vectors)


def store_from_corpus(corpus: Corpus) -> FeatureStore:
    """Collect precomputed per-record feature arrays into a store."""
    records = [r for r in corpus if r.features is not None]
    if not records:
        raise DataError("no records carry precomputed features")
    skipped = len(corpus) - len(records)
    if skipped:
        logger.warning("%d record(s) lack precomputed features; skipped", skipped)
    dim = len(records[0].features)
    store = FeatureStore(dim, PRECOMPUTED_EXTRACTOR_ID)
    for rec in records:
        if len(rec.features) != dim:
            raise DataError(
                f"feature dimension mismatch for {rec.image_id!r}: "
                f"{len(rec.features)} != {dim}"
            )
        store.add(rec.image_id, rec.features)
    return store


def compute_builtin_features(corpus: Corpus, root: Path | None = None) -> FeatureStore:
    """Run the builtin extractor over every record that names a pixel source."""
    records = [r for r in corpus if r.pixels is not None]
    if not records:
        raise DataError("no records carry pixel sources")
    skipped = len(corpus) - len(records)
    if skipped:
        logger.warning("%d record(s) lack pixel sources; skipped", skipped)
    store = FeatureStore(BUILTIN_DIM, BUILTIN_EXTRACTOR_ID)
    for rec in records:
        path = Path(root, rec.pixels) if root is not None else Path(rec.pixels)
        store.add(rec.image_id, extract_builtin_features(path).values)
    return store


def save_features(store: FeatureStore, path: str | Path) -> None:
    """Write the cache format: one `id dim v1..vd` line per image."""
    lines = []
    for image_id in sorted(store.ids()):
        if not image_id or any(ch.isspace() for ch in image_id):
            raise ValueError(
                f"image id {image_id!r} cannot be written to the "
                "whitespace-delimited feature cache"
            )
        vec = store.get(image_id)
        body = " ".join(repr(float(v)) for v in vec)
        lines.append(f"{image_id} {store.dim} {body}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_features(path: str | Path) -> FeatureStore:
    store: FeatureStore | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if len(parts) < 3:
                raise DataError(f"line {lineno}: expected `id dim v1..vd`")
            image_id, dim_text = parts[0], parts[1]
            try:
                dim = int(dim_text)
                values = [float(tok) for tok in parts[2:]]
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
            if len(values) != dim:
                raise DataError(
                    f"line {lineno}: declared dim {dim} but {len(values)} values"
                )
            if store is None:
                store = FeatureStore(dim, PRECOMPUTED_EXTRACTOR_ID)
            elif dim != store.dim:
                raise DataError(
                    f"line {lineno}: dim {dim} differs from earlier {store.dim}"
                )
            try:
                store.add(image_id, values)
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
    if store is None:
        raise DataError("feature cache is empty")
    return store


@dataclass(frozen=True)
class TrainMeta:
    """SGD hyperparameters; `seed` is the base mixed into per-attribute seeds."""

    epochs: int = DEFAULT_EPOCHS
    eta0: float = DEFAULT_ETA0
    lam: float = DEFAULT_LAMBDA
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.lam < 0:
            raise ValueError("regularization strength must be >= 0")


def logistic_loss(
    w: np.ndarray, b: float, x: np.ndarray, y: float, class_weight: float = 1.0, lam: float = 0.0
) -> float:
    """Single-example objective: weighted log loss plus (lam/2)||w||^2."""
    z = float(np.dot(x, w) + b)
    data = class_weight * np.logaddexp(0.0, -y * z)
    return float(data + 0.5 * lam * np.dot(w, w))


def logistic_gradient(
    w: np.ndarray, b: float, x: np.ndarray, y: float, class_weight: float = 1.0, lam: float = 0.0
) -> tuple[np.ndarray, float]:
    """Gradient of logistic_loss in (w, b); bias carries no regularizer."""
    z = float(np.dot(x, w) + b)
    g = -y * float(expit(-y * z)) * class_weight
    return g * x + lam * w, g


def fit_logistic_sgd(
    X: np.ndarray,
    y: np.ndarray,
    meta: TrainMeta,
    pos_weight: float = 1.0,
) -> tuple[np.ndarray, float]:
    """SGD on the weighted L2-regularized logistic loss.

    Step sizes follow eta_t = eta0 / (1 + eta0 * lam * t) with t counting
    individual updates from zero; examples are reshuffled every epoch from
    the seeded generator.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) with matching label vector")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if pos_weight <= 0:
        raise ValueError("positive class weight must be positive")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    t = 0
    rng = np.random.default_rng(meta.seed)
    for _ in range(meta.epochs):
        for i in rng.permutation(n):
            eta = meta.eta0 / (1.0 + meta.eta0 * meta.lam * t)
            z = float(np.dot(X[i], w) + b)
            c = pos_weight if y[i] > 0 else 1.0
            g = -y[i] * float(expit(-y[i] * z)) * c
            w -= eta * (g * X[i] + meta.lam * w)
            b -= eta * g
            t += 1
    return w, float(b)


@dataclass(frozen=True)
class AttributeModel:
    """One-vs-rest logistic classifier for a textual attribute."""

    label: str
    polarity: Polarity
    weights: np.ndarray
    bias: float
    auc: float
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

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def predict_probability(model: AttributeModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"feature has shape {x.shape}, model expects ({model.dim},)")
    return float(expit(float(np.dot(model.weights, x)) + model.bias))


def compute_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC: tied pairs count one half."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score sets must be non-empty")
    ranks = rankdata(np.concatenate([neg, pos]))
    rank_sum = float(ranks[neg.size :].sum())
    u = rank_sum - pos.size * (pos.size + 1) / 2.0
    return u / (pos.size * neg.size)


def attribute_seed(base_seed: int, label: str) -> int:
    """Stable per-attribute RNG seed, independent of training order."""
    return zlib.crc32(f"{base_seed}:{label}".encode("utf-8"))


def train_attribute_classifier(
    attr: TextualAttribute,
    store: FeatureStore,
    split: DataSplit,
    meta: TrainMeta = TrainMeta(),
) -> AttributeModel:
    """Fit one attribute classifier and score it on the validation split.

    Positives are the attribute's supporting images; negatives are every
    other training image with features. Raises UntrainableAttributeError
    when the training split has no positives or the validation split lacks
    a positive or a negative, leaving the AUC undefined.
    """
    train_ids = sorted(i for i in store.ids() if i in split.train_ids)
    pos_mask = np.array([i in attr.positive_ids for i in train_ids])
    n_pos = int(pos_mask.sum())
    if n_pos == 0:
        raise UntrainableAttributeError(
            f"attribute {attr.label!r} has no positive training images"
        )
    n_neg = len(train_ids) - n_pos
    X = np.stack([store.get(i) for i in train_ids])
    y = np.where(pos_mask, 1.0, -1.0)
    # all-positive training data leaves nothing to reweight against
    pos_weight = n_neg / n_pos if n_neg else 1.0
    w, b = fit_logistic_sgd(X, y, meta, pos_weight=pos_weight)

    val_ids = sorted(i for i in store.ids() if i in split.validation_ids)
    val_pos = [i for i in val_ids if i in attr.positive_ids]
    val_neg = [i for i in val_ids if i not in attr.positive_ids]
    if not val_pos or not val_neg:
        raise UntrainableAttributeError(
            f"attribute {attr.label!r} lacks a validation positive or negative; "
            "AUC undefined"
        )
    probe = AttributeModel(
        label=attr.label, polarity=attr.polarity, weights=w, bias=b, auc=0.5, meta=meta
    )
    auc = compute_auc(
        [predict_probability(probe, store.get(i)) for i in val_pos],
        [predict_probability(probe, store.get(i)) for i in val_neg],
    )
    return dataclasses.replace(probe, auc=auc)


@dataclass(frozen=True)
class DroppedAttribute:
    label: str
    polarity: Polarity
    reason: str


def train_attribute_models(
    attributes: Sequence[TextualAttribute],
    store: FeatureStore,
    split: DataSplit,
    meta: TrainMeta = TrainMeta(),
    jobs: int = 1,
) -> tuple[list[AttributeModel], list[DroppedAttribute]]:
    """Train every attribute independently; untrainable ones are reported.

    Each attribute draws its shuffling seed from its own label mixed with
    meta.seed, so results never depend on training order. With jobs > 1
    attributes train on a thread pool; gathering preserves input order,
    so the result is independent of the worker count.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")

    def task(attr: TextualAttribute):
        attr_meta = dataclasses.replace(meta, seed=attribute_seed(meta.seed, attr.label))
        try:
            return train_attribute_classifier(attr, store, split, attr_meta), None
        except UntrainableAttributeError as exc:
            return None, DroppedAttribute(attr.label, attr.polarity, str(exc))

    if jobs > 1 and len(attributes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(task, attributes))
    else:
        outcomes = [task(attr) for attr in attributes]

    models: list[AttributeModel] = []
    dropped: list[DroppedAttribute] = []
    for model, drop in outcomes:
        if drop is not None:
            logger.warning("dropping attribute %r: %s", drop.label, drop.reason)
            dropped.append(drop)
        else:
            models.append(model)
    return models, dropped


@dataclass(frozen=True)
class AttributeBank:
    """Top-AUC classifiers per polarity, in embedding order."""

    beautiful: tuple[AttributeModel, ...]
    ugly: tuple[AttributeModel, ...]
    k_per_polarity: int
    shortfall_beautiful: int = 0
    shortfall_ugly: int = 0

    def __post_init__(self):
        if self.k_per_polarity < 1:
            raise ValueError("k_per_polarity must be >= 1")
        if not self.beautiful or not self.ugly:
            raise ValueError("bank needs at least one model per polarity")
        for models, pol in ((self.beautiful, Polarity.BEAUTIFUL), (self.ugly, Polarity.UGLY)):
            if any(m.polarity is not pol for m in models):
                raise ValueError(f"misplaced model in the {pol.value} list")
            if len(models) > self.k_per_polarity:
                raise ValueError("polarity list longer than k_per_polarity")
            keys = [(-m.auc, m.label) for m in models]
            if keys != sorted(keys):
                raise ValueError("bank lists must be sorted by AUC desc, label asc")
        dims = {m.dim for m in self.models}
        if len(dims) != 1:
            raise ValueError("bank models must share one feature dimension")

    @property
    def models(self) -> tuple[AttributeModel, ...]:
        return self.beautiful + self.ugly

    @property
    def dim(self) -> int:
        return self.beautiful[0].dim

    @property
    def embedding_dim(self) -> int:
        return len(self.beautiful) + len(self.ugly)


def build_attribute_bank(
    models: Sequence[AttributeModel], k_per_polarity: int
) -> AttributeBank:
    """Keep the k highest-AUC models per polarity; ties fall to label order."""
    if k_per_polarity < 1:
        raise ValueError("k_per_polarity must be >= 1")
    by_pol: dict[Polarity, list[AttributeModel]] = {Polarity.BEAUTIFUL: [], Polarity.UGLY: []}
    for m in models:
        by_pol[m.polarity].append(m)
    for pol, group in by_pol.items():
        if not group:
            raise ValueError(f"no {pol.value} models to rank")
        group.sort(key=lambda m: (-m.auc, m.label))
    shortfalls = {}
    for pol, group in by_pol.items():
        shortfalls[pol] = max(0, k_per_polarity - len(group))
        if shortfalls[pol]:
            logger.warning(
                "only %d %s model(s) for k=%d", len(group), pol.value, k_per_polarity
            )
    return AttributeBank(
        beautiful=tuple(by_pol[Polarity.BEAUTIFUL][:k_per_polarity]),
        ugly=tuple(by_pol[Polarity.UGLY][:k_per_polarity]),
        k_per_polarity=k_per_polarity,
        shortfall_beautiful=shortfalls[Polarity.BEAUTIFUL],
        shortfall_ugly=shortfalls[Polarity.UGLY],
    )


def embed(bank: AttributeBank, x) -> np.ndarray:
    """Attribute vector: bank-ordered classifier probabilities."""
    x = np.asarray(x, dtype=float)
    if x.shape != (bank.dim,):
        raise ValueError(f"feature has shape {x.shape}, bank expects ({bank.dim},)")
    return np.array([predict_probability(m, x) for m in bank.models])


def embed_store(
    bank: AttributeBank, store: FeatureStore, ids: Iterable[str] | None = None
) -> tuple[list[str], np.ndarray]:
    """Embed many images; default order is sorted ids for reproducibility."""
    ordered = sorted(store.ids()) if ids is None else list(ids)
    rows = np.empty((len(ordered), bank.embedding_dim))
    for r, image_id in enumerate(ordered):
        rows[r] = embed(bank, store.get(image_id))
    return ordered, rows


def _model_to_obj(m: AttributeModel) -> dict:
    return {
        "auc": float(m.auc),
        "bias": float(m.bias),
        "label": m.label,
        "polarity": m.polarity.value,
        "train_meta": {
            "epochs": m.meta.epochs,
            "eta0": m.meta.eta0,
            "lam": m.meta.lam,
            "seed": m.meta.seed,
        },
        "weights": [float(v) for v in m.weights],
    }


def _model_from_obj(obj: dict) -> AttributeModel:
    tm = obj["train_meta"]
    return AttributeModel(
        label=obj["label"],
        polarity=Polarity(obj["polarity"]),
        weights=np.asarray(obj["weights"], dtype=float),
        bias=float(obj["bias"]),
        auc=float(obj["auc"]),
        meta=TrainMeta(
            epochs=int(tm["epochs"]),
            eta0=float(tm["eta0"]),
            lam=float(tm["lam"]),
            seed=int(tm["seed"]),
        ),
    )


def save_attribute_models(
    models: Sequence[AttributeModel],
    dropped: Sequence[DroppedAttribute],
    path: str | Path,
) -> None:
    """Full trained-model list before bank truncation, plus the drop report."""
    lines = [
        json.dumps(
            {
                "dropped": [
                    {"label": d.label, "polarity": d.polarity.value, "reason": d.reason}
                    for d in dropped
                ]
            },
            sort_keys=True,
            ensure_ascii=False,
        )
    ]
    lines.extend(
        json.dumps(_model_to_obj(m), sort_keys=True, ensure_ascii=False) for m in models
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_attribute_models(
    path: str | Path,
) -> tuple[list[AttributeModel], list[DroppedAttribute]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines:
            raise DataError("model file is empty")
        dropped = [
            DroppedAttribute(d["label"], Polarity(d["polarity"]), d["reason"])
            for d in lines[0]["dropped"]
        ]
        return [_model_from_obj(obj) for obj in lines[1:]], dropped
    except DataError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed attribute model file: {exc}") from exc


def save_attribute_bank(bank: AttributeBank, path: str | Path) -> None:
    """Header line with bank shape, then one JSON object per model in order."""
    lines = [
        json.dumps(
            {
                "k_per_polarity": bank.k_per_polarity,
                "shortfall_beautiful": bank.shortfall_beautiful,
                "shortfall_ugly": bank.shortfall_ugly,
            },
            sort_keys=True,
        )
    ]
    lines.extend(
        json.dumps(_model_to_obj(m), sort_keys=True, ensure_ascii=False) for m in bank.models
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_attribute_bank(path: str | Path) -> AttributeBank:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines:
            raise DataError("bank file is empty")
        header = lines[0]
        by_pol: dict[Polarity, list[AttributeModel]] = {
            Polarity.BEAUTIFUL: [],
            Polarity.UGLY: [],
        }
        for obj in lines[1:]:
            model = _model_from_obj(obj)
            by_pol[model.polarity].append(model)
        return AttributeBank(
            beautiful=tuple(by_pol[Polarity.BEAUTIFUL]),
            ugly=tuple(by_pol[Polarity.UGLY]),
            k_per_polarity=int(header["k_per_polarity"]),
            shortfall_beautiful=int(header["shortfall_beautiful"]),
            shortfall_ugly=int(header["shortfall_ugly"]),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed attribute bank file: {exc}") from exc
