"""Staged artifact builds with content-hash caching.

The pipeline turns a raw corpus file into a chain of nine artifacts:
normalized corpus, tf-idf matrix, regression model, candidate bigrams,
clusters, attributes with positive images, attribute classifiers,
attribute bank, and preference model. Every stage reads only artifact
files plus its configuration, so any stage can be reproduced in
isolation. A JSONL manifest logs each build with the hash of its inputs
and output; a stage is skipped (and logged as "cached") when its
artifact already matches the manifest entry for the same inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .apps import train_preference_classifier, save_preference_model
from .attribmine import (
    assign_positive_images,
    cluster_candidates,
    load_candidates,
    load_clusters,
    name_clusters,
    save_candidates,
    save_clusters,
    save_attributes,
    load_attributes,
    select_candidates,
)
from .corpus import Corpus, DataSplit, load_corpus, save_corpus, split_corpus
from .errors import ConfigError, PipelineStageError
from .optim import cross_validate, load_model, save_model
from .textfeat import (
    TermKind,
    Vocabulary,
    build_vocabulary,
    load_matrix,
    save_matrix,
    vectorize_tfidf,
)
from .visattr import (
    TrainMeta,
    build_attribute_bank,
    compute_builtin_features,
    load_attribute_bank,
    load_attribute_models,
    save_attribute_bank,
    save_attribute_models,
    store_from_corpus,
    train_attribute_models,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"

_KINDS = {k.value: k for k in TermKind}
_FEATURE_SOURCES = ("precomputed", "builtin")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the staged build, flat so it serializes naturally.

    Defaults are sized for corpora on the scale of the bundled sample;
    real corpora override them through a JSON config file or CLI flags.
    Requested widths that exceed what a corpus supports degrade
    gracefully (shortfall flags, cluster-count clamping) rather than
    failing.
    """

    corpus: str
    workdir: str
    kind: str = "bi"
    min_count: int = 10
    grid: tuple[tuple[float, float], ...] = (
        (0.25, 0.01),
        (0.5, 0.01),
        (1.0, 0.01),
        (2.0, 0.01),
        (4.0, 0.01),
    )
    nnz_target: int = 10
    tol: float = 1e-6
    max_iter: int = 1000
    k_candidates: int = 4
    n_clusters: int = 2
    sigma: float = 1.0
    features: str = "precomputed"
    images_root: str | None = None
    epochs: int = 10
    eta0: float = 0.1
    lam: float = 1e-5
    k_bank: int = 2
    delta: float = 0.6
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    min_votes: int = 1
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.corpus:
            raise ConfigError("config field 'corpus' must name the corpus file")
        if not self.workdir:
            raise ConfigError("config field 'workdir' must name a directory")
        if self.kind not in _KINDS:
            raise ConfigError(
                f"config field 'kind' must be one of {sorted(_KINDS)}, got {self.kind!r}"
            )
        if self.features not in _FEATURE_SOURCES:
            raise ConfigError(
                "config field 'features' must be one of "
                f"{list(_FEATURE_SOURCES)}, got {self.features!r}"
            )
        if not self.grid:
            raise ConfigError("config field 'grid' must list (lambda1, lambda2) pairs")
        grid = []
        for point in self.grid:
            pair = tuple(float(v) for v in point)
            if len(pair) != 2 or min(pair) < 0:
                raise ConfigError(
                    f"grid points must be non-negative (lambda1, lambda2) pairs, got {point!r}"
                )
            grid.append(pair)
        object.__setattr__(self, "grid", tuple(grid))
        if len(self.fractions) != 3:
            raise ConfigError("config field 'fractions' must have three entries")
        object.__setattr__(
            self, "fractions", tuple(float(v) for v in self.fractions)
        )
        for name in ("min_count", "nnz_target", "max_iter", "k_candidates",
                     "n_clusters", "epochs", "k_bank", "min_votes", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"config field {name!r} must be >= 1")
        for name in ("tol", "sigma", "eta0"):
            if float(getattr(self, name)) <= 0:
                raise ConfigError(f"config field {name!r} must be > 0")
        for name in ("lam", "delta"):
            if float(getattr(self, name)) < 0:
                raise ConfigError(f"config field {name!r} must be >= 0")

    @property
    def term_kind(self) -> TermKind:
        return _KINDS[self.kind]

    @property
    def train_meta(self) -> TrainMeta:
        return TrainMeta(
            epochs=self.epochs, eta0=self.eta0, lam=self.lam, seed=self.seed
        )

    def to_dict(self) -> dict:
        obj = dataclasses.asdict(self)
        obj["grid"] = [list(p) for p in self.grid]
        obj["fractions"] = list(self.fractions)
        return obj


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def load_config_file(path: str | Path) -> dict:
    """Parse a JSON config file into a plain field dict."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(obj) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(
            f"config file {path} has unknown fields: {', '.join(unknown)}"
        )
    return obj


def make_config(file_fields: dict | None = None, **overrides) -> PipelineConfig:
    """Merge config-file fields with overriding keyword fields (flags win)."""
    merged: dict = dict(file_fields or {})
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    unknown = sorted(set(merged) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    missing = [k for k in ("corpus", "workdir") if not merged.get(k)]
    if missing:
        raise ConfigError(f"missing required config fields: {', '.join(missing)}")
    try:
        return PipelineConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


@dataclass(frozen=True)
class StageResult:
    """One manifest event: a stage either built or reused its artifact."""

    stage: str
    artifact: Path
    status: str  # "built" | "cached"
    output_sha256: str
    seconds: float


@dataclass
class PipelineReport:
    """All stage outcomes of one run, in execution order."""

    config: PipelineConfig
    stages: list[StageResult] = field(default_factory=list)

    @property
    def statuses(self) -> dict[str, str]:
        return {s.stage: s.status for s in self.stages}

    def describe(self) -> str:
        lines = []
        for s in self.stages:
            lines.append(
                f"{s.stage:12s} {s.status:7s} {s.artifact.name:28s} {s.seconds:6.2f}s"
            )
        return "\n".join(lines)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_obj(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _output_hash(files: Sequence[Path]) -> str:
    """Joint content hash of every file a stage produced."""
    return _hash_obj({f.name: _sha256_file(f) for f in files})


class _Manifest:
    """Append-only JSONL build log keyed by stage."""

    def __init__(self, path: Path):
        self.path = path
        self.latest: dict[str, dict] = {}
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        logger.warning("skipping malformed manifest line in %s", path)
                        continue
                    self.latest[entry.get("stage", "")] = entry

    def append(self, entry: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        self.latest[entry["stage"]] = entry


@dataclass
class _Stage:
    """A build step: named inputs -> one primary artifact (plus extras)."""

    name: str
    artifact: str
    inputs: tuple[str, ...]  # artifact file names, relative to workdir
    config_keys: tuple[str, ...]
    build: Callable[["_Runner"], list[Path]]


class _Runner:
    """Carries shared state (config, paths, manifest) across stages."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.workdir = Path(config.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.manifest = _Manifest(self.workdir / MANIFEST_NAME)
        self.source = Path(config.corpus)

    def path(self, name: str) -> Path:
        return self.workdir / name

    def load_corpus_artifact(self) -> Corpus:
        return load_corpus(self.path("corpus.jsonl")).corpus

    def split(self, corpus: Corpus) -> DataSplit:
        return split_corpus(corpus, self.config.fractions, self.config.seed)

    def feature_store(self, corpus: Corpus):
        if self.config.features == "builtin":
            root = Path(self.config.images_root) if self.config.images_root else None
            return compute_builtin_features(corpus, root)
        return store_from_corpus(corpus)

    def signature(self, stage: _Stage) -> str:
        cfg = {k: getattr(self.config, k) for k in stage.config_keys}
        cfg = json.loads(json.dumps(cfg, sort_keys=True, default=list))
        inputs = {}
        for name in stage.inputs:
            source = self.source if name == "<source>" else self.path(name)
            inputs[name] = _sha256_file(source)
        return _hash_obj({"stage": stage.name, "config": cfg, "inputs": inputs})


def _build_ingest(r: _Runner) -> list[Path]:
    loaded = load_corpus(r.source, min_votes=r.config.min_votes)
    if loaded.rejects:
        logger.warning(
            "ingest rejected %d record(s):\n%s",
            len(loaded.rejects),
            loaded.reject_report(),
        )
    out = r.path("corpus.jsonl")
    save_corpus(loaded.corpus, out)
    return [out]


def _build_vectorize(r: _Runner) -> list[Path]:
    corpus = r.load_corpus_artifact()
    vocab = build_vocabulary(corpus, r.config.term_kind, r.config.min_count)
    matrix = vectorize_tfidf(corpus, vocab)
    out = r.path("matrix.txt")
    save_matrix(matrix, out, terms=vocab.terms)
    return [out, r.path("matrix.txt.ids"), r.path("matrix.txt.vocab")]


def _build_regress(r: _Runner) -> list[Path]:
    corpus = r.load_corpus_artifact()
    matrix, terms = load_matrix(r.path("matrix.txt"))
    split = r.split(corpus)
    report = cross_validate(
        matrix.subset(sorted(split.train_ids)),
        matrix.subset(sorted(split.validation_ids)),
        r.config.grid,
        r.config.nnz_target,
        tol=r.config.tol,
        max_iter=r.config.max_iter,
    )
    out = r.path("model.txt")
    save_model(report.model, terms, out)
    return [out]


def _build_candidates(r: _Runner) -> list[Path]:
    model, pairs = load_model(r.path("model.txt"))
    vocab_terms = load_matrix(r.path("matrix.txt"))[1]
    vocab = Vocabulary.from_terms(vocab_terms, kind=r.config.term_kind,
                                  min_count=r.config.min_count)
    weights = dict(pairs)
    for term, weight in weights.items():
        model.beta[vocab.index[term]] = weight
    selection = select_candidates(model, vocab, r.config.k_candidates)
    out = r.path("candidates.jsonl")
    save_candidates(selection, out)
    return [out]


def _build_cluster(r: _Runner) -> list[Path]:
    selection = load_candidates(r.path("candidates.jsonl"))
    clusters = name_clusters(
        cluster_candidates(
            selection.beautiful, r.config.n_clusters, r.config.sigma, r.config.seed
        )
    ) + name_clusters(
        cluster_candidates(
            selection.ugly, r.config.n_clusters, r.config.sigma, r.config.seed
        )
    )
    out = r.path("clusters.jsonl")
    save_clusters(clusters, out)
    return [out]


def _build_assign(r: _Runner) -> list[Path]:
    clusters = load_clusters(r.path("clusters.jsonl"))
    corpus = r.load_corpus_artifact()
    attrs = assign_positive_images(clusters, corpus)
    out = r.path("attributes.jsonl")
    save_attributes(attrs, out)
    return [out]


def _build_train(r: _Runner) -> list[Path]:
    attrs = load_attributes(r.path("attributes.jsonl"))
    corpus = r.load_corpus_artifact()
    store = r.feature_store(corpus)
    models, dropped = train_attribute_models(
        attrs, store, r.split(corpus), r.config.train_meta, jobs=r.config.jobs
    )
    out = r.path("attribute_models.jsonl")
    save_attribute_models(models, dropped, out)
    return [out]


def _build_bank(r: _Runner) -> list[Path]:
    models, _ = load_attribute_models(r.path("attribute_models.jsonl"))
    bank = build_attribute_bank(models, r.config.k_bank)
    out = r.path("bank.jsonl")
    save_attribute_bank(bank, out)
    return [out]


def _build_preference(r: _Runner) -> list[Path]:
    bank = load_attribute_bank(r.path("bank.jsonl"))
    corpus = r.load_corpus_artifact()
    store = r.feature_store(corpus)
    model = train_preference_classifier(
        bank, store, corpus, r.split(corpus), r.config.delta, r.config.train_meta
    )
    out = r.path("preference.json")
    save_preference_model(model, out)
    return [out]


_STAGES: tuple[_Stage, ...] = (
    _Stage("ingest", "corpus.jsonl", ("<source>",), ("min_votes",), _build_ingest),
    _Stage("vectorize", "matrix.txt", ("corpus.jsonl",),
           ("kind", "min_count"), _build_vectorize),
    _Stage("regress", "model.txt", ("corpus.jsonl", "matrix.txt"),
           ("grid", "nnz_target", "tol", "max_iter", "fractions", "seed"),
           _build_regress),
    _Stage("candidates", "candidates.jsonl", ("model.txt", "matrix.txt.vocab"),
           ("k_candidates", "kind", "min_count"), _build_candidates),
    _Stage("cluster", "clusters.jsonl", ("candidates.jsonl",),
           ("n_clusters", "sigma", "seed"), _build_cluster),
    _Stage("assign", "attributes.jsonl", ("clusters.jsonl", "corpus.jsonl"),
           (), _build_assign),
    _Stage("train", "attribute_models.jsonl", ("attributes.jsonl", "corpus.jsonl"),
           ("features", "images_root", "epochs", "eta0", "lam", "fractions", "seed"),
           _build_train),
    _Stage("bank", "bank.jsonl", ("attribute_models.jsonl",),
           ("k_bank",), _build_bank),
    _Stage("preference", "preference.json", ("bank.jsonl", "corpus.jsonl"),
           ("features", "images_root", "delta", "epochs", "eta0", "lam",
            "fractions", "seed"),
           _build_preference),
)

STAGE_NAMES = tuple(s.name for s in _STAGES)


def _artifact_files(r: _Runner, stage: _Stage) -> list[Path]:
    files = [r.path(stage.artifact)]
    if stage.name == "vectorize":
        files += [r.path("matrix.txt.ids"), r.path("matrix.txt.vocab")]
    return files


def _run_stage(r: _Runner, stage: _Stage) -> StageResult:
    artifact = r.path(stage.artifact)
    t0 = time.monotonic()
    try:
        signature = r.signature(stage)
        previous = r.manifest.latest.get(stage.name)
        files = _artifact_files(r, stage)
        if (
            previous is not None
            and previous.get("input_signature") == signature
            and all(f.exists() for f in files)
            and _output_hash(files) == previous.get("output_sha256")
        ):
            status = "cached"
            out_hash = previous["output_sha256"]
        else:
            produced = stage.build(r)
            status = "built"
            out_hash = _output_hash(produced)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(stage.name, str(artifact), exc) from exc
    seconds = time.monotonic() - t0
    r.manifest.append(
        {
            "stage": stage.name,
            "artifact": stage.artifact,
            "input_signature": signature,
            "output_sha256": out_hash,
            "status": status,
            "config": r.config.to_dict(),
        }
    )
    logger.info("stage %s: %s (%.2fs)", stage.name, status, seconds)
    return StageResult(stage.name, artifact, status, out_hash, seconds)


def run_pipeline(
    config: PipelineConfig, stages: Sequence[str] | None = None
) -> PipelineReport:
    """Execute the staged build, reusing artifacts whose inputs are unchanged.

    ``stages`` restricts execution to the named subset (in canonical
    order); earlier artifacts must then already exist. Any failure is
    re-raised as PipelineStageError naming the stage and artifact path.
    """
    if stages is not None:
        unknown = sorted(set(stages) - set(STAGE_NAMES))
        if unknown:
            raise ConfigError(f"unknown pipeline stages: {', '.join(unknown)}")
    runner = _Runner(config)
    report = PipelineReport(config=config)
    for stage in _STAGES:
        if stages is not None and stage.name not in stages:
            continue
        report.stages.append(_run_stage(runner, stage))
    return report
