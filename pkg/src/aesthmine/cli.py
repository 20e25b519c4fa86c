"""Command-line driver.

One binary, `aesthmine`, exposing each processing step as a subcommand
plus a `pipeline` command that chains them with artifact caching. All
randomness flows from `--seed`; `--jobs` caps worker threads without
changing results; `--config` points at a JSON file whose fields
individual flags override.

Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 numeric failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .apps import (
    build_index,
    nearest_neighbors,
    parse_query,
    load_preference_model,
    predict_preference,
    retrieve,
    tag_image,
)
from .attribmine import (
    CandidateTerm,
    assign_positive_images,
    cluster_candidates,
    name_clusters,
    save_attributes,
    load_attributes,
)
from .corpus import load_corpus, save_corpus, comment_statistics, split_corpus
from .errors import (
    AesthmineError,
    ConfigError,
    DataError,
    NumericError,
    PipelineStageError,
)
from .optim import cross_validate, load_model, save_model
from .pipeline import (
    PipelineConfig,
    load_config_file,
    make_config,
    run_pipeline,
)
from .scorestats import binarize_labels, goodness_report, Family
from .textfeat import (
    TermKind,
    build_vocabulary,
    load_matrix,
    save_matrix,
    vectorize_counts,
    vectorize_tfidf,
)
from .topics import fit_plsa, save_topics_report
from .visattr import (
    TrainMeta,
    build_attribute_bank,
    compute_builtin_features,
    embed,
    extract_builtin_features,
    load_attribute_bank,
    load_attribute_models,
    save_attribute_bank,
    save_attribute_models,
    store_from_corpus,
    train_attribute_models,
)

logger = logging.getLogger(__name__)


def _fractions(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            "fractions must be three comma-separated numbers, e.g. 0.6,0.2,0.2"
        )
    return tuple(float(p) for p in parts)


def _read_grid(path: str) -> list[tuple[float, float]]:
    """Grid file: one `lambda1 lambda2` pair per line; # starts a comment."""
    grid = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(
                f"{path}:{number}: expected 'lambda1 lambda2', got {line!r}"
            )
        try:
            grid.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"{path}:{number}: {exc}") from exc
    if not grid:
        raise ConfigError(f"grid file {path} lists no (lambda1, lambda2) pairs")
    return grid


def _load_corpus(path: str, min_votes: int = 1):
    loaded = load_corpus(path, min_votes=min_votes)
    if loaded.rejects:
        logger.warning("%d record(s) rejected while loading %s", len(loaded.rejects), path)
    return loaded


def _feature_store(args, corpus):
    if getattr(args, "features", "precomputed") == "builtin":
        root = Path(args.images_root) if getattr(args, "images_root", None) else None
        return compute_builtin_features(corpus, root)
    return store_from_corpus(corpus)


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--features", choices=("precomputed", "builtin"), default="precomputed",
        help="where feature vectors come from",
    )
    p.add_argument("--images-root", help="directory image paths are relative to")


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--fractions", type=_fractions, default=(0.6, 0.2, 0.2),
        help="train,validation,test fractions",
    )


def _train_meta(args) -> TrainMeta:
    return TrainMeta(
        epochs=args.epochs, eta0=args.eta0, lam=args.lam, seed=args.seed
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--eta0", type=float, default=0.1)
    p.add_argument("--lam", type=float, default=1e-5)


# ---------------------------------------------------------------- commands


def _cmd_ingest(args) -> int:
    loaded = load_corpus(args.input, min_votes=args.min_votes)
    if args.report:
        Path(args.report).write_text(loaded.reject_report(), encoding="utf-8")
    if args.out:
        save_corpus(loaded.corpus, args.out)
    print(
        f"accepted {len(loaded.corpus)} record(s), "
        f"rejected {len(loaded.rejects)}"
    )
    return 0


def _cmd_stats_comments(args) -> int:
    corpus = _load_corpus(args.corpus).corpus
    print(comment_statistics(corpus).format(), end="")
    return 0


def _cmd_stats_fit(args) -> int:
    corpus = _load_corpus(args.corpus).corpus
    families = list(Family)
    lines = ["image_id\tbest\t" + "\t".join(f.value for f in families)]
    for rec in corpus:
        report = goodness_report(rec.scores)
        rmse = "\t".join(f"{report.rmse[f]:.6f}" for f in families)
        lines.append(f"{rec.image_id}\t{report.best_family.value}\t{rmse}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_labels(args) -> int:
    corpus = _load_corpus(args.corpus).corpus
    labels = binarize_labels(corpus, args.delta)
    lines = [f"{image_id}\t{label.value}" for image_id, label in sorted(labels.items())]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_text_vectorize(args) -> int:
    corpus = _load_corpus(args.corpus).corpus
    vocab = build_vocabulary(corpus, TermKind(args.kind), args.min_count)
    vectorize = vectorize_counts if args.counts else vectorize_tfidf
    matrix = vectorize(corpus, vocab)
    save_matrix(matrix, args.out, terms=vocab.terms)
    print(f"wrote {matrix.n_docs} x {matrix.n_terms} matrix to {args.out}")
    return 0


def _cmd_mine_regress(args) -> int:
    train, terms = load_matrix(args.train)
    val, _ = load_matrix(args.val)
    grid = _read_grid(args.grid)
    report = cross_validate(
        train, val, grid, args.nnz, tol=args.tol, max_iter=args.max_iter
    )
    save_model(report.model, terms, args.out)
    flag = " (target band missed)" if report.band_missed else ""
    print(
        f"chose grid point {report.chosen} with {report.chosen_nnz} non-zeros{flag}; "
        f"validation rho {report.scores[report.chosen]:.4f}"
    )
    return 0


def _candidates_from_pairs(pairs, k_per_polarity):
    """Top-k bigram candidates per polarity straight from (term, weight)
    pairs; equivalent to selection against the full vocabulary because
    zero-weight terms are never candidates."""
    bigrams = [
        CandidateTerm(term, weight)
        for term, weight in pairs
        if isinstance(term, tuple) and weight != 0
    ]
    beautiful = sorted(
        (c for c in bigrams if c.weight > 0),
        key=lambda c: (-c.weight, " ".join(c.term)),
    )[:k_per_polarity]
    ugly = sorted(
        (c for c in bigrams if c.weight < 0),
        key=lambda c: (c.weight, " ".join(c.term)),
    )[:k_per_polarity]
    return beautiful, ugly


def _cmd_mine_cluster(args) -> int:
    _, pairs = load_model(args.model)
    corpus = _load_corpus(args.corpus).corpus
    beautiful, ugly = _candidates_from_pairs(pairs, args.k_per_polarity)
    clusters = name_clusters(
        cluster_candidates(beautiful, args.clusters, args.sigma, args.seed)
    ) + name_clusters(
        cluster_candidates(ugly, args.clusters, args.sigma, args.seed)
    )
    attrs = assign_positive_images(clusters, corpus)
    save_attributes(attrs, args.out)
    print(f"wrote {len(attrs)} attribute(s) to {args.out}")
    return 0


def _cmd_mine_plsa(args) -> int:
    matrix, terms = load_matrix(args.matrix)
    if terms is None:
        raise DataError(f"{args.matrix} has no vocabulary sidecar")
    model = fit_plsa(matrix, args.topics, iters=args.iters, seed=args.seed)
    save_topics_report(model, terms, args.out, top=20)
    print(
        f"fit {model.K} topic(s), final log-likelihood "
        f"{model.loglik_trace[-1]:.4f}; report at {args.out}"
    )
    return 0


def _cmd_attributes_train(args) -> int:
    corpus = _load_corpus(args.corpus).corpus
    attrs = load_attributes(args.attributes)
    store = _feature_store(args, corpus)
    split = split_corpus(corpus, args.fractions, args.seed)
    models, dropped = train_attribute_models(
        attrs, store, split, _train_meta(args), jobs=args.jobs
    )
    if args.models_out:
        save_attribute_models(models, dropped, args.models_out)
    bank = build_attribute_bank(models, args.k)
    save_attribute_bank(bank, args.out)
    print(
        f"trained {len(models)} attribute classifier(s) "
        f"({len(dropped)} dropped); bank of {len(bank.beautiful)}+{len(bank.ugly)} "
        f"at {args.out}"
    )
    return 0


def _cmd_bank_build(args) -> int:
    models, _ = load_attribute_models(args.models)
    bank = build_attribute_bank(models, args.k)
    save_attribute_bank(bank, args.out)
    print(f"bank of {len(bank.beautiful)}+{len(bank.ugly)} at {args.out}")
    return 0


def _cmd_bank_show(args) -> int:
    bank = load_attribute_bank(args.bank)
    print(f"k_per_polarity\t{bank.k_per_polarity}")
    for model in list(bank.beautiful) + list(bank.ugly):
        print(f"{model.polarity.value}\t{model.label}\t{model.auc:.4f}")
    return 0


def _image_vector(args, bank):
    """Feature vector for --image: a corpus id when --corpus is given,
    otherwise a path run through the builtin extractor."""
    if args.corpus:
        corpus = _load_corpus(args.corpus).corpus
        store = _feature_store(args, corpus)
        if args.image in store:
            return store.get(args.image)
    path = Path(args.image)
    if path.exists():
        return extract_builtin_features(path).values
    raise DataError(
        f"--image {args.image!r} is neither a known corpus id nor an image file"
    )


def _top_attributes(bank, x, m: int) -> list[tuple[str, str, float]]:
    """(label, polarity, probability) for the m most reactive attributes."""
    by_label = {
        model.label: (model.polarity.value, float(p))
        for model, p in zip(bank.models, embed(bank, x))
    }
    return [
        (label, *by_label[label]) for label in tag_image(bank, x, m)
    ]


def _cmd_predict(args) -> int:
    bank = load_attribute_bank(args.bank)
    preference = load_preference_model(args.model)
    x = _image_vector(args, bank)
    probability = predict_preference(preference, embed(bank, x))
    label = "beautiful" if probability >= 0.5 else "bad"
    print(f"label\t{label}")
    print(f"probability\t{probability:.6f}")
    top = min(args.top, len(bank.models))
    for name, polarity, prob in _top_attributes(bank, x, top):
        print(f"attribute\t{name}\t{polarity}\t{prob:.6f}")
    return 0


def _cmd_tag(args) -> int:
    bank = load_attribute_bank(args.bank)
    x = _image_vector(args, bank)
    m = len(bank.models) if args.m is None else args.m
    for rank, (name, polarity, prob) in enumerate(
        _top_attributes(bank, x, m), start=1
    ):
        print(f"{rank}\t{name}\t{polarity}\t{prob:.6f}")
    return 0


def _make_index(args):
    bank = load_attribute_bank(args.bank)
    corpus = _load_corpus(args.corpus).corpus
    store = _feature_store(args, corpus)
    split = split_corpus(corpus, args.fractions, args.seed)
    meta = TrainMeta(seed=args.seed)
    return build_index(bank, store, corpus, split, meta)


def _cmd_retrieve(args) -> int:
    index = _make_index(args)
    query = parse_query(args.query, index, args.top)
    for rank, (image_id, score) in enumerate(retrieve(index, query), start=1):
        print(f"{rank}\t{image_id}\t{score:.6f}")
    return 0


def _cmd_neighbors(args) -> int:
    index = _make_index(args)
    for rank, (image_id, dist) in enumerate(
        nearest_neighbors(index, args.id, args.m), start=1
    ):
        print(f"{rank}\t{image_id}\t{dist:.6f}")
    return 0


def _cmd_pipeline(args) -> int:
    file_fields = load_config_file(args.config) if args.config else {}
    overrides = {
        key: getattr(args, key)
        for key in (
            "corpus", "workdir", "kind", "min_count", "nnz_target",
            "k_candidates", "n_clusters", "sigma", "features", "images_root",
            "epochs", "eta0", "lam", "k_bank", "delta", "fractions",
            "min_votes", "tol", "max_iter",
        )
        if getattr(args, key, None) is not None
    }
    if args.grid:
        overrides["grid"] = _read_grid(args.grid)
    overrides["seed"] = args.seed
    overrides["jobs"] = args.jobs
    config = make_config(file_fields, **overrides)
    stages = args.stages.split(",") if args.stages else None
    report = run_pipeline(config, stages=stages)
    print(report.describe())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aesthmine",
        description="Mine interpretable aesthetic attributes from commented, "
        "score-annotated image corpora; train and apply visual classifiers.",
    )
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    parser.add_argument("--jobs", type=int, default=1, help="max worker threads")
    parser.add_argument("--config", help="JSON config file for `pipeline`")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        # The same flags are accepted after the subcommand; SUPPRESS keeps
        # them from clobbering values parsed at the top level.
        for flag, kind in (("--seed", int), ("--jobs", int)):
            p.add_argument(flag, type=kind, default=argparse.SUPPRESS)
        p.add_argument("--config", default=argparse.SUPPRESS)
        return p

    p = shared(sub.add_parser("ingest", help="validate and normalize a corpus file"))
    p.add_argument("--input", required=True)
    p.add_argument("--report", help="write the reject report here")
    p.add_argument("--out", help="write the accepted records here")
    p.add_argument("--min-votes", type=int, default=1)
    p.set_defaults(func=_cmd_ingest)

    stats = sub.add_parser("stats", help="descriptive statistics").add_subparsers(
        dest="stats_command", required=True
    )
    p = shared(stats.add_parser("comments", help="comment volume statistics"))
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_stats_comments)
    p = shared(stats.add_parser("fit", help="score-distribution family fits"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_stats_fit)

    p = shared(sub.add_parser("labels", help="gap labeling around the midpoint"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_labels)

    text = sub.add_parser("text", help="text featurization").add_subparsers(
        dest="text_command", required=True
    )
    p = shared(text.add_parser("vectorize", help="build the document-term matrix"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=[k.value for k in TermKind], default="bi")
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--counts", action="store_true",
                   help="raw counts instead of tf-idf (topic-model input)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_text_vectorize)

    mine = sub.add_parser("mine", help="attribute mining").add_subparsers(
        dest="mine_command", required=True
    )
    p = shared(mine.add_parser("regress", help="cross-validated sparse regression"))
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--grid", required=True, help="file of 'lambda1 lambda2' lines")
    p.add_argument("--nnz", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine_regress)

    p = shared(mine.add_parser("cluster", help="cluster candidates into attributes"))
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k-per-polarity", type=int, default=1500)
    p.add_argument("--clusters", type=int, default=100)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine_cluster)

    p = shared(mine.add_parser("plsa", help="topic model over raw counts"))
    p.add_argument("--matrix", required=True)
    p.add_argument("--topics", type=int, default=50)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine_plsa)

    attributes = sub.add_parser("attributes", help="attribute classifiers").add_subparsers(
        dest="attributes_command", required=True
    )
    p = shared(attributes.add_parser("train", help="train classifiers, keep the best"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--attributes", required=True)
    _add_feature_flags(p)
    p.add_argument("--k", type=int, default=100, help="bank size per polarity")
    p.add_argument("--models-out", help="also save every trained model here")
    _add_train_flags(p)
    _add_split_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attributes_train)

    bank = sub.add_parser("bank", help="attribute bank operations").add_subparsers(
        dest="bank_command", required=True
    )
    p = shared(bank.add_parser("build", help="bank from saved models"))
    p.add_argument("--models", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bank_build)
    p = shared(bank.add_parser("show", help="list bank members"))
    p.add_argument("--bank", required=True)
    p.set_defaults(func=_cmd_bank_show)

    p = shared(sub.add_parser("predict", help="beautiful-versus-bad prediction"))
    p.add_argument("--bank", required=True)
    p.add_argument("--model", required=True, help="preference model file")
    p.add_argument("--image", required=True, help="corpus id or image file")
    p.add_argument("--corpus")
    _add_feature_flags(p)
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=_cmd_predict)

    p = shared(sub.add_parser("tag", help="most probable attributes of an image"))
    p.add_argument("--bank", required=True)
    p.add_argument("--image", required=True, help="corpus id or image file")
    p.add_argument("--corpus")
    _add_feature_flags(p)
    p.add_argument("--m", type=int, help="how many attributes (default: all)")
    p.set_defaults(func=_cmd_tag)

    p = shared(sub.add_parser("retrieve", help="attribute/semantic-tag search"))
    p.add_argument("--query", required=True)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--bank", required=True)
    p.add_argument("--corpus", required=True)
    _add_feature_flags(p)
    _add_split_flags(p)
    p.set_defaults(func=_cmd_retrieve)

    p = shared(sub.add_parser("neighbors", help="closest images in attribute space"))
    p.add_argument("--id", required=True)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--bank", required=True)
    p.add_argument("--corpus", required=True)
    _add_feature_flags(p)
    _add_split_flags(p)
    p.set_defaults(func=_cmd_neighbors)

    p = shared(sub.add_parser("pipeline", help="run every stage with caching"))
    p.add_argument("--corpus")
    p.add_argument("--workdir")
    p.add_argument("--stages", help="comma-separated subset of stages to run")
    p.add_argument("--kind", choices=[k.value for k in TermKind])
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--nnz-target", dest="nnz_target", type=int)
    p.add_argument("--grid", help="file of 'lambda1 lambda2' lines")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--k-candidates", dest="k_candidates", type=int)
    p.add_argument("--clusters", dest="n_clusters", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--features", choices=("precomputed", "builtin"))
    p.add_argument("--images-root", dest="images_root")
    p.add_argument("--epochs", type=int)
    p.add_argument("--eta0", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--k-bank", dest="k_bank", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--fractions", type=_fractions)
    p.add_argument("--min-votes", dest="min_votes", type=int)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, PipelineStageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, (DataError, OSError)):
        # unreadable or missing files count as data problems
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AesthmineError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
