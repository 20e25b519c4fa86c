"""Comment text processing: tokenization, vocabularies, tf-idf matrices.

All comments of an image form one document. Tokens are lowercased runs of
ASCII letters, so numbers and punctuation vanish; tokens shorter than two
characters and stop-words are dropped. Bigrams are pairs of consecutive
tokens inside a single comment and never bridge two comments.

The stop-word list below is deliberately small. It keeps only grammatical
glue words and excludes negations ("not", "don"), intensifiers ("very",
"too", "really"), and frequent evaluative words, because those carry the
aesthetic signal this package mines.

Matrices persist as sparse triplet text: a header line "D N" (D terms,
N documents), then "row col value" lines, with an `.ids` sidecar holding
"image_id<TAB>target" per row and a `.vocab` sidecar with one term per
line (bigram words joined by a space).
"""

from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .corpus import Corpus, ImageRecord
from .errors import DataError

_TOKEN_RE = re.compile(r"[a-z]+")
_MIN_TOKEN_LEN = 2

# Grammatical function words only; see module docstring for what is kept out.
STOPWORDS = frozenset(
    """
    about above across after again against all along also am among an and
    another any are around as at back be became because become been before
    behind being below beside between both but by came can come could did do
    does doing down during each either else ever every few for from further
    get gets go goes going got had has have having he hence her here hers
    herself him himself his how however if in indeed into is it its itself
    let ll many may me might mine must myself near neither next now of off
    on once one onto or other others ought our ours ourselves out over own
    per perhaps re she shall should since some somebody someone something
    sometimes somewhere soon such than that the their theirs them themselves
    then thence there therefore these they this those though through thus to
    toward towards under unless until unto up upon us ve was we were what
    whatever when whenever where wherever whether which whichever while
    whither who whoever whom whose why will with within without would yet
    yours yourself yourselves
    """.split()
)

#: unigram term is a plain string, bigram term a pair of strings
Term = str | tuple[str, str]


class TermKind(enum.Enum):
    UNIGRAM = "uni"
    BIGRAM = "bi"
    BOTH = "both"


def tokenize(text: str, spell_correct: Callable[[str], str] | None = None) -> list[str]:
    """Lowercase, split on non-letters, drop stop-words and short tokens.

    spell_correct is a per-token normalization hook applied before
    filtering; by default no correction is performed.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if spell_correct is not None:
        tokens = [spell_correct(t) for t in tokens]
    return [t for t in tokens if len(t) >= _MIN_TOKEN_LEN and t not in STOPWORDS]


def merge_comments(record: ImageRecord) -> str:
    """All comment texts of the image joined by single spaces, in order."""
    return " ".join(c.text for c in record.comments)


def _record_terms(
    record: ImageRecord,
    kind: TermKind,
    spell_correct: Callable[[str], str] | None = None,
) -> Counter:
    """Term counts for one image; bigrams stay inside each comment."""
    counts: Counter = Counter()
    for comment in record.comments:
        tokens = tokenize(comment.text, spell_correct)
        if kind in (TermKind.UNIGRAM, TermKind.BOTH):
            counts.update(tokens)
        if kind in (TermKind.BIGRAM, TermKind.BOTH):
            counts.update(zip(tokens, tokens[1:]))
    return counts


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list: sorted unigrams first, then sorted bigrams."""

    terms: tuple[Term, ...]
    kind: TermKind
    min_count: int
    index: dict[Term, int] = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "index", {t: i for i, t in enumerate(self.terms)}
        )
        if len(self.index) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: Term) -> bool:
        return term in self.index

    @staticmethod
    def order_terms(terms: Iterable[Term]) -> tuple[Term, ...]:
        unis = sorted(t for t in terms if isinstance(t, str))
        bis = sorted(t for t in terms if isinstance(t, tuple))
        return tuple(unis) + tuple(bis)

    @classmethod
    def from_terms(
        cls, terms: Iterable[Term], kind: TermKind = TermKind.BOTH, min_count: int = 1
    ) -> "Vocabulary":
        return cls(terms=cls.order_terms(terms), kind=kind, min_count=min_count)


def build_vocabulary(
    corpus: Corpus,
    kind: TermKind,
    min_count: int = 10,
    spell_correct: Callable[[str], str] | None = None,
) -> Vocabulary:
    """Terms whose corpus-wide occurrence count reaches min_count.

    The count merge over images is associative, so the result does not
    depend on traversal or worker order.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    totals: Counter = Counter()
    for rec in corpus:
        totals.update(_record_terms(rec, kind, spell_correct))
    kept = [t for t, c in totals.items() if c >= min_count]
    return Vocabulary(terms=Vocabulary.order_terms(kept), kind=kind, min_count=min_count)


@dataclass(frozen=True)
class SparseVector:
    """Sorted-index sparse row; values are strictly positive."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValueError("indices must be strictly increasing")
        if np.any(self.values <= 0):
            raise ValueError("sparse values must be positive")

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))


def _empty_row() -> SparseVector:
    return SparseVector(np.empty(0, dtype=int), np.empty(0))


@dataclass
class DocumentMatrix:
    """Sparse document-by-term matrix with aligned ids and score targets."""

    rows: list[SparseVector]
    image_ids: list[str]
    targets: np.ndarray
    n_terms: int
    empty_rows: tuple[int, ...] = ()

    def __post_init__(self):
        if not (len(self.rows) == len(self.image_ids) == len(self.targets)):
            raise ValueError("rows, ids, and targets must align")

    @property
    def n_docs(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_docs, self.n_terms))
        for i, row in enumerate(self.rows):
            out[i, row.indices] = row.values
        return out

    def subset(self, ids: Iterable[str]) -> "DocumentMatrix":
        """Rows for the given ids, in the stored row order."""
        wanted = set(ids)
        keep = [i for i, rid in enumerate(self.image_ids) if rid in wanted]
        missing = wanted - {self.image_ids[i] for i in keep}
        if missing:
            raise KeyError(f"ids not in matrix: {sorted(missing)[:5]}")
        empties = {i for i in self.empty_rows}
        return DocumentMatrix(
            rows=[self.rows[i] for i in keep],
            image_ids=[self.image_ids[i] for i in keep],
            targets=self.targets[keep] if keep else np.empty(0),
            n_terms=self.n_terms,
            empty_rows=tuple(k for k, i in enumerate(keep) if i in empties),
        )


def _count_rows(
    corpus: Corpus,
    vocab: Vocabulary,
    spell_correct: Callable[[str], str] | None,
) -> list[Counter]:
    return [
        Counter(
            {
                t: c
                for t, c in _record_terms(rec, vocab.kind, spell_correct).items()
                if t in vocab
            }
        )
        for rec in corpus
    ]


def vectorize_counts(
    corpus: Corpus,
    vocab: Vocabulary,
    spell_correct: Callable[[str], str] | None = None,
) -> DocumentMatrix:
    """Raw term-count matrix (the form topic models consume)."""
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    rows = []
    empty = []
    per_doc = _count_rows(corpus, vocab, spell_correct)
    for i, counts in enumerate(per_doc):
        if not counts:
            empty.append(i)
            rows.append(_empty_row())
            continue
        idx = np.array(sorted(vocab.index[t] for t in counts), dtype=int)
        terms_by_idx = {vocab.index[t]: c for t, c in counts.items()}
        vals = np.array([float(terms_by_idx[j]) for j in idx])
        rows.append(SparseVector(idx, vals))
    return DocumentMatrix(
        rows=rows,
        image_ids=corpus.ids(),
        targets=np.array([rec.scores.mean for rec in corpus]),
        n_terms=len(vocab),
        empty_rows=tuple(empty),
    )


def vectorize_tfidf(
    corpus: Corpus,
    vocab: Vocabulary,
    spell_correct: Callable[[str], str] | None = None,
) -> DocumentMatrix:
    """tf-idf matrix with smoothed idf and L2-normalized rows.

    idf(t) = ln((1+N)/(1+df(t))) + 1, where df counts documents of this
    corpus containing t and N counts documents with at least one
    in-vocabulary term. Rows without in-vocabulary terms stay empty and
    are flagged in empty_rows.
    """
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    per_doc = _count_rows(corpus, vocab, spell_correct)
    df = Counter()
    for counts in per_doc:
        df.update(counts.keys())
    n_docs = sum(1 for counts in per_doc if counts)

    idf = np.ones(len(vocab))
    for t, d in df.items():
        idf[vocab.index[t]] = math.log((1 + n_docs) / (1 + d)) + 1

    rows = []
    empty = []
    for i, counts in enumerate(per_doc):
        if not counts:
            empty.append(i)
            rows.append(_empty_row())
            continue
        idx = np.array(sorted(vocab.index[t] for t in counts), dtype=int)
        tf = np.array([float(counts[vocab.terms[j]]) for j in idx])
        vals = tf * idf[idx]
        vals = vals / np.sqrt(np.sum(vals**2))
        rows.append(SparseVector(idx, vals))
    return DocumentMatrix(
        rows=rows,
        image_ids=corpus.ids(),
        targets=np.array([rec.scores.mean for rec in corpus]),
        n_terms=len(vocab),
        empty_rows=tuple(empty),
    )


def term_to_text(term: Term) -> str:
    return term if isinstance(term, str) else " ".join(term)


def term_from_text(text: str) -> Term:
    parts = text.split(" ")
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise ValueError(f"malformed term {text!r}")


def save_matrix(
    matrix: DocumentMatrix, path: str | Path, terms: Iterable[Term] | None = None
) -> None:
    """Write triplet matrix plus `.ids` and optional `.vocab` sidecars."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.n_terms} {matrix.n_docs}\n")
        for i, row in enumerate(matrix.rows):
            for j, v in zip(row.indices, row.values):
                fh.write(f"{i} {int(j)} {float(v)!r}\n")
    with open(path.with_name(path.name + ".ids"), "w", encoding="utf-8") as fh:
        for rid, target in zip(matrix.image_ids, matrix.targets):
            fh.write(f"{rid}\t{float(target)!r}\n")
    if terms is not None:
        with open(path.with_name(path.name + ".vocab"), "w", encoding="utf-8") as fh:
            for t in terms:
                fh.write(term_to_text(t) + "\n")


def load_matrix(path: str | Path) -> tuple[DocumentMatrix, list[Term] | None]:
    """Read a triplet matrix and its sidecars back."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: bad matrix header")
        n_terms, n_docs = int(header[0]), int(header[1])
        cells: dict[int, list[tuple[int, float]]] = {}
        for line_no, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise DataError(f"{path}:{line_no}: expected 'row col value'")
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            if not (0 <= r < n_docs and 0 <= c < n_terms):
                raise DataError(f"{path}:{line_no}: index out of range")
            cells.setdefault(r, []).append((c, v))

    ids_path = path.with_name(path.name + ".ids")
    image_ids: list[str] = []
    targets: list[float] = []
    with open(ids_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rid, _, target = line.partition("\t")
            image_ids.append(rid)
            targets.append(float(target))
    if len(image_ids) != n_docs:
        raise DataError(f"{ids_path}: row count mismatch with matrix header")

    rows = []
    empty = []
    for i in range(n_docs):
        triplets = sorted(cells.get(i, []))
        if not triplets:
            empty.append(i)
            rows.append(_empty_row())
            continue
        idx = np.array([c for c, _ in triplets], dtype=int)
        vals = np.array([v for _, v in triplets])
        rows.append(SparseVector(idx, vals))

    vocab_path = path.with_name(path.name + ".vocab")
    terms = None
    if vocab_path.exists():
        with open(vocab_path, encoding="utf-8") as fh:
            terms = [term_from_text(line.rstrip("\n")) for line in fh if line.strip()]
        if len(terms) != n_terms:
            raise DataError(f"{vocab_path}: term count mismatch with matrix header")

    matrix = DocumentMatrix(
        rows=rows,
        image_ids=image_ids,
        targets=np.asarray(targets),
        n_terms=n_terms,
        empty_rows=tuple(empty),
    )
    return matrix, terms
