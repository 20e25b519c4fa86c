"""Corpus data model, ingestion, validation, splitting, and comment statistics.

A corpus file is UTF-8 JSON-lines, one image record per line:

    {"id": "a1", "scores": [0,0,1,4,9,4,1,0,0,0],
     "comments": [{"text": "great shot", "phase": "during", "author": "u7"}],
     "semantic_tags": ["landscape"], "style_tags": [],
     "challenge": "Skyscape", "features": [0.1, ...], "pixels": "imgs/a1.jpg"}

`scores[i]` holds the number of votes with score i+1 on the 1..10 scale.
`challenge`, `features`, `pixels`, and comment `author` are optional.
Comment `phase` is "during" or "after" (votes visible only after a
challenge closes, so the two populations behave differently).

A corpus is immutable after loading and safe to share across workers.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import CorpusFormatError, DuplicateImageIdError

logger = logging.getLogger(__name__)

SCORE_MIN = 1
SCORE_MAX = 10
N_SCORE_BINS = SCORE_MAX - SCORE_MIN + 1

#: challenge_id under which images without a challenge are aggregated
UNASSIGNED_CHALLENGE = "__unassigned__"


class Phase(enum.Enum):
    """When a comment was written relative to its challenge."""

    DURING = "during"
    AFTER = "after"


@dataclass(frozen=True)
class ScoreDistribution:
    """Histogram of votes over the 1..10 score scale.

    counts[i] is the number of votes with score i+1.
    """

    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != N_SCORE_BINS:
            raise ValueError(f"score array length {len(self.counts)} != {N_SCORE_BINS}")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative vote count")

    @property
    def total_votes(self) -> int:
        return sum(self.counts)

    @property
    def mean(self) -> float:
        """Mean score, in [1, 10]. Requires at least one vote."""
        n = self.total_votes
        if n == 0:
            raise ValueError("mean of empty score distribution")
        return sum((i + SCORE_MIN) * c for i, c in enumerate(self.counts)) / n

    @property
    def variance(self) -> float:
        """Population variance of the votes."""
        n = self.total_votes
        if n == 0:
            raise ValueError("variance of empty score distribution")
        mu = self.mean
        return sum((i + SCORE_MIN - mu) ** 2 * c for i, c in enumerate(self.counts)) / n

    def normalized(self) -> np.ndarray:
        """Vote histogram normalized to sum 1."""
        n = self.total_votes
        if n == 0:
            raise ValueError("cannot normalize empty score distribution")
        return np.asarray(self.counts, dtype=float) / n


@dataclass(frozen=True)
class CommentRecord:
    text: str
    phase: Phase
    author_id: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("comment text empty after trimming")

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass
class ImageRecord:
    """One image with its votes, comments, tags, and optional visual data."""

    image_id: str
    scores: ScoreDistribution
    comments: list[CommentRecord] = field(default_factory=list)
    semantic_tags: frozenset[str] = frozenset()
    style_tags: frozenset[str] = frozenset()
    challenge_id: str | None = None
    features: np.ndarray | None = None
    pixels: str | None = None

    def has_visual_source(self) -> bool:
        """True if the record can participate in visual training."""
        return self.features is not None or self.pixels is not None

    def to_json_obj(self) -> dict:
        """Canonical JSON-compatible dict (stable field and set ordering)."""
        obj: dict = {
            "id": self.image_id,
            "scores": list(self.scores.counts),
            "comments": [
                {"text": c.text, "phase": c.phase.value}
                | ({"author": c.author_id} if c.author_id is not None else {})
                for c in self.comments
            ],
            "semantic_tags": sorted(self.semantic_tags),
            "style_tags": sorted(self.style_tags),
        }
        if self.challenge_id is not None:
            obj["challenge"] = self.challenge_id
        if self.features is not None:
            obj["features"] = [float(v) for v in self.features]
        if self.pixels is not None:
            obj["pixels"] = self.pixels
        return obj


class Corpus:
    """Ordered, id-indexed collection of ImageRecords. Read-only after load."""

    def __init__(self, records: list[ImageRecord]):
        self._records = list(records)
        self._by_id: dict[str, ImageRecord] = {}
        for rec in self._records:
            if rec.image_id in self._by_id:
                raise DuplicateImageIdError(f"duplicate image_id {rec.image_id!r}")
            self._by_id[rec.image_id] = rec

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self._records)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def get(self, image_id: str) -> ImageRecord:
        return self._by_id[image_id]

    def ids(self) -> list[str]:
        return [rec.image_id for rec in self._records]

    @property
    def records(self) -> list[ImageRecord]:
        return list(self._records)


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train / validation / test id sets."""

    train_ids: frozenset[str]
    validation_ids: frozenset[str]
    test_ids: frozenset[str]

    def __post_init__(self):
        if (
            self.train_ids & self.validation_ids
            or self.train_ids & self.test_ids
            or self.validation_ids & self.test_ids
        ):
            raise ValueError("split sets are not pairwise disjoint")


@dataclass
class RejectedRecord:
    line_number: int
    image_id: str | None
    reason: str


@dataclass
class CorpusLoad:
    """Result of load_corpus: accepted records plus a reject report."""

    corpus: Corpus
    rejects: list[RejectedRecord]

    def reject_report(self) -> str:
        if not self.rejects:
            return "no rejected records\n"
        lines = [
            f"line {r.line_number}\t{r.image_id or '?'}\t{r.reason}"
            for r in self.rejects
        ]
        return "\n".join(lines) + "\n"


def _parse_comment(obj: dict) -> CommentRecord:
    if not isinstance(obj, dict):
        raise ValueError("comment is not an object")
    text = obj.get("text")
    if not isinstance(text, str):
        raise ValueError("comment text missing or not a string")
    phase_raw = obj.get("phase")
    try:
        phase = Phase(phase_raw)
    except ValueError:
        raise ValueError(f"unknown comment phase {phase_raw!r}") from None
    author = obj.get("author")
    if author is not None and not isinstance(author, str):
        raise ValueError("comment author must be a string")
    return CommentRecord(text=text, phase=phase, author_id=author)


def _parse_record(obj: dict, min_votes: int) -> ImageRecord:
    """Build an ImageRecord from a parsed JSON object, raising ValueError
    with a human-readable reason on any schema or invariant violation."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    image_id = obj.get("id")
    if not isinstance(image_id, str) or not image_id:
        raise ValueError("missing or empty id")

    raw_scores = obj.get("scores")
    if not isinstance(raw_scores, list) or len(raw_scores) != N_SCORE_BINS:
        raise ValueError("score array length ≠ 10")
    if not all(isinstance(c, int) and not isinstance(c, bool) for c in raw_scores):
        raise ValueError("score counts must be integers")
    scores = ScoreDistribution(tuple(raw_scores))
    if scores.total_votes < min_votes:
        raise ValueError(f"fewer than {min_votes} votes")

    comments = [_parse_comment(c) for c in obj.get("comments", [])]

    def _tag_set(key: str) -> frozenset[str]:
        tags = obj.get(key, [])
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise ValueError(f"{key} must be an array of strings")
        return frozenset(tags)

    challenge = obj.get("challenge")
    if challenge is not None and not isinstance(challenge, str):
        raise ValueError("challenge must be a string")

    features = obj.get("features")
    if features is not None:
        if not isinstance(features, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in features
        ):
            raise ValueError("features must be an array of numbers")
        features = np.asarray(features, dtype=float)
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")

    pixels = obj.get("pixels")
    if pixels is not None and not isinstance(pixels, str):
        raise ValueError("pixels must be a path string")

    return ImageRecord(
        image_id=image_id,
        scores=scores,
        comments=comments,
        semantic_tags=_tag_set("semantic_tags"),
        style_tags=_tag_set("style_tags"),
        challenge_id=challenge,
        features=features,
        pixels=pixels,
    )


def load_corpus(
    path: str | Path, schema_check: bool = True, min_votes: int = 1
) -> CorpusLoad:
    """Load a JSON-lines corpus file.

    Records failing validation go to the reject report rather than being
    silently dropped. With schema_check on, a line that is not valid JSON
    raises CorpusFormatError naming the line; with it off, such lines are
    rejected instead. A duplicate image_id always raises.
    """
    path = Path(path)
    records: list[ImageRecord] = []
    rejects: list[RejectedRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                if schema_check:
                    raise CorpusFormatError(f"invalid JSON: {exc.msg}", line_no) from exc
                rejects.append(RejectedRecord(line_no, None, f"invalid JSON: {exc.msg}"))
                continue
            try:
                rec = _parse_record(obj, min_votes)
            except ValueError as exc:
                rid = obj.get("id") if isinstance(obj, dict) else None
                rejects.append(RejectedRecord(line_no, rid, str(exc)))
                continue
            if rec.image_id in seen:
                raise DuplicateImageIdError(
                    f"duplicate image_id {rec.image_id!r} at line {line_no}"
                )
            seen.add(rec.image_id)
            records.append(rec)
    return CorpusLoad(corpus=Corpus(records), rejects=rejects)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the canonical JSON-lines form (stable ordering)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False))
            fh.write("\n")


def visual_training_records(corpus: Corpus) -> list[ImageRecord]:
    """Records usable for visual training; warns about the excluded rest."""
    usable = [r for r in corpus if r.has_visual_source()]
    skipped = len(corpus) - len(usable)
    if skipped:
        logger.warning(
            "%d record(s) lack both features and pixels; excluded from visual training",
            skipped,
        )
    return usable


def split_corpus(
    corpus: Corpus, fractions: tuple[float, float, float], seed: int
) -> DataSplit:
    """Randomly partition corpus ids into train/validation/test.

    Validation and test sizes are floor(fraction * n); the remainder goes
    to train. Deterministic for a fixed seed.
    """
    f_train, f_val, f_test = fractions
    if min(f_train, f_val, f_test) <= 0:
        raise ValueError("fractions must be positive")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")

    ids = sorted(corpus.ids())
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    # floor with epsilon so that exact products like 70000/7 do not round down
    n_val = int(math.floor(f_val * len(ids) + 1e-9))
    n_test = int(math.floor(f_test * len(ids) + 1e-9))
    shuffled = [ids[i] for i in order]
    val = shuffled[:n_val]
    test = shuffled[n_val : n_val + n_test]
    train = shuffled[n_val + n_test :]
    return DataSplit(
        train_ids=frozenset(train),
        validation_ids=frozenset(val),
        test_ids=frozenset(test),
    )


@dataclass
class GroupStats:
    """Mean/std of comments-per-image and words-per-comment for one group."""

    n_images: int = 0
    n_comments: int = 0
    comments_per_image_mean: float = 0.0
    comments_per_image_std: float = 0.0
    words_per_comment_mean: float = 0.0
    words_per_comment_std: float = 0.0


@dataclass
class ScoreBinStats:
    """Comment statistics for images whose mean score falls in one bin."""

    lo: float
    hi: float
    n_images: int
    comments_per_image_mean: float
    words_per_comment_mean: float


@dataclass
class CommentStatsReport:
    overall: GroupStats
    during: GroupStats
    after: GroupStats
    by_mean_score: list[ScoreBinStats]

    def format(self) -> str:
        def fmt(name: str, g: GroupStats) -> str:
            return (
                f"{name:8s} images {g.n_images:6d}  comments {g.n_comments:7d}  "
                f"comments/image {g.comments_per_image_mean:6.2f} ({g.comments_per_image_std:.2f})  "
                f"words/comment {g.words_per_comment_mean:6.2f} ({g.words_per_comment_std:.2f})"
            )

        lines = [fmt("overall", self.overall), fmt("during", self.during), fmt("after", self.after)]
        lines.append("mean-score bins:")
        for b in self.by_mean_score:
            lines.append(
                f"  [{b.lo:.0f},{b.hi:.0f}{']' if b.hi == SCORE_MAX else ')'} "
                f"images {b.n_images:5d}  comments/image {b.comments_per_image_mean:6.2f}  "
                f"words/comment {b.words_per_comment_mean:6.2f}"
            )
        return "\n".join(lines) + "\n"


def _group_stats(per_image_counts: list[int], word_counts: list[int]) -> GroupStats:
    g = GroupStats()
    g.n_images = len(per_image_counts)
    g.n_comments = int(sum(per_image_counts))
    if per_image_counts:
        c = np.asarray(per_image_counts, dtype=float)
        g.comments_per_image_mean = float(c.mean())
        g.comments_per_image_std = float(c.std())
    if word_counts:
        w = np.asarray(word_counts, dtype=float)
        g.words_per_comment_mean = float(w.mean())
        g.words_per_comment_std = float(w.std())
    return g


def comment_statistics(corpus: Corpus) -> CommentStatsReport:
    """Descriptive statistics of commenting behavior.

    Comments-per-image averages over all images (images without comments
    count as zero); words-per-comment averages over comments. Both are
    reported overall and per phase, plus binned by image mean score.
    An empty corpus yields a zeroed report.
    """
    per_image = {p: [] for p in (None, Phase.DURING, Phase.AFTER)}
    words = {p: [] for p in (None, Phase.DURING, Phase.AFTER)}
    binned: list[list[ImageRecord]] = [[] for _ in range(N_SCORE_BINS - 1)]

    for rec in corpus:
        per_image[None].append(len(rec.comments))
        for phase in (Phase.DURING, Phase.AFTER):
            per_image[phase].append(sum(1 for c in rec.comments if c.phase == phase))
        for c in rec.comments:
            words[None].append(c.word_count)
            words[c.phase].append(c.word_count)
        mu = rec.scores.mean
        idx = min(int(mu) - SCORE_MIN, N_SCORE_BINS - 2)
        binned[idx].append(rec)

    bins = []
    for i, recs in enumerate(binned):
        lo, hi = SCORE_MIN + i, SCORE_MIN + i + 1
        n_comments = sum(len(r.comments) for r in recs)
        total_words = sum(c.word_count for r in recs for c in r.comments)
        bins.append(
            ScoreBinStats(
                lo=lo,
                hi=hi,
                n_images=len(recs),
                comments_per_image_mean=n_comments / len(recs) if recs else 0.0,
                words_per_comment_mean=total_words / n_comments if n_comments else 0.0,
            )
        )

    return CommentStatsReport(
        overall=_group_stats(per_image[None], words[None]),
        during=_group_stats(per_image[Phase.DURING], words[Phase.DURING]),
        after=_group_stats(per_image[Phase.AFTER], words[Phase.AFTER]),
        by_mean_score=bins,
    )
