"""Bundled sample data.

The sample corpus is a small deterministic synthetic corpus (see
aesthmine.synthetic.tiny_corpus) with planted beautiful/ugly concepts,
32-dimensional precomputed features, and a few records that lack
features on purpose. It exists so the command-line pipeline has
something to run out of the box and so regression tests can pin exact
outputs.
"""

from importlib.resources import files
from pathlib import Path

__all__ = ["sample_corpus_path"]


def sample_corpus_path() -> Path:
    """Filesystem path of the bundled sample corpus (JSON lines)."""
    return Path(str(files(__name__).joinpath("tiny_corpus.jsonl")))
