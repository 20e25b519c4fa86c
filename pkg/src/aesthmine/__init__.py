"""aesthmine: discover, learn, and apply nameable aesthetic attributes.

The library ingests corpora of images annotated with vote histograms and
free-text comments, mines discriminative bigrams with a sparse elastic-net
regression on tf-idf text features, groups synonym bigrams into named
attributes via spectral clustering, trains visual one-vs-rest classifiers
for each attribute, and applies the resulting attribute space to aesthetic
prediction, tagging, and retrieval.
"""

__version__ = "0.1.0"
