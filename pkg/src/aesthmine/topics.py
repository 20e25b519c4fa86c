"""pLSA topic model over document-word counts, fit by EM.

Kept as the unsupervised baseline for comparison: its topics group
comment words by subject matter, not by aesthetic polarity, which is
what motivates the supervised mining route. Nothing downstream consumes
its output.

The model factorizes P(w|d) = sum_z p(z|d) p(w|z) and consumes raw
counts; tf-idf rows are rejected because the likelihood is defined over
counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .textfeat import DocumentMatrix, Term, term_to_text

DEFAULT_TOPICS = 50
DEFAULT_ITERS = 200
TOKEN_GAIN_TOL = 1e-6


@dataclass
class PlsaModel:
    p_w_given_z: np.ndarray  # K x V, rows sum to 1
    p_z_given_d: np.ndarray  # N x K, rows sum to 1
    K: int
    loglik_trace: list[float]
    converged: bool


def _row_normalize(M: np.ndarray) -> np.ndarray:
    sums = M.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return M / sums


def _loglik(counts: np.ndarray, theta: np.ndarray, phi: np.ndarray) -> float:
    P = theta @ phi
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(P[mask])))


def fit_plsa(
    X: DocumentMatrix,
    K: int,
    iters: int = DEFAULT_ITERS,
    seed: int = 0,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> PlsaModel:
    """EM for pLSA on raw counts.

    Runs until `iters` iterations or until the log-likelihood gain per
    token drops below 1e-6. Initialization is random row-stochastic from
    the seed; an explicit (theta, phi) init overrides it. Documents with
    no counts keep their initial topic mixture (they contribute nothing
    to the likelihood).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if X.n_docs == 0 or X.n_terms == 0:
        raise ValueError("empty document matrix")
    counts = X.to_dense()
    if np.any(counts < 0) or not np.all(counts == np.floor(counts)):
        raise ValueError("pLSA requires non-negative integer counts")
    total_tokens = counts.sum()
    if total_tokens == 0:
        raise ValueError("matrix has no tokens")

    n_docs, n_words = counts.shape
    if init is not None:
        theta, phi = (np.array(init[0], dtype=float), np.array(init[1], dtype=float))
        if theta.shape != (n_docs, K) or phi.shape != (K, n_words):
            raise ValueError("init shapes do not match (N,K) and (K,V)")
        theta = _row_normalize(theta)
        phi = _row_normalize(phi)
    else:
        rng = np.random.default_rng(seed)
        # strictly positive random init so no topic starts dead
        theta = _row_normalize(rng.uniform(0.1, 1.0, size=(n_docs, K)))
        phi = _row_normalize(rng.uniform(0.1, 1.0, size=(K, n_words)))

    empty_docs = counts.sum(axis=1) == 0
    trace = [_loglik(counts, theta, phi)]
    converged = False
    for _ in range(iters):
        P = theta @ phi
        ratio = np.divide(counts, P, out=np.zeros_like(counts), where=counts > 0)
        new_phi = _row_normalize(phi * (theta.T @ ratio))
        new_theta = _row_normalize(theta * (ratio @ phi.T))
        new_theta[empty_docs] = theta[empty_docs]
        theta, phi = new_theta, new_phi
        ll = _loglik(counts, theta, phi)
        trace.append(ll)
        if (ll - trace[-2]) / total_tokens < TOKEN_GAIN_TOL:
            converged = True
            break

    return PlsaModel(
        p_w_given_z=phi,
        p_z_given_d=theta,
        K=K,
        loglik_trace=trace,
        converged=converged,
    )


def top_terms(
    model: PlsaModel, z: int, m: int, terms: Sequence[Term]
) -> list[tuple[Term, float]]:
    """The m most probable terms of topic z, descending, ties lexicographic."""
    if not (0 <= z < model.K):
        raise ValueError(f"topic index {z} out of range for K={model.K}")
    probs = model.p_w_given_z[z]
    if len(terms) != len(probs):
        raise ValueError("terms do not match model vocabulary size")
    order = sorted(
        range(len(terms)), key=lambda j: (-probs[j], term_to_text(terms[j]))
    )
    return [(terms[j], float(probs[j])) for j in order[: min(m, len(terms))]]


def save_topics_report(
    model: PlsaModel,
    terms: Sequence[Term],
    path: str | Path,
    top: int = 20,
) -> None:
    """Readable per-topic listing of the strongest terms."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"topics {model.K}\n")
        fh.write(f"iterations {len(model.loglik_trace) - 1}\n")
        fh.write(f"loglik {model.loglik_trace[-1]!r}\n")
        for z in range(model.K):
            fh.write(f"topic {z}\n")
            for term, prob in top_terms(model, z, top, terms):
                fh.write(f"\t{term_to_text(term)}\t{prob!r}\n")
