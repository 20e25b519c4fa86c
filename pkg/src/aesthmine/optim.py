"""Sparse linear regression on comment vectors, plus rank correlation.

The regression objective is

    minimize  ||y - X beta||^2 + lambda1*||beta||_1 + lambda2*||beta||^2

solved by cyclic coordinate descent with an unpenalized intercept
obtained by centering the targets. The L1 term selects few terms; the L2
term lets correlated synonym terms enter together instead of one of them
absorbing the whole group.

Regularization strength is chosen by validation Spearman correlation
under a sparsity budget: among grid points whose non-zero count lands
within 10% of the requested budget, take the best-correlating one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DataError, UndefinedCorrelationError
from .textfeat import DocumentMatrix, Term, term_from_text, term_to_text

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000
NNZ_BAND = 0.10


def _design(X, y=None) -> tuple[np.ndarray, np.ndarray]:
    """Accept a DocumentMatrix or a plain dense array with explicit targets."""
    if isinstance(X, DocumentMatrix):
        if y is not None:
            raise ValueError("y is taken from the DocumentMatrix targets")
        return X.to_dense(), np.asarray(X.targets, dtype=float)
    if y is None:
        raise ValueError("explicit y required when X is a raw array")
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def soft_threshold(a: float, t: float) -> float:
    if a > t:
        return a - t
    if a < -t:
        return a + t
    return 0.0


@dataclass
class ElasticNetModel:
    beta: np.ndarray
    intercept: float
    lambda1: float
    lambda2: float
    nnz: int
    converged: bool
    n_iter: int
    objective: float

    def nonzero_terms(self, terms: Sequence[Term]) -> list[tuple[Term, float]]:
        """(term, weight) for non-zero weights, largest magnitude first.

        Ties in magnitude break by term text so output order is stable.
        """
        if len(terms) != len(self.beta):
            raise ValueError("terms length does not match coefficient vector")
        pairs = [
            (terms[j], float(self.beta[j]))
            for j in np.flatnonzero(self.beta)
        ]
        pairs.sort(key=lambda tb: (-abs(tb[1]), term_to_text(tb[0])))
        return pairs


def fit_elastic_net(
    X,
    lambda1: float,
    lambda2: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    y=None,
) -> ElasticNetModel:
    """Cyclic coordinate descent on the penalized squared-error objective.

    One iteration is a full sweep over coordinates; the run stops when the
    largest coordinate change in a sweep drops below tol. The objective is
    non-increasing sweep to sweep (each coordinate update is an exact
    one-dimensional minimization).
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("regularization strengths must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dense, targets = _design(X, y)
    if dense.size == 0 or dense.shape[0] == 0:
        raise ValueError("empty design matrix")
    if not np.all(np.isfinite(dense)) or not np.all(np.isfinite(targets)):
        raise ValueError("non-finite values in design matrix or targets")

    n, d = dense.shape
    intercept = float(np.mean(targets))
    yc = targets - intercept
    cols = np.asfortranarray(dense)
    col_sq = np.einsum("ij,ij->j", cols, cols)

    beta = np.zeros(d)
    resid = yc.copy()
    half_l1 = lambda1 / 2.0
    converged = False
    n_iter = 0
    for sweep in range(max_iter):
        n_iter = sweep + 1
        max_change = 0.0
        for j in range(d):
            denom = col_sq[j] + lambda2
            if denom == 0.0:
                continue
            xj = cols[:, j]
            old = beta[j]
            a = float(xj @ resid) + col_sq[j] * old
            new = soft_threshold(a, half_l1) / denom
            if new != old:
                resid += xj * (old - new)
                beta[j] = new
                change = abs(new - old)
                if change > max_change:
                    max_change = change
        if max_change < tol:
            converged = True
            break

    objective = float(
        resid @ resid + lambda1 * np.sum(np.abs(beta)) + lambda2 * beta @ beta
    )
    return ElasticNetModel(
        beta=beta,
        intercept=intercept,
        lambda1=float(lambda1),
        lambda2=float(lambda2),
        nnz=int(np.count_nonzero(beta)),
        converged=converged,
        n_iter=n_iter,
        objective=objective,
    )


def predict_linear(model: ElasticNetModel, X, y=None) -> np.ndarray:
    """ŷ = X·beta + intercept."""
    if isinstance(X, DocumentMatrix):
        if X.n_terms != len(model.beta):
            raise ValueError(
                f"model dim {len(model.beta)} != matrix dim {X.n_terms}"
            )
        out = np.full(X.n_docs, model.intercept)
        for i, row in enumerate(X.rows):
            if len(row):
                out[i] += float(row.values @ model.beta[row.indices])
        return out
    dense = np.asarray(X, dtype=float)
    if dense.shape[1] != len(model.beta):
        raise ValueError(
            f"model dim {len(model.beta)} != matrix dim {dense.shape[1]}"
        )
    return dense @ model.beta + model.intercept


def spearman_rho(a, b) -> float:
    """Rank correlation with average-rank ties (Pearson on ranks)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if len(a) < 2:
        raise UndefinedCorrelationError("need at least two points")
    ra = stats.rankdata(a)
    rb = stats.rankdata(b)
    if np.std(ra) == 0 or np.std(rb) == 0:
        raise UndefinedCorrelationError("constant ranks: correlation undefined")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    return float((ra @ rb) / np.sqrt((ra @ ra) * (rb @ rb)))


@dataclass
class CvReport:
    """Outcome of a regularization grid search."""

    grid: list[tuple[float, float]]
    scores: list[float]
    nnz: list[int]
    chosen: int
    chosen_nnz: int
    band_missed: bool
    model: ElasticNetModel = field(repr=False, default=None)


def cross_validate(
    train: DocumentMatrix,
    val: DocumentMatrix,
    grid: Sequence[tuple[float, float]],
    nnz_target: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CvReport:
    """Fit each grid point on train, score Spearman rho on validation.

    Selection prefers the highest-scoring point whose non-zero count is
    within 10% of nnz_target; if no point lands in that band the report
    is flagged (band_missed) and the global best is chosen. Undefined
    correlations score nan and are never selected. Ties keep the
    earliest grid point.
    """
    if not grid:
        raise ValueError("empty regularization grid")
    models = []
    scores = []
    nnzs = []
    for lam1, lam2 in grid:
        model = fit_elastic_net(train, lam1, lam2, tol=tol, max_iter=max_iter)
        pred = predict_linear(model, val)
        try:
            score = spearman_rho(pred, val.targets)
        except UndefinedCorrelationError:
            score = float("nan")
        models.append(model)
        scores.append(score)
        nnzs.append(model.nnz)
        logger.debug(
            "grid point (%g, %g): nnz=%d rho=%s", lam1, lam2, model.nnz, score
        )

    band = nnz_target * NNZ_BAND
    eligible = [
        i
        for i in range(len(grid))
        if abs(nnzs[i] - nnz_target) <= band and not np.isnan(scores[i])
    ]
    band_missed = not eligible
    pool = eligible if eligible else [
        i for i in range(len(grid)) if not np.isnan(scores[i])
    ]
    if not pool:
        pool = [0]  # every point undefined; keep the first, flagged
        band_missed = True
    chosen = max(pool, key=lambda i: (scores[i] if not np.isnan(scores[i]) else -np.inf, -i))
    if band_missed:
        logger.warning(
            "no grid point within %d%% of nnz target %d (got %s)",
            int(NNZ_BAND * 100),
            nnz_target,
            nnzs,
        )
    return CvReport(
        grid=list(grid),
        scores=scores,
        nnz=nnzs,
        chosen=chosen,
        chosen_nnz=nnzs[chosen],
        band_missed=band_missed,
        model=models[chosen],
    )


def save_model(
    model: ElasticNetModel, terms: Sequence[Term], path: str | Path
) -> None:
    """Text model format: header lines, then non-zero (term, beta) pairs
    sorted by |beta| descending."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim {len(model.beta)}\n")
        fh.write(f"intercept {model.intercept!r}\n")
        fh.write(f"lambda1 {model.lambda1!r}\n")
        fh.write(f"lambda2 {model.lambda2!r}\n")
        fh.write(f"nnz {model.nnz}\n")
        for term, b in model.nonzero_terms(terms):
            fh.write(f"{term_to_text(term)}\t{b!r}\n")


def load_model(path: str | Path) -> tuple[ElasticNetModel, list[tuple[Term, float]]]:
    """Read the text model format back; beta is reconstructed only as the
    (term, weight) list since term order is owned by the vocabulary."""
    path = Path(path)
    header: dict[str, float] = {}
    pairs: list[tuple[Term, float]] = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                if "\t" in line:
                    text, _, value = line.partition("\t")
                    pairs.append((term_from_text(text), float(value)))
                else:
                    key, _, value = line.partition(" ")
                    header[key] = float(value)
            except ValueError as exc:
                raise DataError(f"{path}:{number}: malformed model line: {exc}") from exc
    for key in ("dim", "intercept", "lambda1", "lambda2", "nnz"):
        if key not in header:
            raise DataError(f"{path}: missing model header field {key!r}")
    model = ElasticNetModel(
        beta=np.zeros(int(header["dim"])),
        intercept=header["intercept"],
        lambda1=header["lambda1"],
        lambda2=header["lambda2"],
        nnz=int(header["nnz"]),
        converged=True,
        n_iter=0,
        objective=float("nan"),
    )
    return model, pairs
