"""NMF topic extraction over the codeword feature matrix.

Factorizes X ~= W H with multiplicative Frobenius updates from a seeded
NNDSVD-ar start, selects the topic count from reconstruction error, topic
diversity, and mean inter-topic cosine, and labels topics by their top
contributing (axis, codeword) features.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codebook import Codebook, FeatureMatrix

log = logging.getLogger(__name__)

TOP_TERMS = 10

_EPS = 1e-12


class TopicError(ValueError):
    """Raised for invalid factorization inputs."""


@dataclass(frozen=True)
class TopicModel:
    W: np.ndarray  # (n, k) loadings
    H: np.ndarray  # (k, features) basis
    k_topics: int
    reconstruction_error: float
    error_trace: np.ndarray
    top_terms: tuple[tuple[int, ...], ...]  # per topic: feature indices
    zero_rows: tuple[int, ...]

    def topic_weights(self) -> np.ndarray:
        """Row-normalized loadings (rows summing to 1; zero rows stay zero)."""
        sums = self.W.sum(axis=1, keepdims=True)
        return self.W / np.where(sums > 0, sums, 1.0)


@dataclass(frozen=True)
class TopicSelectionDiagnostics:
    k_values: tuple[int, ...]
    reconstruction_error: np.ndarray
    diversity: np.ndarray
    mean_intertopic_cosine: np.ndarray
    fallback_used: bool


def _nndsvdar(X: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """NNDSVD initialization with zeros filled by small seeded noise."""
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    n, m = X.shape
    W = np.zeros((n, k))
    H = np.zeros((k, m))
    W[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    H[0, :] = np.sqrt(s[0]) * np.abs(vt[0, :])
    for j in range(1, k):
        x, y = u[:, j], vt[j, :]
        x_p, y_p = np.maximum(x, 0), np.maximum(y, 0)
        x_n, y_n = np.abs(np.minimum(x, 0)), np.abs(np.minimum(y, 0))
        xp_n, yp_n = np.linalg.norm(x_p), np.linalg.norm(y_p)
        xn_n, yn_n = np.linalg.norm(x_n), np.linalg.norm(y_n)
        m_p, m_n = xp_n * yp_n, xn_n * yn_n
        if m_p > m_n:
            u_j, v_j, sigma = x_p / max(xp_n, _EPS), y_p / max(yp_n, _EPS), m_p
        else:
            u_j, v_j, sigma = x_n / max(xn_n, _EPS), y_n / max(yn_n, _EPS), m_n
        lbd = np.sqrt(s[j] * sigma)
        W[:, j] = lbd * u_j
        H[j, :] = lbd * v_j
    W[W < _EPS] = 0
    H[H < _EPS] = 0
    avg = X.mean()
    W[W == 0] = np.abs(avg * rng.standard_normal(int((W == 0).sum())) / 100)
    H[H == 0] = np.abs(avg * rng.standard_normal(int((H == 0).sum())) / 100)
    return W, H


def fit_nmf(
    X: np.ndarray | FeatureMatrix,
    k: int,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> TopicModel:
    """Factorize a nonnegative matrix into k topics.

    Stops when the relative change of the Frobenius error falls below
    ``tol`` or after ``max_iter`` updates; the error trace is monotone
    non-increasing. All-zero rows are legal: they are flagged and produce
    zero loadings.
    """
    if isinstance(X, FeatureMatrix):
        X = X.matrix
    X = np.asarray(X, dtype=float)
    if np.any(X < 0):
        raise TopicError("NMF input must be nonnegative")
    n, m = X.shape
    if not 1 <= k <= min(n, m):
        raise TopicError(f"k={k} out of range [1, {min(n, m)}]")
    zero_rows = tuple(int(i) for i in np.where(X.sum(axis=1) == 0)[0])
    if zero_rows:
        log.warning("NMF input has %d all-zero rows: %s", len(zero_rows), zero_rows[:5])

    rng = np.random.default_rng(seed)
    W, H = _nndsvdar(X, k, rng)
    errors = [np.linalg.norm(X - W @ H)]
    for _ in range(max_iter):
        H *= (W.T @ X) / np.maximum(W.T @ W @ H, _EPS)
        W *= (X @ H.T) / np.maximum(W @ H @ H.T, _EPS)
        err = np.linalg.norm(X - W @ H)
        prev = errors[-1]
        errors.append(err)
        if abs(prev - err) <= tol * max(prev, _EPS):
            break
    if zero_rows:
        W[list(zero_rows)] = 0.0
        errors[-1] = float(np.linalg.norm(X - W @ H))
    top = tuple(
        tuple(int(j) for j in _top_feature_indices(H[t], TOP_TERMS))
        for t in range(k)
    )
    return TopicModel(
        W=W,
        H=H,
        k_topics=k,
        reconstruction_error=float(errors[-1]),
        error_trace=np.array(errors),
        top_terms=top,
        zero_rows=zero_rows,
    )


def _top_feature_indices(row: np.ndarray, count: int) -> np.ndarray:
    # descending weight; ties by feature index
    order = np.lexsort((np.arange(row.shape[0]), -row))
    return order[: min(count, row.shape[0])]


def topic_diversity(top_terms: Sequence[Sequence[int]]) -> float:
    """Fraction of unique features among all topics' top-term lists."""
    all_terms = [t for terms in top_terms for t in terms]
    return len(set(all_terms)) / len(all_terms)


def mean_intertopic_cosine(H: np.ndarray) -> float:
    """Mean pairwise cosine between topic basis rows (0 for k=1)."""
    k = H.shape[0]
    if k < 2:
        return 0.0
    norms = np.linalg.norm(H, axis=1, keepdims=True)
    unit = H / np.where(norms > 0, norms, 1.0)
    sims = unit @ unit.T
    upper = sims[np.triu_indices(k, 1)]
    return float(upper.mean())


def select_topic_count(
    X: np.ndarray | FeatureMatrix,
    k_values: Sequence[int] = tuple(range(3, 21)),
    seed: int = 0,
    cosine_threshold: float = 0.02,
    diversity_threshold: float = 0.9,
) -> tuple[int, TopicSelectionDiagnostics]:
    """Pick the topic count: smallest k with mean inter-topic cosine below
    threshold and diversity at or above threshold; if none qualifies, fall
    back to the max-curvature elbow of the error curve."""
    if isinstance(X, FeatureMatrix):
        X = X.matrix
    limit = min(X.shape)
    k_values = tuple(k for k in k_values if 1 <= k <= limit)
    if not k_values:
        raise TopicError("no feasible topic counts for this matrix")
    errors, diversities, cosines = [], [], []
    for k in k_values:
        model = fit_nmf(X, k, seed=seed)
        errors.append(model.reconstruction_error)
        diversities.append(topic_diversity(model.top_terms))
        cosines.append(mean_intertopic_cosine(model.H))
    errors_arr = np.array(errors)
    div_arr = np.array(diversities)
    cos_arr = np.array(cosines)

    qualifying = [
        k
        for k, c, d in zip(k_values, cos_arr, div_arr)
        if c < cosine_threshold and d >= diversity_threshold
    ]
    fallback = not qualifying
    if qualifying:
        k_star = min(qualifying)
    else:
        k_star = k_values[_elbow_index(errors_arr)]
        log.warning(
            "no topic count met the cosine/diversity rule; "
            "falling back to the error-curve elbow k=%d",
            k_star,
        )
    return k_star, TopicSelectionDiagnostics(
        k_values=k_values,
        reconstruction_error=errors_arr,
        diversity=div_arr,
        mean_intertopic_cosine=cos_arr,
        fallback_used=fallback,
    )


def _elbow_index(curve: np.ndarray) -> int:
    """Max discrete curvature (second difference) of a decreasing curve."""
    if curve.shape[0] < 3:
        return 0
    curvature = curve[:-2] - 2 * curve[1:-1] + curve[2:]
    return int(np.argmax(curvature) + 1)


@dataclass(frozen=True)
class TopicDescriptor:
    axis: int
    codeword: int
    family: str
    weight: float
    tokens: tuple[str, ...]


def label_topics(
    model: TopicModel,
    features: FeatureMatrix,
    codebook: Codebook,
    token_count: int = 3,
) -> list[list[TopicDescriptor]]:
    """Map each topic's top features to (axis, codeword) descriptors with
    representative member tokens."""
    if model.H.shape[1] != len(features.columns):
        raise TopicError("topic model and feature matrix have mismatched columns")
    labeled: list[list[TopicDescriptor]] = []
    for t in range(model.k_topics):
        descriptors = []
        for feat_idx in model.top_terms[t]:
            family, axis, codeword = features.columns[feat_idx]
            descriptors.append(
                TopicDescriptor(
                    axis=axis,
                    codeword=codeword,
                    family=family,
                    weight=float(model.H[t, feat_idx]),
                    tokens=tuple(codebook.representative_tokens(codeword, token_count)),
                )
            )
        labeled.append(descriptors)
    return labeled
