"""Word-level codebook: PCA over token embeddings, agglomerative codewords,
and quantization of institutions into per-axis codeword features.

Determinism contract: vocabulary is processed in lexicographic token order,
agglomerative ties break on the smallest index pair (hence smallest token
pair), and codeword ids are ordered by descending member count. Identical
inputs therefore always produce identical codebooks and features.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cluster.algorithms import cut_merge_sequence, linkage_merge_sequence
from .corpus import AxisId, Corpus
from .embed import TokenEmbeddingTable

log = logging.getLogger(__name__)

CODEBOOK_FORMAT = "astra-codebook"
CODEBOOK_VERSION = 1

FEATURE_FAMILIES = ("tfidf", "counts", "both")


class CodebookError(ValueError):
    """Raised for invalid codebook configuration or inputs."""


@dataclass(frozen=True)
class CodebookConfig:
    variance_target: float = 0.953
    max_pca_dims: int = 64
    codebook_k: int = 7
    linkage: str = "ward"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.variance_target <= 1:
            raise CodebookError(f"variance_target {self.variance_target} outside (0, 1]")
        if self.codebook_k < 2:
            raise CodebookError(f"codebook_k {self.codebook_k} must be >= 2")
        if self.linkage not in ("ward", "average"):
            raise CodebookError(f"unknown linkage {self.linkage!r}")


@dataclass(frozen=True)
class PCAProjection:
    """Affine projection to the leading principal components."""

    mean: np.ndarray
    components: np.ndarray  # (dims, input_dim), rows orthonormal
    explained_variance_ratio: np.ndarray
    retained_variance: float

    @property
    def dims(self) -> int:
        return self.components.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T


def fit_pca(vectors: np.ndarray, config: CodebookConfig) -> PCAProjection:
    """PCA keeping the smallest dimension count that reaches the variance
    target, capped by ``max_pca_dims`` and by matrix rank."""
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise CodebookError("PCA needs at least 2 vectors")
    mean = X.mean(axis=0)
    centered = X - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    total = float((s**2).sum())
    if total <= 0:
        raise CodebookError("PCA input has zero variance")
    rank = int(np.sum(s > s[0] * max(X.shape) * np.finfo(float).eps))
    ratios = s**2 / total
    cumulative = np.cumsum(ratios)
    dims = int(np.searchsorted(cumulative, config.variance_target - 1e-12) + 1)
    dims = min(dims, config.max_pca_dims, rank)

    # Sign convention: make each component's largest-magnitude entry positive
    # so the decomposition is reproducible across runs.
    components = vt[:dims].copy()
    for row in components:
        anchor = np.argmax(np.abs(row))
        if row[anchor] < 0:
            row *= -1
    return PCAProjection(
        mean=mean,
        components=components,
        explained_variance_ratio=ratios[:dims],
        retained_variance=float(cumulative[dims - 1]),
    )


@dataclass(frozen=True)
class Codebook:
    """PCA projection plus codeword centroids and token assignments."""

    pca: PCAProjection
    centroids: np.ndarray  # (k, dims) in PCA space
    token_assignments: dict[str, int]
    retained_variance: float
    config: CodebookConfig

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def codeword_members(self) -> list[list[str]]:
        members: list[list[str]] = [[] for _ in range(self.k)]
        for token in sorted(self.token_assignments):
            members[self.token_assignments[token]].append(token)
        return members

    def representative_tokens(self, codeword: int, count: int = 3) -> list[str]:
        """First member tokens in lexicographic order (deterministic sample)."""
        return self.codeword_members()[codeword][:count]

    def save(self, path: str | Path) -> None:
        doc = {
            "format": CODEBOOK_FORMAT,
            "version": CODEBOOK_VERSION,
            "pca": {
                "mean": self.pca.mean.tolist(),
                "components": self.pca.components.tolist(),
                "explained_variance_ratio": self.pca.explained_variance_ratio.tolist(),
                "retained_variance": self.pca.retained_variance,
            },
            "centroids": self.centroids.tolist(),
            "assignments": self.token_assignments,
            "retained_variance": self.retained_variance,
            "config": {
                "variance_target": self.config.variance_target,
                "max_pca_dims": self.config.max_pca_dims,
                "codebook_k": self.config.codebook_k,
                "linkage": self.config.linkage,
                "rng_seed": self.config.rng_seed,
            },
        }
        Path(path).write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Codebook":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != CODEBOOK_FORMAT:
            raise CodebookError(f"{path}: not a codebook file")
        if doc.get("version") != CODEBOOK_VERSION:
            raise CodebookError(f"{path}: unsupported version {doc.get('version')}")
        pca = PCAProjection(
            mean=np.array(doc["pca"]["mean"], dtype=float),
            components=np.array(doc["pca"]["components"], dtype=float),
            explained_variance_ratio=np.array(
                doc["pca"]["explained_variance_ratio"], dtype=float
            ),
            retained_variance=float(doc["pca"]["retained_variance"]),
        )
        return cls(
            pca=pca,
            centroids=np.array(doc["centroids"], dtype=float),
            token_assignments={str(k): int(v) for k, v in doc["assignments"].items()},
            retained_variance=float(doc["retained_variance"]),
            config=CodebookConfig(**doc["config"]),
        )


def build_codebook(
    table: TokenEmbeddingTable,
    vocabulary: Iterable[str],
    config: CodebookConfig = CodebookConfig(),
) -> Codebook:
    """Fit PCA on the vocabulary's token vectors and cluster them into
    ``codebook_k`` codewords via agglomerative clustering in PCA space."""
    vocab = sorted(set(vocabulary))
    missing = [t for t in vocab if t not in table]
    if missing:
        raise CodebookError(
            f"{len(missing)} vocabulary tokens missing from the embedding table "
            f"(e.g. {missing[:5]})"
        )
    if len(vocab) < config.codebook_k:
        raise CodebookError(
            f"vocabulary size {len(vocab)} is smaller than codebook_k={config.codebook_k}"
        )
    X = np.stack([table[t] for t in vocab])
    pca = fit_pca(X, config)
    Z = pca.transform(X)
    merges = linkage_merge_sequence(Z, config.linkage)
    raw_labels = cut_merge_sequence(merges, len(vocab), config.codebook_k)

    groups: dict[int, list[int]] = {}
    for idx, lab in enumerate(raw_labels):
        groups.setdefault(int(lab), []).append(idx)
    # codeword ids by descending member count; ties by smallest member token
    ordered = sorted(
        groups.values(), key=lambda idxs: (-len(idxs), vocab[min(idxs)])
    )
    assignments: dict[str, int] = {}
    centroids = np.zeros((config.codebook_k, Z.shape[1]))
    for cid, idxs in enumerate(ordered):
        for idx in idxs:
            assignments[vocab[idx]] = cid
        centroids[cid] = Z[idxs].mean(axis=0)
    log.info(
        "codebook built: %d tokens -> %d codewords (pca dims=%d, retained=%.3f)",
        len(vocab),
        config.codebook_k,
        pca.dims,
        pca.retained_variance,
    )
    return Codebook(
        pca=pca,
        centroids=centroids,
        token_assignments=assignments,
        retained_variance=pca.retained_variance,
        config=config,
    )


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-institution codeword features, one row per institution.

    ``columns`` names each column as (family, axis, codeword); rows are
    L2-normalized after block assembly.
    """

    matrix: np.ndarray
    institution_ids: tuple[str, ...]
    columns: tuple[tuple[str, int, int], ...]
    density: float
    features: str

    def row_index(self, institution_id: str) -> int:
        return self.institution_ids.index(institution_id)


def quantize_corpus(
    corpus: Corpus,
    codebook: Codebook,
    features: str = "tfidf",
    axes: Sequence[AxisId] | None = None,
    token_lists: Mapping[str, Sequence[Sequence[str]]] | None = None,
) -> FeatureMatrix:
    """Quantize institutions into codeword histogram features.

    Per (institution, axis): a count histogram over codewords, where tokens
    not covered by the codebook are dropped with a warning. The TF-IDF block
    uses tf = count and idf = ln((1+N)/(1+df)) + 1 with df counting the
    institutions whose *same axis* uses the codeword (the document unit is
    the (institution, axis) column group). Blocks selected by ``features``
    are concatenated, then each row is L2-normalized.

    ``token_lists`` overrides the corpus tokenization (used by the shuffle
    controls); ``axes`` restricts which axes contribute column groups (used
    by the leave-one-axis-out ablation).
    """
    if features not in FEATURE_FAMILIES:
        raise CodebookError(f"features must be one of {FEATURE_FAMILIES}")
    included = tuple(axes) if axes is not None else tuple(AxisId)
    lists = token_lists if token_lists is not None else corpus.token_lists()
    n = len(corpus)
    k = codebook.k

    counts = np.zeros((n, len(included), k))
    dropped: set[str] = set()
    for row, inst in enumerate(corpus):
        inst_tokens = lists[inst.id]
        for a_idx, axis in enumerate(included):
            for token in inst_tokens[axis]:
                cid = codebook.token_assignments.get(token)
                if cid is None:
                    dropped.add(token)
                    continue
                counts[row, a_idx, cid] += 1
    if dropped:
        log.warning(
            "%d tokens not covered by the codebook were dropped (e.g. %s)",
            len(dropped),
            sorted(dropped)[:5],
        )
    empty = np.where(counts.sum(axis=(1, 2)) == 0)[0]
    if empty.size:
        bad = corpus.institutions[empty[0]].id
        raise CodebookError(
            f"institution {bad!r} has zero in-vocabulary tokens across all axes"
        )

    df = (counts > 0).sum(axis=0)  # (axes, k)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    tfidf = counts * idf[None, :, :]

    blocks: list[np.ndarray] = []
    columns: list[tuple[str, int, int]] = []
    for family, tensor in (("tfidf", tfidf), ("counts", counts)):
        if features not in (family, "both"):
            continue
        blocks.append(tensor.reshape(n, -1))
        for axis in included:
            for c in range(k):
                columns.append((family, int(axis), c))
    assembled = np.hstack(blocks)
    norms = np.linalg.norm(assembled, axis=1, keepdims=True)
    normalized = assembled / np.where(norms > 0, norms, 1.0)
    density = float(np.count_nonzero(normalized) / normalized.size)
    return FeatureMatrix(
        matrix=normalized,
        institution_ids=tuple(corpus.ids()),
        columns=tuple(columns),
        density=density,
        features=features,
    )
