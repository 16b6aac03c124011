"""Token-embedding ingestion and axis-level pooling.

Embeddings are an external input: they arrive either as a vector fixture
file or from an HTTP provider (cached locally so reruns are offline). The
fixture format is line-oriented UTF-8 text:

    astra-vec 1 <dim>
    <token> <v0> <v1> ... <v_dim-1>

one token per line, floats serialized with ``repr`` so values round-trip
bit-exactly. Tokens contain no whitespace (the tokenizer guarantees
``[a-z0-9]+``).
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

FORMAT_NAME = "astra-vec"
FORMAT_VERSION = 1

ENV_EMBED_URL = "ASTRA_EMBED_URL"


class EmbeddingError(ValueError):
    """Raised for malformed vector files or unusable embedding inputs."""


class PoolingError(ValueError):
    """Raised when pooling has no in-vocabulary tokens to average."""


@dataclass(frozen=True)
class TokenEmbeddingTable:
    """Immutable token -> vector map with a single fixed dimension."""

    vectors: Mapping[str, np.ndarray]
    dim: int

    @classmethod
    def from_dict(cls, vectors: Mapping[str, np.ndarray]) -> "TokenEmbeddingTable":
        if not vectors:
            raise EmbeddingError("embedding table is empty")
        arrs = {}
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=float)
            if arr.ndim != 1:
                raise EmbeddingError(f"vector for {token!r} is not one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError(f"non-finite components in vector for {token!r}")
            arrs[token] = arr
        dims = {a.shape[0] for a in arrs.values()}
        if len(dims) != 1:
            raise EmbeddingError(f"inconsistent vector dimensions: {sorted(dims)}")
        return cls(vectors=arrs, dim=dims.pop())

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[token]

    def tokens(self) -> set[str]:
        return set(self.vectors)

    def coverage(self, vocabulary: Iterable[str]) -> tuple[set[str], set[str]]:
        """(covered, missing) split of ``vocabulary`` against this table."""
        vocab = set(vocabulary)
        covered = vocab & self.tokens()
        return covered, vocab - covered


def load_token_embeddings(path: str | Path) -> TokenEmbeddingTable:
    """Load a vector fixture file, reporting parse errors by line number."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingError(f"{path}: empty vector file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != FORMAT_NAME:
        raise EmbeddingError(f"{path}:1: bad header {lines[0]!r}")
    if int(header[1]) != FORMAT_VERSION:
        raise EmbeddingError(f"{path}:1: unsupported format version {header[1]}")
    dim = int(header[2])
    if dim < 1:
        raise EmbeddingError(f"{path}:1: dimension must be positive")

    vectors: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        token = parts[0]
        if len(parts) - 1 != dim:
            raise EmbeddingError(
                f"{path}:{lineno}: expected {dim} components, got {len(parts) - 1}"
            )
        try:
            values = np.array([float(p) for p in parts[1:]], dtype=float)
        except ValueError as exc:
            raise EmbeddingError(f"{path}:{lineno}: unparseable value ({exc})") from exc
        if not np.all(np.isfinite(values)):
            raise EmbeddingError(f"{path}:{lineno}: non-finite component")
        if token in vectors:
            raise EmbeddingError(f"{path}:{lineno}: duplicate token {token!r}")
        vectors[token] = values
    if not vectors:
        raise EmbeddingError(f"{path}: no vector rows")
    log.info("loaded %d token vectors (dim=%d) from %s", len(vectors), dim, path)
    return TokenEmbeddingTable(vectors=vectors, dim=dim)


def save_token_embeddings(table: TokenEmbeddingTable, path: str | Path) -> None:
    """Write a table in the fixture format (tokens sorted, floats via repr)."""
    path = Path(path)
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION} {table.dim}"]
    for token in sorted(table.vectors):
        values = " ".join(repr(float(v)) for v in table.vectors[token])
        lines.append(f"{token} {values}")
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def pool_tokens(
    tokens: Sequence[str], table: TokenEmbeddingTable
) -> tuple[np.ndarray, int]:
    """Mean of in-vocabulary token vectors, L2-normalized.

    Duplicate tokens contribute multiply (frequency-weighted pooling).
    Returns the unit vector and the count of skipped out-of-vocabulary
    tokens; raises :class:`PoolingError` when every token is out of
    vocabulary.
    """
    present = [table[t] for t in tokens if t in table]
    skipped = len(tokens) - len(present)
    if not present:
        raise PoolingError("no in-vocabulary tokens to pool")
    mean = np.mean(present, axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise PoolingError("pooled vector has zero norm")
    return mean / norm, skipped


@dataclass(frozen=True)
class AxisEmbeddings:
    """Unit-norm pooled vectors per (institution, axis): shape (n, 8, dim)."""

    institution_ids: tuple[str, ...]
    matrix: np.ndarray
    oov_counts: dict[tuple[str, int], int]

    def concatenated(self) -> np.ndarray:
        """Per-institution concatenation of the eight axis vectors.

        Each axis vector is unit-norm before concatenation, so every axis
        contributes equal mass to the combined vector.
        """
        n = self.matrix.shape[0]
        return self.matrix.reshape(n, -1)


def embed_corpus(corpus, table: TokenEmbeddingTable) -> AxisEmbeddings:
    """Pool every (institution, axis) token list into a unit vector."""
    ids = []
    rows = []
    oov: dict[tuple[str, int], int] = {}
    for inst in corpus:
        axis_vectors = []
        for axis_index, tokens in enumerate(inst.tokens()):
            try:
                vec, skipped = pool_tokens(tokens, table)
            except PoolingError as exc:
                raise PoolingError(
                    f"institution {inst.id!r} axis {axis_index}: {exc}"
                ) from exc
            if skipped:
                oov[(inst.id, axis_index)] = skipped
            axis_vectors.append(vec)
        ids.append(inst.id)
        rows.append(np.stack(axis_vectors))
    if oov:
        log.warning("out-of-vocabulary tokens skipped in %d (institution, axis) pairs", len(oov))
    return AxisEmbeddings(
        institution_ids=tuple(ids), matrix=np.stack(rows), oov_counts=oov
    )


# ---------------------------------------------------------------------------
# Remote provider client
# ---------------------------------------------------------------------------


def _default_transport(url: str, payload: dict, timeout: float) -> dict:
    import requests

    response = requests.post(url, json=payload, timeout=timeout)
    response.raise_for_status()
    return response.json()


def fetch_remote_embeddings(
    endpoint: str,
    tokens: Iterable[str],
    cache_path: str | Path,
    batch_size: int = 64,
    max_retries: int = 4,
    backoff: float = 0.1,
    timeout: float = 30.0,
    transport: Callable[[str, dict, float], dict] | None = None,
) -> TokenEmbeddingTable:
    """Fetch vectors for ``tokens`` from an HTTP provider, with caching.

    Request body is ``{"tokens": [...]}``; the response must carry
    ``{"vectors": [[...], ...]}`` aligned with the request order. Transient
    transport failures are retried with exponential backoff. On success the
    full table is written to ``cache_path`` (atomically, so a failed run
    never leaves a partial cache); when the cache already covers the
    requested tokens no network call is made.
    """
    requested = sorted(set(tokens))
    cache_path = Path(cache_path)
    if cache_path.exists():
        cached = load_token_embeddings(cache_path)
        covered, missing = cached.coverage(requested)
        if not missing:
            log.info("embedding cache hit: %s covers all %d tokens", cache_path, len(requested))
            return cached
        log.info("embedding cache misses %d tokens; refetching", len(missing))

    send = transport or _default_transport
    vectors: dict[str, np.ndarray] = {}
    for start in range(0, len(requested), batch_size):
        batch = requested[start : start + batch_size]
        payload = {"tokens": batch}
        last_error: Exception | None = None
        for attempt in range(max_retries):
            try:
                reply = send(endpoint, payload, timeout)
                break
            except Exception as exc:  # transport errors are provider-specific
                last_error = exc
                if attempt + 1 < max_retries:
                    time.sleep(backoff * (2**attempt))
        else:
            raise EmbeddingError(
                f"embedding provider failed after {max_retries} attempts: {last_error}"
            )
        rows = reply.get("vectors")
        if not isinstance(rows, list) or len(rows) != len(batch):
            raise EmbeddingError(
                f"provider returned {len(rows) if isinstance(rows, list) else 'no'} "
                f"vectors for a batch of {len(batch)}"
            )
        for token, row in zip(batch, rows):
            vectors[token] = np.asarray(row, dtype=float)

    table = TokenEmbeddingTable.from_dict(vectors)
    save_token_embeddings(table, cache_path)
    log.info("fetched %d vectors (dim=%d); cached to %s", len(table), table.dim, cache_path)
    return table
