"""Embedding ingestion, cosine kernels, and the provider seam that keeps
neural models out of the engine.

Vectors live in an immutable ``EmbeddingStore`` keyed by argument or
sentence id. All kernels run in float64 with a fixed reduction order so
results are bit-identical regardless of how callers parallelize.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)


class EmbeddingError(Exception):
    """Raised for malformed embedding files or inconsistent stores."""


@dataclass(frozen=True)
class EmbeddingStore:
    """Immutable id -> float64 vector map with a single dimension.

    ``zero_ids`` flags vectors with zero norm (legal texts can yield
    degenerate inputs); they survive ``normalize`` unchanged.
    """

    dim: int
    vectors: Mapping[str, np.ndarray]
    zero_ids: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def vector(self, key: str) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise EmbeddingError(f"no embedding for id {key!r}") from None

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Rows in the order of ``ids``; raises naming any missing id."""
        missing = [i for i in ids if i not in self.vectors]
        if missing:
            raise EmbeddingError(f"missing embeddings for ids: {missing[:5]}"
                                 + ("..." if len(missing) > 5 else ""))
        if not ids:
            return np.zeros((0, self.dim))
        return np.stack([self.vectors[i] for i in ids])


def build_store(vectors: Mapping[str, Iterable[float]]) -> EmbeddingStore:
    """Validate and freeze a raw id -> vector mapping into a store."""
    converted: dict[str, np.ndarray] = {}
    dim: int | None = None
    for key, value in vectors.items():
        vec = np.asarray(value, dtype=np.float64)
        if vec.ndim != 1:
            raise EmbeddingError(f"vector for id {key!r} is not one-dimensional")
        if dim is None:
            dim = int(vec.shape[0])
            if dim < 1:
                raise EmbeddingError(f"vector for id {key!r} is empty")
        elif vec.shape[0] != dim:
            raise EmbeddingError(
                f"dimension mismatch at id={key!r}: got {vec.shape[0]}, expected {dim}")
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"non-finite component in vector for id {key!r}")
        vec.setflags(write=False)
        converted[key] = vec
    return EmbeddingStore(dim=dim if dim is not None else 0, vectors=converted)


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Load a JSONL embedding file: one ``{"id": ..., "vector": [...]}``
    record per line. The dimension is inferred from the first record;
    every later record must agree. Duplicate ids are an error."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise EmbeddingError(f"{path}:{lineno}: malformed JSON: {e.msg}") from e
            if not isinstance(record, dict) or "id" not in record or "vector" not in record:
                raise EmbeddingError(f"{path}:{lineno}: record needs 'id' and 'vector'")
            key = record["id"]
            if key in vectors:
                raise EmbeddingError(f"{path}:{lineno}: duplicate id {key!r}")
            vec = np.asarray(record["vector"], dtype=np.float64)
            if dim is None:
                dim = int(vec.shape[0])
            elif vec.ndim != 1 or vec.shape[0] != dim:
                raise EmbeddingError(
                    f"dimension mismatch at id={key!r}: got {vec.shape}, expected ({dim},)")
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"{path}:{lineno}: non-finite value at id={key!r}")
            vec.setflags(write=False)
            vectors[key] = vec
    return EmbeddingStore(dim=dim if dim is not None else 0, vectors=vectors)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for key in store.vectors:
            fh.write(json.dumps({"id": key, "vector": [float(x) for x in store.vectors[key]]})
                     + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]. A zero vector yields 0.0 (with a
    warning) instead of NaN, so degenerate inputs cannot poison PageRank.

    Inputs are pre-scaled by their max components so extreme magnitudes
    cannot underflow or overflow inside the norm computation."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    mu = float(np.max(np.abs(u))) if u.size else 0.0
    mv = float(np.max(np.abs(v))) if v.size else 0.0
    if mu == 0.0 or mv == 0.0:
        log.warning("cosine of zero vector defined as 0.0")
        return 0.0
    us = u / mu
    vs = v / mv
    nu = float(np.linalg.norm(us))
    nv = float(np.linalg.norm(vs))
    return float(np.clip(np.dot(us, vs) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric cosine matrix over an ordered id list."""

    ids: tuple[str, ...]
    values: np.ndarray

    def index_of(self, key: str) -> int:
        try:
            return self.ids.index(key)
        except ValueError:
            raise EmbeddingError(f"id {key!r} not in similarity matrix") from None

    def pair(self, a: str, b: str) -> float:
        return float(self.values[self.index_of(a), self.index_of(b)])


def similarity_matrix(store: EmbeddingStore, ids: Sequence[str]) -> SimilarityMatrix:
    """Pairwise cosine matrix; exact symmetry enforced by mirroring the
    upper triangle, diagonal pinned to 1 for nonzero vectors."""
    mat = store.matrix(ids)
    norms = np.linalg.norm(mat, axis=1)
    nonzero = norms > 0.0
    if not np.all(nonzero):
        log.warning("similarity_matrix: %d zero vector(s); their rows are 0",
                    int(np.sum(~nonzero)))
    safe = np.where(nonzero, norms, 1.0)
    unit = mat / safe[:, None]
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    values = np.triu(values) + np.triu(values, 1).T
    diag = np.where(nonzero, 1.0, 0.0)
    np.fill_diagonal(values, diag)
    return SimilarityMatrix(ids=tuple(ids), values=values)


def normalize(store: EmbeddingStore) -> EmbeddingStore:
    """Return a store whose nonzero vectors have unit L2 norm. Zero vectors
    pass through unchanged and are flagged in ``zero_ids``."""
    out: dict[str, np.ndarray] = {}
    zero: set[str] = set(store.zero_ids)
    for key, vec in store.vectors.items():
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            zero.add(key)
            out[key] = vec
        else:
            unit = vec / norm
            unit.setflags(write=False)
            out[key] = unit
    if zero:
        log.warning("normalize: %d zero vector(s) left unchanged", len(zero))
    return EmbeddingStore(dim=store.dim, vectors=out, zero_ids=frozenset(zero))


class EmbeddingProvider(Protocol):
    """Source of vectors for texts; must be deterministic per model version."""

    def embed(self, keyed_texts: Sequence[tuple[str, str]]) -> EmbeddingStore:
        """Return a store covering every (id, text) pair given."""
        ...


class FileProvider:
    """Provider backed by a JSONL embedding file."""

    def __init__(self, path: str | Path):
        self._store = load_embeddings(path)

    def embed(self, keyed_texts: Sequence[tuple[str, str]]) -> EmbeddingStore:
        missing = [key for key, _ in keyed_texts if key not in self._store]
        if missing:
            raise EmbeddingError(
                f"embedding file lacks ids: {missing[:5]}" + ("..." if len(missing) > 5 else ""))
        return self._store

    @property
    def store(self) -> EmbeddingStore:
        return self._store
