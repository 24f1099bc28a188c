"""Unit-sphere geometry for embedding signals.

Vectors are 1-D ``numpy`` float64 arrays of unit L2 norm.  The
pseudo-embedding is a fixed, bit-reproducible bag-of-tokens hash
embedding: FNV-1a 64 seeds a splitmix64 stream per token.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_DIM = 64
DEFAULT_WARN_COSINE = 0.95
MIN_TEMPERATURE = 1e-6

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN = re.compile(r"[^\W_]+")


class DegenerateCentroidError(ValueError):
    """The candidate embeddings cancel out and have no direction."""


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int, count: int) -> list[int]:
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


def tokens(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


@lru_cache(maxsize=16384)
def _token_vector(token: str, dim: int) -> tuple[float, ...]:
    draws = splitmix64(fnv1a64(token.encode("utf-8")), dim)
    # top 53 bits -> [0, 1) -> [-1, 1)
    return tuple((u >> 11) * 2.0**-53 * 2.0 - 1.0 for u in draws)


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegenerateCentroidError("zero-norm vector cannot be normalized")
    return v / n


def pseudo_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    toks = tokens(text)
    if not toks:
        e1 = np.zeros(dim)
        e1[0] = 1.0
        return e1
    total = np.zeros(dim)
    for tok in toks:
        total += np.asarray(_token_vector(tok, dim))
    try:
        return unit(total)
    except DegenerateCentroidError:
        # only reachable when token vectors cancel exactly
        e1 = np.zeros(dim)
        e1[0] = 1.0
        return e1


class Embedder:
    """Pseudo-embedding with an optional exact-match override table."""

    def __init__(self, dim: int = DEFAULT_DIM, table: Mapping[str, Sequence[float]] | None = None):
        if dim < 2:
            raise ValueError("embedding dimension must be at least 2")
        self.dim = dim
        self.table: dict[str, np.ndarray] = {}
        for key, vec in (table or {}).items():
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (dim,):
                raise ValueError(f"vector for {key!r} has shape {arr.shape}, expected ({dim},)")
            self.table[key] = unit(arr)
        self._cache: dict[str, np.ndarray] = {}

    @classmethod
    def from_json(cls, path, dim: int | None = None) -> Embedder:
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
        if not isinstance(table, dict):
            raise ValueError("vector table must be a JSON object of string -> array")
        if dim is None:
            lengths = {len(v) for v in table.values()}
            dim = lengths.pop() if len(lengths) == 1 else DEFAULT_DIM
        return cls(dim, table)

    def embed(self, text: str) -> np.ndarray:
        vec = self._cache.get(text)
        if vec is None:
            vec = self.table.get(text)
            if vec is None:
                vec = pseudo_embed(text, self.dim)
            self._cache[text] = vec
        return vec

    def centroid(self, candidates: Iterable[str]) -> np.ndarray:
        vecs = [self.embed(c) for c in candidates]
        if not vecs:
            raise ValueError("centroid needs at least one candidate")
        try:
            return unit(np.mean(vecs, axis=0))
        except DegenerateCentroidError:
            raise DegenerateCentroidError("candidate embeddings cancel to a zero mean") from None


def centroid(candidates: Sequence[str], dim: int = DEFAULT_DIM) -> np.ndarray:
    """L2-normalized mean of the candidates' pseudo-embeddings."""
    return Embedder(dim).centroid(candidates)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0))


def angle(a: np.ndarray, b: np.ndarray) -> float:
    return math.acos(cosine(a, b))


# ---------------------------------------------------------------------------
# Spherical caps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphericalCap:
    """Activation region ``{x : cos(x, centroid) >= threshold}``."""

    centroid: np.ndarray
    threshold: float

    def __post_init__(self) -> None:
        if not -1.0 < self.threshold < 1.0:
            raise ValueError("cap threshold must lie in (-1, 1)")

    @property
    def radius(self) -> float:
        return math.acos(self.threshold)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points @ self.centroid >= self.threshold


@dataclass(frozen=True)
class CapRelation:
    intersect: bool
    margin: float  # radians between separation and radius sum
    separation: float
    radius_sum: float


def caps_intersect(a: SphericalCap, b: SphericalCap) -> CapRelation:
    sep = angle(a.centroid, b.centroid)
    radii = a.radius + b.radius
    # tangency counts as intersecting (conservative for warnings)
    return CapRelation(sep <= radii, abs(sep - radii), sep, radii)


# ---------------------------------------------------------------------------
# Voronoi normalization
# ---------------------------------------------------------------------------


def voronoi_scores(sims: Sequence[float], temperature: float) -> np.ndarray:
    """Temperature-scaled softmax with max subtraction."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = np.asarray(sims, dtype=float) / max(temperature, MIN_TEMPERATURE)
    z = np.exp(z - z.max())
    return z / z.sum()


def group_fire(scores: Sequence[float], threshold: float) -> set[int]:
    return {i for i, s in enumerate(scores) if s > threshold}


def centroid_separation_report(
    centroids: Sequence[np.ndarray], warn_cosine: float = DEFAULT_WARN_COSINE
) -> list[tuple[int, int, float]]:
    """Pairs ``(i, j, cos)`` with ``cos >= warn_cosine``, most similar first."""
    if len(centroids) < 2:
        raise ValueError("need at least two centroids")
    out = []
    for i in range(len(centroids)):
        for j in range(i + 1, len(centroids)):
            c = cosine(centroids[i], centroids[j])
            if c >= warn_cosine:
                out.append((i, j, c))
    out.sort(key=lambda t: (-t[2], t[0], t[1]))
    return out
