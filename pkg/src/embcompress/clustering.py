"""k-means over the embedding vectors of one field.

Three initialization strategies (uniform random, D^2-weighted, most-frequent),
Lloyd iteration with an objective-improvement stopping rule, and a
nearest-centroid assigner shared with the fast-compression tail path.

All tie-breaking is smallest-index and every operation is deterministic for a
given seed, independent of parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

INIT_METHODS = ("random", "kmeanspp", "topk")

#: row chunk size for pairwise distance computations (memory bound)
_CHUNK_ROWS = 4096


@dataclass
class ClusterConfig:
    k: int
    seed: int = 0
    max_iters: int = 50
    rel_tolerance: float = 1e-4
    init_method: str = "kmeanspp"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tolerance < 0:
            raise ValueError("rel_tolerance must be >= 0")
        if self.init_method not in INIT_METHODS:
            raise ValueError(f"init_method must be one of {INIT_METHODS}, got {self.init_method!r}")


@dataclass
class ClusteringResult:
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    iterations_run: int
    # objective recorded after each Lloyd iteration, for monotonicity checks
    objective_history: list[float] = dc_field(default_factory=list)


def _check_inputs(vectors: np.ndarray, k: int) -> np.ndarray:
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-D matrix")
    if vectors.shape[0] < k:
        raise ValueError(f"need at least k={k} rows, got {vectors.shape[0]}")
    return vectors


def init_random(vectors: np.ndarray, frequencies: np.ndarray, config: ClusterConfig) -> np.ndarray:
    """k distinct rows chosen uniformly without replacement. Frequencies unused."""
    vectors = _check_inputs(vectors, config.k)
    rng = np.random.default_rng(config.seed)
    idx = rng.choice(vectors.shape[0], size=config.k, replace=False)
    return vectors[idx].copy()


def init_kmeanspp(vectors: np.ndarray, frequencies: np.ndarray, config: ClusterConfig) -> np.ndarray:
    """D^2-weighted seeding: each new centroid is drawn with probability
    proportional to its squared distance from the nearest already-chosen one.

    Frequencies are unused. If every remaining candidate sits exactly on a
    chosen centroid (zero total weight) the pick falls back to a uniform
    choice among unchosen rows.
    """
    vectors = _check_inputs(vectors, config.k)
    n = vectors.shape[0]
    rng = np.random.default_rng(config.seed)

    centroids = np.empty((config.k, vectors.shape[1]), dtype=np.float64)
    chosen = np.zeros(n, dtype=bool)

    first = int(rng.choice(n, size=1, replace=False)[0])
    centroids[0] = vectors[first]
    chosen[first] = True
    if config.k == 1:
        return centroids

    x2 = np.einsum("ij,ij->i", vectors, vectors)

    def dist_sq(c: np.ndarray) -> np.ndarray:
        d2 = x2 - 2.0 * (vectors @ c) + float(c @ c)
        np.maximum(d2, 0.0, out=d2)  # guard cancellation noise
        return d2

    d2 = dist_sq(centroids[0])
    for i in range(1, config.k):
        total = float(d2.sum())
        if total > 0.0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            candidates = np.flatnonzero(~chosen)
            nxt = int(rng.choice(candidates))
        centroids[i] = vectors[nxt]
        chosen[nxt] = True
        np.minimum(d2, dist_sq(centroids[i]), out=d2)
    return centroids


def init_topk(vectors: np.ndarray, frequencies: np.ndarray, config: ClusterConfig) -> np.ndarray:
    """Rows of the k most frequent features, most frequent first.

    Ties on frequency break toward the smaller feature index.
    """
    vectors = _check_inputs(vectors, config.k)
    frequencies = np.asarray(frequencies)
    if frequencies.shape != (vectors.shape[0],):
        raise ValueError("frequencies length must match row count")
    order = np.argsort(-frequencies, kind="stable")
    return vectors[order[: config.k]].copy()


_INITIALIZERS = {"random": init_random, "kmeanspp": init_kmeanspp, "topk": init_topk}


def assign_nearest(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the squared-Euclidean-nearest centroid for every row.

    Uses argmin_j(|c_j|^2 - 2 x.c_j), which orders candidates identically to
    the squared distance (the |x|^2 term is constant per row). Distance ties
    resolve to the smallest centroid index. Rows are processed in fixed-size
    index-order chunks, so results do not depend on how the work is split.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if vectors.ndim != 2 or centroids.ndim != 2 or vectors.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"dimension mismatch: vectors {vectors.shape} vs centroids {centroids.shape}"
        )
    c2 = np.einsum("ij,ij->i", centroids, centroids)
    out = np.empty(vectors.shape[0], dtype=np.int64)
    for start in range(0, vectors.shape[0], _CHUNK_ROWS):
        chunk = vectors[start : start + _CHUNK_ROWS]
        scores = chunk @ centroids.T
        scores *= -2.0
        scores += c2
        out[start : start + chunk.shape[0]] = np.argmin(scores, axis=1)
    return out


def objective(vectors: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared Euclidean distances from each row to its assigned centroid."""
    vectors = np.asarray(vectors, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    assignments = np.asarray(assignments)
    if assignments.shape != (vectors.shape[0],):
        raise ValueError("assignments length must match row count")
    if vectors.shape[1] != centroids.shape[1]:
        raise ValueError("vectors and centroids disagree on dimensionality")
    if assignments.size and (assignments.min() < 0 or assignments.max() >= centroids.shape[0]):
        raise ValueError("assignment index out of centroid range")
    diff = vectors - centroids[assignments]
    return float(np.sum(diff * diff))


def _recompute_centroids(
    vectors: np.ndarray, assignments: np.ndarray, centroids: np.ndarray
) -> np.ndarray:
    """Mean of assigned rows per cluster; empty clusters are reseeded to the
    row farthest from their stale centroid (first such row on ties)."""
    k = centroids.shape[0]
    sums = np.empty_like(centroids)
    for d in range(centroids.shape[1]):
        sums[:, d] = np.bincount(assignments, weights=vectors[:, d], minlength=k)
    counts = np.bincount(assignments, minlength=k)

    new_centroids = np.empty_like(centroids)
    nonempty = counts > 0
    new_centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

    if not np.all(nonempty):
        taken = np.zeros(vectors.shape[0], dtype=bool)
        for c in np.flatnonzero(~nonempty):
            d2 = np.sum((vectors - centroids[c]) ** 2, axis=1)
            d2[taken] = -1.0
            far = int(np.argmax(d2))
            new_centroids[c] = vectors[far]
            taken[far] = True
    return new_centroids


def kmeans(vectors: np.ndarray, frequencies: np.ndarray, config: ClusterConfig) -> ClusteringResult:
    """Lloyd's algorithm after the configured initialization.

    Stops when `max_iters` is reached or the relative objective improvement
    of an iteration drops below `rel_tolerance`.
    """
    vectors = _check_inputs(vectors, config.k)
    if not np.all(np.isfinite(vectors)):
        raise ValueError("vectors contain NaN/Inf")

    centroids = _INITIALIZERS[config.init_method](vectors, frequencies, config)

    assignments = np.zeros(vectors.shape[0], dtype=np.int64)
    obj = float("inf")
    history: list[float] = []
    prev_obj: float | None = None
    iterations = 0

    for _ in range(config.max_iters):
        assignments = assign_nearest(vectors, centroids)
        centroids = _recompute_centroids(vectors, assignments, centroids)
        obj = objective(vectors, centroids, assignments)
        iterations += 1
        history.append(obj)
        if obj == 0.0:
            break
        if prev_obj is not None and prev_obj - obj <= config.rel_tolerance * prev_obj:
            break
        prev_obj = obj

    return ClusteringResult(
        centroids=centroids,
        assignments=assignments,
        objective=obj,
        iterations_run=iterations,
        objective_history=history,
    )
