"""Distance and projection primitives on embedding vectors and embedding sets.

An embedding set is a non-empty ``(n, dim)`` float64 array of finite values.
Row order is preserved everywhere so results are reproducible.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from dsv.errors import DegenerateError, ValidationError

EmbeddingSet = np.ndarray

# Upper bound on elements in one broadcast difference block.
_BLOCK_ELEMENTS = 1 << 22


def embedding_set(vectors, name: str = "set", dim: int | None = None) -> EmbeddingSet:
    """Validate ``vectors`` and return them as a read-only ``(n, dim)`` array.

    A single vector is not promoted; callers must pass a 2-D collection.
    """
    try:
        arr = np.array(vectors, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: cannot convert to a numeric array ({exc})") from exc
    if arr.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-D collection of vectors, got ndim={arr.ndim}")
    if arr.shape[0] == 0:
        raise ValidationError(f"{name}: embedding set is empty")
    if arr.shape[1] == 0:
        raise ValidationError(f"{name}: vectors have zero components")
    if dim is not None and arr.shape[1] != dim:
        raise ValidationError(f"{name}: expected dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise ValidationError(f"{name}: non-finite component in vector {bad}")
    arr.setflags(write=False)
    return arr


def _vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name}: expected a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite component")
    return arr


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValidationError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def vec_distance(a, b) -> float:
    """Euclidean distance between two vectors."""
    a = _vector(a, "a")
    b = _vector(b, "b")
    _same_dim(a, b)
    diff = a - b
    return float(np.sqrt(np.dot(diff, diff)))


def pairwise_distances(A, B) -> np.ndarray:
    """Matrix of Euclidean distances ``D[i, j] = ||A[i] - B[j]||``.

    Differences are formed explicitly rather than through the Gram-matrix
    expansion, which loses precision for nearby points.
    """
    A = embedding_set(A, "A")
    B = embedding_set(B, "B")
    _same_dim(A, B)
    n, m, dim = A.shape[0], B.shape[0], A.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    step = max(1, _BLOCK_ELEMENTS // max(1, m * dim))
    for start in range(0, n, step):
        block = A[start:start + step, None, :] - B[None, :, :]
        out[start:start + step] = np.sqrt(np.einsum("ijk,ijk->ij", block, block))
    return out


def set_distance(A, B) -> float:
    """Average of all pairwise distances between two sets.

    When ``A`` and ``B`` are the same set the zero self-pairs are included,
    so ``set_distance(A, A)`` is the within-set spread.
    """
    D = pairwise_distances(A, B)
    return float(D.sum(axis=1).sum() / D.size)


def projected_norm(a, b, c) -> float:
    """Signed length of ``c - a`` projected onto the direction ``b - a``."""
    a = _vector(a, "a")
    b = _vector(b, "b")
    c = _vector(c, "c")
    _same_dim(a, b)
    _same_dim(a, c)
    direction = b - a
    norm = float(np.sqrt(np.dot(direction, direction)))
    if norm == 0.0:
        raise DegenerateError("projected_norm: a and b coincide, direction is undefined")
    return float(np.dot(c - a, direction) / norm)


def projected_norms(anchor, targets, points) -> np.ndarray:
    """``P[i, j] = projected_norm(anchor, targets[i], points[j])`` for one anchor."""
    anchor = _vector(anchor, "anchor")
    targets = embedding_set(targets, "targets")
    points = embedding_set(points, "points")
    _same_dim(targets, points)
    _same_dim(targets, anchor)
    directions = targets - anchor
    norms = np.sqrt(np.einsum("ij,ij->i", directions, directions))
    if np.any(norms == 0.0):
        i = int(np.argmax(norms == 0.0))
        raise DegenerateError(f"target {i} coincides with the anchor, direction is undefined")
    return (directions @ (points - anchor).T) / norms[:, None]


def mean_vector(A) -> np.ndarray:
    """Component-wise arithmetic mean of a set."""
    A = embedding_set(A, "A")
    return A.mean(axis=0)


def population_std(values: Iterable[float]) -> float:
    """Population standard deviation (divides by ``n``, squared deviations)."""
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    arr = arr.ravel()
    if arr.size == 0:
        raise ValidationError("population_std: empty collection")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("population_std: non-finite value")
    dev = arr - arr.mean()
    return float(np.sqrt(np.dot(dev, dev) / arr.size))
