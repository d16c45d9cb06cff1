"""Dense float64 vector primitives shared by the attack and generation loops.

All functions are pure, operate on 1-D float64 arrays, and never return
NaN/Inf for finite inputs.  Accumulation is done in 64-bit regardless of the
input dtype because candidate selection compares cosines of near-parallel
vectors.
"""

import numpy as np

from .errors import DimensionMismatch, ZeroVector

Vec = np.ndarray


def as_vec(values) -> Vec:
    """Coerce to a 1-D float64 array (no copy when already in that form)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected 1-D vector, got shape {v.shape}")
    return v


def _check_same_dim(a: Vec, b: Vec) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")


def l2_norm(a: Vec) -> float:
    """Euclidean norm; 0 exactly iff `a` is the zero vector."""
    return float(np.linalg.norm(as_vec(a)))


def linf_norm(a: Vec) -> float:
    """Max absolute coordinate; 0 for the empty/zero vector."""
    a = as_vec(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def add(a: Vec, b: Vec) -> Vec:
    """Coordinate-wise sum of equal-dimension vectors."""
    a, b = as_vec(a), as_vec(b)
    _check_same_dim(a, b)
    return a + b


def dot(a: Vec, b: Vec) -> float:
    """Inner product of equal-dimension vectors."""
    a, b = as_vec(a), as_vec(b)
    _check_same_dim(a, b)
    return float(np.dot(a, b))


def cosine(a: Vec, b: Vec) -> float:
    """Cosine of the angle between two nonzero vectors, clamped to [-1, 1].

    Raises ZeroVector when either input has zero norm: callers that can see a
    zero accumulated perturbation must branch before asking for an
    orientation, a silent 0 here would hide that bug.
    """
    a, b = as_vec(a), as_vec(b)
    _check_same_dim(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero-norm input")
    # Rounding can push the ratio slightly outside [-1, 1].
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def aggregate_magnitude(a: Vec, b: Vec) -> float:
    """Magnitude of a+b computed from the norms and the enclosed angle.

    Evaluates sqrt(|a|^2 + |b|^2 + 2 |a| |b| cos(a,b)), which must agree with
    l2_norm(add(a, b)).  Kept as a separate code path so the identity can be
    asserted in tests and the per-iteration magnitude growth can be logged in
    terms of orientation.
    """
    a, b = as_vec(a), as_vec(b)
    _check_same_dim(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return float(np.linalg.norm(a + b))
    c = cosine(a, b)
    # max() guards the tiny negative radicand that rounding can produce when
    # the vectors are close to opposite.
    return float(np.sqrt(max(na * na + nb * nb + 2.0 * na * nb * c, 0.0)))


def clip_linf(v: Vec, eps: float) -> Vec:
    """Clamp every coordinate to [-eps, +eps].  Idempotent."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return np.clip(as_vec(v), -eps, eps)
