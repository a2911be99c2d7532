"""Seeded randomness and the dense linear-algebra kernel everything else builds on.

All state is float64 numpy arrays.  Randomness goes through numpy's PCG64
``Generator``: a fixed seed gives a bit-identical draw sequence across runs
and platforms for a pinned numpy version.  Standard normals use numpy's
ziggurat implementation (``Generator.standard_normal``); this choice is
frozen -- switching generators or normal transforms changes every trajectory.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "RankDeficiencyError",
    "make_rng",
    "spawn_rngs",
    "standard_normal_matrix",
    "matmul",
    "transpose",
    "frobenius_norm",
    "orthonormalize_columns",
]


class RankDeficiencyError(ValueError):
    """Input matrix does not have the full rank the operation requires."""


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: same seed, same draw sequence, bit-identical."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child generators derived from one seed (order is frozen)."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def standard_normal_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """rows x cols matrix of iid N(0,1) draws, advancing ``rng`` deterministically."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    return rng.standard_normal((rows, cols))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).T


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


def orthonormalize_columns(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis Q of the column span of ``a`` (rows >= cols).

    QR factorization with the sign convention that the triangular factor has a
    nonnegative diagonal, which makes the result unique and reproducible.
    Applied to an iid Gaussian matrix this yields columns uniformly
    distributed over the orthonormal frames (the usual Haar construction).

    Raises
    ------
    RankDeficiencyError
        If ``a`` is (numerically) rank deficient, in which case the column
        span would not be preserved.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    rows, cols = a.shape
    if rows < cols:
        raise ValueError(f"need rows >= cols to orthonormalize columns, got {rows}x{cols}")
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r)
    scale = np.max(np.abs(diag), initial=0.0)
    if scale == 0.0 or np.min(np.abs(diag)) <= max(rows, cols) * np.finfo(np.float64).eps * scale:
        raise RankDeficiencyError(f"rank-deficient input of shape {rows}x{cols}")
    return q * np.where(diag < 0.0, -1.0, 1.0)
