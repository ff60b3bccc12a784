"""Small dense matrix utilities shared by the identifiers.

Everything here operates on plain numpy arrays. Matrices are tiny
(p = 2 for the scalar SIS problem), so clarity wins over cleverness:
SVD for condition numbers, a closed form for 2x2 symmetric eigenvalues,
Cholesky for SPD solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

# Singular values below RANK_TOLERANCE * sigma_max count as zero.
RANK_TOLERANCE = 1e-12


class ConditioningError(ArithmeticError):
    """A factorization or solve failed because a matrix is numerically singular."""


@dataclass(frozen=True)
class SpectralSummary:
    """Singular values (nonincreasing) and the condition number of a matrix.

    ``condition_number`` is ``math.inf`` when the matrix is rank deficient
    at tolerance ``RANK_TOLERANCE``; it is >= 1 whenever finite.
    """

    singular_values: np.ndarray
    condition_number: float


def spectral_summary(m: np.ndarray) -> SpectralSummary:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"expected a nonempty 2-d matrix, got shape {m.shape}")
    s = np.linalg.svd(m, compute_uv=False)
    smax = float(s[0])
    smin = float(s[-1])
    if smax == 0.0 or smin <= RANK_TOLERANCE * smax:
        kappa = math.inf
    else:
        kappa = smax / smin
    return SpectralSummary(singular_values=s, condition_number=kappa)


def condition_number(m: np.ndarray) -> float:
    """Ratio of largest to smallest singular value; inf for rank-deficient input."""
    return spectral_summary(m).condition_number


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if scale > 0 and np.max(np.abs(m - m.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return m


def min_eigenvalue_sym(m: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (closed form for 2x2)."""
    m = _check_symmetric(m)
    if m.shape == (2, 2):
        a, b, d = m[0, 0], m[0, 1], m[1, 1]
        half_trace = 0.5 * (a + d)
        radius = math.hypot(0.5 * (a - d), b)
        return half_trace - radius
    return float(np.linalg.eigvalsh(m)[0])


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def inversion_lemma_update(p: np.ndarray, phi_block: np.ndarray, alpha: float) -> np.ndarray:
    """Forgetting-factor covariance update via the matrix inversion lemma.

    Returns (1/alpha) * (p - p Phi^T (alpha I + Phi p Phi^T)^-1 Phi p), which
    equals (alpha p^-1 + Phi^T Phi)^-1 without forming p^-1. ``phi_block`` may
    have zero rows, in which case the result is p / alpha. The result is
    re-symmetrized to stop round-off drift.
    """
    p = np.asarray(p, dtype=float)
    phi_block = np.atleast_2d(np.asarray(phi_block, dtype=float))
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"p must be square, got shape {p.shape}")
    if phi_block.size == 0:
        return symmetrize(p / alpha)
    if phi_block.shape[1] != p.shape[0]:
        raise ValueError(
            f"phi_block has {phi_block.shape[1]} columns, p is {p.shape[0]}x{p.shape[0]}"
        )
    m = phi_block.shape[0]
    gram = alpha * np.eye(m) + phi_block @ p @ phi_block.T
    try:
        factor = cho_factor(symmetrize(gram))
    except LinAlgError as exc:
        raise ConditioningError(
            "alpha*I + Phi P Phi^T is numerically singular; alpha is too small "
            "for the data scale"
        ) from exc
    correction = p @ phi_block.T @ cho_solve(factor, phi_block @ p)
    return symmetrize((p - correction) / alpha)


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for symmetric positive definite a via Cholesky."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        factor = cho_factor(a)
    except LinAlgError as exc:
        raise ConditioningError("matrix is not positive definite") from exc
    return cho_solve(factor, b)
