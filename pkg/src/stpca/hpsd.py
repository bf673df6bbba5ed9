"""Hermitian/PSD machinery shared by both solvers.

Covers the Hermitian eigendecomposition contract, projection onto the
Hermitian positive semidefinite cone, column-wise l2,1 norms, and the
reweighting diagonal used by the iteratively reweighted updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HermitianEig",
    "WeightDiagonal",
    "hermitian_eig",
    "hermitian_part",
    "project_hpsd",
    "l21_norm",
    "update_weight",
]


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are real and sorted descending; ``eigenvectors`` holds
    the matching unitary column basis.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _require_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got shape {a.shape}")
    return a


def hermitian_part(a) -> np.ndarray:
    """``(A + A^H) / 2``; the result equals its own conjugate transpose."""
    a = _require_square(a)
    return 0.5 * (a + a.conj().T)


def hermitian_eig(h) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    h = _require_square(h)
    if not np.all(np.isfinite(h)):
        raise np.linalg.LinAlgError("non-finite entries in eigendecomposition input")
    evals, evecs = np.linalg.eigh(h)
    return HermitianEig(evals[::-1].copy(), evecs[:, ::-1].copy())


def project_hpsd(a) -> np.ndarray:
    """Project a square matrix onto the Hermitian PSD cone.

    Takes the Hermitian part, then clamps negative eigenvalues to zero.
    This is the Frobenius-nearest HPSD matrix to the Hermitian part.
    """
    h = hermitian_part(a)
    eig = hermitian_eig(h)
    pos = eig.eigenvalues > 0.0
    if not pos.any():
        return np.zeros_like(h)
    v = eig.eigenvectors[:, pos]
    out = (v * eig.eigenvalues[pos]) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def l21_norm(a, axis: str = "columns") -> float:
    """Sum of Euclidean norms over the chosen axis (columns by default)."""
    a = np.asarray(a, dtype=np.complex128)
    if axis == "columns":
        return float(np.linalg.norm(a, axis=0).sum())
    if axis == "rows":
        return float(np.linalg.norm(a, axis=1).sum())
    raise ValueError(f"axis must be 'rows' or 'columns', got {axis!r}")


@dataclass(frozen=True)
class WeightDiagonal:
    """Positive diagonal reweighting: entry j is
    ``1 / (2*sqrt(a_j^H a_j + eps1))`` for column j."""

    diag: np.ndarray


def update_weight(a, eps1: float) -> WeightDiagonal:
    if eps1 <= 0:
        raise ValueError(f"eps1 must be positive, got {eps1}")
    a = _require_square(a)
    col_sq = np.einsum("ij,ij->j", a.real, a.real) + np.einsum("ij,ij->j", a.imag, a.imag)
    return WeightDiagonal(1.0 / (2.0 * np.sqrt(col_sq + eps1)))
