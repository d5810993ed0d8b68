"""Dense small-scale linear algebra: symmetric eigendecompositions,
Moore-Penrose pseudoinverses, range tests and subspace arithmetic.

Everything here is sized for desk-scale problems (n up to a few dozen);
all algorithms are dense and deterministic.  Rank decisions follow one
policy throughout: eigenvalues (or singular values) below
``EIG_RANK_RTOL`` times the largest one are treated as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative eigenvalue cutoff used for every rank decision in the package.
EIG_RANK_RTOL = 1e-10

# Absolute floor of the default rank cutoff: quadratic forms that are zero
# up to floating-point dust (e.g. symmetric parts of skew fixtures built
# from trig values) must rank as zero, not as full-rank noise.
EIG_RANK_ATOL = 1e-12

# Default absolute tolerance for symmetry checks.
SYM_TOL = 1e-10


class DimensionMismatchError(ValueError):
    """Operands of a subspace or matrix operation have incompatible shapes."""


class NonSymmetricError(ValueError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NotPSDError(ValueError):
    """A matrix required to be positive semidefinite has a significantly
    negative eigenvalue."""


def as_vector(x, dim=None) -> np.ndarray:
    """Coerce to a finite 1-d float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {v.shape[0]}")
    return v


def as_matrix(m, square=False) -> np.ndarray:
    """Coerce to a finite 2-d float array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    return a


def check_symmetric(m, tol=SYM_TOL) -> np.ndarray:
    """Return ``m`` as a square array, raising :class:`NonSymmetricError`
    if ``max|m - m.T|`` exceeds ``tol``."""
    a = as_matrix(m, square=True)
    asym = 0.0 if a.size == 0 else float(np.max(np.abs(a - a.T)))
    if asym > tol:
        raise NonSymmetricError(f"asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")
    return 0.5 * (a + a.T)


def sym_eig(m, tol=SYM_TOL):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    m : array_like
        Square matrix, symmetric within ``tol``.
    tol : float, optional
        Maximum allowed entrywise asymmetry.

    Returns
    -------
    eigenvalues : ndarray
        Sorted in descending order.
    eigenvectors : ndarray
        Orthonormal columns, ``m = Q diag(w) Q.T``.
    """
    a = check_symmetric(m, tol)
    w, q = np.linalg.eigh(a)
    return w[::-1].copy(), q[:, ::-1].copy()


def rank_cutoff(eigenvalues, rank_tol=None) -> float:
    """Eigenvalue magnitude below which the package treats a value as zero.

    The default combines the relative policy with the absolute floor; an
    explicit ``rank_tol`` is used verbatim.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    lam_max = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if rank_tol is None:
        return max(EIG_RANK_RTOL * lam_max, EIG_RANK_ATOL)
    return float(rank_tol)


def pseudoinverse(m, rank_tol=None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below the cutoff (``rank_tol``, default
    ``EIG_RANK_RTOL * lambda_max``) are treated as zero; an eigenvalue below
    ``-cutoff`` raises :class:`NotPSDError`.
    """
    w, q = sym_eig(m)
    cut = rank_cutoff(w, rank_tol)
    if w.size and float(np.min(w)) < -cut:
        raise NotPSDError(f"eigenvalue {np.min(w):.3e} below -{cut:.3e}")
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    return (q * inv) @ q.T


def range_projector(m, rank_tol=None) -> np.ndarray:
    """Orthogonal projector onto the range of a symmetric matrix."""
    w, q = sym_eig(m)
    cut = rank_cutoff(w, rank_tol)
    keep = np.abs(w) > cut
    qr = q[:, keep]
    return qr @ qr.T


def range_contains(m, y, tol=1e-9) -> bool:
    """Whether ``y`` lies in the range of the symmetric matrix ``m``.

    True iff ``||(I - P_ran) y|| <= tol * (1 + ||y||)``.
    """
    a = check_symmetric(m)
    v = as_vector(y, dim=a.shape[0])
    p = range_projector(a)
    resid = float(np.linalg.norm(v - p @ v))
    return resid <= tol * (1.0 + float(np.linalg.norm(v)))


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^k held as an orthonormal column basis.

    ``basis`` has shape ``(ambient_dim, dim)``; a zero-dimensional subspace
    has a ``(ambient_dim, 0)`` basis.
    """

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis) if np.asarray(self.basis).size else np.asarray(
            self.basis, dtype=float).reshape(self.ambient_dim, -1)
        if b.shape[0] != self.ambient_dim:
            raise DimensionMismatchError(
                f"basis rows {b.shape[0]} != ambient dim {self.ambient_dim}")
        gram = b.T @ b
        if gram.size and np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-12:
            raise ValueError("basis columns are not orthonormal within 1e-12")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v) -> np.ndarray:
        x = as_vector(v, dim=self.ambient_dim)
        return self.basis @ (self.basis.T @ x)

    def contains_vector(self, v, tol=1e-9) -> bool:
        x = as_vector(v, dim=self.ambient_dim)
        resid = float(np.linalg.norm(x - self.project(x)))
        return resid <= tol * (1.0 + float(np.linalg.norm(x)))

    def coordinates(self, v) -> np.ndarray:
        """Coefficients of the projection of ``v`` in this basis."""
        return self.basis.T @ as_vector(v, dim=self.ambient_dim)


def full_space(k) -> Subspace:
    return Subspace(k, np.eye(k))


def zero_space(k) -> Subspace:
    return Subspace(k, np.zeros((k, 0)))


def orthonormalize(columns, ambient_dim=None) -> Subspace:
    """Subspace spanned by the given columns (any rank, possibly none).

    ``columns`` is an ``(k, m)`` array or a sequence of length-k vectors;
    near-dependent directions are dropped by the package rank policy.
    """
    c = np.asarray(columns, dtype=float)
    if c.ndim == 1:
        c = c.reshape(-1, 1)
    if c.ndim != 2:
        raise DimensionMismatchError(f"expected columns, got shape {c.shape}")
    if c.shape[0] == 0 or c.shape[1] == 0:
        k = ambient_dim if ambient_dim is not None else c.shape[0]
        return zero_space(k)
    if ambient_dim is not None and c.shape[0] != ambient_dim:
        raise DimensionMismatchError(
            f"columns live in R^{c.shape[0]}, expected R^{ambient_dim}")
    u, s, _ = np.linalg.svd(c, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return zero_space(c.shape[0])
    rank = int(np.sum(s > EIG_RANK_RTOL * s[0]))
    return Subspace(c.shape[0], u[:, :rank])


def complement(s: Subspace) -> Subspace:
    """Orthogonal complement; ``complement(s)`` and ``s`` together span R^k."""
    if s.dim == 0:
        return full_space(s.ambient_dim)
    if s.dim == s.ambient_dim:
        return zero_space(s.ambient_dim)
    u, _, _ = np.linalg.svd(s.basis, full_matrices=True)
    return Subspace(s.ambient_dim, u[:, s.dim:])


def contains(s: Subspace, t: Subspace, tol=1e-9) -> bool:
    """Span inclusion ``t`` inside ``s`` within ``tol``."""
    if s.ambient_dim != t.ambient_dim:
        raise DimensionMismatchError("subspaces live in different ambient spaces")
    if t.dim == 0:
        return True
    resid = t.basis - s.basis @ (s.basis.T @ t.basis)
    return float(np.max(np.linalg.norm(resid, axis=0))) <= tol


def intersect(s: Subspace, t: Subspace) -> Subspace:
    """Common span, computed as the complement of the sum of complements."""
    if s.ambient_dim != t.ambient_dim:
        raise DimensionMismatchError("subspaces live in different ambient spaces")
    stacked = np.hstack([complement(s).basis, complement(t).basis])
    return complement(orthonormalize(stacked, ambient_dim=s.ambient_dim))


def same_span(s: Subspace, t: Subspace, tol=1e-9) -> bool:
    return contains(s, t, tol) and contains(t, s, tol)
