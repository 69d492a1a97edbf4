"""Deterministic matrix kernels and special functions.

Everything here is a pure function of its arguments. Matrices are plain
``numpy`` arrays; symmetry and positive definiteness are checked where the
contract demands it, using relative tolerances so that round-off on
well-conditioned input never trips an error meant for genuine model
violations.

Conventions fixed across the package:

* "upper Cholesky factor" of ``M`` means the unique upper triangular ``U``
  with positive diagonal such that ``M = U' U``.
* the "symmetric square root" of ``M`` is the unique symmetric positive
  definite ``R`` with ``R R = M``, computed by spectral mapping.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, DomainError, NotPositiveDefinite

# Default relative tolerance for definiteness / rank decisions.
DEFAULT_REL_TOL = 1e-10

# Symmetry is a stricter storage-level requirement than definiteness.
SYMMETRY_REL_TOL = 1e-12


def check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def check_symmetric(m: np.ndarray, rel_tol: float = SYMMETRY_REL_TOL,
                    name: str = "matrix") -> np.ndarray:
    m = check_square(m, name)
    if not np.isfinite(m).all():
        raise NotPositiveDefinite(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > rel_tol * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric within {rel_tol:g}")
    return 0.5 * (m + m.T)


def check_spd(m: np.ndarray, rel_tol: float = DEFAULT_REL_TOL,
              name: str = "matrix") -> np.ndarray:
    """Validate a symmetric positive definite matrix from untrusted input."""
    m = check_symmetric(m, name=name)
    eigvals = np.linalg.eigvalsh(m)
    if not np.isfinite(eigvals).all():
        raise NotPositiveDefinite(f"{name} has non-finite entries")
    scale = float(np.max(np.abs(eigvals))) if m.size else 0.0
    if scale == 0.0 or eigvals[0] <= rel_tol * scale:
        raise NotPositiveDefinite(
            f"{name} is not positive definite (min eigenvalue {eigvals[0]:.3e})"
        )
    return m


def _positivity_threshold(w: np.ndarray, rel_tol: float | None) -> float:
    """Eigenvalue threshold below which a matrix counts as not PD.

    ``rel_tol=None`` means machine level: ``p * eps`` times the spectral
    radius, i.e. only numerically-singular or negative spectra are rejected.
    Volatility paths are legitimately very ill-conditioned, so a fixed
    relative tolerance here would reject valid states; fixed tolerances are
    for untrusted input (:func:`check_spd`) and rank decisions.
    """
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if rel_tol is None:
        rel_tol = len(w) * np.finfo(float).eps
    return rel_tol * scale


def sym_sqrt(m: np.ndarray, rel_tol: float | None = None) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix.

    Raises :class:`NotPositiveDefinite` when any eigenvalue falls at or below
    the positivity threshold (machine level by default).
    """
    m = check_square(m, "sym_sqrt input")
    w, v = np.linalg.eigh(m)
    if not np.isfinite(w).all():
        raise NotPositiveDefinite("matrix has non-finite entries")
    if w.size == 0 or w[0] <= _positivity_threshold(w, rel_tol):
        raise NotPositiveDefinite(
            f"sym_sqrt input not positive definite (min eigenvalue {w[0]:.3e})"
        )
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def sym_sqrt_pair(m: np.ndarray, rel_tol: float | None = None
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M**0.5, M**-0.5)`` from a single eigendecomposition."""
    m = check_square(m, "sym_sqrt_pair input")
    w, v = np.linalg.eigh(m)
    if not np.isfinite(w).all():
        raise NotPositiveDefinite("matrix has non-finite entries")
    if w.size == 0 or w[0] <= _positivity_threshold(w, rel_tol):
        raise NotPositiveDefinite(
            f"matrix not positive definite (min eigenvalue {w[0]:.3e})"
        )
    sq = np.sqrt(w)
    root = (v * sq) @ v.T
    inv_root = (v / sq) @ v.T
    return 0.5 * (root + root.T), 0.5 * (inv_root + inv_root.T)


def psd_sqrt(m: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Symmetric square root of a positive *semi*-definite matrix.

    Eigenvalues in ``[-rel_tol * scale, 0]`` are treated as round-off and
    clamped to zero; anything further below raises, since that signals a
    genuine violation rather than noise. The zero matrix maps to itself.
    """
    m = check_square(m, "psd_sqrt input")
    w, v = np.linalg.eigh(m)
    scale = float(np.max(np.abs(w))) if m.size else 0.0
    if w.size and w[0] < -rel_tol * max(1.0, scale):
        raise NotPositiveDefinite(
            f"psd_sqrt input has eigenvalue {w[0]:.3e} below -rel_tol"
        )
    r = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (r + r.T)


def chol_upper(m: np.ndarray) -> np.ndarray:
    """Upper triangular ``U`` with positive diagonal and ``U' U = M``."""
    m = check_symmetric(m, name="chol_upper input")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    return lower.T.copy()


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via Cholesky; result is symmetrized."""
    m = check_square(m, "spd_inverse input")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix not positive definite: {exc}") from exc
    inv_lower = np.linalg.inv(lower)
    inv = inv_lower.T @ inv_lower
    return 0.5 * (inv + inv.T)


def spd_logdet(m: np.ndarray) -> float:
    """log det of an SPD matrix via Cholesky."""
    m = check_square(m, "spd_logdet input")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix not positive definite: {exc}") from exc
    return float(2.0 * np.sum(np.log(np.diag(lower))))


def positive_eigenvalues(m: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix above the relative threshold.

    Keeps eigenvalues ``lam > rel_tol * max(1, max |lam|)``, sorted
    descending. An empty array is a valid result.
    """
    m = check_symmetric(m, name="positive_eigenvalues input")
    w = np.linalg.eigvalsh(m)
    threshold = rel_tol * max(1.0, float(np.max(np.abs(w))) if w.size else 0.0)
    kept = w[w > threshold]
    return np.sort(kept)[::-1]


def log_multigamma(p: int, a: float) -> float:
    """log of the multivariate gamma function ``Gamma_p(a)``.

    ``Gamma_p(a) = pi**(p(p-1)/4) * prod_{j=1..p} Gamma(a + (1-j)/2)``,
    defined for ``a > (p-1)/2``.
    """
    if p < 1:
        raise DomainError(f"dimension must be a positive integer, got {p}")
    if a <= 0.5 * (p - 1):
        raise DomainError(f"log_multigamma requires a > (p-1)/2, got a={a}, p={p}")
    j = np.arange(1, p + 1)
    return float(0.25 * p * (p - 1) * math.log(math.pi)
                 + np.sum(gammaln(a + 0.5 * (1 - j))))
