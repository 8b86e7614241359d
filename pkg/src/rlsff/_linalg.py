"""Small dense linear-algebra helpers used across the package."""

import numpy as np
import scipy.linalg

from .errors import InvalidConfigurationError

SYMMETRY_RTOL = 1e-10


def symmetrize(A):
    return 0.5 * (A + A.T)


def as_matrix(value, name, shape=None):
    """Return ``value`` as a finite float 2-D array, optionally of ``shape``."""
    A = np.asarray(value, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise InvalidConfigurationError(name, f"expected a 2-D matrix, got shape {A.shape}")
    if shape is not None and A.shape != tuple(shape):
        raise InvalidConfigurationError(name, f"expected shape {tuple(shape)}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidConfigurationError(name, "contains non-finite entries")
    return A


def check_spd(A, name):
    """Validate that ``A`` is symmetric positive definite.

    Symmetry is judged relative to the largest entry; positive definiteness by
    the smallest eigenvalue of the symmetric part.
    """
    if A.shape[0] != A.shape[1]:
        raise InvalidConfigurationError(name, f"must be square, got shape {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0)
    asym = np.max(np.abs(A - A.T))
    if asym > SYMMETRY_RTOL * scale:
        raise InvalidConfigurationError(name, f"not symmetric (max asymmetry {asym:.3g})")
    eigs = np.linalg.eigvalsh(symmetrize(A))
    if eigs[0] <= 0.0:
        raise InvalidConfigurationError(
            name, f"not positive definite (smallest eigenvalue {eigs[0]:.6g})"
        )
    return eigs


def spd_inverse(A):
    """Inverse of an SPD matrix through its Cholesky factor, symmetrized."""
    factor = scipy.linalg.cho_factor(A, lower=True)
    return symmetrize(scipy.linalg.cho_solve(factor, np.eye(A.shape[0])))
