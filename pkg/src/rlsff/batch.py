"""Exponentially discounted, output-weighted least squares in closed form.

For a history of samples ``i = 1..k`` carrying ``(psi[i-1], y[i])`` the cost is

    sum_i lam**(k-i) * (y[i] - psi[i-1].T @ theta).T @ inv(T) @ (y[i] - psi[i-1].T @ theta)

These routines never touch the recursion and serve as its reference.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import as_matrix, check_spd, spd_inverse, symmetrize
from .errors import InvalidConfigurationError, InvalidInputError, RankDeficiencyError

#: Pivot threshold relative to the largest diagonal entry of the normal matrix.
SINGULARITY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class History:
    """Ordered samples stacked as ``psis`` (k, m, n) and ``ys`` (k, n).

    Row ``i - 1`` holds sample ``i``, i.e. ``(psi[i-1], y[i])``.
    """

    psis: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        psis = np.asarray(self.psis, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if psis.ndim != 3 or ys.ndim != 2:
            raise InvalidInputError(
                f"expected psis of shape (k, m, n) and ys of shape (k, n), "
                f"got {psis.shape} and {ys.shape}"
            )
        if psis.shape[0] != ys.shape[0] or psis.shape[2] != ys.shape[1]:
            raise InvalidInputError(f"inconsistent shapes {psis.shape} and {ys.shape}")
        if psis.shape[0] == 0:
            raise InvalidInputError("history is empty")
        object.__setattr__(self, "psis", psis)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            raise InvalidInputError("history is empty")
        shapes = {s.psi.shape for s in samples}
        if len(shapes) != 1:
            raise InvalidInputError(f"samples have mixed shapes {sorted(shapes)}")
        return cls(np.stack([s.psi for s in samples]), np.stack([s.y for s in samples]))

    def __len__(self):
        return self.psis.shape[0]

    @property
    def m(self):
        return self.psis.shape[1]

    @property
    def n(self):
        return self.psis.shape[2]

    def head(self, k):
        """The first ``k`` samples."""
        return History(self.psis[:k], self.ys[:k])


def _prepare(history, lam, T):
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise InvalidConfigurationError("lambda", f"must lie in (0, 1), got {lam!r}")
    T = as_matrix(T, "T", (history.n, history.n))
    check_spd(T, "T")
    k = len(history)
    weights = lam ** np.arange(k - 1, -1, -1, dtype=float)
    return lam, spd_inverse(T), weights


def _residuals(theta, history):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (history.m,):
        raise InvalidInputError(f"theta must have length {history.m}, got shape {theta.shape}")
    return history.ys - np.einsum("imn,m->in", history.psis, theta)


def objective(theta, history, lam, T):
    """Discounted weighted sum of squared output errors (no 1/2 factor)."""
    _, T_inv, w = _prepare(history, lam, T)
    r = _residuals(theta, history)
    return float(np.einsum("i,ia,ab,ib->", w, r, T_inv, r))


def objective_gradient(theta, history, lam, T):
    """``sum_i w_i psi T^-1 (psi.T theta - y)``.

    This is the derivative of half of :func:`objective`.
    """
    _, T_inv, w = _prepare(history, lam, T)
    r = _residuals(theta, history)
    return -np.einsum("i,imn,np,ip->m", w, history.psis, T_inv, r)


def normal_equations(history, lam, T):
    """Return the discounted information matrix and right-hand side."""
    _, T_inv, w = _prepare(history, lam, T)
    psi_Tinv = history.psis @ T_inv
    A = np.einsum("i,imn,ipn->mp", w, psi_Tinv, history.psis)
    b = np.einsum("i,imn,in->m", w, psi_Tinv, history.ys)
    return symmetrize(A), b


def _solve_normal(A, b):
    scale = np.max(np.diag(A))
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
        pivots = np.diag(factor[0]) ** 2
        ok = scale > 0.0 and np.min(pivots) > SINGULARITY_RTOL * scale
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        sv = np.linalg.svd(A, compute_uv=False)
        raise RankDeficiencyError(float(sv[-1]))
    return scipy.linalg.cho_solve(factor, b)


def batch_minimize(history, lam, T, mode="pure", prior=None):
    """Closed-form minimizer of the discounted cost.

    ``mode="pure"`` solves the data-only normal equations. ``mode="regularized"``
    adds the prior term ``lam**k * P_init^-1 (theta - theta_init)`` that the
    recursion is seeded with; its solution coincides with the recursive
    estimate after ``k`` samples.

    Args:
        history: samples ``1..k``.
        lam: forgetting factor.
        T: output weight.
        mode: ``"pure"`` or ``"regularized"``.
        prior: ``(P_init, theta_init)``; required for ``"regularized"``.

    Raises:
        RankDeficiencyError: the normal matrix is numerically singular.
    """
    A, b = normal_equations(history, lam, T)
    if mode == "regularized":
        if prior is None:
            raise InvalidInputError("regularized mode needs prior=(P_init, theta_init)")
        P_init, theta_init = prior
        P_init = as_matrix(P_init, "P_init", (history.m, history.m))
        check_spd(P_init, "P_init")
        theta_init = np.atleast_1d(np.asarray(theta_init, dtype=float))
        if theta_init.shape != (history.m,):
            raise InvalidInputError(f"theta_init must have length {history.m}")
        prior_info = float(lam) ** len(history) * spd_inverse(P_init)
        A = A + prior_info
        b = b + prior_info @ theta_init
    elif mode != "pure":
        raise ValueError(f"unknown mode {mode!r}")
    return _solve_normal(A, b)
