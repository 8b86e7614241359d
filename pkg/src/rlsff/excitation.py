"""Persistence-of-excitation analysis of regressor sequences.

A sequence is persistently exciting with window ``S`` when every sum of
``S + 1`` consecutive outer products ``psi_i @ psi_i.T`` is bounded between
``alpha * I`` and ``beta * I`` with ``alpha > 0``. On a finite sequence only
the complete windows are inspected.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

#: ``alpha`` must exceed this fraction of ``beta`` to count as positive.
PE_RTOL = 1e-12


@dataclass(frozen=True)
class PEReport:
    S: int
    alpha: float
    beta: float
    satisfied: bool


def _stack(psis):
    arr = np.asarray(psis, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim != 3:
        raise InvalidInputError(f"expected a sequence of m x n matrices, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError("regressor sequence is empty")
    return arr


def window_sums(psis, S):
    """All complete window sums, shape ``(N - S, m, m)``."""
    arr = _stack(psis)
    S = int(S)
    if S < 0:
        raise InvalidInputError(f"window constant must be nonnegative, got {S}")
    if arr.shape[0] < S + 1:
        raise InvalidInputError(
            f"sequence of length {arr.shape[0]} is too short for window S={S}"
        )
    outer = np.einsum("imn,ipn->imp", arr, arr)
    windows = np.lib.stride_tricks.sliding_window_view(outer, S + 1, axis=0)
    return windows.sum(axis=-1)


def pe_analyze(psis, S):
    """Tight excitation constants over every window of ``S + 1`` regressors.

    ``alpha`` is the smallest eigenvalue over all windows and ``beta`` the
    largest. Negative round-off in ``alpha`` is clipped to zero, since every
    window sum is positive semidefinite.
    """
    eigs = np.linalg.eigvalsh(window_sums(psis, S))
    alpha = max(float(eigs[:, 0].min()), 0.0)
    beta = float(eigs[:, -1].max())
    satisfied = beta > 0.0 and alpha > PE_RTOL * beta
    return PEReport(S=int(S), alpha=alpha, beta=beta, satisfied=bool(satisfied))


def min_window_for_pe(psis, S_max):
    """Smallest ``S <= S_max`` for which the sequence is exciting, else ``None``."""
    arr = _stack(psis)
    for S in range(0, min(int(S_max), arr.shape[0] - 1) + 1):
        if pe_analyze(arr, S).satisfied:
            return S
    return None
