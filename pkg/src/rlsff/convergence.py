"""Quantitative convergence guarantees and numerical checks of their derivation.

Under persistent excitation with window ``S`` and constant ``alpha`` the
information matrix satisfies, for every ``k >= S``,

    P_inv[k-1] >= lambda_min(T^-1) * alpha * (1/lam - 1) / (lam**-(S+1) - 1) * I

and the estimation error ``e_k = theta - theta_hat[k]`` obeys

    |e_k|^2 <= gamma * lam**k * |e_0|^2,
    gamma = lambda_max(P_init^-1) / (the lower bound above).

The proof goes through the Lyapunov function ``W_k = e_k.T P_inv[k-1] e_k``,
which contracts by at least ``lam`` per step with noise-free data.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import as_matrix, check_spd, symmetrize
from .errors import InvalidConfigurationError, InvalidInputError
from .estimator import _check_psi, _innovation_factor

#: Absolute slack (relative to ``1 + W_k``) allowed in ``W_{k+1} <= lam W_k``.
DECAY_TOL = 1e-10
#: Relative slack on the error bound and the information lower bound.
BOUND_RTOL = 1e-10
#: Tolerance of the six-term identity, relative to ``1 + largest term``.
C_MATRIX_RTOL = 1e-10


def _check_constants(alpha, lam, S):
    if not 0.0 < lam < 1.0:
        raise InvalidConfigurationError("lambda", f"must lie in (0, 1), got {lam!r}")
    if not alpha > 0.0:
        raise InvalidConfigurationError("alpha", f"must be positive, got {alpha!r}")
    if int(S) != S or S < 0:
        raise InvalidConfigurationError("S", f"must be a nonnegative integer, got {S!r}")


def p_inv_lower_bound(alpha, lam, S, T):
    """Uniform lower bound on the smallest eigenvalue of the information matrix."""
    _check_constants(alpha, lam, S)
    T = as_matrix(T, "T")
    eigs_T = check_spd(T, "T")
    min_eig_T_inv = 1.0 / eigs_T[-1]
    return min_eig_T_inv * alpha * (1.0 / lam - 1.0) / (lam ** -(S + 1) - 1.0)


def gamma(alpha, lam, S, T, P_init):
    """Constant of the exponential error bound."""
    _check_constants(alpha, lam, S)
    T = as_matrix(T, "T")
    eigs_T = check_spd(T, "T")
    P_init = as_matrix(P_init, "P_init")
    eigs_P = check_spd(P_init, "P_init")
    min_eig_T_inv = 1.0 / eigs_T[-1]
    max_eig_P_inv = 1.0 / eigs_P[0]
    return (lam ** -(S + 1) - 1.0) / (min_eig_T_inv * alpha * (1.0 / lam - 1.0)) * max_eig_P_inv


def _error(state, theta_true):
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    if theta_true.shape != state.theta_hat.shape:
        raise InvalidInputError(
            f"theta_true must have shape {state.theta_hat.shape}, got {theta_true.shape}"
        )
    return theta_true - state.theta_hat


def lyapunov_value(state, theta_true):
    """``W_k = e.T @ P_inv @ e`` with ``e = theta_true - theta_hat``."""
    e = _error(state, theta_true)
    return float(e @ state.P_inv @ e)


def lyapunov_difference(state, sample, theta_true):
    """Predicted ``W_{k+1} - W_k`` for the step consuming ``sample``.

    Evaluates ``e.T [(lam - 1) P_inv - lam psi D^-1 psi.T] e``; exact when the
    sample is noise-free with respect to ``theta_true``.
    """
    lam = state.config.lam
    psi = _check_psi(state, sample.psi)
    e = _error(state, theta_true)
    _, factor, _ = _innovation_factor(state, psi)
    v = psi.T @ e
    return float((lam - 1.0) * (e @ state.P_inv @ e) - lam * v @ scipy.linalg.cho_solve(factor, v))


@dataclass(frozen=True)
class CertificateRow:
    k: int
    W: float
    error_norm_sq: float
    bound_value: float


@dataclass(frozen=True)
class ConvergenceCertificate:
    p_inv_lower_bound: float
    gamma: float
    lam: float
    S: int
    alpha: float
    trace: tuple = ()


def build_certificate(states, theta_true, pe_report):
    """Certificate for a recorded trajectory, from excitation constants.

    ``pe_report`` must be satisfied; the constants come from its ``S`` and
    ``alpha``. Each trace row carries ``W_k``, ``|e_k|^2`` and the right-hand
    side ``gamma lam**k |e_0|^2``.
    """
    if not pe_report.satisfied:
        raise InvalidInputError(f"regressors are not persistently exciting with S={pe_report.S}")
    cfg = states[0].config
    bound = p_inv_lower_bound(pe_report.alpha, cfg.lam, pe_report.S, cfg.T)
    g = gamma(pe_report.alpha, cfg.lam, pe_report.S, cfg.T, cfg.P_init)
    e0_sq = float(np.sum(_error(states[0], theta_true) ** 2))
    rows = []
    for state in states:
        e = _error(state, theta_true)
        rows.append(
            CertificateRow(
                k=state.k,
                W=lyapunov_value(state, theta_true),
                error_norm_sq=float(e @ e),
                bound_value=g * cfg.lam**state.k * e0_sq,
            )
        )
    return ConvergenceCertificate(
        p_inv_lower_bound=bound,
        gamma=g,
        lam=cfg.lam,
        S=pe_report.S,
        alpha=pe_report.alpha,
        trace=tuple(rows),
    )


@dataclass
class CheckReport:
    """Outcome of a trajectory check.

    ``margins`` are ``allowed - observed`` per checked index (negative means
    the inequality failed before tolerance), ``ks`` the step counters they
    refer to, ``first_violation`` the first ``k`` outside tolerance.
    """

    name: str
    passed: bool
    worst_margin: float
    first_violation: int = None
    n_violations: int = 0
    reason: str = ""
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    ks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int), repr=False)


def _report(name, ks, margins, ok):
    ks = np.asarray(ks, dtype=int)
    margins = np.asarray(margins, dtype=float)
    ok = np.asarray(ok, dtype=bool)
    bad = np.flatnonzero(~ok)
    return CheckReport(
        name=name,
        passed=bad.size == 0,
        worst_margin=float(margins.min()) if margins.size else float("inf"),
        first_violation=int(ks[bad[0]]) if bad.size else None,
        n_violations=int(bad.size),
        margins=margins,
        ks=ks,
    )


def verify_decay(states, theta_true, lam):
    """Check ``W_{k+1} <= lam W_k + 1e-10 (1 + W_k)`` along a trajectory.

    Violations are reported, never raised; ``first_violation`` is the counter
    of the later state of the offending pair.
    """
    W = np.array([lyapunov_value(s, theta_true) for s in states])
    if W.size < 2:
        return _report("lyapunov_decay", [], [], [])
    margins = lam * W[:-1] - W[1:]
    ok = W[1:] <= lam * W[:-1] + DECAY_TOL * (1.0 + W[:-1])
    return _report("lyapunov_decay", [s.k for s in states[1:]], margins, ok)


def _squared_floor(theta_true):
    # the estimate cannot resolve errors below a few ulps of theta
    return (1e-12 * (1.0 + float(np.linalg.norm(theta_true)))) ** 2


def verify_error_bound(states, theta_true, certificate, k_min=None):
    """Check ``|e_k|^2 <= gamma lam**k |e_0|^2`` for every state with ``k >= k_min``.

    ``k_min`` defaults to the certificate's ``S``. Only ``S`` samples have been
    absorbed at ``k = S``, one short of a full excitation window, so the bound
    is guaranteed from ``k = S + 1`` on and may fail at ``k = S`` when the
    prior covariance is large.
    """
    k_min = certificate.S if k_min is None else k_min
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    e0_sq = float(np.sum(_error(states[0], theta_true) ** 2))
    floor = _squared_floor(theta_true)
    ks, margins, ok = [], [], []
    for state in states:
        if state.k < k_min:
            continue
        e = _error(state, theta_true)
        lhs = float(e @ e)
        rhs = certificate.gamma * certificate.lam**state.k * e0_sq
        ks.append(state.k)
        margins.append(rhs - lhs)
        ok.append(lhs <= rhs * (1.0 + BOUND_RTOL) + floor)
    return _report("error_bound", ks, margins, ok)


def verify_p_inv_bound(states, certificate, k_min=None):
    """Check ``lambda_min(P_inv) >= p_inv_lower_bound`` for every ``k >= k_min``.

    ``k_min`` defaults to ``S``; see :func:`verify_error_bound` for why
    ``k = S`` itself is not covered by the guarantee.
    """
    k_min = certificate.S if k_min is None else k_min
    ks, margins, ok = [], [], []
    bound = certificate.p_inv_lower_bound
    for state in states:
        if state.k < k_min:
            continue
        smallest = float(np.linalg.eigvalsh(state.P_inv)[0])
        ks.append(state.k)
        margins.append(smallest - bound)
        ok.append(smallest >= bound * (1.0 - BOUND_RTOL))
    return _report("p_inv_lower_bound", ks, margins, ok)


@dataclass(frozen=True, eq=False)
class CMatrixDiagnostics:
    """Verbose output of :func:`c_matrix_residual`.

    ``psi_bar = psi T^-1/2`` and ``D_bar = lam I + psi_bar.T P psi_bar`` are
    the whitened quantities in which the bracket collapses to zero;
    ``rescaled_residual`` is the largest entry of that collapsed form.
    """

    residual: float
    scale: float
    passed: bool
    C: np.ndarray
    psi_bar: np.ndarray
    D_bar: np.ndarray
    rescaled_residual: float


def c_matrix_residual(P, psi, T, lam, verbose=False):
    """Largest entry of the cross-term matrix that cancels in ``W_{k+1} - W_k``.

    Forms ``D = lam T + psi.T P psi`` and

        C = psi [T^-1 - D^-1 A T^-1 - lam D^-1 - T^-1 A D^-1
                 + lam D^-1 A D^-1 + D^-1 A T^-1 A D^-1] psi.T,   A = psi.T P psi,

    which vanishes identically. ``passed`` in the verbose output compares the
    residual with ``1e-10 * (1 + largest entry of any single term)``.
    """
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise InvalidConfigurationError("lambda", f"must lie in (0, 1), got {lam!r}")
    P = as_matrix(P, "P")
    check_spd(P, "P")
    T = as_matrix(T, "T")
    check_spd(T, "T")
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 0:
        psi = psi.reshape(1, 1)
    if psi.shape != (P.shape[0], T.shape[0]):
        raise InvalidInputError(
            f"psi must have shape {(P.shape[0], T.shape[0])}, got {psi.shape}"
        )
    n = T.shape[0]
    A = symmetrize(psi.T @ P @ psi)
    D = lam * T + A
    factor = scipy.linalg.cho_factor(D, lower=True)
    D_inv = scipy.linalg.cho_solve(factor, np.eye(n))
    T_inv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(T, lower=True), np.eye(n))

    terms = [
        T_inv,
        -D_inv @ A @ T_inv,
        -lam * D_inv,
        -T_inv @ A @ D_inv,
        lam * D_inv @ A @ D_inv,
        D_inv @ A @ T_inv @ A @ D_inv,
    ]
    sandwiched = [psi @ t @ psi.T for t in terms]
    C = sum(sandwiched)
    residual = float(np.max(np.abs(C))) if C.size else 0.0
    if not verbose:
        return residual

    scale = max(float(np.max(np.abs(s))) for s in sandwiched)
    w, V = np.linalg.eigh(T)
    T_inv_sqrt = (V / np.sqrt(w)) @ V.T
    psi_bar = psi @ T_inv_sqrt
    B = psi_bar.T @ P @ psi_bar
    D_bar = lam * np.eye(n) + B
    D_bar_inv = np.linalg.inv(D_bar)
    collapsed = (
        np.eye(n)
        - D_bar_inv @ D_bar
        + D_bar_inv @ (-D_bar @ B + lam * B + B @ B) @ D_bar_inv
    )
    return CMatrixDiagnostics(
        residual=residual,
        scale=scale,
        passed=residual <= C_MATRIX_RTOL * (1.0 + scale),
        C=C,
        psi_bar=psi_bar,
        D_bar=D_bar,
        rescaled_residual=float(np.max(np.abs(collapsed))),
    )
