"""Verification suite run over a recorded estimator trajectory.

Two kinds of checks are run. Algebraic checks hold for any data: the
Woodbury consistency of the two covariance recursions, agreement with the
batch minimizer, and the vanishing cross-term matrix. Convergence checks (Lyapunov
decay, exponential error bound, predicted Lyapunov difference) assume
noise-free data and only gate the result in strict mode.
"""

from dataclasses import dataclass, field

import numpy as np

from . import convergence
from .batch import batch_minimize
from .convergence import CheckReport, _report
from .errors import RLSError
from .estimator import Sample
from .excitation import min_window_for_pe, pe_analyze

WOODBURY_RTOL = 1e-8
BATCH_RTOL = 1e-6
LYAPUNOV_DIFF_RTOL = 1e-9
DEFAULT_SEARCH_MAX = 50


def woodbury_residual(state):
    """Relative Frobenius distance between ``P`` and ``inv(P_inv)``."""
    P_from_info = np.linalg.inv(state.P_inv)
    return float(np.linalg.norm(state.P - P_from_info) / np.linalg.norm(P_from_info))


def batch_deviation(state, history):
    """Relative distance of the recursive estimate from the regularized batch solve."""
    cfg = state.config
    if state.k == 0:
        ref = cfg.theta_init
    else:
        ref = batch_minimize(
            history.head(state.k), cfg.lam, cfg.T, "regularized", (cfg.P_init, cfg.theta_init)
        )
    scale = max(float(np.linalg.norm(ref)), np.finfo(float).tiny)
    return float(np.linalg.norm(state.theta_hat - ref) / scale)


def _threshold_report(name, ks, values, tol):
    values = np.asarray(values, dtype=float)
    return _report(name, ks, tol - values, values <= tol)


def check_woodbury(states):
    ks = [s.k for s in states]
    return _threshold_report("woodbury", ks, [woodbury_residual(s) for s in states], WOODBURY_RTOL)


def check_batch_equivalence(states, history):
    ks = [s.k for s in states]
    devs = [batch_deviation(s, history) for s in states]
    return _threshold_report("batch_equivalence", ks, devs, BATCH_RTOL)


def check_c_matrix(states, history):
    lam, T = states[0].config.lam, states[0].config.T
    ks, rel = [], []
    for state, psi in zip(states[:-1], history.psis):
        diag = convergence.c_matrix_residual(state.P, psi, T, lam, verbose=True)
        ks.append(state.k)
        rel.append(diag.residual / (1.0 + diag.scale))
    return _threshold_report("c_matrix_zero", ks, rel, convergence.C_MATRIX_RTOL)


def check_lyapunov_difference(states, history, theta_true):
    ks, rel = [], []
    for prev, cur, psi, y in zip(states[:-1], states[1:], history.psis, history.ys):
        predicted = convergence.lyapunov_difference(prev, Sample(psi, y), theta_true)
        w_prev = convergence.lyapunov_value(prev, theta_true)
        measured = convergence.lyapunov_value(cur, theta_true) - w_prev
        ks.append(cur.k)
        rel.append(abs(predicted - measured) / (1.0 + abs(w_prev)))
    return _threshold_report("lyapunov_difference", ks, rel, LYAPUNOV_DIFF_RTOL)


@dataclass
class CheckResult:
    report: CheckReport
    gating: bool


@dataclass
class VerificationResult:
    pe_report: object
    certificate: object
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.report.passed for r in self.results if r.gating)


def _failed(name, reason):
    return CheckReport(name=name, passed=False, worst_margin=float("-inf"), reason=reason)


def run_verification(states, history, theta_true, S=None, strict=False,
                     search_max=DEFAULT_SEARCH_MAX):
    """Run every check on ``states`` (k = 0..N) produced from ``history``.

    ``S`` fixes the excitation window; when omitted the smallest window up to
    ``search_max`` is used.
    """
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    lam = states[0].config.lam

    if S is None:
        S = min_window_for_pe(history.psis, search_max)
    pe_report = None
    certificate = None
    out = VerificationResult(pe_report=None, certificate=None)
    if S is None:
        out.results.append(CheckResult(_failed("persistent_excitation", "no window found"), True))
    else:
        try:
            pe_report = pe_analyze(history.psis, S)
        except RLSError as exc:
            out.results.append(CheckResult(_failed("persistent_excitation", str(exc)), True))
        else:
            pe = _report("persistent_excitation", [S], [pe_report.alpha], [pe_report.satisfied])
            out.results.append(CheckResult(pe, True))
            if pe_report.satisfied:
                certificate = convergence.build_certificate(states, theta_true, pe_report)
    out.pe_report, out.certificate = pe_report, certificate

    out.results.append(CheckResult(check_woodbury(states), True))
    out.results.append(CheckResult(check_batch_equivalence(states, history), True))
    out.results.append(CheckResult(check_c_matrix(states, history), True))
    if certificate is not None:
        out.results.append(CheckResult(convergence.verify_p_inv_bound(states, certificate), True))
    out.results.append(
        CheckResult(convergence.verify_decay(states, theta_true, lam), strict)
    )
    if certificate is not None:
        out.results.append(
            CheckResult(convergence.verify_error_bound(states, theta_true, certificate), strict)
        )
    out.results.append(CheckResult(check_lyapunov_difference(states, history, theta_true), strict))
    return out
