"""Recursive least squares with a constant forgetting factor, multiple outputs.

The measured system is ``y[k+1] = psi[k].T @ theta`` with ``psi[k]`` an
``m x n`` regressor and ``y`` an ``n``-vector. One call to :func:`step`
consumes the pair ``(psi[k], y[k+1])`` and runs

    D      = lam * T + psi.T @ P @ psi
    theta <- theta + P @ psi @ D^-1 @ (y - psi.T @ theta)
    P     <- (I - P @ psi @ D^-1 @ psi.T) @ P / lam
    P_inv <- lam * P_inv + psi @ T^-1 @ psi.T

Both the covariance ``P`` and the information matrix ``P_inv`` are carried.
``P_inv`` is what the Lyapunov function and the lower-bound checks read.

Index convention: a state whose counter is ``k`` holds the estimate after
``k`` samples and the covariance built from those same ``k`` samples, i.e.
the pair usually written ``(theta_hat[k], P[k-1])``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._linalg import as_matrix, check_spd, spd_inverse, symmetrize
from .errors import InvalidConfigurationError, InvalidInputError, NumericalDegeneracyError

#: Smallest admissible ratio lambda_min(P) / lambda_max(P) after an update.
DEGENERACY_RATIO = 1e-12


@dataclass(frozen=True, eq=False)
class Sample:
    """One timestep of data: regressor ``psi`` (m x n) and output ``y`` (n,)."""

    psi: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.ndim == 0:
            psi = psi.reshape(1, 1)
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if psi.ndim != 2 or y.ndim != 1:
            raise InvalidInputError(
                f"psi must be 2-D and y 1-D, got shapes {psi.shape} and {y.shape}"
            )
        if psi.shape[1] != y.shape[0]:
            raise InvalidInputError(
                f"psi has {psi.shape[1]} output columns but y has length {y.shape[0]}"
            )
        if min(psi.shape) < 1:
            raise InvalidInputError(f"empty regressor of shape {psi.shape}")
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(y))):
            raise InvalidInputError("sample contains non-finite entries")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "y", y)

    @property
    def m(self):
        return self.psi.shape[0]

    @property
    def n(self):
        return self.psi.shape[1]


@dataclass(frozen=True, eq=False)
class EstimatorConfig:
    """Static estimator settings.

    Attributes:
        m: number of parameters.
        n: number of outputs.
        lam: forgetting factor, strictly inside (0, 1).
        T: ``n x n`` symmetric positive definite output weight.
        P_init: ``m x m`` symmetric positive definite prior covariance.
        theta_init: prior estimate of length ``m``.

    ``T_inv`` and ``T_sqrt`` (lower Cholesky factor of ``T``) are derived once
    here because every update needs them.
    """

    m: int
    n: int
    lam: float
    T: np.ndarray
    P_init: np.ndarray
    theta_init: np.ndarray
    T_inv: np.ndarray = field(init=False, repr=False)
    T_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("m", "n"):
            value = getattr(self, name)
            try:
                valid = not isinstance(value, bool) and int(value) == value and value >= 1
            except (TypeError, ValueError):
                valid = False
            if not valid:
                raise InvalidConfigurationError(name, f"must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        try:
            lam = float(self.lam)
        except (TypeError, ValueError):
            raise InvalidConfigurationError("lambda", f"not a number: {self.lam!r}") from None
        if not 0.0 < lam < 1.0:
            raise InvalidConfigurationError("lambda", f"must lie in (0, 1), got {lam!r}")
        object.__setattr__(self, "lam", lam)

        T = as_matrix(self.T, "T", (self.n, self.n))
        check_spd(T, "T")
        P_init = as_matrix(self.P_init, "P_init", (self.m, self.m))
        check_spd(P_init, "P_init")
        theta = np.atleast_1d(np.asarray(self.theta_init, dtype=float))
        if theta.shape != (self.m,):
            raise InvalidConfigurationError(
                "theta_init", f"expected length {self.m}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise InvalidConfigurationError("theta_init", "contains non-finite entries")

        T = symmetrize(T)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "P_init", symmetrize(P_init))
        object.__setattr__(self, "theta_init", theta)
        object.__setattr__(self, "T_inv", spd_inverse(T))
        object.__setattr__(self, "T_sqrt", np.linalg.cholesky(T))


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Estimator state after ``k`` samples.

    ``P`` is the covariance the next update multiplies with (``P[k-1]`` in the
    usual notation) and ``P_inv`` the independently propagated information
    matrix; the two are kept in lockstep.
    """

    theta_hat: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    k: int
    config: EstimatorConfig = field(repr=False)


@dataclass(frozen=True, eq=False)
class StepReport:
    """Intermediate quantities of one update."""

    innovation: np.ndarray
    gain: np.ndarray
    D: np.ndarray


def init(config):
    """Initial state: prior estimate, prior covariance and its inverse."""
    return EstimatorState(
        theta_hat=config.theta_init.copy(),
        P=config.P_init.copy(),
        P_inv=spd_inverse(config.P_init),
        k=0,
        config=config,
    )


def _check_psi(state, psi):
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 0:
        psi = psi.reshape(1, 1)
    cfg = state.config
    if psi.shape != (cfg.m, cfg.n):
        raise InvalidInputError(f"regressor must have shape {(cfg.m, cfg.n)}, got {psi.shape}")
    return psi


def _innovation_factor(state, psi):
    """Return ``(P @ psi, cho_factor(D), D)`` for the current state."""
    cfg = state.config
    P_psi = state.P @ psi
    D = symmetrize(cfg.lam * cfg.T + psi.T @ P_psi)
    try:
        factor = scipy.linalg.cho_factor(D, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError(
            float(np.linalg.eigvalsh(D)[0]), "innovation matrix D is not positive definite"
        ) from None
    return P_psi, factor, D


def _gain(P_psi, factor):
    # P psi D^-1 == (D^-1 psi^T P)^T because D and P are symmetric
    return scipy.linalg.cho_solve(factor, P_psi.T).T


def step(state, sample):
    """Consume one sample; return the new state and a :class:`StepReport`.

    Raises:
        InvalidInputError: sample dimensions do not match the configuration.
        NumericalDegeneracyError: the updated covariance is no longer
            numerically positive definite.
    """
    cfg = state.config
    psi = _check_psi(state, sample.psi)
    y = sample.y
    if y.shape != (cfg.n,):
        raise InvalidInputError(f"output must have length {cfg.n}, got shape {y.shape}")

    P_psi, factor, D = _innovation_factor(state, psi)
    gain = _gain(P_psi, factor)
    innovation = y - psi.T @ state.theta_hat

    theta_hat = state.theta_hat + gain @ innovation
    P = symmetrize((state.P - gain @ P_psi.T) / cfg.lam)
    P_inv = symmetrize(cfg.lam * state.P_inv + psi @ cfg.T_inv @ psi.T)

    eigs = np.linalg.eigvalsh(P)
    if eigs[0] < DEGENERACY_RATIO * eigs[-1] or eigs[-1] <= 0.0:
        raise NumericalDegeneracyError(float(eigs[0]))

    new_state = EstimatorState(theta_hat, P, P_inv, state.k + 1, cfg)
    return new_state, StepReport(innovation=innovation, gain=gain, D=D)


def predict(state, psi):
    """Model output ``psi.T @ theta_hat`` for regressor ``psi``."""
    psi = _check_psi(state, psi)
    return psi.T @ state.theta_hat


def error_transition(state, psi):
    """Matrix ``I - P psi D^-1 psi^T`` mapping the estimation error one step ahead.

    With noise-free data ``theta - theta_hat`` after :func:`step` equals this
    matrix applied to ``theta - theta_hat`` before it.
    """
    psi = _check_psi(state, psi)
    P_psi, factor, _ = _innovation_factor(state, psi)
    return np.eye(state.config.m) - _gain(P_psi, factor) @ psi.T


def run_samples(config, samples):
    """Run the recursion over ``samples``; return the list of states (k = 0..N).

    Errors raised by :func:`step` carry the failing 1-based sample index in
    their ``step`` attribute.
    """
    state = init(config)
    states = [state]
    for index, sample in enumerate(samples, start=1):
        try:
            state, _ = step(state, sample)
        except (InvalidInputError, NumericalDegeneracyError) as exc:
            exc.step = index
            raise
        states.append(state)
    return states
