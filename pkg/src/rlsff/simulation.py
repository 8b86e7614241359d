"""Synthetic static regression scenarios and estimator runs over them."""

from dataclasses import dataclass, field

import numpy as np

from .batch import History
from .convergence import lyapunov_value
from .errors import InvalidInputError
from .estimator import Sample, run_samples


@dataclass(frozen=True, eq=False)
class Constant:
    """Same regressor at every step."""

    psi: np.ndarray

    def regressors(self, m, n, steps, rng):
        psi = np.asarray(self.psi, dtype=float).reshape(m, n)
        return np.broadcast_to(psi, (steps, m, n)).copy()


@dataclass(frozen=True, eq=False)
class Cycling:
    """Repeat a fixed list of regressors in order."""

    psis: tuple

    def regressors(self, m, n, steps, rng):
        cycle = np.asarray(self.psis, dtype=float)
        if cycle.ndim != 3 or cycle.shape[1:] != (m, n) or cycle.shape[0] == 0:
            raise InvalidInputError(f"cycling regressors must have shape (L, {m}, {n})")
        return cycle[np.arange(steps) % cycle.shape[0]]


@dataclass(frozen=True)
class RandomGaussian:
    """Independent entries drawn from N(0, scale**2)."""

    scale: float = 1.0

    def regressors(self, m, n, steps, rng):
        return self.scale * rng.standard_normal((steps, m, n))


@dataclass(frozen=True)
class RandomOrthonormalCycle:
    """Columns of a random orthonormal basis, ``n`` at a time, cyclically."""

    def regressors(self, m, n, steps, rng):
        Q, R = np.linalg.qr(rng.standard_normal((m, m)))
        Q = Q * np.sign(np.diag(R))
        cols = (np.arange(steps)[:, None] * n + np.arange(n)[None, :]) % m
        return np.transpose(Q[:, cols], (1, 0, 2))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Static regression ``y[k+1] = psi[k].T @ theta_true + v[k]``.

    Each noise component ``v`` is uniform on ``[-noise_bound, noise_bound]``.
    Regressors and noise use independent child streams of ``seed``, so changing
    ``noise_bound`` leaves the regressors and the unit noise pattern untouched.
    """

    m: int
    n: int
    theta_true: np.ndarray
    regressor_policy: object
    noise_bound: float = 0.0
    steps: int = 100
    seed: int = 0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_true, dtype=float))
        if self.m < 1 or self.n < 1:
            raise InvalidInputError(f"dimensions must be positive, got m={self.m}, n={self.n}")
        if theta.shape != (self.m,):
            raise InvalidInputError(f"theta_true must have length {self.m}")
        if not self.noise_bound >= 0.0:
            raise InvalidInputError(f"noise_bound must be nonnegative, got {self.noise_bound}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidInputError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "theta_true", theta)


def generate(spec):
    """Return ``(psis, ys)`` with shapes ``(steps, m, n)`` and ``(steps, n)``."""
    reg_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    psis = spec.regressor_policy.regressors(
        spec.m, spec.n, spec.steps, np.random.default_rng(reg_seq)
    )
    psis = np.ascontiguousarray(psis, dtype=float)
    if psis.shape != (spec.steps, spec.m, spec.n):
        raise InvalidInputError(f"policy produced regressors of shape {psis.shape}")
    ys = np.einsum("kmn,m->kn", psis, spec.theta_true)
    if spec.noise_bound > 0.0:
        unit = np.random.default_rng(noise_seq).uniform(-1.0, 1.0, (spec.steps, spec.n))
        ys = ys + spec.noise_bound * unit
    return psis, ys


@dataclass(frozen=True)
class TraceRecord:
    """Step ``k`` (1-based): sample ``(psi[k-1], y[k])`` and the estimate it produced."""

    k: int
    psi: np.ndarray
    y: np.ndarray
    theta_hat: np.ndarray
    innovation: np.ndarray
    W: float
    error_norm_sq: float


@dataclass(eq=False)
class Trace:
    records: list
    states: list = field(repr=False)
    history: History = field(repr=False)
    theta_true: np.ndarray = None

    def __len__(self):
        return len(self.records)

    @property
    def error_norm_sq(self):
        """``|theta_true - theta_hat[k]|^2`` for k = 0..steps."""
        return np.array([np.sum((self.theta_true - s.theta_hat) ** 2) for s in self.states])

    @property
    def theta_hats(self):
        return np.array([r.theta_hat for r in self.records])


def trace_from_data(config, psis, ys, theta_true=None):
    """Run the estimator over arrays of samples and collect per-step records."""
    history = History(psis, ys)
    samples = [Sample(p, y) for p, y in zip(history.psis, history.ys)]
    states = run_samples(config, samples)
    records = []
    for k in range(1, len(states)):
        prev, cur = states[k - 1], states[k]
        sample = samples[k - 1]
        if theta_true is not None:
            e = theta_true - cur.theta_hat
            W, err = lyapunov_value(cur, theta_true), float(e @ e)
        else:
            W, err = float("nan"), float("nan")
        records.append(
            TraceRecord(
                k=k,
                psi=sample.psi,
                y=sample.y,
                theta_hat=cur.theta_hat,
                innovation=sample.y - sample.psi.T @ prev.theta_hat,
                W=W,
                error_norm_sq=err,
            )
        )
    return Trace(records=records, states=states, history=history, theta_true=theta_true)


def run(spec, config):
    """Generate the scenario's data and run the estimator on it."""
    if (spec.m, spec.n) != (config.m, config.n):
        raise InvalidInputError(
            f"scenario dimensions {(spec.m, spec.n)} differ from estimator {(config.m, config.n)}"
        )
    psis, ys = generate(spec)
    return trace_from_data(config, psis, ys, spec.theta_true)


def error_plateau(trace, fraction=0.25):
    """Largest ``|theta_true - theta_hat|`` over the last ``fraction`` of the trace."""
    err = np.sqrt(trace.error_norm_sq[1:])
    start = int(len(err) * (1.0 - fraction))
    return float(err[start:].max())
