"""Exit criteria of the toolkit, one test per criterion.

Run ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``)
to see one PASS/FAIL line per criterion.
"""

import json
import time
from functools import lru_cache

import numpy as np
import pytest

from rlsff import (
    EstimatorConfig,
    History,
    batch_minimize,
    build_certificate,
    c_matrix_residual,
    min_window_for_pe,
    objective,
    objective_gradient,
    pe_analyze,
    run,
    verify_decay,
    verify_error_bound,
    verify_p_inv_bound,
)
from rlsff.checks import batch_deviation, woodbury_residual
from rlsff.cli import main
from rlsff.convergence import lyapunov_value
from rlsff.simulation import (
    Constant,
    Cycling,
    RandomGaussian,
    RandomOrthonormalCycle,
    ScenarioSpec,
    error_plateau,
)

from conftest import random_spd

STEPS_PE = 500


def _line(number, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    return ok


# ---------------------------------------------------------------- 1 and 2

@lru_cache(maxsize=None)
def _random_instances():
    rng = np.random.default_rng(1001)
    out = []
    start = time.perf_counter()
    for i in range(100):
        m, n = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        lam = (0.9, 0.95, 0.99)[i % 3]
        cfg = EstimatorConfig(m, n, lam, random_spd(rng, n), random_spd(rng, m), rng.standard_normal(m))
        spec = ScenarioSpec(m, n, rng.standard_normal(m), RandomGaussian(), 0.1, 200, i)
        out.append(run(spec, cfg))
    return out, time.perf_counter() - start


def test_criterion_1_recursive_batch_equivalence():
    start = time.perf_counter()
    traces, _ = _random_instances()
    worst = max(batch_deviation(s, t.history) for t in traces for s in t.states[1:])
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    assert _line(1, ok, f"max relative deviation {worst:.3e} (<= 1e-6), {elapsed:.1f} s (< 30 s)")


def test_criterion_2_woodbury_consistency():
    traces, _ = _random_instances()
    worst = max(woodbury_residual(s) for t in traces for s in t.states)
    assert _line(2, worst <= 1e-8, f"max relative |P - inv(P_inv)| {worst:.3e} (<= 1e-8)")


# ---------------------------------------------------------------- 3

def test_criterion_3_c_matrix_identity():
    rng = np.random.default_rng(3003)
    worst = 0.0
    for _ in range(200):
        m, n = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        diag = c_matrix_residual(
            random_spd(rng, m, 0.1, 10), rng.standard_normal((m, n)), random_spd(rng, n, 0.1, 10),
            float(rng.uniform(0.05, 0.99)), verbose=True,
        )
        worst = max(worst, diag.residual / (1.0 + diag.scale))
    assert _line(3, worst <= 1e-10, f"max relative residual {worst:.3e} (<= 1e-10)")


# ---------------------------------------------------------------- 4, 5, 6

def _policy(kind, m, rng):
    if kind == "constant":
        return Constant(rng.standard_normal((m, m))), m
    n = int(rng.integers(1, 4))
    if kind == "cycling":
        return Cycling(tuple(rng.standard_normal((m + 1, m, n)))), n
    if kind == "random_gaussian":
        return RandomGaussian(float(rng.uniform(0.5, 2.0))), n
    return RandomOrthonormalCycle(), n


@lru_cache(maxsize=None)
def _pe_scenarios():
    """Noise-free PE scenarios: 4 policies x m in 1..4 x 3 forgetting factors x 3 priors."""
    rng = np.random.default_rng(4004)
    out = []
    seed = 0
    for kind in ("constant", "cycling", "random_gaussian", "random_orthonormal_cycle"):
        for m in range(1, 5):
            for lam in (0.5, 0.9, 0.99):
                for prior in ("identity", "diffuse", "random"):
                    seed += 1
                    policy, n = _policy(kind, m, rng)
                    P0 = {"identity": np.eye(m), "diffuse": 100.0 * np.eye(m),
                          "random": random_spd(rng, m)}[prior]
                    cfg = EstimatorConfig(m, n, lam, random_spd(rng, n), P0, np.zeros(m))
                    spec = ScenarioSpec(m, n, 2.0 * rng.standard_normal(m), policy, 0.0, STEPS_PE, seed)
                    trace = run(spec, cfg)
                    S = min_window_for_pe(trace.history.psis, 20)
                    assert S is not None, f"{kind} scenario is not exciting"
                    pe = pe_analyze(trace.history.psis, S)
                    cert = build_certificate(trace.states, spec.theta_true, pe)
                    out.append((kind, prior, trace, spec, cert))
    return out


def test_criterion_4_lyapunov_decay():
    scenarios = _pe_scenarios()
    violations = sum(
        verify_decay(t.states, spec.theta_true, cert.lam).n_violations for _, _, t, spec, cert in scenarios
    )
    assert _line(4, violations == 0, f"{violations} decay violations over {len(scenarios)} scenarios")


def _bound_violations(check):
    counts, at_S = 0, 0
    for _, _, trace, spec, cert in _pe_scenarios():
        report = check(trace, spec, cert)
        counts += report.n_violations
        at_S += int(np.count_nonzero((report.ks == cert.S) & (report.margins < 0)))
    return counts, at_S


def test_criterion_5_exponential_bound():
    # literal statement: every k with S <= k <= 500
    total, at_S = _bound_violations(lambda t, spec, c: verify_error_bound(t.states, spec.theta_true, c))
    ok = total == 0
    _line(5, ok, f"|e_k|^2 <= gamma lam^k |e_0|^2 for S <= k <= {STEPS_PE}: "
                 f"{total} violations ({at_S} at k = S)")
    assert ok, (
        f"{total} violations, {at_S} of them at k = S: with only S samples absorbed at k = S "
        "no full excitation window exists yet"
    )


def test_criterion_5_exponential_bound_from_first_full_window():
    total, _ = _bound_violations(
        lambda t, spec, c: verify_error_bound(t.states, spec.theta_true, c, k_min=c.S + 1)
    )
    assert _line("5 (k >= S+1)", total == 0, f"{total} violations for S+1 <= k <= {STEPS_PE}")


def test_criterion_5_scalar_golden_trace():
    cfg = EstimatorConfig(1, 1, 0.5, [[1.0]], [[1.0]], [0.0])
    trace = run(ScenarioSpec(1, 1, [2.0], Constant([[1.0]]), 0.0, 3, 0), cfg)
    cert = build_certificate(trace.states, [2.0], pe_analyze(trace.history.psis, 2))
    got = np.array([
        trace.states[1].theta_hat[0], trace.states[2].theta_hat[0],
        *[lyapunov_value(s, [2.0]) for s in trace.states[:3]],
        cert.gamma, cert.p_inv_lower_bound,
    ])
    want = np.array([4 / 3, 12 / 7, 4.0, 2 / 3, 1 / 7, 7 / 3, 3 / 7])
    err = float(np.max(np.abs(got - want)))
    assert _line("5 (golden)", err <= 1e-12, f"scalar hand trace max deviation {err:.1e} (<= 1e-12)")


def test_criterion_6_p_inv_lower_bound():
    total, at_S = _bound_violations(lambda t, spec, c: verify_p_inv_bound(t.states, c))
    ok = total == 0
    _line(6, ok, f"lambda_min(P_inv) >= bound for k >= S: {total} violations ({at_S} at k = S)")
    assert ok, f"{total} violations, {at_S} of them at k = S"


def test_criterion_6_p_inv_lower_bound_from_first_full_window():
    total, _ = _bound_violations(lambda t, spec, c: verify_p_inv_bound(t.states, c, k_min=c.S + 1))
    assert _line("6 (k >= S+1)", total == 0, f"{total} violations for k >= S+1")


# ---------------------------------------------------------------- 7

def test_criterion_7_gradient_and_optimality():
    rng = np.random.default_rng(7007)
    worst_fd, worse_count = 0.0, 0
    for _ in range(20):
        m, n = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        k = 30
        theta = rng.standard_normal(m)
        psis = rng.standard_normal((k, m, n))
        ys = np.einsum("kmn,m->kn", psis, theta) + 0.5 * rng.standard_normal((k, n))
        hist, T, lam = History(psis, ys), random_spd(rng, n), 0.9
        point = rng.standard_normal(m)
        h = 1e-5
        fd = np.array([
            (objective(point + h * e, hist, lam, T) - objective(point - h * e, hist, lam, T)) / (2 * h)
            for e in np.eye(m)
        ])
        analytic = 2.0 * objective_gradient(point, hist, lam, T)
        worst_fd = max(worst_fd, float(np.linalg.norm(fd - analytic) / np.linalg.norm(analytic)))
        best = batch_minimize(hist, lam, T)
        f_best = objective(best, hist, lam, T)
        for _ in range(100):
            delta = rng.standard_normal(m) * 10.0 ** rng.uniform(-3, 0)
            worse_count += objective(best + delta, hist, lam, T) < f_best
    ok = worst_fd <= 1e-5 and worse_count == 0
    assert _line(7, ok, f"finite-difference rel. error {worst_fd:.2e} (<= 1e-5), "
                        f"{worse_count} perturbations beat the minimizer")


# ---------------------------------------------------------------- 8

def test_criterion_8_bounded_noise_ball():
    cfg = EstimatorConfig(3, 2, 0.95, np.eye(2), np.eye(3), np.zeros(3))
    theta = np.array([1.0, -2.0, 0.5])
    plateaus, initial = [], None
    for b in (0.01, 0.1, 1.0):
        trace = run(ScenarioSpec(3, 2, theta, RandomGaussian(), b, 400, 7), cfg)
        plateaus.append(error_plateau(trace))
        initial = float(np.sqrt(trace.error_norm_sq[0]))
    ok = plateaus == sorted(plateaus) and plateaus[0] * 10 <= initial
    assert _line(8, ok, "plateaus " + ", ".join(f"{p:.3e}" for p in plateaus)
                 + f" for b = 0.01, 0.1, 1; initial error {initial:.3f}")


# ---------------------------------------------------------------- 9

GOLDEN = {
    "m": 1, "n": 1, "lambda": 0.5, "T": [[1]], "P_init": [[1]], "theta_init": [0],
    "scenario": {"theta_true": [2], "regressor_policy": {"kind": "constant", "psi": [[1]]}},
}


def test_criterion_9_cli_pipeline(tmp_path, capsys):
    cfg = tmp_path / "golden.json"
    cfg.write_text(json.dumps(GOLDEN))
    blobs = []
    codes = []
    for run_id in ("a", "b"):
        data, est = tmp_path / f"{run_id}.csv", tmp_path / f"{run_id}_est.csv"
        codes.append(main(["simulate", "--config", str(cfg), "--steps", "10", "--out", str(data), "--seed", "5"]))
        codes.append(main(["estimate", "--config", str(cfg), "--data", str(data), "--out", str(est)]))
        capsys.readouterr()
        codes.append(main(["verify", "--config", str(cfg), "--data", str(data), "--theta-true", "2",
                           "--window", "2", "--strict"]))
        printed = capsys.readouterr().out
        blobs.append([p.read_bytes() for p in (data, tmp_path / f"{run_id}.trace.csv", est)])
    golden = "gamma = 2.3333333333333335" in printed and "p_inv_lower_bound = 0.42857142857142855" in printed
    ok = codes == [0] * 6 and golden and blobs[0] == blobs[1]
    assert _line(9, ok, f"exit codes {codes}, golden values printed: {golden}, "
                        f"byte-identical: {blobs[0] == blobs[1]}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-s", "-q"]))
