import numpy as np
import pytest

from rlsff import EstimatorConfig, InvalidInputError, NumericalDegeneracyError, generate, pe_analyze, run
from rlsff.simulation import (
    Constant,
    Cycling,
    RandomGaussian,
    RandomOrthonormalCycle,
    ScenarioSpec,
    error_plateau,
)


def test_noise_free_constant_output():
    spec = ScenarioSpec(1, 1, [2.0], Constant([[1.0]]), 0.0, 20, 0)
    psis, ys = generate(spec)
    assert psis.shape == (20, 1, 1)
    assert np.all(ys == 2.0)


def test_noise_is_bounded_componentwise():
    theta = np.array([1.0, -0.5, 2.0])
    spec = ScenarioSpec(3, 2, theta, RandomGaussian(), 0.1, 500, 11)
    psis, ys = generate(spec)
    residual = ys - np.einsum("kmn,m->kn", psis, theta)
    assert np.all(np.abs(residual) <= 0.1)
    assert np.max(np.abs(residual)) > 0.09


@pytest.mark.parametrize(
    "policy", [RandomOrthonormalCycle(), Cycling(([[1.0], [0.0]], [[0.0], [1.0]]))]
)
def test_orthonormal_cycling_is_exciting(policy):
    psis, _ = generate(ScenarioSpec(2, 1, [1.0, 1.0], policy, 0.0, 20, 5))
    report = pe_analyze(psis, 1)
    assert report.alpha == pytest.approx(1.0, abs=1e-12)
    assert report.beta == pytest.approx(1.0, abs=1e-12)


def test_orthonormal_cycle_multi_output():
    psis, _ = generate(ScenarioSpec(4, 2, np.zeros(4), RandomOrthonormalCycle(), 0.0, 10, 1))
    report = pe_analyze(psis, 1)
    assert report.alpha == pytest.approx(1.0, abs=1e-12)
    assert report.beta == pytest.approx(1.0, abs=1e-12)


def test_generation_is_deterministic():
    spec = ScenarioSpec(3, 2, [1.0, 2.0, 3.0], RandomGaussian(0.5), 0.2, 50, 42)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    other = generate(ScenarioSpec(3, 2, [1.0, 2.0, 3.0], RandomGaussian(0.5), 0.2, 50, 43))
    assert not np.array_equal(a[0], other[0])


def test_noise_bound_does_not_change_regressors():
    base = ScenarioSpec(2, 1, [1.0, 1.0], RandomGaussian(), 0.0, 30, 9)
    noisy = ScenarioSpec(2, 1, [1.0, 1.0], RandomGaussian(), 0.5, 30, 9)
    assert np.array_equal(generate(base)[0], generate(noisy)[0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(noise_bound=-0.1),
        dict(steps=0),
        dict(theta_true=[1.0]),
    ],
)
def test_invalid_spec(kwargs):
    args = dict(m=2, n=1, theta_true=[1.0, 2.0], regressor_policy=RandomGaussian(), noise_bound=0.0, steps=5, seed=0)
    args.update(kwargs)
    with pytest.raises(InvalidInputError):
        ScenarioSpec(**args)


def test_bad_policy_shape():
    spec = ScenarioSpec(2, 1, [1.0, 2.0], Cycling((np.ones((3, 1)),)), 0.0, 5, 0)
    with pytest.raises(InvalidInputError):
        generate(spec)


def test_run_trace_contents(scalar_config):
    spec = ScenarioSpec(1, 1, [2.0], Constant([[1.0]]), 0.0, 3, 0)
    trace = run(spec, scalar_config)
    assert len(trace) == 3 and len(trace.states) == 4
    assert [r.k for r in trace.records] == [1, 2, 3]
    assert trace.records[0].theta_hat[0] == pytest.approx(4 / 3, abs=1e-15)
    assert trace.records[1].theta_hat[0] == pytest.approx(12 / 7, abs=1e-15)
    assert trace.records[0].innovation[0] == 2.0
    assert [r.W for r in trace.records[:2]] == pytest.approx([2 / 3, 1 / 7], abs=1e-14)
    assert trace.records[1].error_norm_sq == pytest.approx(4 / 49, abs=1e-14)


def test_run_from_true_parameter_stays_exact():
    theta = np.array([0.5, -1.0, 2.0])
    cfg = EstimatorConfig(3, 2, 0.9, np.eye(2), np.eye(3), theta)
    trace = run(ScenarioSpec(3, 2, theta, RandomGaussian(), 0.0, 100, 1), cfg)
    assert np.all(trace.error_norm_sq == 0.0)
    assert all(r.W == 0.0 for r in trace.records)


def test_run_is_deterministic():
    cfg = EstimatorConfig(2, 2, 0.95, np.eye(2), np.eye(2), np.zeros(2))
    spec = ScenarioSpec(2, 2, [1.0, -1.0], RandomGaussian(), 0.3, 80, 17)
    a, b = run(spec, cfg), run(spec, cfg)
    assert np.array_equal(a.theta_hats, b.theta_hats)
    assert np.array_equal(a.error_norm_sq, b.error_norm_sq)


def test_run_dimension_mismatch(scalar_config):
    with pytest.raises(InvalidInputError):
        run(ScenarioSpec(2, 1, [1.0, 1.0], RandomGaussian(), 0.0, 5, 0), scalar_config)


def test_run_propagates_degeneracy_with_step_index():
    cfg = EstimatorConfig(2, 1, 0.9, [[1.0]], np.eye(2), np.zeros(2))
    cycle = Cycling(([[1.0], [0.0]], [[1e7], [0.0]]))
    with pytest.raises(NumericalDegeneracyError) as info:
        run(ScenarioSpec(2, 1, [1.0, 1.0], cycle, 0.0, 5, 0), cfg)
    assert info.value.step == 2


def test_noise_plateau_monotone_in_bound():
    cfg = EstimatorConfig(3, 2, 0.95, np.eye(2), np.eye(3), np.zeros(3))
    plateaus = [
        error_plateau(run(ScenarioSpec(3, 2, [1.0, -2.0, 0.5], RandomGaussian(), b, 400, 7), cfg))
        for b in (0.0, 0.01, 0.1, 1.0)
    ]
    assert plateaus == sorted(plateaus)
    assert plateaus[0] < 1e-6
