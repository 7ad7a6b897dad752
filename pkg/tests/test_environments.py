import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothgreedy import rng as rngmod
from smoothgreedy.environments import (
    AlignEstimate,
    AntiAlignEstimate,
    Constant,
    ContextBatch,
    EnvKind,
    Environment,
    EqualMeans,
    GroundTruth,
    History,
    Mode,
    NoiseModel,
    Zero,
    adversary_step,
    generate_contexts,
    make_strategy,
    reward,
)
from smoothgreedy.errors import ConfigError, DimensionError, DomainError
from smoothgreedy.norms import NormSpec


def _gen():
    return np.random.default_rng(0), np.random.default_rng(1)


def test_gaussian_env_zero_sigma():
    env = Environment(EnvKind.GAUSSIAN, k=3, p=4, sigma=0.0)
    b = generate_contexts(env, 1, History(), *_gen())
    assert not b.contexts.any()


def test_constant_strategy_contexts():
    e1 = np.array([1.0, 0, 0])
    env = Environment(EnvKind.SMOOTHED, k=4, p=3, sigma=0.2, strategy=Constant(e1))
    b = generate_contexts(env, 5, History(), *_gen())
    assert np.allclose(b.mus, e1)
    assert np.array_equal(b.contexts, b.mus + b.perturbations)


def test_constant_strategy_is_clipped():
    v = np.array([1.0, 2.0, 2.0])  # norm 3
    out = adversary_step(Constant(v), History(), 2, 3, np.random.default_rng(0))
    assert np.allclose(out, v / 3)


def test_zero_strategy():
    assert not adversary_step(Zero(), History(), 3, 5, np.random.default_rng(0)).any()


def test_equal_means_identical_rows_and_stable_within_run():
    s = EqualMeans()
    rng = np.random.default_rng(4)
    a = adversary_step(s, History(), 5, 6, rng)
    b = adversary_step(s, History(), 5, 6, rng)
    assert np.allclose(a, a[0]) and np.array_equal(a, b)
    assert np.linalg.norm(a[0]) == pytest.approx(1.0)
    s.reset()
    c = adversary_step(s, History(), 5, 6, rng)
    assert not np.array_equal(a, c)


def test_align_estimate_and_fallback():
    h = History()
    assert not adversary_step(AlignEstimate(), h, 2, 3, None).any()
    h.estimates = np.zeros((1, 3))
    assert not adversary_step(AlignEstimate(), h, 2, 3, None).any()
    h.estimates = np.array([[3.0, 4.0, 0.0]])
    out = adversary_step(AlignEstimate(), h, 2, 3, None)
    assert np.allclose(out, [0.6, 0.8, 0.0])
    assert np.allclose(adversary_step(AntiAlignEstimate(), h, 2, 3, None), -out)


def test_align_estimate_per_arm():
    h = History(estimates=np.array([[2.0, 0.0], [0.0, 0.0]]))
    out = adversary_step(AlignEstimate(), h, 2, 2, None)
    assert np.allclose(out, [[1.0, 0.0], [0.0, 0.0]])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0, 100), st.integers(0, 10**6))
def test_means_always_clipped(k, p, scale, seed):
    rng = np.random.default_rng(seed)
    h = History(estimates=rng.standard_normal((k, p)) * scale)
    for strat in (Zero(), Constant(rng.standard_normal(p) * scale), EqualMeans(scale=scale),
                  AlignEstimate(), AntiAlignEstimate()):
        mus = adversary_step(strat, h, k, p, rng)
        assert mus.shape == (k, p)
        assert np.all(np.linalg.norm(mus, axis=1) <= 1 + 1e-9)


def test_perturbations_do_not_depend_on_strategy():
    seed = 17
    out = []
    for strat in (Zero(), EqualMeans(), Constant([0.3, 0.1, 0.0, 0.2])):
        env = Environment(EnvKind.SMOOTHED, k=3, p=4, sigma=0.5, strategy=strat)
        srng, prng = rngmod.stream(seed, "strategy"), rngmod.stream(seed, "perturbations")
        out.append(np.stack([generate_contexts(env, t, History(), srng, prng).perturbations
                             for t in range(1, 20)]))
    assert np.array_equal(out[0], out[1]) and np.array_equal(out[0], out[2])


def test_round_index_checked():
    env = Environment(EnvKind.GAUSSIAN, k=2, p=2, sigma=1.0)
    with pytest.raises(DomainError):
        generate_contexts(env, 0, History(), *_gen())


def test_unknown_strategy_is_config_error():
    with pytest.raises(ConfigError):
        make_strategy({"name": "chaos"})
    with pytest.raises(ConfigError):
        make_strategy({"name": "constant"})  # missing v
    assert isinstance(make_strategy("equal_means"), EqualMeans)
    assert isinstance(make_strategy(None), Zero)


def test_rewards_only_rejects_estimate_readers():
    with pytest.raises(ConfigError):
        Environment(EnvKind.SMOOTHED, 2, 2, 0.1, strategy=AlignEstimate(), rewards_only=True)


def test_context_batch_invariants():
    b = ContextBatch(np.zeros((3, 2)), np.ones((3, 2)), 1.0)
    assert b.k == 3 and np.array_equal(b.contexts, np.ones((3, 2)))


# --- ground truth and rewards --------------------------------------------


def test_ground_truth_radius_consistency():
    gt = GroundTruth.from_thetas(Mode.SINGLE, np.array([[0.5, -0.5, 0.0]]), "l1")
    assert gt.specs[0].radius == pytest.approx(1.0)
    with pytest.raises(DomainError):
        GroundTruth(Mode.SINGLE, np.array([[1.0, 0.0]]), [NormSpec("l1", (2,), 2.0)])
    with pytest.raises(DimensionError):
        GroundTruth.from_thetas(Mode.SINGLE, np.eye(2), "l2")


def test_reward_noiseless_example():
    gt = GroundTruth.from_thetas(Mode.SINGLE, np.array([[1.0, 0.0]]), "l2")
    r = reward(gt, 0, [2.0, 5.0], NoiseModel("gaussian", 0.0), np.random.default_rng(0))
    assert r == 2.0


def test_reward_multi_zero_parameter_is_pure_noise():
    thetas = np.array([[1.0, 0.0], [0.0, 0.0]])
    gt = GroundTruth(Mode.MULTI, thetas, [NormSpec("l2", (2,), 1.0), NormSpec("l2", (2,), 0.0)])
    rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
    noise = NoiseModel("gaussian", 1.0)
    r = reward(gt, 1, [7.0, 9.0], noise, rng_a)
    assert r == pytest.approx(float(noise.sample(rng_b)))


def test_reward_arm_range():
    gt = GroundTruth.from_thetas(Mode.MULTI, np.eye(2), "l2")
    with pytest.raises(IndexError):
        reward(gt, 2, [1.0, 0.0], NoiseModel(), np.random.default_rng(0))
    gt1 = GroundTruth.from_thetas(Mode.SINGLE, np.array([[1.0, 0.0]]), "l2")
    with pytest.raises(IndexError):
        reward(gt1, 3, [1.0, 0.0], NoiseModel(), np.random.default_rng(0), k=3)


def test_reward_mean_clt():
    gt = GroundTruth.from_thetas(Mode.SINGLE, np.array([[0.6, 0.8]]), "l2")
    x = np.array([1.0, -2.0])
    rng = np.random.default_rng(8)
    draws = np.array([reward(gt, 0, x, NoiseModel("gaussian", 1.0), rng) for _ in range(100_000)])
    assert abs(draws.mean() - x @ gt.thetas[0]) < 3e-2


@pytest.mark.parametrize("family", ["gaussian", "uniform"])
def test_noise_zero_mean_and_variance(family):
    noise = NoiseModel(family, 2.0)
    w = noise.sample(np.random.default_rng(12), size=10**6)
    se = w.std() / np.sqrt(w.size)
    assert abs(w.mean()) < 4 * se
    assert w.var() == pytest.approx(4.0, rel=0.01)
    if family == "uniform":
        assert np.abs(w).max() <= 2.0 * np.sqrt(3)


def test_noise_validation():
    with pytest.raises(DomainError):
        NoiseModel("gaussian", -1.0)
    with pytest.raises(ValueError):
        NoiseModel("cauchy", 1.0)
