import inspect
import math

import numpy as np
import pytest
from scipy import stats

from smoothgreedy import rng as rngmod
from smoothgreedy.agents import (
    Algo,
    AgentConfig,
    MultiGreedyAgent,
    SingleGreedyAgent,
    run_baseline,
    run_multi,
    run_single,
    select_arm,
)
from smoothgreedy.environments import EnvKind, Environment, EqualMeans, GroundTruth, Mode, NoiseModel
from smoothgreedy.errors import ConfigError


def _sparse_truth(p, s, seed=0, mode=Mode.SINGLE, k=1, family="l1"):
    rng = np.random.default_rng(seed)
    n = 1 if mode is Mode.SINGLE else k
    th = np.zeros((n, p))
    for i in range(n):
        idx = rng.choice(p, s, replace=False)
        th[i, idx] = rng.choice([-1.0, 1.0], s) / np.sqrt(s)
    return GroundTruth.from_thetas(mode, th, family)


def _env(k, p, sigma, kind="gaussian", kappa=1.0, strategy=None):
    return Environment(EnvKind(kind), k, p, sigma, strategy or EqualMeans(),
                       NoiseModel("gaussian", kappa))


# --- select_arm -----------------------------------------------------------


def test_select_arm_examples():
    ctx = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 9.0]])
    assert select_arm(np.array([1.0, 0.0]), ctx) == 1
    assert select_arm(np.zeros(2), ctx) == 0
    multi = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert select_arm(multi, np.array([[1.0, 0.0], [1.0, 0.0]])) == 0


def test_select_arm_tie_goes_to_lowest():
    assert select_arm(np.array([1.0]), np.array([[1.0], [2.0], [2.0]])) == 1


# --- single parameter ----------------------------------------------------


def test_oracle_init_noiseless_has_zero_regret():
    truth = _sparse_truth(8, 2)
    env = _env(4, 8, 0.3, "smoothed", kappa=0.0)
    cfg = AgentConfig(Algo.SINGLE, 0, oracle_init=True)
    tr = run_single(env, truth, truth.specs[0], cfg, 200, rngmod.streams(3))
    assert np.all(tr.cum_regret == 0.0)


def test_episode_refresh_schedule_t16():
    truth = _sparse_truth(5, 1)
    tr = run_single(_env(3, 5, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, 0), 16,
                    rngmod.streams(0))
    # the estimate in force changes exactly when entering rounds 3, 5, 9
    assert list(tr.episode) == [1, 1, 2, 2, 3, 3, 3, 3] + [4] * 8
    fits = [row for row in tr.episodes if row["puffer_rank"] is not None]
    assert [row["length"] for row in fits] == [2, 2, 4, 8]
    changes = [t + 1 for t in range(1, 16) if tr.est_error[t] != tr.est_error[t - 1]]
    assert set(changes) <= {3, 5, 9}


def test_episode_length_law():
    truth = _sparse_truth(6, 2)
    for T in (1, 2, 3, 7, 100, 257):
        tr = run_single(_env(3, 6, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, 0), T,
                        rngmod.streams(T))
        lengths = np.bincount(tr.episode)[1:]
        nominal = [2] + [2 ** (e - 1) for e in range(2, len(lengths) + 1)]
        assert list(lengths[:-1]) == nominal[:-1]
        assert lengths[-1] <= nominal[-1]
        assert sum(nominal) >= T


def test_single_arm_has_no_regret():
    truth = _sparse_truth(4, 1)
    tr = run_single(_env(1, 4, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, 0), 64,
                    rngmod.streams(1))
    assert not tr.cum_regret.any()


def test_regret_identity_from_stored_contexts():
    truth = _sparse_truth(10, 3)
    tr = run_single(_env(5, 10, 0.3, "smoothed"), truth, truth.specs[0],
                    AgentConfig(Algo.SINGLE, 5), 300, rngmod.streams(2), store_contexts=True)
    vals = tr.contexts @ truth.thetas[0]
    ref = np.cumsum(vals.max(axis=1) - vals[np.arange(300), tr.chosen_arm])
    assert np.allclose(tr.cum_regret, ref, atol=1e-9)
    assert np.all(np.diff(tr.cum_regret) >= 0)
    assert tr.horizon == 300


def test_warm_start_is_uniform_random():
    truth = _sparse_truth(6, 2)
    tr = run_single(_env(3, 6, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, 3000),
                    3000, rngmod.streams(4))
    counts = np.bincount(tr.chosen_arm, minlength=3)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_single_determinism():
    truth = _sparse_truth(10, 3)

    def go():
        return run_single(_env(5, 10, 0.3, "smoothed"), truth, truth.specs[0],
                          AgentConfig(Algo.SINGLE, 10), 500, rngmod.streams(7))

    a, b = go(), go()
    for name in ("chosen_arm", "reward", "cum_regret", "est_error", "episode"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_run_single_preconditions():
    truth = _sparse_truth(4, 1)
    with pytest.raises(ConfigError):
        run_single(_env(2, 4, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, 0), 0,
                   rngmod.streams(0))
    with pytest.raises(ConfigError):
        run_single(_env(2, 4, 0.5), truth, truth.specs[0], AgentConfig(Algo.SINGLE, "auto"), 5,
                   rngmod.streams(0))


def test_agent_sees_only_the_constraint():
    for cls in (SingleGreedyAgent, MultiGreedyAgent):
        params = set(inspect.signature(cls).parameters)
        assert not params & {"truth", "thetas", "theta_star"}


# --- multi parameter -----------------------------------------------------


def test_multi_round_robin_warm_start():
    truth = _sparse_truth(4, 1, mode=Mode.MULTI, k=2)
    tr = run_multi(_env(2, 4, 0.5), truth, truth.specs, AgentConfig(Algo.MULTI, 0, 4), 10, 4,
                   rngmod.streams(0))
    assert list(tr.chosen_arm[:4]) == [0, 1, 0, 1]


def test_multi_warm_start_divisibility():
    truth = _sparse_truth(4, 1, mode=Mode.MULTI, k=2)
    with pytest.raises(ConfigError):
        run_multi(_env(2, 4, 0.5), truth, truth.specs, AgentConfig(Algo.MULTI, 0, 7), 20, 7,
                  rngmod.streams(0))
    with pytest.raises(ConfigError):
        run_multi(_env(2, 4, 0.5), truth, truth.specs, AgentConfig(Algo.MULTI, 0, 4), 4, 4,
                  rngmod.streams(0))


def _orthogonal_truth(k, p):
    th = np.zeros((k, p))
    for i in range(k):
        th[i, i] = 1.0
    return GroundTruth.from_thetas(Mode.MULTI, th, "l1")


def test_multi_noiseless_improves_after_warm_start():
    k, p, T0 = 3, 6, 60
    truth = _orthogonal_truth(k, p)
    warm, post = [], []
    for seed in range(20):
        tr = run_multi(_env(k, p, 0.5, kappa=0.0), truth, truth.specs,
                       AgentConfig(Algo.MULTI, 0, T0), 400, T0, rngmod.streams(seed))
        warm.append(tr.inst_regret[:T0].mean())
        post.append(tr.inst_regret[T0:].mean())
    assert np.mean(post) < np.mean(warm)
    assert np.all(np.array(post) < np.array(warm))


def test_multi_exact_recovery_gives_zero_t_star():
    k, p, T0 = 2, 3, 20
    truth = _orthogonal_truth(k, p)
    tr = run_multi(_env(k, p, 0.5, kappa=0.0), truth, truth.specs,
                   AgentConfig(Algo.MULTI, 0, T0), 300, T0, rngmod.streams(1))
    assert all(row["t_star"] == 0 for row in tr.episodes)
    assert tr.inst_regret[T0:].max() < 1e-9


def _replay_t_star(chosen, optimal, k, T0):
    """Independent replay of the per-arm doubling schedule from the trace."""
    episode = [1] * k
    length = [2 * T0 // k] * k
    count = [0] * k
    t_star = {}
    for t in range(T0 + 1, len(chosen) + 1):
        a, b = chosen[t - 1], optimal[t - 1]
        if a != b:
            t_star[(b, episode[b])] = t_star.get((b, episode[b]), 0) + 1
        count[a] += 1
        if count[a] == length[a]:
            episode[a] += 1
            length[a] *= 2
            count[a] = 0
    return t_star, episode


def test_multi_episode_law_and_t_star_accounting():
    k, p, T0 = 3, 8, 48
    truth = _sparse_truth(p, 2, seed=5, mode=Mode.MULTI, k=k)
    tr = run_multi(_env(k, p, 0.4), truth, truth.specs, AgentConfig(Algo.MULTI, 0, T0), 3000,
                   T0, rngmod.streams(5))
    ref, final_ep = _replay_t_star(tr.chosen_arm, tr.optimal_arm, k, T0)
    for row in tr.episodes:
        if row["episode"] >= 1:
            assert row["t_star"] == ref.get((row["arm"], row["episode"]), 0)
        if row["closed"]:
            assert row["length"] == row["nominal_length"]
            assert row["nominal_length"] == (T0 // k) * 2 ** row["episode"]
    for i in range(k):
        eps = sorted(r["episode"] for r in tr.episodes if r["arm"] == i)
        assert eps == list(range(final_ep[i] + 1))


def test_multi_per_round_episode_column():
    k, T0 = 2, 8
    truth = _sparse_truth(4, 1, mode=Mode.MULTI, k=k)
    tr = run_multi(_env(k, 4, 0.4), truth, truth.specs, AgentConfig(Algo.MULTI, 0, T0), 100, T0,
                   rngmod.streams(2))
    assert not tr.episode[:T0].any()
    assert tr.episode[T0:].min() >= 1


# --- baselines -----------------------------------------------------------


def test_oracle_greedy_zero_regret():
    truth = _sparse_truth(6, 2, mode=Mode.MULTI, k=3)
    tr = run_baseline(Algo.ORACLE, _env(3, 6, 0.5, kappa=5.0), truth, AgentConfig(), 500,
                      rngmod.streams(0))
    assert not tr.cum_regret.any()


def test_random_policy_half_the_gap():
    sigma = 0.7
    truth = GroundTruth.from_thetas(Mode.SINGLE, np.array([[1.0, 0.0, 0.0]]), "l2")
    tr = run_baseline(Algo.RANDOM, _env(2, 3, sigma), truth, AgentConfig(), 10_000,
                      rngmod.streams(11))
    # E|<x1 - x2, theta>| = 2 sigma / sqrt(pi); a coin flip pays half of it
    expected = sigma / math.sqrt(math.pi)
    assert tr.inst_regret.mean() == pytest.approx(expected, rel=0.05)


def test_unstructured_baseline_uses_loose_l2_ball():
    truth = _sparse_truth(6, 2)
    tr = run_baseline(Algo.UNSTRUCTURED, _env(3, 6, 0.5), truth, AgentConfig(Algo.UNSTRUCTURED, 0),
                      64, rngmod.streams(0))
    assert tr.meta["algo"] == "unstructured_greedy"
    assert tr.horizon == 64


def test_structured_beats_unstructured_paired():
    p, s, k, sigma, T = 30, 3, 5, 0.3, 4096
    l1, l2 = [], []
    for seed in range(30):
        truth = _sparse_truth(p, s, seed=seed)
        cfg = AgentConfig(Algo.SINGLE, 15)
        a = run_single(_env(k, p, sigma, "smoothed"), truth, truth.specs[0], cfg, T,
                       rngmod.streams(seed))
        b = run_baseline(Algo.UNSTRUCTURED, _env(k, p, sigma, "smoothed"), truth, cfg, T,
                         rngmod.streams(seed))
        l1.append(a.cum_regret[-1])
        l2.append(b.cum_regret[-1])
    assert np.mean(l2) >= np.mean(l1)


def test_multi_oracle_init_noiseless_zero_regret():
    truth = _sparse_truth(6, 2, mode=Mode.MULTI, k=3)
    cfg = AgentConfig(Algo.MULTI, 0, 6, oracle_init=True)
    tr = run_multi(_env(3, 6, 0.3, kappa=0.0), truth, truth.specs, cfg, 300, 6, rngmod.streams(0))
    assert not tr.inst_regret[6:].any()
