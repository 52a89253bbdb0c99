import io

import numpy as np
import pytest

from pipemdp.env import Action, default_config
from pipemdp.evaluate import (
    EpisodeLog,
    aggregate,
    compare,
    evaluate,
    read_episode_csv,
    run_episode,
)
from pipemdp.policies import CBMPolicy, RMPolicy, SchMPolicy

from .oracles import static_config


@pytest.fixture(scope="module")
def weibull_cfg():
    return default_config("weibull")


def test_episode_is_deterministic(weibull_cfg):
    a = run_episode(RMPolicy(), weibull_cfg, start_age=25.0, seed=7)
    b = run_episode(RMPolicy(), weibull_cfg, start_age=25.0, seed=7)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.r, b.r)
    buf_a, buf_b = io.StringIO(), io.StringIO()
    a.to_csv(buf_a)
    b.to_csv(buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()


def test_episode_length_is_horizon_over_interval(weibull_cfg):
    log = run_episode(RMPolicy(), weibull_cfg, start_age=0.0, seed=1)
    assert log.n_steps == weibull_cfg.n_steps == 200


def test_total_cost_identity(weibull_cfg):
    log = run_episode(RMPolicy(), weibull_cfg, start_age=50.0, seed=3)
    assert log.total_cost == -(log.c_m.sum() + log.c_r.sum() + log.c_f.sum())
    assert log.total_cost >= 0.0


def test_rm_episode_never_maintains(weibull_cfg):
    log = run_episode(RMPolicy(), weibull_cfg, start_age=50.0, seed=11)
    assert (log.actions != Action.MAINTAIN).all()


def test_static_world_is_free():
    cfg = static_config()
    log = run_episode(RMPolicy(), cfg, start_age=0.0, seed=0)
    assert (log.actions == Action.DO_NOTHING).all()
    assert log.total_cost == 0.0
    stats = evaluate(RMPolicy(), cfg, [0.0], n_episodes=1, base_seed=0)[0]
    assert stats.cost_mean_keur == 0.0
    assert stats.cost_std_keur == 0.0


def test_schm_maintains_on_schedule():
    cfg = static_config()
    log = run_episode(SchMPolicy(period=10.0), cfg, start_age=0.0, seed=0)
    maintain_steps = np.flatnonzero(log.actions == Action.MAINTAIN)
    # due immediately, then every 20 steps of half a year
    assert maintain_steps.tolist() == list(range(0, 200, 20))


def test_discounted_return_bounds(weibull_cfg):
    log = run_episode(RMPolicy(), weibull_cfg, start_age=50.0, seed=5)
    g = log.discounted_return(0.995)
    assert -log.n_steps <= g <= 0.0


def test_stats_fractions_sum_to_100(weibull_cfg):
    stats = evaluate(SchMPolicy(), weibull_cfg, [25.0], n_episodes=5, base_seed=0)[0]
    assert abs(stats.action_pct.sum() - 100.0) < 0.01
    assert abs(stats.severity_pct.sum() - 100.0) < 0.01
    assert stats.episodes == 5


def test_compare_single_policy_matches_evaluate(weibull_cfg):
    stats = evaluate(RMPolicy(), weibull_cfg, [0.0, 25.0], 4, base_seed=2)
    comp = compare([RMPolicy()], weibull_cfg, [0.0, 25.0], 4, base_seed=2)["rm"]
    for s, c in zip(stats, comp):
        assert s.cost_mean_keur == c.cost_mean_keur
        np.testing.assert_array_equal(s.episode_costs_eur, c.episode_costs_eur)
        np.testing.assert_array_equal(s.action_pct, c.action_pct)


def test_compare_uses_common_random_numbers(weibull_cfg):
    results = compare([RMPolicy(), SchMPolicy()], weibull_cfg, [25.0], 5, base_seed=9)
    assert results["rm"][0].action_pct[Action.MAINTAIN] == 0.0
    assert results["schm"][0].action_pct[Action.MAINTAIN] > 0.0
    # same seeds: both policies saw the same initial draws, so logs align
    log_rm = run_episode(RMPolicy(), weibull_cfg, start_age=25.0, seed=9)
    log_schm = run_episode(SchMPolicy(), weibull_cfg, start_age=25.0, seed=9)
    np.testing.assert_array_equal(log_rm.observations[0], log_schm.observations[0])


def test_stats_recomputable_from_persisted_log(tmp_path, weibull_cfg):
    logs = [run_episode(CBMPolicy(), weibull_cfg, start_age=50.0, seed=s)
            for s in range(3)]
    online = aggregate(logs, policy="cbm", start_age=50.0)
    reread = []
    for i, log in enumerate(logs):
        path = tmp_path / f"ep{i}.csv"
        log.to_csv(path)
        reread.append(read_episode_csv(path))
    offline = aggregate(reread, policy="cbm", start_age=50.0)
    assert offline.cost_mean_keur == online.cost_mean_keur
    assert offline.cost_std_keur == online.cost_std_keur
    np.testing.assert_array_equal(offline.action_pct, online.action_pct)
    np.testing.assert_array_equal(offline.severity_pct, online.severity_pct)


def test_episode_csv_shape(tmp_path, weibull_cfg):
    log = run_episode(RMPolicy(), weibull_cfg, start_age=25.0, seed=1)
    path = tmp_path / "episode.csv"
    log.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == EpisodeLog.CSV_HEADER
    assert len(lines) == 1 + 200
    assert len(lines[1].split(",")) == 18


def test_evaluate_rejects_zero_episodes(weibull_cfg):
    with pytest.raises(ValueError):
        evaluate(RMPolicy(), weibull_cfg, [0.0], n_episodes=0)
    with pytest.raises(ValueError):
        compare([], weibull_cfg, [0.0], 1)


def test_stats_csv_round_trip(tmp_path, weibull_cfg):
    stats = evaluate(RMPolicy(), weibull_cfg, [0.0], n_episodes=2, base_seed=0)[0]
    path = tmp_path / "stats.csv"
    stats.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "metric,value"
    parsed = dict(line.split(",") for line in lines[1:])
    assert float(parsed["episodes"]) == 2.0
    assert float(parsed["cost_mean_keur"]) == stats.cost_mean_keur
