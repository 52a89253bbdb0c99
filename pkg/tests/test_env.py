import json

import numpy as np
import pytest

from pipemdp.env import (
    Action,
    EnvConfig,
    PipeEnv,
    apply_maintenance,
    default_config,
    make_state,
    observe,
    reset,
    transition,
)
from pipemdp.errors import ConfigError, FormatError, InvalidStateError
from pipemdp.hazards import (
    FAILED,
    Family,
    HazardSpec,
    HazardTable,
    TRANSITION_LABELS,
    cmw_initial_state,
)
from pipemdp.msdm import DegradationModel

from .oracles import near_zero_model, static_config


def counts_to_severities(counts):
    out = []
    for idx, n in enumerate(counts):
        out.extend([idx] * n)
    return np.array(out, dtype=np.int8)


@pytest.fixture(scope="module")
def weibull_cfg():
    return default_config("weibull")


def test_config_validation():
    model = near_zero_model()
    with pytest.raises(ConfigError):
        EnvConfig(dynamics=model, prognosis=model, segment_m=50.0)
    with pytest.raises(ConfigError):
        EnvConfig(dynamics=model, prognosis=model, horizon=100.3)
    with pytest.raises(ConfigError):
        EnvConfig(dynamics=model, prognosis=model, decision_interval=0.0)
    with pytest.raises(ConfigError):
        EnvConfig(dynamics=model, prognosis=model, age_range=(-1.0, 50.0))
    with pytest.raises(ConfigError):
        EnvConfig(dynamics=model, prognosis=model, failure_penalty=0.0)


def test_segment_count_rounds_up():
    cfg = static_config(length_m=40.5)
    assert cfg.n_segments == 41
    assert default_config().n_segments == 40


def test_replacement_cost_formula(weibull_cfg):
    # 40 m of 200 mm pipe: (450 + 132 + 32) euros per meter
    assert weibull_cfg.replacement_cost == 24_560.0
    small = static_config(diameter_mm=100.0, length_m=10.0)
    assert small.replacement_cost == pytest.approx((450 + 66 + 8) * 10.0)


def test_reward_scale(weibull_cfg):
    assert weibull_cfg.reward_scale == 136_000.0


def test_maintenance_repair_map():
    severities = counts_to_severities([24, 14, 1, 1, 0, 0])
    repaired, pre_counts = apply_maintenance(severities)
    assert np.array_equal(pre_counts, [24, 14, 1, 1, 0, 0])
    assert np.array_equal(np.bincount(repaired, minlength=6), [24, 16, 0, 0, 0, 0])


def test_maintenance_leaves_untouched_levels_alone():
    rng = np.random.default_rng(5)
    severities = rng.integers(0, 6, size=40).astype(np.int8)
    repaired, _ = apply_maintenance(severities)
    keep = (severities <= 1) | (severities == FAILED)
    assert np.array_equal(repaired[keep], severities[keep])
    assert (repaired[~keep] == 1).all()


def test_maintain_step_costs_and_counts():
    cfg = static_config()
    state = make_state(cfg, 30.0, counts_to_severities([24, 14, 1, 1, 0, 0]))
    rng = np.random.default_rng(0)
    new_state, breakdown, done = transition(state, Action.MAINTAIN, cfg, rng)
    # frozen dynamics: the post-step state shows the pure repair effect
    assert np.array_equal(
        np.bincount(new_state.severities, minlength=6), [24, 16, 0, 0, 0, 0]
    )
    assert np.allclose(new_state.health, np.array([24, 16, 0, 0, 0, 0]) / 40.0)
    assert breakdown.c_m == -(1 * 500 + 1 * 700 + 500)
    assert breakdown.c_r == 0.0 and breakdown.c_f == 0.0
    assert breakdown.r == pytest.approx(-1700 / 136_000)
    assert new_state.age == 30.5
    assert not done


def test_maintain_always_charges_logistic_cost():
    cfg = static_config()
    state = make_state(cfg, 3.0, np.zeros(40, dtype=np.int8))
    _, breakdown, _ = transition(state, Action.MAINTAIN, cfg, np.random.default_rng(0))
    assert breakdown.c_m == -500.0


def test_replace_step():
    cfg = default_config("weibull")
    state = make_state(cfg, 61.5, counts_to_severities([0, 10, 10, 10, 5, 5]))
    new_state, breakdown, _ = transition(state, Action.REPLACE, cfg,
                                         np.random.default_rng(0))
    assert new_state.age == 0.0
    assert np.array_equal(
        np.bincount(new_state.severities, minlength=6), [40, 0, 0, 0, 0, 0]
    )
    assert np.array_equal(new_state.health, [1, 0, 0, 0, 0, 0])
    assert np.array_equal(new_state.prognosis, cmw_initial_state(Family.WEIBULL))
    assert breakdown.c_r == -24_560.0
    assert breakdown.c_m == 0.0
    assert breakdown.c_f == 0.0  # replacement clears failures before they bill


def test_replace_is_state_independent():
    cfg = static_config()
    rng = np.random.default_rng(3)
    a = make_state(cfg, 12.0, rng.integers(0, 6, 40).astype(np.int8))
    b = make_state(cfg, 77.5, rng.integers(0, 6, 40).astype(np.int8))
    sa, _, _ = transition(a, Action.REPLACE, cfg, np.random.default_rng(0))
    sb, _, _ = transition(b, Action.REPLACE, cfg, np.random.default_rng(1))
    assert sa.age == sb.age == 0.0
    assert np.array_equal(sa.severities, sb.severities)
    assert np.array_equal(sa.health, sb.health)
    assert np.array_equal(sa.prognosis, sb.prognosis)


def test_failure_penalty_charged_while_failed():
    cfg = static_config()
    state = make_state(cfg, 10.0, counts_to_severities([39, 0, 0, 0, 0, 1]))
    for action in (Action.DO_NOTHING, Action.MAINTAIN):
        new_state, breakdown, _ = transition(state, action, cfg,
                                             np.random.default_rng(0))
        assert breakdown.c_f == -100_000.0, action
        assert (new_state.severities == FAILED).sum() == 1  # F is absorbing


def test_do_nothing_without_failures_is_free():
    cfg = static_config()
    state = make_state(cfg, 10.0, counts_to_severities([30, 5, 3, 1, 1, 0]))
    _, breakdown, _ = transition(state, Action.DO_NOTHING, cfg,
                                 np.random.default_rng(0))
    assert breakdown.c_m == breakdown.c_r == breakdown.c_f == 0.0
    assert breakdown.r == 0.0


def test_reward_clamped_at_minus_one():
    # worst case: repair a fully level-5 pipe and have segments fail anyway
    table = {lab: HazardSpec.exponential(1e-300) for lab in TRANSITION_LABELS}
    table["2->F"] = HazardSpec.exponential(1e6)  # certain failure from level 2
    model = DegradationModel(
        Family.EXPONENTIAL, HazardTable(table), np.array([1.0, 0, 0, 0, 0, 0])
    )
    cfg = EnvConfig(dynamics=model, prognosis=model)
    state = make_state(cfg, 10.0, np.full(40, 4, dtype=np.int8))
    _, breakdown, _ = transition(state, Action.MAINTAIN, cfg,
                                 np.random.default_rng(0))
    assert breakdown.c_m == -(40 * 900 + 500)
    assert breakdown.c_f == -100_000.0
    assert breakdown.r == -1.0


def test_monotone_degradation_under_do_nothing(weibull_cfg):
    rng = np.random.default_rng(42)
    for _ in range(200):
        age = rng.uniform(0.0, 90.0)
        severities = rng.integers(0, 6, size=40).astype(np.int8)
        state = make_state(weibull_cfg, age, severities)
        new_state, _, _ = transition(state, Action.DO_NOTHING, weibull_cfg, rng)
        assert (new_state.severities >= state.severities).all()


def test_reset_with_degenerate_initial_distribution():
    cfg = static_config()
    state = reset(cfg, np.random.default_rng(0), fixed_age=0.0)
    assert (state.severities == 0).all()
    assert np.array_equal(state.health, [1, 0, 0, 0, 0, 0])


def test_reset_fixed_age_zero_samples_weibull_initial(weibull_cfg):
    rng = np.random.default_rng(7)
    cfg = EnvConfig(dynamics=weibull_cfg.dynamics, prognosis=weibull_cfg.prognosis,
                    length_m=100_000.0, segment_m=1.0)
    state = reset(cfg, rng, fixed_age=0.0)
    freq = np.bincount(state.severities, minlength=6) / cfg.n_segments
    assert np.abs(freq - cmw_initial_state(Family.WEIBULL)).max() < 0.01


def test_reset_empirical_distribution_matches_occupancy(weibull_cfg):
    rng = np.random.default_rng(11)
    cfg = EnvConfig(dynamics=weibull_cfg.dynamics, prognosis=weibull_cfg.prognosis,
                    length_m=100_000.0, segment_m=1.0)
    state = reset(cfg, rng, fixed_age=30.0)
    freq = np.bincount(state.severities, minlength=6) / cfg.n_segments
    expected = weibull_cfg.dynamics.occupancy_at(30.0)
    assert np.abs(freq - expected).max() < 0.01


def test_reset_age_range_and_grid():
    cfg = static_config(age_range=(0.0, 50.0), age_grid=0.5)
    rng = np.random.default_rng(1)
    ages = {reset(cfg, rng).age for _ in range(50)}
    assert all(0.0 <= a <= 50.0 for a in ages)
    assert all(abs(a / 0.5 - round(a / 0.5)) < 1e-12 for a in ages)
    with pytest.raises(ConfigError):
        reset(cfg, rng, fixed_age=-2.0)


def test_observation_layout(weibull_cfg):
    state = make_state(weibull_cfg, 30.0, counts_to_severities([24, 14, 1, 1, 0, 0]))
    obs = observe(state)
    assert obs.shape == (13,)
    assert obs[0] == 30.0
    assert np.allclose(obs[1:7], np.array([24, 14, 1, 1, 0, 0]) / 40.0)
    assert np.array_equal(obs[7:], weibull_cfg.prognosis.occupancy_at(30.0))
    assert abs(obs[1:7].sum() - 1.0) == 0.0
    assert abs(obs[7:].sum() - 1.0) < 1e-6


def test_episode_clock_and_termination():
    cfg = static_config(horizon=2.0, decision_interval=0.5)
    env = PipeEnv(cfg)
    env.reset(seed=0, start_age=0.0)
    flags = [env.step(Action.DO_NOTHING)[2] for _ in range(cfg.n_steps)]
    assert flags == [False, False, False, True]
    assert env.state.elapsed == pytest.approx(2.0)
    with pytest.raises(InvalidStateError):
        PipeEnv(cfg).step(Action.DO_NOTHING)


def test_replace_does_not_end_episode_early():
    cfg = static_config(horizon=2.0, decision_interval=0.5)
    env = PipeEnv(cfg)
    env.reset(seed=0, start_age=40.0)
    _, _, done = env.step(Action.REPLACE)
    assert not done
    assert env.state.age == 0.0
    assert env.state.elapsed == 0.5


def test_inconsistent_state_rejected(weibull_cfg):
    state = make_state(weibull_cfg, 10.0, np.zeros(40, dtype=np.int8))
    bad = state.__class__(
        age=state.age,
        severities=state.severities,
        health=np.array([0.5, 0.5, 0, 0, 0, 0]),
        prognosis=state.prognosis,
        elapsed=0.0,
    )
    with pytest.raises(InvalidStateError):
        transition(bad, Action.DO_NOTHING, weibull_cfg, np.random.default_rng(0))
    with pytest.raises(InvalidStateError):
        make_state(weibull_cfg, 1.0, np.zeros(7, dtype=np.int8))


def test_config_json_round_trip(tmp_path):
    cfg = default_config("gompertz", "exponential", horizon=50.0)
    raw = cfg.to_dict()
    clone = EnvConfig.from_dict(json.loads(json.dumps(raw)))
    assert clone.dynamics.family is Family.GOMPERTZ
    assert clone.prognosis.family is Family.EXPONENTIAL
    assert clone.horizon == 50.0

    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    assert EnvConfig.from_file(path).horizon == 50.0

    path.write_text("{broken")
    with pytest.raises(FormatError):
        EnvConfig.from_file(path)


def test_config_with_external_hazard_file(tmp_path):
    from pipemdp.hazards import cmw_hazard_table, dump_hazard_file

    table_path = tmp_path / "table.json"
    dump_hazard_file(table_path, Family.WEIBULL, cmw_hazard_table(Family.WEIBULL),
                     cmw_initial_state(Family.WEIBULL))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"dynamics": {"file": "table.json"},
                                    "prognosis": {"family": "gompertz"}}))
    cfg = EnvConfig.from_file(cfg_path)
    assert cfg.dynamics.family is Family.WEIBULL
    assert cfg.prognosis.family is Family.GOMPERTZ
