import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from lefcast.environments import (
    GapEnv,
    GapEnvConfig,
    ScriptedEnv,
    ThresholdEnv,
    ThresholdEnvConfig,
    enumerate_adversarial,
    gap_round,
    noise_curve,
    optimal_risk,
    threshold_risk,
    threshold_round,
)
from lefcast.forecaster import FOLLOW_MAJORITY, init_state, step


class FakeRng:
    def __init__(self, *values):
        self.values = list(values)

    def random(self, size=None):
        if size is None:
            return self.values.pop(0)
        return np.array([self.values.pop(0) for _ in range(size)])


class TestNoiseCurve:
    def test_boundary_value(self):
        assert noise_curve(0.5, 0.5, 2.0) == 0.5

    def test_quadratic_example(self):
        assert noise_curve(0.75, 0.5, 2.0) == pytest.approx(0.625, abs=1e-15)

    def test_below_boundary_mirrors(self):
        assert noise_curve(0.25, 0.5, 2.0) == pytest.approx(0.375, abs=1e-15)

    def test_stays_in_unit_interval(self):
        xs = np.linspace(0, 1, 201)
        for kappa in (1.2, 1.5, 2.0, 4.0):
            z = noise_curve(xs, 0.5, kappa)
            assert ((0 <= z) & (z <= 1)).all()


class TestThresholdRound:
    def test_advice_thresholds(self):
        cfg = ThresholdEnvConfig(num_experts=3)
        advice, label, x, opt = threshold_round(cfg, FakeRng(0.6, 0.99))
        # expert thresholds at 0, 1/2, 1
        assert advice.tolist() == [1, 1, 0]
        assert x == 0.6
        assert opt == 1
        assert label == 0  # 0.99 >= noise_curve(0.6)

    def test_label_follows_curve(self):
        cfg = ThresholdEnvConfig(kappa=2.0, num_experts=3)
        # at x = 0.75 the curve is 0.625
        _, label, _, _ = threshold_round(cfg, FakeRng(0.75, 0.62))
        assert label == 1
        _, label, _, _ = threshold_round(cfg, FakeRng(0.75, 0.63))
        assert label == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ThresholdEnvConfig(num_experts=4)  # even
        with pytest.raises(ValueError):
            ThresholdEnvConfig(kappa=1.0)
        with pytest.raises(ValueError):
            ThresholdEnvConfig(tau0=1.5)


class TestOptimalRisk:
    def test_kappa_two(self):
        assert optimal_risk(ThresholdEnvConfig(kappa=2.0)) == pytest.approx(0.375, abs=1e-15)

    def test_kappa_three_halves(self):
        got = optimal_risk(ThresholdEnvConfig(kappa=1.5))
        assert got == pytest.approx(0.2642977396044842, abs=1e-14)

    def test_large_kappa_approaches_half_from_below(self):
        risks = [optimal_risk(ThresholdEnvConfig(kappa=k)) for k in (2.0, 5.0, 10.0, 20.0)]
        assert all(r < 0.5 for r in risks)
        assert risks == sorted(risks)

    def test_monte_carlo_cross_check(self):
        cfg = ThresholdEnvConfig(kappa=1.5)
        rng = np.random.default_rng(42)
        x = rng.random(10**7)
        y = rng.random(10**7) < noise_curve(x, cfg.tau0, cfg.kappa)
        emp = np.mean((x >= cfg.tau0) != y)
        assert emp == pytest.approx(optimal_risk(cfg), abs=3e-4)

    def test_general_tau0_against_quadrature(self):
        cfg = ThresholdEnvConfig(tau0=0.3, kappa=2.0)
        direct, _ = integrate.quad(
            lambda x: min(noise_curve(x, 0.3, 2.0), 1 - noise_curve(x, 0.3, 2.0)), 0, 1
        )
        assert optimal_risk(cfg) == pytest.approx(direct, abs=1e-10)
        # ... and matches the closed-form risk of the boundary threshold rule
        assert optimal_risk(cfg) == pytest.approx(threshold_risk(0.3, 0.3, 2.0), abs=1e-10)


def test_threshold_risk_against_quadrature():
    rng = np.random.default_rng(8)
    for _ in range(20):
        theta, tau0 = rng.random(2)
        kappa = float(rng.uniform(1.1, 4.0))

        def err(x):
            z = noise_curve(x, tau0, kappa)
            return z if x < theta else 1.0 - z

        expected, _ = integrate.quad(err, 0, 1, points=[theta, tau0], limit=200)
        assert threshold_risk(theta, tau0, kappa) == pytest.approx(expected, abs=1e-9)


class TestThresholdEnv:
    def test_conditional_label_frequency_matches_curve(self):
        cfg = ThresholdEnvConfig(kappa=2.0, num_experts=5, seed=3)
        env = ThresholdEnv(cfg, 10**6)
        rng = np.random.default_rng(0)
        for _ in range(10):
            a, b = sorted(rng.random(2))
            if b - a < 0.05:
                continue
            inside = (env.x >= a) & (env.x < b)
            count = int(inside.sum())
            expected, _ = integrate.quad(lambda x: noise_curve(x, 0.5, 2.0), a, b)
            expected /= b - a
            emp = env.labels[inside].mean()
            sigma = math.sqrt(expected * (1 - expected) / count)
            assert abs(emp - expected) <= 3 * sigma, (a, b)

    def test_best_expert_is_middle_at_half(self):
        env = ThresholdEnv(ThresholdEnvConfig(num_experts=9), 10)
        assert env.best_expert_index() == 4  # threshold grid hits tau0 = 1/2 exactly

    def test_rounds_are_sequential_and_bounded(self):
        env = ThresholdEnv(ThresholdEnvConfig(num_experts=3), 2)
        r1, r2 = env.next_round(), env.next_round()
        assert (r1.t, r2.t) == (1, 2)
        with pytest.raises(IndexError):
            env.next_round()


class TestGapEnv:
    def test_round_construction_probabilities(self):
        cfg = GapEnvConfig(delta=0.2, base_error=0.1, num_experts=3, best_index=1)
        # label coin, then three flip coins: best expert flips only below 0.1
        advice, label = gap_round(cfg, 1, FakeRng(0.7, 0.05, 0.05, 0.35))
        assert label == 0
        assert advice.tolist() == [1, 1, 0]  # experts 0,1 flipped (0.05 < their eps)

    def test_empirical_gap(self):
        cfg = GapEnvConfig(delta=0.2, base_error=0.1, num_experts=4, best_index=2, seed=9)
        env = GapEnv(cfg, 10**6)
        losses = (env.advice != env.labels[:, None]).mean(axis=0)
        for i in range(4):
            if i == cfg.best_index:
                assert losses[i] == pytest.approx(0.1, abs=2e-3)
            else:
                assert losses[i] - losses[cfg.best_index] == pytest.approx(0.2, abs=2e-3)

    def test_warmup_hides_best_expert(self):
        cfg = GapEnvConfig(
            delta=0.3, base_error=0.1, num_experts=2, best_index=0, seed=4, warmup=5000
        )
        env = GapEnv(cfg, 10000)
        losses_best = (env.advice[:, 0] != env.labels).astype(float)
        assert losses_best[:5000].mean() == pytest.approx(0.4, abs=0.03)
        assert losses_best[5000:].mean() == pytest.approx(0.1, abs=0.03)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GapEnvConfig(delta=0.0, base_error=0.1, num_experts=2)
        with pytest.raises(ValueError):
            GapEnvConfig(delta=0.5, base_error=0.6, num_experts=2)
        with pytest.raises(ValueError):
            GapEnvConfig(delta=0.2, base_error=0.1, num_experts=2, best_index=5)


class TestDeferredReveal:
    def test_unqueried_rounds_never_reveal(self):
        # unanimous experts + follow-the-majority: q = 0 on every round, so
        # the forecaster never reveals, yet scoring stays available
        n = 50
        advice = np.ones((n, 3), dtype=np.int8)
        labels = np.zeros(n, dtype=np.int8)
        env = ScriptedEnv(advice, labels)
        state = init_state(3, math.inf, FOLLOW_MAJORITY)
        rng = np.random.default_rng(0)
        rounds = []
        scored = 0
        for _ in range(n):
            rnd = env.next_round()
            rounds.append(rnd)
            state, rec = step(state, rnd.advice, rnd.reveal, rng)
            assert rec.queried == 0
            scored += int(rec.y_hat != rnd.true_label)  # scoring channel
        assert not any(r.revealed for r in rounds)
        assert scored == n  # consensus is wrong every round; the harness still sees it

    def test_reveal_flag_and_idempotence(self):
        env = ScriptedEnv([[1, 0]], [1])
        rnd = env.next_round()
        assert not rnd.revealed
        assert rnd.reveal() == 1
        assert rnd.revealed
        assert rnd.reveal() == 1


class TestScriptedEnv:
    def test_text_roundtrip(self):
        rng = np.random.default_rng(2)
        env = ScriptedEnv(rng.integers(0, 2, (5, 4)), rng.integers(0, 2, 5))
        again = ScriptedEnv.from_text(env.to_text())
        assert np.array_equal(env.advice, again.advice)
        assert np.array_equal(env.labels, again.labels)

    def test_text_format_shape(self):
        env = ScriptedEnv([[1, 0], [0, 1]], [1, 0])
        assert env.to_text() == "2 2\n1 10\n0 01\n"

    def test_from_file(self, tmp_path):
        path = tmp_path / "env.txt"
        path.write_text("1 3\n0 101\n")
        env = ScriptedEnv.from_file(path)
        assert env.advice.tolist() == [[1, 0, 1]]
        assert env.labels.tolist() == [0]

    def test_malformed_text(self):
        with pytest.raises(ValueError):
            ScriptedEnv.from_text("2 2\n1 10\n")
        with pytest.raises(ValueError):
            ScriptedEnv.from_text("1 3\n1 10\n")

    def test_validation(self):
        with pytest.raises(ValueError):
            ScriptedEnv([[1, 2]], [0])
        with pytest.raises(ValueError):
            ScriptedEnv([[1, 0]], [0, 1])

    def test_replay_shares_data_fresh_cursor(self):
        env = ScriptedEnv([[1, 0], [0, 1]], [1, 0])
        env.next_round()
        fresh = env.replay()
        assert fresh.next_round().t == 1
        assert fresh.advice is env.advice

    def test_expert_losses_and_perfection(self):
        env = ScriptedEnv([[1, 0], [1, 1]], [1, 1])
        assert env.expert_losses().tolist() == [0, 1]
        assert env.has_perfect_expert()
        assert env.best_expert_index() == 0


def brute_force_count(num_experts, horizon, require_perfect):
    count = 0
    for labels in itertools.product((0, 1), repeat=horizon):
        for bits in itertools.product((0, 1), repeat=horizon * num_experts):
            if require_perfect:
                perfect = any(
                    all(bits[t * num_experts + i] == labels[t] for t in range(horizon))
                    for i in range(num_experts)
                )
                if not perfect:
                    continue
            count += 1
    return count


class TestEnumerateAdversarial:
    def test_single_expert_single_round_perfect(self):
        envs = list(enumerate_adversarial(1, 1, True))
        assert len(envs) == 2
        for env in envs:
            assert env.advice[0, 0] == env.labels[0]

    def test_three_experts_single_round_perfect(self):
        # 16 raw combinations, 14 keep at least one perfect expert
        assert len(list(enumerate_adversarial(3, 1, False))) == 16
        assert len(list(enumerate_adversarial(3, 1, True))) == 14

    def test_two_experts_single_round_unfiltered(self):
        assert len(list(enumerate_adversarial(2, 1, False))) == 8

    @pytest.mark.parametrize("num,horizon", [(1, 2), (2, 2), (3, 2), (2, 3)])
    def test_counts_match_brute_force(self, num, horizon):
        for require in (False, True):
            got = sum(1 for _ in enumerate_adversarial(num, horizon, require))
            assert got == brute_force_count(num, horizon, require)

    def test_total_is_power_of_two(self):
        assert sum(1 for _ in enumerate_adversarial(2, 2, False)) == 2 ** (2 * 3)

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            list(enumerate_adversarial(5, 2))
        with pytest.raises(ValueError):
            list(enumerate_adversarial(2, 7))
