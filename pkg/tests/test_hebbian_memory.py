import numpy as np
import pytest

from spinnet.hebbian_memory import (
    HebbConfig,
    MemoryMatrix,
    PatternSet,
    RecallResult,
    binarize_field,
    combined_energy,
    hebb_step,
    learn,
    load_patterns,
    recall,
    save_patterns,
)

LEARN = HebbConfig(a_weight=10.0, b_weight=0.1, c_scale=1.0, tau_t=1.0)
RECALL = HebbConfig(a_weight=0.0, b_weight=1.0, c_scale=1.0, tau_t=1.0, mode="recall")


def population_matrix(patterns, c=1.0, weights=None):
    """Closed-form oracle: c * weighted pattern correlation, zero diagonal."""
    p, n = patterns.shape
    w = np.full(p, 1.0 / p) if weights is None else np.asarray(weights)
    t = c * (patterns.T * w) @ patterns
    np.fill_diagonal(t, 0.0)
    return t


class TestHebbConfig:
    def test_learning_requires_dominant_a(self):
        with pytest.raises(ValueError, match="a_weight > b_weight"):
            HebbConfig(a_weight=0.1, b_weight=1.0, c_scale=1.0, tau_t=1.0)

    def test_recall_requires_dominant_b(self):
        with pytest.raises(ValueError, match="b_weight > a_weight"):
            HebbConfig(a_weight=1.0, b_weight=0.1, c_scale=1.0, tau_t=1.0, mode="recall")

    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            HebbConfig(a_weight=1.0, b_weight=0.0, c_scale=1.0, tau_t=1.0, mode="dream")


class TestCombinedEnergy:
    def test_field_term_only(self):
        cfg = HebbConfig(a_weight=1.0, b_weight=0.0, c_scale=1.0, tau_t=1.0)
        mem = MemoryMatrix(np.zeros((3, 3)))
        h = np.array([0.5, -1.0, 2.0])
        s = np.array([1.0, 1.0, -1.0])
        assert combined_energy(s, mem, h, cfg) == pytest.approx(-(h @ s), rel=1e-15)

    def test_single_pair_with_potential(self):
        c = 0.7
        cfg = HebbConfig(a_weight=0.0, b_weight=1.0, c_scale=c, tau_t=1.0, mode="recall")
        t = np.zeros((2, 2))
        t[0, 1] = t[1, 0] = c
        mem = MemoryMatrix(t)
        e = combined_energy(np.array([1.0, 1.0]), mem, np.zeros(2), cfg)
        assert e == pytest.approx(-c / 2.0, rel=1e-14)

    def test_weight_gradient_matches_finite_difference(self):
        # dH/dT_12 = -B s_1 s_2 + B T_12 / c; T_12 is one parameter, so the
        # numerical probe perturbs both symmetric entries together.
        rng = np.random.default_rng(70)
        cfg = HebbConfig(a_weight=0.0, b_weight=1.3, c_scale=0.8, tau_t=1.0, mode="recall")
        n = 4
        t = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        t[iu] = rng.uniform(-1.0, 1.0, size=len(iu[0]))
        t = t + t.T
        s = rng.choice([-1.0, 1.0], size=n)
        h = rng.uniform(-1.0, 1.0, size=n)
        step = 1e-6
        analytic = -cfg.b_weight * s[0] * s[1] + cfg.b_weight * t[0, 1] / cfg.c_scale

        def energy_at(t12):
            tt = t.copy()
            tt[0, 1] = tt[1, 0] = t12
            return combined_energy(s, MemoryMatrix(tt), h, cfg)

        fd = (energy_at(t[0, 1] + step) - energy_at(t[0, 1] - step)) / (2.0 * step)
        assert fd == pytest.approx(analytic, rel=1e-8)

    def test_zero_c_rejected(self):
        cfg = HebbConfig(a_weight=1.0, b_weight=0.0, c_scale=0.0, tau_t=1.0)
        with pytest.raises(ValueError, match="c_scale > 0"):
            combined_energy(np.ones(2), MemoryMatrix(np.zeros((2, 2))), np.zeros(2), cfg)


class TestHebbStep:
    def test_geometric_approach_to_outer_product(self):
        cfg = HebbConfig(a_weight=10.0, b_weight=0.1, c_scale=1.5, tau_t=1.0)
        s = np.array([1.0, -1.0, 1.0])
        target = 1.5 * np.outer(s, s)
        np.fill_diagonal(target, 0.0)
        mem = MemoryMatrix(np.zeros((3, 3)))
        for k in range(1, 10):
            mem = hebb_step(mem, s, cfg, dt=0.5)
            assert mem.t == pytest.approx(target * (1.0 - 2.0 ** -k), rel=1e-13)

    def test_zero_dt_is_identity(self):
        rng = np.random.default_rng(72)
        t = np.zeros((4, 4))
        iu = np.triu_indices(4, k=1)
        t[iu] = rng.uniform(-1.0, 1.0, size=len(iu[0]))
        mem = MemoryMatrix(t + t.T)
        out = hebb_step(mem, np.ones(4), LEARN, dt=0.0)
        assert np.array_equal(out.t, mem.t)

    def test_symmetry_and_zero_diagonal_preserved(self):
        rng = np.random.default_rng(74)
        mem = MemoryMatrix(np.zeros((5, 5)))
        for _ in range(20):
            s = rng.choice([-1.0, 1.0], size=5)
            mem = hebb_step(mem, s, LEARN, dt=0.3)
            assert np.array_equal(mem.t, mem.t.T)
            assert np.all(np.diagonal(mem.t) == 0.0)

    def test_recall_mode_rejected(self):
        with pytest.raises(ValueError, match="learning"):
            hebb_step(MemoryMatrix(np.zeros((2, 2))), np.ones(2), RECALL, dt=0.1)

    def test_rate_guard(self):
        with pytest.raises(ValueError, match="dt/tau_t"):
            hebb_step(MemoryMatrix(np.zeros((2, 2))), np.ones(2), LEARN, dt=2.0)


class TestLearn:
    def test_single_pattern_fixed_point(self):
        s = np.array([1.0, 1.0, -1.0, -1.0])
        mem = learn(PatternSet(s[None, :]), LEARN, dt=0.5, sweeps=60)
        target = population_matrix(s[None, :])
        assert mem.t == pytest.approx(target, abs=1e-6)

    def test_two_orthogonal_patterns(self):
        pats = np.array([[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])
        cfg = HebbConfig(a_weight=10.0, b_weight=0.1, c_scale=2.0, tau_t=1.0)
        mem = learn(PatternSet(pats), cfg, dt=1e-3, sweeps=10000)
        target = population_matrix(pats, c=2.0)
        assert np.max(np.abs(mem.t - target)) <= 0.02 * 2.0

    def test_alternating_patterns_near_population_average(self):
        rng = np.random.default_rng(76)
        pats = rng.choice([-1.0, 1.0], size=(2, 6))
        mem = learn(PatternSet(pats), LEARN, dt=1e-3, sweeps=10000)
        target = population_matrix(pats)
        # 2% of the coupling scale c; entries whose correlations cancel have
        # target exactly 0 and make a ratio test meaningless.
        assert np.max(np.abs(mem.t - target)) <= 0.02 * 1.0

    def test_presentation_weights(self):
        pats = np.array([[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])
        ps = PatternSet(pats, weights=np.array([0.75, 0.25]))
        mem = learn(ps, LEARN, dt=1e-3, sweeps=8000)
        target = population_matrix(pats, weights=[0.75, 0.25])
        assert np.max(np.abs(mem.t - target)) <= 0.02

    def test_zero_c_gives_zero_matrix(self):
        cfg = HebbConfig(a_weight=10.0, b_weight=0.1, c_scale=0.0, tau_t=1.0)
        mem = learn(PatternSet(np.ones((1, 3))), cfg, dt=0.5, sweeps=30)
        assert np.all(mem.t == 0.0)

    def test_empty_patterns_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            PatternSet(np.empty((0, 4)))

    def test_recall_mode_rejected(self):
        with pytest.raises(ValueError, match="learning"):
            learn(PatternSet(np.ones((1, 3))), RECALL, dt=0.1, sweeps=1)


class TestRecall:
    def test_stored_pattern_is_stable(self):
        rng = np.random.default_rng(78)
        s = rng.choice([-1.0, 1.0], size=20)
        mem = MemoryMatrix(population_matrix(s[None, :], c=0.5))
        res = recall(mem, s)
        assert res.converged
        assert np.array_equal(res.spins, s)

    def test_negated_pattern_is_stable(self):
        rng = np.random.default_rng(80)
        s = rng.choice([-1.0, 1.0], size=20)
        mem = MemoryMatrix(population_matrix(s[None, :]))
        res = recall(mem, -s)
        assert np.array_equal(res.spins, -s)

    def test_corrupted_probe_recovers_pattern(self):
        rng = np.random.default_rng(7003)
        pats = rng.choice([-1.0, 1.0], size=(5, 100))
        mem = MemoryMatrix(population_matrix(pats))
        probe = pats[2].copy()
        probe[rng.choice(100, size=10, replace=False)] *= -1.0
        res = recall(mem, probe)
        assert int(np.sum(res.spins == pats[2])) >= 99

    def test_energy_trace_non_increasing(self):
        rng = np.random.default_rng(82)
        pats = rng.choice([-1.0, 1.0], size=(4, 50))
        mem = MemoryMatrix(population_matrix(pats))
        for h_weight in (0.0, 0.5):
            probe = pats[1].copy()
            probe[rng.choice(50, size=15, replace=False)] *= -1.0
            res = recall(mem, probe, h_weight=h_weight)
            assert np.all(np.diff(res.energy_trace) <= 0.0)

    def test_weights_never_mutated(self):
        rng = np.random.default_rng(84)
        pats = rng.choice([-1.0, 1.0], size=(3, 30))
        t = population_matrix(pats)
        snapshot = t.tobytes()
        mem = MemoryMatrix(t)
        recall(mem, pats[0])
        assert mem.t.tobytes() == snapshot

    def test_sweep_budget_flag(self):
        rng = np.random.default_rng(86)
        pats = rng.choice([-1.0, 1.0], size=(5, 100))
        mem = MemoryMatrix(population_matrix(pats))
        probe = pats[0].copy()
        probe[rng.choice(100, size=30, replace=False)] *= -1.0
        res = recall(mem, probe, max_sweeps=1)
        assert not res.converged

    def test_degradation_is_monotone_on_average(self):
        grid = [0.0, 0.1, 0.2, 0.35, 0.45]
        averages = []
        for frac in grid:
            accs = []
            for seed in range(20):
                rng = np.random.default_rng(8100 + seed)
                pats = rng.choice([-1.0, 1.0], size=(5, 100))
                mem = MemoryMatrix(population_matrix(pats))
                probe = pats[0].copy()
                k = int(round(frac * 100))
                if k:
                    probe[rng.choice(100, size=k, replace=False)] *= -1.0
                res = recall(mem, probe)
                accs.append(float(np.mean(res.spins == pats[0])))
            averages.append(float(np.mean(accs)))
        assert all(a >= b for a, b in zip(averages, averages[1:]))


class TestPatternIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(88)
        ps = PatternSet(rng.choice([-1.0, 1.0], size=(3, 12)))
        path = tmp_path / "patterns.txt"
        save_patterns(ps, path)
        loaded = load_patterns(path)
        assert np.array_equal(loaded.patterns, ps.patterns)

    def test_binary_characters(self, tmp_path):
        path = tmp_path / "patterns.txt"
        path.write_text("1100\n+-+-\n")
        ps = load_patterns(path)
        assert np.array_equal(ps.patterns[0], [1.0, 1.0, -1.0, -1.0])
        assert np.array_equal(ps.patterns[1], [1.0, -1.0, 1.0, -1.0])

    def test_bad_character(self, tmp_path):
        path = tmp_path / "patterns.txt"
        path.write_text("+x-\n")
        with pytest.raises(ValueError, match="pattern character"):
            load_patterns(path)


def test_binarize_field_sign_convention():
    assert np.array_equal(binarize_field([0.5, -0.1, 0.0]), [1.0, -1.0, 1.0])


def test_recall_result_type():
    mem = MemoryMatrix(np.zeros((2, 2)))
    res = recall(mem, np.array([1.0, -1.0]))
    assert isinstance(res, RecallResult)
