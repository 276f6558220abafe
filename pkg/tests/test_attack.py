import numpy as np
import pytest

from qlattack.attack import (
    AttackProblem,
    BayesianOptimizationAttack,
    BOConfig,
    DirectConfig,
    RandomSearchAttack,
    RandomSearchConfig,
    bo_attack,
    l1_annulus_offset,
    objective_from_response,
    random_search_attack,
    read_trace,
    sample_l1_annulus,
    write_trace,
)
from qlattack.oracle import CountingOracle, OracleResponse

SPAM, HAM = 1, 0


def threshold_oracle(x_A, shift=0.05, sharpness=40.0):
    """Spam unless feature 0 moves more than ``shift`` above the seed."""
    def f(x):
        p_spam = 1.0 / (1.0 + np.exp(sharpness * (x[0] - x_A[0] - shift)))
        return OracleResponse(SPAM, p_spam) if p_spam >= 0.5 else OracleResponse(HAM, 1 - p_spam)
    return f


def never_flip(x):
    return OracleResponse(SPAM, 0.9)


def always_flip(x):
    return OracleResponse(HAM, 0.8)


def test_objective_untargeted_same_label():
    prob = AttackProblem([0.5], SPAM, 1.0)
    assert objective_from_response(OracleResponse(SPAM, 0.9), prob) == 0.9


def test_objective_untargeted_flipped():
    prob = AttackProblem([0.5], SPAM, 1.0)
    assert objective_from_response(OracleResponse(HAM, 0.8), prob) == pytest.approx(0.2)


def test_objective_targeted():
    prob = AttackProblem([0.5], SPAM, 1.0, target_label=HAM)
    assert objective_from_response(OracleResponse(HAM, 0.8), prob) == pytest.approx(0.2)
    assert objective_from_response(OracleResponse(SPAM, 0.7), prob) == pytest.approx(0.7)


def test_problem_validation():
    with pytest.raises(ValueError):
        AttackProblem([0.5], SPAM, 0.0)
    with pytest.raises(ValueError):
        AttackProblem([0.5], SPAM, 1.0, N=0)
    with pytest.raises(ValueError):
        AttackProblem([1.5], SPAM, 1.0)


def test_bo_attack_finds_known_boundary():
    x_A = np.array([0.4, 0.5, 0.3])
    oracle = CountingOracle(threshold_oracle(x_A))
    prob = AttackProblem(x_A, SPAM, C=0.5, N=50)
    out = bo_attack(oracle, prob)
    assert out.success
    assert out.x_star[0] > x_A[0] + 0.05
    assert out.queries == len(out.trace) == oracle.count
    assert all(prob.cost(r.x) <= prob.C + 1e-9 for r in out.trace)
    assert out.trace[-1].label == HAM


def test_bo_attack_fails_after_exactly_N_queries():
    x_A = np.array([0.4, 0.5])
    # boundary 0.3 away along feature 0 but budget only 0.2
    oracle = CountingOracle(threshold_oracle(x_A, shift=0.3))
    prob = AttackProblem(x_A, SPAM, C=0.2, N=12)
    out = bo_attack(oracle, prob, direct_cfg=DirectConfig(budget=100))
    assert not out.success and out.x_star is None
    assert out.queries == 12 == oracle.count
    assert all(prob.cost(r.x) <= prob.C + 1e-9 for r in out.trace)


def test_bo_gp_holds_seed_plus_queries():
    x_A = np.array([0.4, 0.5])
    sizes = []
    bo_attack(never_flip, AttackProblem(x_A, SPAM, 0.2, N=6), direct_cfg=DirectConfig(100),
              callback=lambda t, s: sizes.append((t, s.n_observations)))
    assert sizes == [(t, t + 1) for t in range(1, 7)]


def test_bo_without_seed_origin_queries_x_A_first():
    x_A = np.array([0.4, 0.5])
    out = bo_attack(never_flip, AttackProblem(x_A, SPAM, 0.2, N=2), BOConfig(seed_origin=False), DirectConfig(50))
    assert np.array_equal(out.trace[0].x, x_A)


def test_bo_targeted_mode():
    x_A = np.array([0.4, 0.5, 0.3])
    prob = AttackProblem(x_A, SPAM, C=0.5, N=50, target_label=HAM)
    out = bo_attack(threshold_oracle(x_A), prob)
    assert out.success and out.trace[-1].label == HAM


def test_bo_success_is_reproducible_out_of_band():
    x_A = np.array([0.4, 0.5, 0.3])
    f = threshold_oracle(x_A)
    out = bo_attack(f, AttackProblem(x_A, SPAM, C=0.5))
    assert f(out.x_star).label != SPAM


def test_bo_deterministic():
    x_A = np.array([0.4, 0.5, 0.3])
    a = bo_attack(threshold_oracle(x_A), AttackProblem(x_A, SPAM, C=0.5))
    b = bo_attack(threshold_oracle(x_A), AttackProblem(x_A, SPAM, C=0.5))
    assert a.queries == b.queries
    assert all(np.array_equal(r.x, s.x) for r, s in zip(a.trace, b.trace))


def test_paper_literal_orientation_runs():
    x_A = np.array([0.4, 0.5])
    out = bo_attack(never_flip, AttackProblem(x_A, SPAM, 0.2, N=3), BOConfig(orientation="paper-literal"),
                    DirectConfig(60))
    assert out.queries == 3


def test_annulus_pre_clip_distance_in_band():
    rng = np.random.default_rng(0)
    C, eps = 2.0, 0.05
    for _ in range(2000):
        off = l1_annulus_offset(7, C, eps, rng)
        assert C - eps < np.abs(off).sum() <= C + 1e-12


def test_annulus_interior_seed_no_clipping():
    rng = np.random.default_rng(1)
    x_A = np.full(5, 0.5)
    for _ in range(500):
        x = sample_l1_annulus(x_A, 0.3, 0.05, (0.0, 1.0), rng)
        assert 0.25 < np.abs(x - x_A).sum() <= 0.3 + 1e-12


def test_annulus_clipped_stays_within_budget():
    rng = np.random.default_rng(2)
    x_A = np.array([0.0, 1.0, 0.02, 0.5])
    for _ in range(500):
        x = sample_l1_annulus(x_A, 1.5, 0.05, (0.0, 1.0), rng)
        assert np.all((x >= 0) & (x <= 1))
        assert np.abs(x - x_A).sum() <= 1.5 + 1e-12


def test_annulus_mean_coordinate_magnitude():
    # uniform on the L1 sphere: each |offset_d| has mean r/d
    rng = np.random.default_rng(3)
    d, C, eps = 6, 3.0, 0.05
    offs = np.array([l1_annulus_offset(d, C, eps, rng) for _ in range(100_000)])
    assert np.abs(offs).mean(0) == pytest.approx(np.full(d, C / d), rel=0.05)
    # signs balanced
    assert np.abs((offs > 0).mean() - 0.5) < 0.01


def test_annulus_rejects_epsilon_not_below_C():
    with pytest.raises(ValueError):
        sample_l1_annulus([0.5], 0.05, 0.05, (0.0, 1.0), np.random.default_rng(0))


def test_random_search_immediate_hit():
    oracle = CountingOracle(always_flip)
    out = random_search_attack(oracle, AttackProblem([0.5, 0.5], SPAM, 1.0), rng=0)
    assert out.success and out.queries == 1 == oracle.count


def test_random_search_cap():
    oracle = CountingOracle(never_flip)
    out = random_search_attack(oracle, AttackProblem([0.5, 0.5], SPAM, 1.0), RandomSearchConfig(0.05, 500), rng=0)
    assert not out.success and out.queries == 500 == oracle.count


def test_random_search_seeded_trace_identical():
    prob = AttackProblem([0.3, 0.6, 0.1], SPAM, 0.8)
    a = random_search_attack(never_flip, prob, RandomSearchConfig(0.05, 40), rng=11)
    b = random_search_attack(never_flip, prob, RandomSearchConfig(0.05, 40), rng=11)
    assert all(np.array_equal(r.x, s.x) for r, s in zip(a.trace, b.trace))


def test_estimator_front_ends():
    x_A = np.array([0.4, 0.5, 0.3])
    bo = BayesianOptimizationAttack(C=0.5, direct_budget=300)
    assert bo.get_params()["C"] == 0.5
    assert bo.attack(threshold_oracle(x_A), x_A, SPAM).success
    rs = RandomSearchAttack(C=0.5, cap=10, random_state=0)
    assert rs.attack(never_flip, x_A, SPAM).queries == 10


def test_trace_export_round_trip(tmp_path):
    x_A = np.array([0.4, 0.5, 0.3])
    out = bo_attack(threshold_oracle(x_A), AttackProblem(x_A, SPAM, C=0.5))
    write_trace(out, x_A, tmp_path / "t.jsonl")
    rows = read_trace(tmp_path / "t.jsonl")
    assert len(rows) == out.queries
    for row, rec in zip(rows, out.trace):
        assert row["step"] == rec.step and row["label"] == rec.label
        x = x_A.copy()
        for k, v in row["deltas"].items():
            x[int(k)] += v
        assert np.allclose(x, rec.x, atol=1e-15)
        assert row["l1_cost"] == pytest.approx(np.abs(rec.x - x_A).sum())
        assert row["objective"] == rec.objective


def test_bo_with_lengthscale_refit():
    x_A = np.array([0.4, 0.5, 0.3])
    oracle = CountingOracle(threshold_oracle(x_A))
    prob = AttackProblem(x_A, SPAM, C=0.5, N=50)
    out = bo_attack(oracle, prob, BOConfig(refit_every=3))
    assert out.success and out.queries == oracle.count
    assert all(prob.cost(r.x) <= prob.C + 1e-9 for r in out.trace)


def test_reach_box_lets_bo_raise_zero_features():
    # label flips only when the (zero) second feature grows past 0.2
    x_A = np.array([0.5, 0.0, 0.5])

    def f(x):
        return OracleResponse(HAM, 0.9) if x[1] > 0.2 else OracleResponse(SPAM, 0.9 - x[1])

    prob = AttackProblem(x_A, SPAM, C=0.5, N=30)
    assert bo_attack(f, prob, BOConfig(box="reach"), DirectConfig(200)).success
    assert not bo_attack(f, prob, BOConfig(box="symmetric"), DirectConfig(200)).success
