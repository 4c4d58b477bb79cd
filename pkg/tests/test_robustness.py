import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catlplus import autodiff as ad
from catlplus.formulas import (
    Always,
    And,
    Atom,
    Eventually,
    Halfplane,
    Interval,
    Not,
    Task,
    TrueNode,
    Until,
)
from catlplus.robustness import (
    EXP_CLAMP,
    RobustnessParams,
    TeamEntry,
    TeamTrajectory,
    TraceTooShortError,
    conj_exp,
    count,
    eta_exponential,
    eta_exponential_individual,
    eval_bool,
    kth_largest,
    rho_traditional,
    rho_traditional_individual,
    task_exp,
)

import gen

X_GE_0 = Atom(Halfplane((1.0, 0.0), 0.0))
X_GT_3 = Atom(Halfplane((1.0, 0.0), -3.0))


def team_of(xs_by_agent, caps_by_agent):
    entries = [
        TeamEntry(tuple((float(x), 0.0) for x in xs), frozenset(caps))
        for xs, caps in zip(xs_by_agent, caps_by_agent)
    ]
    return TeamTrajectory(tuple(entries))


# ---------------------------------------------------------------------------
# direct-substitution oracles for the exponential transforms
# ---------------------------------------------------------------------------

def _clip(v):
    return max(-EXP_CLAMP, min(EXP_CLAMP, v))


def conj_oracle(values, beta):
    mn = min(values)
    if mn == 0.0:
        effs = [0.0] * len(values)
    elif mn < 0.0:
        effs = [mn * math.exp(_clip((v - mn) / mn)) for v in values]
    else:
        effs = [mn * (2.0 - math.exp(_clip((mn - v) / mn))) for v in values]
    return effs, beta * mn + (1.0 - beta) * (sum(effs) / len(values))


def task_oracle(values, m, alpha):
    crit = sorted(values, reverse=True)[m - 1]
    effs = []
    for v in values:
        if crit > 0.0:
            effs.append(
                2.0 * alpha * (math.exp(_clip(crit)) - 1.0)
                / (1.0 + math.exp(_clip(-alpha * (v - crit))))
            )
        else:
            effs.append(
                -2.0 * alpha * (math.exp(_clip(-crit)) - 1.0)
                / (1.0 + math.exp(_clip(alpha * (v - crit))))
            )
    return effs, sum(effs) / len(values)


# ---------------------------------------------------------------------------
# boolean semantics and counting
# ---------------------------------------------------------------------------

def test_task_counts_carriers_only():
    team = team_of(
        [[1.0], [1.0], [-1.0], [5.0]],
        [{"c"}, {"c"}, {"c"}, {"other"}],
    )
    assert count(team, "c", X_GE_0, 0) == 2
    assert count(team, "missing", X_GE_0, 0) == 0
    assert eval_bool(team, Task(X_GE_0, "c", 2), 0) is True
    assert eval_bool(team, Task(X_GE_0, "c", 3), 0) is False


def test_until_pattern_with_right_satisfied_midwindow():
    # left (not on bad side) holds at t=0..2, right first true at t'=3
    right_xs = [-1.0, -1.0, -1.0, 1.0, -1.0, -1.0]
    left_xs = [-1.0, -1.0, -1.0, 9.0, 9.0, 9.0]
    team = team_of([right_xs, left_xs], [{"r"}, {"l"}])
    phi = Until(
        Not(Task(X_GE_0, "l", 1)),
        Task(X_GE_0, "r", 1),
        Interval(0, 5),
    )
    assert eval_bool(team, phi, 0) is True

    # brute-force expansion over the window agrees
    expected = any(
        eval_bool(team, Task(X_GE_0, "r", 1), tp)
        and all(not eval_bool(team, Task(X_GE_0, "l", 1), u) for u in range(0, tp))
        for tp in range(0, 6)
    )
    assert expected is True


def test_until_left_vacuous_at_first_step():
    team = team_of([[1.0, -1.0]], [{"c"}])
    phi = Until(Not(TrueNode()), Task(X_GE_0, "c", 1), Interval(0, 1))
    # right already true at t'=0, so the (always-false) left is never needed
    assert eval_bool(team, phi, 0) is True


def test_horizon_guard():
    team = team_of([[1.0, 1.0]], [{"c"}])
    phi = Task(Eventually(X_GE_0, Interval(0, 3)), "c", 1)
    with pytest.raises(TraceTooShortError):
        eval_bool(team, phi, 0)
    with pytest.raises(TraceTooShortError):
        rho_traditional(team, phi, 0)
    with pytest.raises(TraceTooShortError):
        eta_exponential(team, phi, 0)


# ---------------------------------------------------------------------------
# traditional robustness
# ---------------------------------------------------------------------------

def test_masking_example_traditional_score_is_two():
    phi = Task(Eventually(X_GT_3, Interval(0, 4)), "c", 1)
    flat = team_of([[1.0, 1.0, 1.0, 1.0, 5.0]], [{"c"}])
    ramp = team_of([[1.0, 2.0, 3.0, 4.0, 5.0]], [{"c"}])
    assert rho_traditional(flat, phi, 0) == 2.0
    assert rho_traditional(ramp, phi, 0) == 2.0


def test_task_uses_kth_largest_inner_robustness():
    team = team_of([[3.0], [1.0], [2.0]], [{"c"}, {"c"}, {"c"}])
    assert rho_traditional(team, Task(X_GE_0, "c", 2), 0) == 2.0
    assert kth_largest([3.0, 1.0, 2.0], 2) == 2.0


def test_task_count_above_carriers_is_rejected():
    team = team_of([[1.0], [1.0]], [{"c"}, {"c"}])
    with pytest.raises(ValueError):
        rho_traditional(team, Task(X_GE_0, "c", 3), 0)
    with pytest.raises(ValueError):
        eta_exponential(team, Task(X_GE_0, "c", 3), 0)


# ---------------------------------------------------------------------------
# exponential operators
# ---------------------------------------------------------------------------

def test_conj_exp_spot_value():
    assert conj_exp([-1.0, 1.0], 0.0) == pytest.approx(-(1.0 + math.exp(-2.0)) / 2.0, abs=1e-15)


def test_conj_exp_zero_minimum_is_zero():
    assert conj_exp([0.0, 7.0, 3.0], 0.0) == 0.0
    assert conj_exp([0.0, 7.0, 3.0], 0.7) == 0.0


def test_task_exp_spot_values():
    assert task_exp([1.0], 1, 1.0) == pytest.approx(math.e - 1.0, abs=1e-12)
    effs, expected = task_oracle([2.0, 1.0, -1.0], 2, 1.0)
    assert task_exp([2.0, 1.0, -1.0], 2, 1.0) == pytest.approx(expected, abs=1e-12)
    assert effs == pytest.approx([2.5123, 1.7183, 0.4096], abs=5e-4)


def test_task_exp_zero_critical_is_zero():
    assert task_exp([4.0, 0.0, -1.0], 2, 1.0) == 0.0
    assert task_exp([0.0], 1, 3.0) == 0.0


def test_task_exp_range_errors():
    with pytest.raises(ValueError):
        task_exp([1.0, 2.0], 3, 1.0)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=8),
    st.floats(0, 1, allow_nan=False),
)
def test_conj_exp_matches_direct_substitution(values, beta):
    effs, expected = conj_oracle(values, beta)
    got = conj_exp(values, beta)
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)
    mn = min(values)
    for eff in effs:  # sign coherence (zero allowed: transforms may underflow)
        if mn < 0:
            assert eff <= 0
        elif mn > 0:
            assert eff >= 0
        else:
            assert eff == 0


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(-30, 30, allow_nan=False), min_size=1, max_size=6),
    st.integers(1, 6),
    st.floats(0.2, 4.0, allow_nan=False),
)
def test_task_exp_matches_direct_substitution(values, m, alpha):
    if m > len(values):
        m = len(values)
    effs, expected = task_oracle(values, m, alpha)
    assert task_exp(values, m, alpha) == pytest.approx(expected, rel=1e-12, abs=1e-12)
    crit = sorted(values, reverse=True)[m - 1]
    for eff in effs:  # sign coherence with the critical value (zero on underflow)
        if crit > 0:
            assert eff >= 0
        elif crit == 0:
            assert eff == 0
        else:
            assert eff <= 0


@settings(max_examples=400, deadline=None)
@given(st.lists(st.floats(-1e9, 1e9, allow_nan=False), min_size=1, max_size=10))
def test_beta_one_is_exact_minimum(values):
    assert abs(conj_exp(values, 1.0) - min(values)) <= 1e-12 * max(1.0, abs(min(values)))


@pytest.mark.parametrize("eps", [1e-3, 1e-6])
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_boundary_continuity(eps, sign):
    values = [sign * eps, 0.5, 1.0] if sign > 0 else [sign * eps, 0.5, 1.0]
    assert abs(conj_exp(values, 0.0)) <= 2.0 * eps
    assert abs(conj_exp(values, 0.3)) <= 2.0 * eps
    # critical element of the task transform at +/- eps
    assert abs(task_exp([1.0, sign * eps, -1.0], 2, 1.0)) <= 2.1 * eps
    assert abs(task_exp([1.0, sign * eps, -1.0], 2, 3.0)) <= 6.5 * eps


def test_large_values_do_not_overflow():
    assert math.isfinite(conj_exp([-1e300, 5.0], 0.0))
    assert math.isfinite(task_exp([1e4, -1e4], 1, 1.0))
    assert math.isfinite(task_exp([1e4, -1e4], 2, 1.0))


def test_mask_eliminating_partials_positive():
    rng = np.random.default_rng(11)
    for _ in range(20):
        values = gen.sample_separated_vector(rng, 4)
        for partial in gen.fd_partials(lambda v: conj_exp(v, 0.0), values):
            assert partial > 0.0
        for partial in gen.fd_partials(lambda v: task_exp(v, 2, 1.0), values):
            assert partial > 0.0


def test_conj_exp_partials_match_finite_differences():
    rng = np.random.default_rng(3)
    values = gen.sample_separated_vector(rng, 5)
    tape = ad.Tape()
    leaves = [tape.var(v) for v in values]
    root = conj_exp(leaves, 0.25)
    adjoint = ad.backward(root)
    fd = gen.fd_partials(lambda v: conj_exp(v, 0.25), values)
    for leaf, expected in zip(leaves, fd):
        assert adjoint[leaf.id] == pytest.approx(expected, rel=1e-5, abs=1e-8)
        assert adjoint[leaf.id] > 0.0


def test_critical_partial_dominates_and_decays_with_distance():
    rng = np.random.default_rng(23)
    for _ in range(10):
        values = gen.sample_separated_vector(rng, 5)
        partials = gen.fd_partials(lambda v: conj_exp(v, 0.0), values)
        mn_idx = int(np.argmin(values))
        others = [(abs(values[i] - values[mn_idx]), partials[i]) for i in range(5) if i != mn_idx]
        assert partials[mn_idx] >= max(p for _, p in others) - 1e-9
        ordered = sorted(others)
        for (_, near), (_, far) in zip(ordered, ordered[1:]):
            assert near >= far - 1e-9

        partials = gen.fd_partials(lambda v: task_exp(v, 2, 1.0), values)
        crit_val = sorted(values, reverse=True)[1]
        crit_idx = values.index(crit_val)
        others = [(abs(values[i] - crit_val), partials[i]) for i in range(5) if i != crit_idx]
        assert partials[crit_idx] >= max(p for _, p in others) - 1e-9
        ordered = sorted(others)
        for (_, near), (_, far) in zip(ordered, ordered[1:]):
            assert near >= far - 1e-9


def test_task_alpha_large_depends_only_on_critical_value():
    shared_crit = 0.8
    a = task_exp([2.5, shared_crit, -1.5], 2, 50.0)
    b = task_exp([9.0, shared_crit, -0.4], 2, 50.0)
    assert a == pytest.approx(b, rel=1e-3)


# ---------------------------------------------------------------------------
# recursive exponential robustness
# ---------------------------------------------------------------------------

def test_masking_example_exponential_prefers_ramp():
    phi = Task(Eventually(X_GT_3, Interval(0, 4)), "c", 1)
    flat = team_of([[1.0, 1.0, 1.0, 1.0, 5.0]], [{"c"}])
    ramp = team_of([[1.0, 2.0, 3.0, 4.0, 5.0]], [{"c"}])
    flat_eta = eta_exponential(flat, phi, 0)
    ramp_eta = eta_exponential(ramp, phi, 0)
    assert flat_eta > 0 and ramp_eta > 0
    assert ramp_eta > flat_eta


def test_negation_antisymmetry_exact():
    rng = np.random.default_rng(5)
    params = RobustnessParams(alpha=1.3, beta=0.4)
    for _ in range(60):
        team, formula = gen.random_instance(rng, depth=2, max_h=5)
        assert rho_traditional(team, Not(formula), 0) == -rho_traditional(team, formula, 0)
        assert eta_exponential(team, Not(formula), 0, params) == -eta_exponential(
            team, formula, 0, params
        )


def test_soundness_sample():
    rng = np.random.default_rng(1234)
    params = RobustnessParams()
    for _ in range(200):
        team, formula = gen.random_instance(rng)
        truth = eval_bool(team, formula, 0)
        for value in (rho_traditional(team, formula, 0), eta_exponential(team, formula, 0, params)):
            if abs(value) > 1e-9:
                assert (value > 0) == truth


def test_beta_one_reduces_inner_robustness_to_traditional():
    rng = np.random.default_rng(77)
    params = RobustnessParams(alpha=2.0, beta=1.0)
    for _ in range(50):
        horizon = int(rng.integers(1, 6))
        phi = gen.random_inner(rng, 3, horizon)
        positions = tuple(
            (float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3))) for _ in range(horizon + 1)
        )
        rho = rho_traditional_individual(positions, phi, 0)
        eta = eta_exponential_individual(positions, phi, 0, params)
        assert eta == pytest.approx(rho, rel=1e-12, abs=1e-12)


def test_monotone_formulas_never_lose_robustness_when_a_value_rises():
    rng = np.random.default_rng(9)
    params = RobustnessParams()
    for _ in range(40):
        n_agents = int(rng.integers(2, 4))
        horizon = int(rng.integers(1, 5))
        team = gen.random_team(rng, n_agents, horizon)
        formula = gen.random_monotone_outer(
            rng, 2, horizon, [e.capabilities for e in team.entries]
        )
        before = eta_exponential(team, formula, 0, params)
        j = int(rng.integers(0, n_agents))
        t = int(rng.integers(0, horizon + 1))
        entries = list(team.entries)
        positions = list(entries[j].positions)
        x, y = positions[t]
        positions[t] = (x + float(rng.uniform(0.01, 0.5)), y)
        entries[j] = TeamEntry(tuple(positions), entries[j].capabilities)
        after = eta_exponential(TeamTrajectory(tuple(entries)), formula, 0, params)
        assert after >= before - 1e-12


def test_trajectory_gradient_matches_finite_differences():
    # two agents, shared clock; gradient wrt every trajectory coordinate
    rng = np.random.default_rng(42)
    xs = rng.uniform(-2, 2, size=(2, 5, 2))
    phi = And(
        (
            Task(Eventually(X_GE_0, Interval(0, 2)), "a", 1),
            Always(Task(Atom(Halfplane((0.0, 1.0), 0.5)), "b", 1), Interval(0, 2)),
            Until(Task(X_GE_0, "b", 1), Task(X_GT_3, "a", 1), Interval(0, 2)),
        )
    )
    params = RobustnessParams(beta=0.2)

    def eta_at(flat):
        values = np.asarray(flat).reshape(2, 5, 2)
        team = TeamTrajectory(
            (
                TeamEntry(tuple(map(tuple, values[0])), frozenset({"a"})),
                TeamEntry(tuple(map(tuple, values[1])), frozenset({"b"})),
            )
        )
        return eta_exponential(team, phi, 0, params)

    flat = [float(v) for v in xs.ravel()]
    tape = ad.Tape()
    leaves = [tape.var(v) for v in flat]
    values = np.array(leaves, dtype=object).reshape(2, 5, 2)
    team = TeamTrajectory(
        (
            TeamEntry(tuple(map(tuple, values[0])), frozenset({"a"})),
            TeamEntry(tuple(map(tuple, values[1])), frozenset({"b"})),
        )
    )
    root = eta_exponential(team, phi, 0, params)
    assert root.value == eta_at(flat)
    adjoint = ad.backward(root)
    fd = gen.fd_partials(eta_at, flat)
    for leaf, expected in zip(leaves, fd):
        got = adjoint[leaf.id]
        assert abs(got - expected) / max(abs(got), abs(expected), 1.0) < 1e-4


def test_true_literal_scores_zero():
    team = team_of([[1.0]], [{"c"}])
    assert rho_traditional(team, TrueNode(), 0) == 0.0
    assert eta_exponential(team, TrueNode(), 0) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        RobustnessParams(alpha=0.0)
    with pytest.raises(ValueError):
        RobustnessParams(beta=1.5)
