"""Control synthesis: maximize team robustness minus a sign-safe control cost.

The objective is ``eta - [eta]_+ / gamma * total_cost``. With gamma at
least the worst-case total cost over the control boxes, the cost term can
never flip the sign, so a positive objective certifies satisfaction.

Optimization runs in two steps: a derivative-free global search (CMA-ES
over the flattened control vector, scored by the vectorized evaluator)
followed by bound-constrained quasi-Newton refinement driven by the
autodiff gradient of the same objective. The final plan is whichever
phase scored higher under the scalar reference objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import autodiff as ad
from . import fasteval
from .cmaes import cmaes_maximize
from .dynamics import AgentModel, ControlPlan, plan_box, rollout
from .formulas import Formula, horizon, validate
from .robustness import (
    RobustnessParams,
    TeamEntry,
    TeamTrajectory,
    eta_exponential,
    rho_traditional,
)


class SynthesisError(ValueError):
    """Scenario/config combinations that cannot be optimized."""


@dataclass(frozen=True)
class Scenario:
    """A team, an outer formula over it, and the planning horizon."""

    agents: tuple[AgentModel, ...]
    formula: Formula
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.horizon < 1:
            raise SynthesisError(f"horizon must be >= 1, got {self.horizon}")

    @property
    def decision_dim(self) -> int:
        return sum(a.control_dim for a in self.agents) * self.horizon


@dataclass(frozen=True)
class CostSpec:
    """Per-agent control cost: l2 norm of the (optionally weighted) sequence."""

    kind: str = "l2"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("l2", "zero", "weighted_l2"):
            raise SynthesisError(f"unknown cost kind '{self.kind}'")
        if self.kind == "weighted_l2" and not self.weights:
            raise SynthesisError("weighted_l2 cost needs a weights vector")


@dataclass(frozen=True)
class CmaesSettings:
    population: int = 50
    generations: int = 200
    sigma0: float = 0.3


@dataclass(frozen=True)
class LocalSettings:
    method: str = "lbfgsb"
    max_iterations: int = 200
    gradient_tolerance: float = 1e-5


@dataclass(frozen=True)
class SynthesisConfig:
    gamma: float = 1000.0
    cost: CostSpec = field(default_factory=CostSpec)
    cmaes: CmaesSettings = field(default_factory=CmaesSettings)
    local: LocalSettings = field(default_factory=LocalSettings)
    params: RobustnessParams = field(default_factory=RobustnessParams)
    metric: str = "exponential"
    seed: int = 0


@dataclass(frozen=True)
class SynthesisResult:
    plan: ControlPlan
    trajectory: TeamTrajectory
    objective: float
    robustness: float
    satisfied: bool
    metric: str
    seed: int
    decision_dim: int
    cmaes_objective: float
    cmaes_generations: int
    cmaes_evaluations: int
    cmaes_seconds: float
    local_objective: float
    local_iterations: int
    local_seconds: float


# ---------------------------------------------------------------------------
# Cost and objective
# ---------------------------------------------------------------------------

def _cost_weights(agent: AgentModel, cost: CostSpec) -> tuple[float, ...]:
    if cost.kind == "weighted_l2":
        if len(cost.weights) != agent.control_dim:
            raise SynthesisError(
                f"cost weights have {len(cost.weights)} entries, agent "
                f"'{agent.name}' has {agent.control_dim} controls"
            )
        return cost.weights
    return (1.0,) * agent.control_dim


def _agent_cost(agent: AgentModel, controls, cost: CostSpec):
    if cost.kind == "zero":
        return 0.0
    w = _cost_weights(agent, cost)
    total = None
    for step in controls:
        for weight, u in zip(w, step):
            term = (weight * u) * (weight * u)
            total = term if total is None else total + term
    return ad.sqrt(total)


def sup_cost_bound(agents, horizon_steps: int, cost: CostSpec = CostSpec()) -> float:
    """Worst-case total cost over the control boxes (the gamma floor)."""
    if cost.kind == "zero":
        return 0.0
    total = 0.0
    for agent in agents:
        w = _cost_weights(agent, cost)
        per_step = 0.0
        for weight, (lo, hi) in zip(w, agent.control_box):
            extreme = max(abs(lo), abs(hi))
            if weight != 0.0 and not np.isfinite(extreme):
                raise SynthesisError(
                    f"agent '{agent.name}' has an unbounded control box with a nonzero cost"
                )
            per_step += (weight * extreme) ** 2
        total += float(np.sqrt(horizon_steps * per_step))
    return total


def _robustness_of(team: TeamTrajectory, formula, config: SynthesisConfig):
    if config.metric == "exponential":
        return eta_exponential(team, formula, 0, config.params)
    if config.metric == "traditional":
        return rho_traditional(team, formula, 0)
    raise SynthesisError(f"unknown metric '{config.metric}'")


def _combine(eta, total_cost, gamma: float):
    gain = ad.maximum([0.0, eta])
    return eta - gain * (1.0 / gamma) * total_cost


def objective(plan: ControlPlan, scenario: Scenario, config: SynthesisConfig) -> float:
    """Scalar reference objective of one plan (plain floats, no tape)."""
    if plan.horizon != scenario.horizon:
        raise SynthesisError(
            f"plan horizon {plan.horizon} does not match scenario horizon {scenario.horizon}"
        )
    team = team_trajectory(scenario, plan)
    eta = _robustness_of(team, scenario.formula, config)
    cost = 0.0
    for agent, controls in zip(scenario.agents, plan.controls):
        cost = cost + _agent_cost(agent, controls, config.cost)
    return float(_combine(eta, cost, config.gamma))


@dataclass(frozen=True)
class GradientReport:
    value: float
    gradient: np.ndarray
    nonsmooth_events: int


def gradient_report(
    flat: np.ndarray, scenario: Scenario, config: SynthesisConfig
) -> GradientReport:
    """Taped objective evaluation: value, gradient, one-sided-derivative count."""
    tape = ad.Tape()
    leaves = [tape.var(v) for v in np.asarray(flat, dtype=float)]
    entries = []
    controls_by_agent = []
    offset = 0
    for agent in scenario.agents:
        block = leaves[offset : offset + agent.control_dim * scenario.horizon]
        offset += agent.control_dim * scenario.horizon
        controls = [
            tuple(block[k * agent.control_dim : (k + 1) * agent.control_dim])
            for k in range(scenario.horizon)
        ]
        controls_by_agent.append(controls)
        _, positions = rollout(agent, controls)
        entries.append(TeamEntry(tuple(positions), agent.capabilities))
    team = TeamTrajectory(tuple(entries))
    eta = _robustness_of(team, scenario.formula, config)
    cost = 0.0
    for agent, controls in zip(scenario.agents, controls_by_agent):
        cost = cost + _agent_cost(agent, controls, config.cost)
    root = _combine(eta, cost, config.gamma)
    if not isinstance(root, ad.ADValue):
        # objective constant in the controls (e.g. `true` with zero cost)
        root = tape.node(float(root))
    adjoint = ad.backward(root)
    grad = np.array([adjoint[leaf.id] for leaf in leaves])
    return GradientReport(value=root.value, gradient=grad, nonsmooth_events=tape.nonsmooth_events)


def objective_and_gradient(
    flat: np.ndarray, scenario: Scenario, config: SynthesisConfig
) -> tuple[float, np.ndarray]:
    """Objective and its gradient with respect to the flat control vector."""
    report = gradient_report(flat, scenario, config)
    return report.value, report.gradient


def objective_batch(
    flats: np.ndarray, scenario: Scenario, config: SynthesisConfig
) -> np.ndarray:
    """Vectorized objective for a population of flat plans."""
    flats = np.atleast_2d(np.asarray(flats, dtype=float))
    positions = fasteval.rollout_batch(scenario.agents, flats, scenario.horizon)
    caps = [a.capabilities for a in scenario.agents]
    eta = fasteval.evaluate_formula(
        positions, caps, scenario.formula, config.params, config.metric
    )[..., 0]
    if config.cost.kind == "zero":
        cost = np.zeros(flats.shape[0])
    else:
        cost = np.zeros(flats.shape[0])
        offset = 0
        for agent in scenario.agents:
            block = flats[:, offset : offset + agent.control_dim * scenario.horizon]
            offset += agent.control_dim * scenario.horizon
            w = np.tile(_cost_weights(agent, config.cost), scenario.horizon)
            cost += np.sqrt(((w * block) ** 2).sum(axis=1))
    return eta - np.maximum(0.0, eta) / config.gamma * cost


def team_trajectory(scenario: Scenario, plan: ControlPlan) -> TeamTrajectory:
    """Roll every agent through its plan into a team trajectory."""
    entries = []
    for agent, controls in zip(scenario.agents, plan.controls):
        _, positions = rollout(agent, controls)
        entries.append(TeamEntry(tuple(positions), agent.capabilities))
    return TeamTrajectory(tuple(entries))


# ---------------------------------------------------------------------------
# Optimization phases
# ---------------------------------------------------------------------------

def local_maximize(
    evaluate_with_gradient,
    lower: np.ndarray,
    upper: np.ndarray,
    start: np.ndarray,
    settings: LocalSettings = LocalSettings(),
) -> tuple[np.ndarray, float, int]:
    """Bound-constrained quasi-Newton ascent from `start`.

    Runs limited-memory BFGS with gradient projection onto the box and
    stops on the iteration cap or when the projected gradient drops under
    the tolerance. Tracks the best evaluated point, so the result is never
    worse than the start.
    """
    if settings.method != "lbfgsb":
        raise SynthesisError(f"unknown local method '{settings.method}'")
    start = np.clip(np.asarray(start, dtype=float), lower, upper)
    value0, grad0 = evaluate_with_gradient(start)
    if not np.isfinite(value0) or not np.all(np.isfinite(grad0)):
        raise SynthesisError("objective or gradient is not finite at the start point")

    best = {"x": start.copy(), "value": value0}

    def negated(x):
        value, grad = evaluate_with_gradient(x)
        if np.isfinite(value) and value > best["value"]:
            best["x"] = np.array(x, dtype=float)
            best["value"] = value
        return -value, -np.asarray(grad, dtype=float)

    # restart when the solver bails before the budget with the projected
    # gradient still large (its quadratic model goes stale at the metric's
    # non-smooth points); a fresh memory usually resumes progress
    iterations = 0
    point = start
    while iterations < settings.max_iterations:
        before = best["value"]
        result = minimize(
            negated,
            point,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(lower, upper)),
            options={
                "maxiter": settings.max_iterations - iterations,
                "gtol": settings.gradient_tolerance,
                "ftol": 1e-14,
            },
        )
        iterations += int(result.nit)
        point = np.clip(result.x, lower, upper)
        converged = bool(np.max(np.abs(result.jac)) < settings.gradient_tolerance)
        improved = best["value"] > before + 1e-15
        if converged or not improved or result.nit == 0:
            break
    if -result.fun > best["value"]:
        return np.clip(result.x, lower, upper), float(-result.fun), iterations
    return best["x"], best["value"], iterations


def validate_problem(scenario: Scenario, config: SynthesisConfig) -> list[str]:
    """Diagnostics for an (agents, formula, config) triple; empty means ok."""
    problems = list(validate(scenario.formula, scenario.agents))
    needed = horizon(scenario.formula)
    if scenario.horizon < needed:
        problems.append(
            f"planning horizon {scenario.horizon} is shorter than the formula horizon {needed}"
        )
    bound = None
    try:
        bound = sup_cost_bound(scenario.agents, scenario.horizon, config.cost)
    except SynthesisError as err:
        problems.append(str(err))
    if bound is not None and config.gamma < bound:
        problems.append(
            f"gamma={config.gamma} is below the worst-case total control cost "
            f"{bound:.4f}; the cost term could flip the objective sign"
        )
    return problems


def synthesize(scenario: Scenario, config: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
    """Two-step synthesis; the returned plan is the better-scoring phase's."""
    problems = validate_problem(scenario, config)
    if problems:
        raise SynthesisError("; ".join(problems))

    lower, upper = plan_box(scenario.agents, scenario.horizon)

    t0 = time.perf_counter()
    cma = cmaes_maximize(
        lambda X: objective_batch(X, scenario, config),
        lower,
        upper,
        population=config.cmaes.population,
        generations=config.cmaes.generations,
        sigma0=config.cmaes.sigma0,
        seed=config.seed,
        x0=np.zeros(lower.size),
    )
    cmaes_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    refined, _, local_iterations = local_maximize(
        lambda x: objective_and_gradient(x, scenario, config),
        lower,
        upper,
        cma.best,
        config.local,
    )
    local_seconds = time.perf_counter() - t1

    # compare both phases under the scalar reference objective
    candidates = []
    for flat in (cma.best, refined):
        plan = ControlPlan.from_flat(flat, scenario.agents, scenario.horizon)
        value = objective(plan, scenario, config)
        cost = sum(
            float(ad.value_of(_agent_cost(a, c, config.cost)))
            for a, c in zip(scenario.agents, plan.controls)
        )
        candidates.append((plan, value, cost))
    (plan_global, value_global, cost_global), (plan_local, value_local, cost_local) = candidates
    if value_local > value_global or (value_local == value_global and cost_local <= cost_global):
        plan, value = plan_local, value_local
    else:
        plan, value = plan_global, value_global

    team = team_trajectory(scenario, plan)
    robustness = float(_robustness_of(team, scenario.formula, config))
    return SynthesisResult(
        plan=plan,
        trajectory=team,
        objective=value,
        robustness=robustness,
        satisfied=value > 0.0,
        metric=config.metric,
        seed=config.seed,
        decision_dim=scenario.decision_dim,
        cmaes_objective=value_global,
        cmaes_generations=cma.generations,
        cmaes_evaluations=cma.evaluations,
        cmaes_seconds=cmaes_seconds,
        local_objective=value_local,
        local_iterations=local_iterations,
        local_seconds=local_seconds,
    )
