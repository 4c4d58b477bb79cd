"""Service layer: pydantic request/response models, handlers, FastAPI app.

The handlers are plain functions from request model to response model;
the HTTP routes and the command-line client both call them, so one code
path serves in-process and remote use.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .dynamics import ControlPlan, plan_box
from .formulas import And, horizon
from .parsing import print_formula
from .persist import (
    TrajectoryFileError,
    controls_csv,
    parse_trajectory_csv,
    summary_text,
    trajectories_csv,
)
from .plotting import scenario_svg
from .robustness import eta_exponential, eval_bool, rho_traditional
from .scenario import ScenarioConfig, ScenarioError, build_scenario, scale_counts
from .synthesis import gradient_report, objective, synthesize

GRADCHECK_TOLERANCE = 1e-4


class Overrides(BaseModel):
    """Optional knobs applied on top of the scenario file."""

    model_config = ConfigDict(extra="forbid")
    seed: int | None = None
    alpha: float | None = Field(default=None, gt=0)
    beta: float | None = Field(default=None, ge=0, le=1)
    generations: int | None = Field(default=None, ge=1)
    population: int | None = Field(default=None, ge=4)
    metric: str | None = None


def _apply_overrides(config: ScenarioConfig, overrides: Overrides | None) -> ScenarioConfig:
    if overrides is None:
        return config
    out = config.model_copy(deep=True)
    if overrides.seed is not None:
        out.seed = overrides.seed
    if overrides.alpha is not None:
        out.robustness.alpha = overrides.alpha
    if overrides.beta is not None:
        out.robustness.beta = overrides.beta
    if overrides.metric is not None:
        if overrides.metric not in ("exponential", "traditional"):
            raise ScenarioError(f"unknown metric '{overrides.metric}'")
        out.robustness.metric = overrides.metric
    if overrides.generations is not None:
        out.synthesis.cmaes.generations = overrides.generations
    if overrides.population is not None:
        out.synthesis.cmaes.population = overrides.population
    return out


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

class CheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioConfig
    trajectory_csv: str
    overrides: Overrides | None = None


class ConjunctReport(BaseModel):
    formula: str
    satisfied: bool


class CheckResponse(BaseModel):
    satisfied: bool
    traditional: float
    exponential: float
    horizon: int
    conjuncts: list[ConjunctReport]


def run_check(request: CheckRequest) -> CheckResponse:
    config = _apply_overrides(request.scenario, request.overrides)
    scenario, syn_config = build_scenario(config)
    team = parse_trajectory_csv(request.trajectory_csv, scenario.agents)
    needed = horizon(scenario.formula)
    if team.horizon < needed:
        raise TrajectoryFileError(
            f"trajectory covers t=0..{team.horizon} but the formula horizon is {needed}"
        )
    satisfied = eval_bool(team, scenario.formula, 0)
    rho = float(rho_traditional(team, scenario.formula, 0))
    eta = float(eta_exponential(team, scenario.formula, 0, syn_config.params))
    conjuncts = (
        scenario.formula.children if isinstance(scenario.formula, And) else (scenario.formula,)
    )
    reports = [
        ConjunctReport(formula=print_formula(c), satisfied=eval_bool(team, c, 0))
        for c in conjuncts
    ]
    return CheckResponse(
        satisfied=satisfied,
        traditional=rho,
        exponential=eta,
        horizon=needed,
        conjuncts=reports,
    )


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

class SynthRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioConfig
    overrides: Overrides | None = None


class RunSummary(BaseModel):
    name: str
    seed: int
    metric: str
    objective: float
    robustness: float
    satisfied: bool
    agents: int
    horizon: int
    decision_dim: int
    cmaes_objective: float
    cmaes_generations: int
    cmaes_evaluations: int
    cmaes_seconds: float
    local_objective: float
    local_iterations: int
    local_seconds: float


class SynthResponse(BaseModel):
    summary: RunSummary
    trajectories_csv: str
    controls_csv: str
    summary_text: str
    plot_svg: str


def run_synth(request: SynthRequest) -> SynthResponse:
    config = _apply_overrides(request.scenario, request.overrides)
    scenario, syn_config = build_scenario(config)
    result = synthesize(scenario, syn_config)
    summary = RunSummary(
        name=config.name,
        seed=syn_config.seed,
        metric=result.metric,
        objective=result.objective,
        robustness=result.robustness,
        satisfied=result.satisfied,
        agents=len(scenario.agents),
        horizon=scenario.horizon,
        decision_dim=result.decision_dim,
        cmaes_objective=result.cmaes_objective,
        cmaes_generations=result.cmaes_generations,
        cmaes_evaluations=result.cmaes_evaluations,
        cmaes_seconds=result.cmaes_seconds,
        local_objective=result.local_objective,
        local_iterations=result.local_iterations,
        local_seconds=result.local_seconds,
    )
    return SynthResponse(
        summary=summary,
        trajectories_csv=trajectories_csv(scenario.agents, result.plan),
        controls_csv=controls_csv(scenario.agents, result.plan),
        summary_text=summary_text(summary.model_dump()),
        plot_svg=scenario_svg(config, result.trajectory),
    )


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

class GradcheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioConfig
    overrides: Overrides | None = None
    step: float = Field(default=1e-6, gt=0)


class GradcheckResponse(BaseModel):
    max_relative_error: float
    passed: bool
    dimension: int
    nonsmooth_events: int
    seed: int


def run_gradcheck(request: GradcheckRequest) -> GradcheckResponse:
    """Compare the taped gradient of the objective against central differences.

    The probe plan is sampled uniformly inside 60% of the control box so
    the +/-step stencil stays strictly inside. Relative error per
    coordinate is |ad - fd| / max(|ad|, |fd|, 1).
    """
    config = _apply_overrides(request.scenario, request.overrides)
    scenario, syn_config = build_scenario(config)
    lower, upper = plan_box(scenario.agents, scenario.horizon)
    rng = np.random.default_rng(syn_config.seed)
    center = (lower + upper) / 2.0
    half = (upper - lower) / 2.0
    flat = center + rng.uniform(-0.6, 0.6, size=lower.size) * half

    report = gradient_report(flat, scenario, syn_config)
    h = request.step
    worst = 0.0
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        up = objective(ControlPlan.from_flat(bumped, scenario.agents, scenario.horizon), scenario, syn_config)
        bumped[i] = flat[i] - h
        down = objective(ControlPlan.from_flat(bumped, scenario.agents, scenario.horizon), scenario, syn_config)
        fd = (up - down) / (2.0 * h)
        ad_val = report.gradient[i]
        rel = abs(ad_val - fd) / max(abs(ad_val), abs(fd), 1.0)
        worst = max(worst, rel)
    return GradcheckResponse(
        max_relative_error=worst,
        passed=worst < GRADCHECK_TOLERANCE,
        dimension=flat.size,
        nonsmooth_events=report.nonsmooth_events,
        seed=syn_config.seed,
    )


# ---------------------------------------------------------------------------
# scale
# ---------------------------------------------------------------------------

class ScaleRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scenario: ScenarioConfig
    multipliers: list[float] = Field(min_length=1)
    repetitions: int = Field(default=3, ge=1)
    overrides: Overrides | None = None


class ScaleRow(BaseModel):
    agents: int
    decision_dim: int
    runs: int
    satisfied_runs: int
    robustness_mean: float
    robustness_std: float
    cmaes_seconds_mean: float
    cmaes_seconds_std: float
    local_seconds_mean: float
    local_seconds_std: float


class ScaleResponse(BaseModel):
    rows: list[ScaleRow]
    csv: str


def run_scale(request: ScaleRequest) -> ScaleResponse:
    base = _apply_overrides(request.scenario, request.overrides)
    rows = []
    for si, multiplier in enumerate(request.multipliers):
        scaled = scale_counts(base, multiplier)
        robustness, cma_s, loc_s, satisfied = [], [], [], 0
        dim = agents = 0
        for rep in range(request.repetitions):
            run_seed = int(np.random.SeedSequence([base.seed, si, rep]).generate_state(1)[0])
            scenario, syn_config = build_scenario(scaled, run_seed)
            result = synthesize(scenario, syn_config)
            agents = len(scenario.agents)
            dim = result.decision_dim
            robustness.append(result.robustness)
            cma_s.append(result.cmaes_seconds)
            loc_s.append(result.local_seconds)
            satisfied += int(result.satisfied)
        rows.append(
            ScaleRow(
                agents=agents,
                decision_dim=dim,
                runs=request.repetitions,
                satisfied_runs=satisfied,
                robustness_mean=float(np.mean(robustness)),
                robustness_std=float(np.std(robustness)),
                cmaes_seconds_mean=float(np.mean(cma_s)),
                cmaes_seconds_std=float(np.std(cma_s)),
                local_seconds_mean=float(np.mean(loc_s)),
                local_seconds_std=float(np.std(loc_s)),
            )
        )
    header = (
        "agents,decision_dim,runs,satisfied_runs,robustness_mean,robustness_std,"
        "cmaes_seconds_mean,cmaes_seconds_std,local_seconds_mean,local_seconds_std"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r.agents},{r.decision_dim},{r.runs},{r.satisfied_runs},"
            f"{r.robustness_mean!r},{r.robustness_std!r},"
            f"{r.cmaes_seconds_mean!r},{r.cmaes_seconds_std!r},"
            f"{r.local_seconds_mean!r},{r.local_seconds_std!r}"
        )
    return ScaleResponse(rows=rows, csv="\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# app
# ---------------------------------------------------------------------------

def create_app() -> FastAPI:
    app = FastAPI(title="catlplus", version="0.1.0")

    @app.exception_handler(ValueError)
    async def _value_error(request, exc):  # noqa: ANN001
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/check", response_model=CheckResponse)
    def check(request: CheckRequest):
        return run_check(request)

    @app.post("/synth", response_model=SynthResponse)
    def synth(request: SynthRequest):
        return run_synth(request)

    @app.post("/gradcheck", response_model=GradcheckResponse)
    def gradcheck(request: GradcheckRequest):
        return run_gradcheck(request)

    @app.post("/scale", response_model=ScaleResponse)
    def scale(request: ScaleRequest):
        return run_scale(request)

    return app


app = create_app()
