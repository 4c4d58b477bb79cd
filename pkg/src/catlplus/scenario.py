"""Scenario files: workspace, regions, agent groups, formula text, budgets.

A scenario is one JSON document (pydantic-validated). Region names are
usable in the formula as `in(NAME)`; task counts may be written as
`{n_groupname + ...}` so the same file scales to bigger teams. Building a
scenario samples each group's initial states deterministically from the
run seed.
"""

from __future__ import annotations

import ast as python_ast
import json
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .dynamics import AgentModel, sample_initial_states
from .formulas import And, Atom, Circle, Formula, Halfplane, Or
from .parsing import parse_formula
from .robustness import RobustnessParams
from .synthesis import (
    CmaesSettings,
    CostSpec,
    LocalSettings,
    Scenario,
    SynthesisConfig,
    validate_problem,
)


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class RectSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["rect"] = "rect"
    min: tuple[float, float]
    max: tuple[float, float]


class CircleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["circle"] = "circle"
    center: tuple[float, float]
    radius: float = Field(gt=0)


class UnionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["union"] = "union"
    members: list[str] = Field(min_length=1)


RegionSpec = Annotated[Union[RectSpec, CircleSpec, UnionSpec], Field(discriminator="kind")]


class GroupSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    count: int = Field(ge=1)
    model: Literal["unicycle", "integrator"]
    init_region: str
    heading_range: tuple[float, float] | None = None
    control_box: list[tuple[float, float]] = Field(default=[(-1.0, 1.0), (-1.0, 1.0)])
    capabilities: list[str] = Field(min_length=1)


class RobustnessSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    alpha: float = Field(default=1.0, gt=0)
    beta: float = Field(default=0.0, ge=0, le=1)
    metric: Literal["exponential", "traditional"] = "exponential"


class CmaesSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    population: int = Field(default=50, ge=4)
    generations: int = Field(default=200, ge=1)
    sigma0: float = Field(default=0.3, gt=0)


class LocalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    method: Literal["lbfgsb"] = "lbfgsb"
    max_iterations: int = Field(default=200, ge=1)
    gradient_tolerance: float = Field(default=1e-5, gt=0)


class CostConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["l2", "zero", "weighted_l2"] = "l2"
    weights: list[float] | None = None


class SynthesisSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    gamma: float = Field(default=1000.0, gt=0)
    cost: CostConfig = CostConfig()
    cmaes: CmaesSpec = CmaesSpec()
    local: LocalSpec = LocalSpec()


class WorkspaceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    min: tuple[float, float]
    max: tuple[float, float]


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str = "scenario"
    workspace: WorkspaceSpec
    regions: dict[str, RegionSpec]
    groups: list[GroupSpec] = Field(min_length=1)
    formula: str
    horizon: int = Field(ge=1)
    robustness: RobustnessSpec = RobustnessSpec()
    synthesis: SynthesisSpec = SynthesisSpec()
    seed: int = 0


def load_config(path_or_text) -> ScenarioConfig:
    """Load a scenario from a JSON file path or a JSON string."""
    text = path_or_text
    if not str(path_or_text).lstrip().startswith("{"):
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        return ScenarioConfig.model_validate_json(text)
    except ValueError as err:
        raise ScenarioError(f"invalid scenario file: {err}") from err


def save_config(config: ScenarioConfig) -> str:
    return json.dumps(config.model_dump(), indent=2)


# ---------------------------------------------------------------------------
# Regions and formula
# ---------------------------------------------------------------------------

def _rect_formula(spec: RectSpec) -> Formula:
    (xmin, ymin), (xmax, ymax) = spec.min, spec.max
    if xmax <= xmin or ymax <= ymin:
        raise ScenarioError(f"degenerate rectangle {spec.min}..{spec.max}")
    return And(
        (
            Atom(Halfplane((1.0, 0.0), -xmin)),
            Atom(Halfplane((-1.0, 0.0), xmax)),
            Atom(Halfplane((0.0, 1.0), -ymin)),
            Atom(Halfplane((0.0, -1.0), ymax)),
        )
    )


def region_map(config: ScenarioConfig) -> dict[str, Formula]:
    """Region name -> inner membership formula, unions resolved."""
    out: dict[str, Formula] = {}
    resolving: set[str] = set()

    def resolve(name: str) -> Formula:
        if name in out:
            return out[name]
        if name not in config.regions:
            raise ScenarioError(f"unknown region '{name}'")
        if name in resolving:
            raise ScenarioError(f"region union cycle through '{name}'")
        resolving.add(name)
        spec = config.regions[name]
        if spec.kind == "rect":
            formula = _rect_formula(spec)
        elif spec.kind == "circle":
            formula = Atom(Circle(spec.center, spec.radius, inside=True, label=name))
        else:
            members = [resolve(m) for m in spec.members]
            formula = members[0] if len(members) == 1 else Or(tuple(members))
        resolving.discard(name)
        out[name] = formula
        return formula

    for name in config.regions:
        resolve(name)
    return out


_ALLOWED_OPS = (python_ast.Add, python_ast.Sub, python_ast.Mult)


def _eval_count_expr(expr: str, variables: dict[str, int]) -> int:
    try:
        tree = python_ast.parse(expr, mode="eval").body
    except SyntaxError as err:
        raise ScenarioError(f"bad count expression '{{{expr}}}'") from err

    def walk(node):
        if isinstance(node, python_ast.BinOp) and isinstance(node.op, _ALLOWED_OPS):
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, python_ast.Add):
                return left + right
            if isinstance(node.op, python_ast.Sub):
                return left - right
            return left * right
        if isinstance(node, python_ast.Constant) and isinstance(node.value, int):
            return node.value
        if isinstance(node, python_ast.Name):
            if node.id not in variables:
                raise ScenarioError(
                    f"unknown name '{node.id}' in count expression '{{{expr}}}' "
                    f"(known: {', '.join(sorted(variables))})"
                )
            return variables[node.id]
        raise ScenarioError(f"unsupported construct in count expression '{{{expr}}}'")

    return walk(tree)


def render_formula_text(config: ScenarioConfig) -> str:
    """Substitute `{...}` count expressions with this config's group counts."""
    variables = {f"n_{g.name}": g.count for g in config.groups}
    variables["n_total"] = sum(g.count for g in config.groups)
    text = config.formula
    out = []
    pos = 0
    while True:
        start = text.find("{", pos)
        if start < 0:
            out.append(text[pos:])
            break
        end = text.find("}", start)
        if end < 0:
            raise ScenarioError("unbalanced '{' in formula text")
        out.append(text[pos:start])
        out.append(str(_eval_count_expr(text[start + 1 : end], variables)))
        pos = end + 1
    return "".join(out)


def build_formula(config: ScenarioConfig) -> Formula:
    return parse_formula(render_formula_text(config), region_map(config))


def _rect_bounds(config: ScenarioConfig, name: str) -> tuple[float, float, float, float]:
    if name not in config.regions:
        raise ScenarioError(f"unknown init region '{name}'")
    spec = config.regions[name]
    if spec.kind != "rect":
        raise ScenarioError(f"init region '{name}' must be a rectangle")
    return (spec.min[0], spec.min[1], spec.max[0], spec.max[1])


def build_team(config: ScenarioConfig, seed: int | None = None) -> tuple[AgentModel, ...]:
    """Instantiate all agents with seeded initial states."""
    run_seed = config.seed if seed is None else seed
    agents: list[AgentModel] = []
    for gi, group in enumerate(config.groups):
        region = _rect_bounds(config, group.init_region)
        heading = group.heading_range if group.model == "unicycle" else None
        if group.model == "unicycle" and heading is None:
            heading = (0.0, 2.0 * np.pi)
        states = sample_initial_states(
            region, group.count, heading, np.random.SeedSequence([run_seed, gi])
        )
        for k, state in enumerate(states):
            agents.append(
                AgentModel(
                    kind=group.model,
                    initial_state=state,
                    control_box=tuple(tuple(b) for b in group.control_box),
                    capabilities=frozenset(group.capabilities),
                    name=f"{group.name}{k}",
                )
            )
    return tuple(agents)


def build_synthesis_config(config: ScenarioConfig, seed: int | None = None) -> SynthesisConfig:
    syn = config.synthesis
    return SynthesisConfig(
        gamma=syn.gamma,
        cost=CostSpec(kind=syn.cost.kind, weights=tuple(syn.cost.weights) if syn.cost.weights else None),
        cmaes=CmaesSettings(
            population=syn.cmaes.population,
            generations=syn.cmaes.generations,
            sigma0=syn.cmaes.sigma0,
        ),
        local=LocalSettings(
            method=config.synthesis.local.method,
            max_iterations=syn.local.max_iterations,
            gradient_tolerance=syn.local.gradient_tolerance,
        ),
        params=RobustnessParams(alpha=config.robustness.alpha, beta=config.robustness.beta),
        metric=config.robustness.metric,
        seed=config.seed if seed is None else seed,
    )


def build_scenario(config: ScenarioConfig, seed: int | None = None) -> tuple[Scenario, SynthesisConfig]:
    """Validated (scenario, synthesis config) for one run seed."""
    formula = build_formula(config)
    team = build_team(config, seed)
    scenario = Scenario(agents=team, formula=formula, horizon=config.horizon)
    syn_config = build_synthesis_config(config, seed)
    problems = validate_problem(scenario, syn_config)
    if problems:
        raise ScenarioError("; ".join(problems))
    return scenario, syn_config


def scale_counts(config: ScenarioConfig, multiplier: float) -> ScenarioConfig:
    """Scale every group's agent count (rounded, floor 1).

    Task counts written as `{...}` expressions follow automatically when
    the formula is re-rendered.
    """
    if multiplier <= 0:
        raise ScenarioError(f"multiplier must be positive, got {multiplier}")
    scaled = config.model_copy(deep=True)
    for group in scaled.groups:
        group.count = max(1, round(group.count * multiplier))
    return scaled
