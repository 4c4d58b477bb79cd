"""Discrete-time agent models and trajectory rollout.

Two built-in kinds plus a custom hook:

* unicycle: state (px, py, heading), controls (forward speed, turn rate);
  heading is accumulated without wrapping.
* integrator: state (px, py), controls are the per-step displacement.
* custom: caller-supplied step and workspace-map callables built from
  scalar arithmetic, so they trace through the autodiff tape unchanged.

`rollout` runs the same arithmetic whether the controls are plain floats
or `ADValue`s; fed floats it asserts the controls sit inside the agent's
control box, fed tape values it trusts the optimizer's box handling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad


@dataclass(frozen=True)
class AgentModel:
    """One agent: dynamics kind, start state, control box, capabilities."""

    kind: str
    initial_state: tuple[float, ...]
    control_box: tuple[tuple[float, float], ...]
    capabilities: frozenset
    name: str = ""
    step: Callable | None = None
    workspace_map: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "initial_state", tuple(float(v) for v in self.initial_state))
        object.__setattr__(
            self, "control_box", tuple((float(lo), float(hi)) for lo, hi in self.control_box)
        )
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        if not self.capabilities:
            raise ValueError("agent needs at least one capability")
        for lo, hi in self.control_box:
            if lo > hi:
                raise ValueError(f"empty control box interval [{lo},{hi}]")
        if self.kind == "unicycle":
            if len(self.initial_state) != 3 or len(self.control_box) != 2:
                raise ValueError("unicycle needs state (x, y, heading) and 2 controls")
        elif self.kind == "integrator":
            if len(self.initial_state) != 2 or len(self.control_box) != 2:
                raise ValueError("integrator needs state (x, y) and 2 controls")
        elif self.kind == "custom":
            if self.step is None or self.workspace_map is None:
                raise ValueError("custom agent needs step and workspace_map callables")
        else:
            raise ValueError(f"unknown agent kind '{self.kind}'")

    @property
    def control_dim(self) -> int:
        return len(self.control_box)

    @property
    def state_dim(self) -> int:
        return len(self.initial_state)


def _step_state(agent: AgentModel, state, control):
    if agent.kind == "unicycle":
        x, y, heading = state
        speed, turn = control
        return (
            x + speed * ad.cos(heading),
            y + speed * ad.sin(heading),
            heading + turn,
        )
    if agent.kind == "integrator":
        return (state[0] + control[0], state[1] + control[1])
    return agent.step(state, control)


def _to_workspace(agent: AgentModel, state):
    if agent.kind in ("unicycle", "integrator"):
        return (state[0], state[1])
    return agent.workspace_map(state)


def rollout(agent: AgentModel, controls: Sequence[Sequence]):
    """Propagate the agent through `controls`; returns (states, positions).

    len(states) == len(positions) == len(controls) + 1. Plain-float
    controls are checked against the control box (tiny tolerance for
    round-trip noise); traced controls are not.
    """
    plain = not any(
        isinstance(c, ad.ADValue) for step in controls for c in step
    )
    if plain:
        for k, step in enumerate(controls):
            if len(step) != agent.control_dim:
                raise ValueError(f"control {k} has {len(step)} coordinates, expected {agent.control_dim}")
            for c, (lo, hi) in zip(step, agent.control_box):
                if not (lo - 1e-9 <= c <= hi + 1e-9):
                    raise ValueError(f"control {k} value {c} outside box [{lo},{hi}]")
    state = agent.initial_state
    states = [state]
    positions = [_to_workspace(agent, state)]
    for step in controls:
        state = _step_state(agent, state, tuple(step))
        states.append(state)
        positions.append(_to_workspace(agent, state))
    return states, positions


def sample_initial_states(
    region: tuple[float, float, float, float],
    count: int,
    heading_range: tuple[float, float] | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> list[tuple[float, ...]]:
    """Uniform start states inside a workspace rectangle (xmin, ymin, xmax, ymax).

    With a heading range each state carries a uniformly sampled third
    coordinate. Deterministic for a fixed seed.
    """
    xmin, ymin, xmax, ymax = region
    if xmax < xmin or ymax < ymin:
        raise ValueError(f"empty start region {region}")
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(count):
        x = float(rng.uniform(xmin, xmax))
        y = float(rng.uniform(ymin, ymax))
        if heading_range is None:
            states.append((x, y))
        else:
            states.append((x, y, float(rng.uniform(heading_range[0], heading_range[1]))))
    return states


@dataclass(frozen=True)
class ControlPlan:
    """Per-agent control sequences over a common planning horizon."""

    controls: tuple[tuple[tuple[float, ...], ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "controls",
            tuple(tuple(tuple(float(c) for c in step) for step in agent) for agent in self.controls),
        )
        lengths = {len(agent) for agent in self.controls}
        if len(lengths) > 1:
            raise ValueError(f"agents have mixed plan lengths {sorted(lengths)}")

    @property
    def horizon(self) -> int:
        return len(self.controls[0]) if self.controls else 0

    def flatten(self) -> np.ndarray:
        return np.array(
            [c for agent in self.controls for step in agent for c in step], dtype=float
        )

    @staticmethod
    def from_flat(vector: np.ndarray, agents: Sequence[AgentModel], horizon: int) -> "ControlPlan":
        vector = np.asarray(vector, dtype=float)
        expected = sum(a.control_dim for a in agents) * horizon
        if vector.size != expected:
            raise ValueError(f"flat plan has {vector.size} entries, expected {expected}")
        out = []
        offset = 0
        for agent in agents:
            block = vector[offset : offset + agent.control_dim * horizon]
            offset += agent.control_dim * horizon
            out.append(tuple(tuple(block[k * agent.control_dim : (k + 1) * agent.control_dim]) for k in range(horizon)))
        return ControlPlan(tuple(out))


def plan_box(agents: Sequence[AgentModel], horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened per-coordinate lower/upper bounds matching ControlPlan.flatten."""
    lows, highs = [], []
    for agent in agents:
        for _ in range(horizon):
            for lo, hi in agent.control_box:
                lows.append(lo)
                highs.append(hi)
    return np.array(lows), np.array(highs)
