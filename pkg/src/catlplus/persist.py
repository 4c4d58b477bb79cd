"""File formats: trajectory/control CSV, run summaries.

All writers are deterministic given their inputs (floats rendered with
repr, fixed row order), so repeated runs with one seed produce identical
bytes.
"""

from __future__ import annotations

from .dynamics import ControlPlan, rollout
from .robustness import TeamEntry, TeamTrajectory


class TrajectoryFileError(ValueError):
    """Malformed trajectory CSV."""


def _fmt(value: float) -> str:
    return repr(float(value))


def trajectories_csv(agents, plan: ControlPlan) -> str:
    """CSV of rolled-out trajectories: t, agent, x, y, theta (blank if none)."""
    lines = ["t,agent,x,y,theta"]
    rolled = [rollout(agent, controls) for agent, controls in zip(agents, plan.controls)]
    steps = plan.horizon + 1
    for t in range(steps):
        for j, (states, positions) in enumerate(rolled):
            x, y = positions[t]
            theta = _fmt(states[t][2]) if len(states[t]) > 2 else ""
            lines.append(f"{t},{j},{_fmt(x)},{_fmt(y)},{theta}")
    return "\n".join(lines) + "\n"


def controls_csv(agents, plan: ControlPlan) -> str:
    """CSV of the control plan: t, agent, u1, u2, ... (ragged tails blank)."""
    width = max(agent.control_dim for agent in agents)
    header = "t,agent," + ",".join(f"u{i + 1}" for i in range(width))
    lines = [header]
    for t in range(plan.horizon):
        for j, controls in enumerate(plan.controls):
            step = list(controls[t])
            cells = [_fmt(u) for u in step] + [""] * (width - len(step))
            lines.append(f"{t},{j}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str, agents) -> TeamTrajectory:
    """Read a t,agent,x,y[,theta] CSV back into a team trajectory.

    Rows may arrive in any order but must cover every (t, agent) pair of a
    rectangular grid starting at t=0. Capabilities come from `agents`.
    """
    rows: dict[tuple[int, int], tuple[float, float]] = {}
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TrajectoryFileError("empty trajectory file")
    start = 1 if lines[0].lower().replace(" ", "").startswith("t,agent") else 0
    for ln in lines[start:]:
        cells = ln.split(",")
        if len(cells) < 4:
            raise TrajectoryFileError(f"row needs at least t,agent,x,y: {ln!r}")
        try:
            t, j = int(cells[0]), int(cells[1])
            x, y = float(cells[2]), float(cells[3])
        except ValueError as err:
            raise TrajectoryFileError(f"bad row {ln!r}: {err}") from err
        if (t, j) in rows:
            raise TrajectoryFileError(f"duplicate sample for t={t}, agent={j}")
        rows[(t, j)] = (x, y)
    n_agents = len(agents)
    times = sorted({t for t, _ in rows})
    if times != list(range(len(times))):
        raise TrajectoryFileError("time steps must be contiguous from 0")
    entries = []
    for j, agent in enumerate(agents):
        positions = []
        for t in times:
            if (t, j) not in rows:
                raise TrajectoryFileError(f"missing sample for t={t}, agent={j}")
            positions.append(rows[(t, j)])
        entries.append(TeamEntry(tuple(positions), agent.capabilities))
    extra = {j for _, j in rows} - set(range(n_agents))
    if extra:
        raise TrajectoryFileError(f"rows reference unknown agent ids {sorted(extra)}")
    return TeamTrajectory(tuple(entries))


def summary_text(fields: dict) -> str:
    """key: value lines, in insertion order."""
    return "\n".join(f"{key}: {value}" for key, value in fields.items()) + "\n"
