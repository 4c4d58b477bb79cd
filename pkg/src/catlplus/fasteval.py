"""Vectorized (value-only) robustness evaluation over numpy arrays.

The scalar evaluators in `robustness` are the reference semantics and the
gradient source; this module recomputes the same values with numpy so the
derivative-free search can score a whole candidate population per call.
Arrays carry arbitrary leading batch axes; the trailing axis is time, and
a node's array covers every start time its horizon allows. Tests pin this
module against the scalar path at 1e-9.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .formulas import (
    Always,
    And,
    Atom,
    Circle,
    Eventually,
    Formula,
    Halfplane,
    Not,
    Or,
    Task,
    TrueNode,
    Until,
    horizon,
)
from .robustness import EXP_CLAMP, RobustnessParams


def _conj_exp_nd(stack: np.ndarray, beta: float, axis: int = 0) -> np.ndarray:
    mn = stack.min(axis=axis, keepdims=True)
    safe = np.where(mn == 0.0, 1.0, mn)
    neg_eff = mn * np.exp(np.clip((stack - mn) / safe, -EXP_CLAMP, EXP_CLAMP))
    pos_eff = mn * (2.0 - np.exp(np.clip((mn - stack) / safe, -EXP_CLAMP, EXP_CLAMP)))
    eff = np.where(mn < 0.0, neg_eff, np.where(mn > 0.0, pos_eff, 0.0))
    mn = np.squeeze(mn, axis=axis)
    return beta * mn + (1.0 - beta) * eff.mean(axis=axis)


def _kth_largest_nd(stack: np.ndarray, m: int, axis: int = 0) -> np.ndarray:
    n = stack.shape[axis]
    return np.partition(stack, n - m, axis=axis).take(n - m, axis=axis)


def _task_exp_nd(stack: np.ndarray, m: int, alpha: float, axis: int = 0) -> np.ndarray:
    crit = np.expand_dims(_kth_largest_nd(stack, m, axis=axis), axis)
    delta = stack - crit
    pos_num = 2.0 * alpha * (np.exp(np.clip(crit, -EXP_CLAMP, EXP_CLAMP)) - 1.0)
    pos_eff = pos_num / (1.0 + np.exp(np.clip(-alpha * delta, -EXP_CLAMP, EXP_CLAMP)))
    neg_num = -2.0 * alpha * (np.exp(np.clip(-crit, -EXP_CLAMP, EXP_CLAMP)) - 1.0)
    neg_eff = neg_num / (1.0 + np.exp(np.clip(alpha * delta, -EXP_CLAMP, EXP_CLAMP)))
    return np.where(crit > 0.0, pos_eff, neg_eff).mean(axis=axis)


class _ExponentialOps:
    def __init__(self, params: RobustnessParams):
        self.params = params

    def conj(self, stack, axis=0):
        return _conj_exp_nd(stack, self.params.beta, axis=axis)

    def disj(self, stack, axis=0):
        return -_conj_exp_nd(-stack, self.params.beta, axis=axis)

    def task(self, stack, m):
        return _task_exp_nd(stack, m, self.params.alpha, axis=0)


class _TraditionalOps:
    def conj(self, stack, axis=0):
        return stack.min(axis=axis)

    def disj(self, stack, axis=0):
        return stack.max(axis=axis)

    def task(self, stack, m):
        return _kth_largest_nd(stack, m, axis=0)


def _predicate_values(pred, positions: np.ndarray) -> np.ndarray:
    x = positions[..., 0]
    y = positions[..., 1]
    if isinstance(pred, Halfplane):
        return pred.normal[0] * x + pred.normal[1] * y + pred.offset
    if isinstance(pred, Circle):
        dx = x - pred.center[0]
        dy = y - pred.center[1]
        sq = dx * dx + dy * dy
        if pred.inside:
            return pred.radius * pred.radius - sq
        return sq - pred.radius * pred.radius
    raise TypeError(f"unknown predicate {pred!r}")


class _Evaluator:
    """One pass over a formula for fixed trajectories; memoizes per node."""

    def __init__(self, positions_by_agent, capability_sets, ops):
        self.positions = [np.asarray(p, dtype=float) for p in positions_by_agent]
        self.caps = [frozenset(c) for c in capability_sets]
        self.ops = ops
        self.samples = self.positions[0].shape[-2]
        self.batch_shape = self.positions[0].shape[:-2]
        self.outer_memo: dict = {}
        self.inner_memo: dict = {}

    def _stack_children(self, arrays, width):
        return np.stack([a[..., :width] for a in arrays], axis=0)

    def _until(self, left, right, interval, width):
        branches = []
        for d in range(interval.start, interval.end + 1):
            tail = right[..., d : d + width]
            if d == 0:
                branches.append(tail)
                continue
            windows = sliding_window_view(left, d, axis=-1)[..., :width, :]
            parts = np.concatenate([tail[..., None], windows], axis=-1)
            branches.append(self.ops.conj(parts, axis=-1))
        return self.ops.disj(np.stack(branches, axis=0), axis=0)

    def _window(self, child, interval, width, combine):
        w = interval.end - interval.start + 1
        if w == 1:
            return child[..., interval.start : interval.start + width]
        windows = sliding_window_view(child[..., interval.start :], w, axis=-1)
        return combine(windows[..., :width, :], axis=-1)

    def inner(self, node: Formula, agent: int) -> np.ndarray:
        key = (id(node), agent)
        hit = self.inner_memo.get(key)
        if hit is not None:
            return hit
        width = self.samples - horizon(node)
        if isinstance(node, TrueNode):
            out = np.zeros(self.batch_shape + (width,))
        elif isinstance(node, Atom):
            out = _predicate_values(node.predicate, self.positions[agent])
        elif isinstance(node, Not):
            out = -self.inner(node.child, agent)
        elif isinstance(node, And):
            out = self.ops.conj(self._stack_children([self.inner(c, agent) for c in node.children], width))
        elif isinstance(node, Or):
            out = self.ops.disj(self._stack_children([self.inner(c, agent) for c in node.children], width))
        elif isinstance(node, Always):
            out = self._window(self.inner(node.child, agent), node.interval, width, self.ops.conj)
        elif isinstance(node, Eventually):
            out = self._window(self.inner(node.child, agent), node.interval, width, self.ops.disj)
        elif isinstance(node, Until):
            out = self._until(self.inner(node.left, agent), self.inner(node.right, agent), node.interval, width)
        else:
            raise TypeError(f"task found inside an inner formula: {node!r}")
        self.inner_memo[key] = out
        return out

    def outer(self, node: Formula) -> np.ndarray:
        key = id(node)
        hit = self.outer_memo.get(key)
        if hit is not None:
            return hit
        width = self.samples - horizon(node)
        if isinstance(node, TrueNode):
            out = np.zeros(self.batch_shape + (width,))
        elif isinstance(node, Task):
            carriers = [j for j, caps in enumerate(self.caps) if node.capability in caps]
            if node.count > len(carriers):
                raise ValueError(
                    f"task needs {node.count} agents with '{node.capability}' "
                    f"but the team only has {len(carriers)}"
                )
            stack = self._stack_children([self.inner(node.inner, j) for j in carriers], width)
            out = self.ops.task(stack, node.count)
        elif isinstance(node, Not):
            out = -self.outer(node.child)
        elif isinstance(node, And):
            out = self.ops.conj(self._stack_children([self.outer(c) for c in node.children], width))
        elif isinstance(node, Or):
            out = self.ops.disj(self._stack_children([self.outer(c) for c in node.children], width))
        elif isinstance(node, Always):
            out = self._window(self.outer(node.child), node.interval, width, self.ops.conj)
        elif isinstance(node, Eventually):
            out = self._window(self.outer(node.child), node.interval, width, self.ops.disj)
        elif isinstance(node, Until):
            out = self._until(self.outer(node.left), self.outer(node.right), node.interval, width)
        else:
            raise TypeError(f"predicate found at the team level: {node!r}")
        self.outer_memo[key] = out
        return out


def evaluate_formula(
    positions_by_agent,
    capability_sets,
    formula: Formula,
    params: RobustnessParams = RobustnessParams(),
    metric: str = "exponential",
) -> np.ndarray:
    """Robustness of `formula` at every admissible start time.

    `positions_by_agent` is one array per agent shaped (..., samples, 2)
    with identical batch/sample shapes. Returns an array shaped
    (..., samples - horizon); index [..., 0] is the value at t=0.
    """
    if metric == "exponential":
        ops = _ExponentialOps(params)
    elif metric == "traditional":
        ops = _TraditionalOps()
    else:
        raise ValueError(f"unknown metric '{metric}'")
    needed = horizon(formula) + 1
    samples = np.asarray(positions_by_agent[0]).shape[-2]
    if samples < needed:
        raise ValueError(f"trajectories have {samples} samples, formula needs {needed}")
    return _Evaluator(positions_by_agent, capability_sets, ops).outer(formula)


def rollout_batch(agents, flat: np.ndarray, horizon_steps: int) -> list[np.ndarray]:
    """Roll a population of flat plans; one (n, horizon+1, 2) array per agent.

    Mirrors `dynamics.rollout` arithmetic (cumulative sums are evaluated in
    step order); custom-kind agents fall back to the scalar rollout.
    """
    from .dynamics import rollout  # local import to avoid a cycle

    flat = np.atleast_2d(np.asarray(flat, dtype=float))
    n = flat.shape[0]
    out = []
    offset = 0
    for agent in agents:
        block = flat[:, offset : offset + agent.control_dim * horizon_steps]
        offset += agent.control_dim * horizon_steps
        u = block.reshape(n, horizon_steps, agent.control_dim)
        if agent.kind == "unicycle":
            x0, y0, th0 = agent.initial_state
            heading = th0 + np.concatenate(
                [np.zeros((n, 1)), np.cumsum(u[:, :, 1], axis=1)], axis=1
            )
            dx = u[:, :, 0] * np.cos(heading[:, :horizon_steps])
            dy = u[:, :, 0] * np.sin(heading[:, :horizon_steps])
            px = x0 + np.concatenate([np.zeros((n, 1)), np.cumsum(dx, axis=1)], axis=1)
            py = y0 + np.concatenate([np.zeros((n, 1)), np.cumsum(dy, axis=1)], axis=1)
            out.append(np.stack([px, py], axis=-1))
        elif agent.kind == "integrator":
            x0, y0 = agent.initial_state
            px = x0 + np.concatenate([np.zeros((n, 1)), np.cumsum(u[:, :, 0], axis=1)], axis=1)
            py = y0 + np.concatenate([np.zeros((n, 1)), np.cumsum(u[:, :, 1], axis=1)], axis=1)
            out.append(np.stack([px, py], axis=-1))
        else:
            rows = []
            for i in range(n):
                _, positions = rollout(agent, [tuple(step) for step in u[i]])
                rows.append(positions)
            out.append(np.asarray(rows, dtype=float))
    return out
