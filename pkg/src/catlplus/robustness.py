"""Boolean and quantitative semantics for the two-layer logic.

Two robustness metrics are implemented over a team trajectory:

* traditional: min/max over subformulas and time, with a task scored by
  the m-th largest per-agent inner robustness. Only the critical
  subformula/agent/time influences the value (masking).
* exponential: conjunctions blend the critical value with sign-coherent
  exponential transforms of every component, and tasks average a logistic
  reshaping of every carrier's inner robustness around the m-th largest.
  Every component keeps a strictly positive partial wherever the metric is
  differentiable, so gradient steps see all of the behavior, not just the
  worst point.

Both evaluators run on plain floats or on `autodiff.ADValue`s through the
same code path, so gradients with respect to every trajectory point come
from `autodiff.backward` with no separate derivation. Disjunction, F, and
Until reduce to negation + conjunction over time steps; negation is exact
sign flip for both metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import backward, kth_largest  # noqa: F401  (public re-exports)
from .formulas import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Not,
    Or,
    Task,
    TrueNode,
    Until,
    horizon,
)

# exponent arguments fed to exp() are clipped to this window; the clip
# preserves signs and (weak) monotonicity while preventing float overflow
EXP_CLAMP = 50.0


class TraceTooShortError(ValueError):
    """The trajectory does not cover t + horizon(formula)."""


@dataclass(frozen=True)
class TeamEntry:
    """One agent's workspace trajectory plus the capabilities it carries."""

    positions: tuple
    capabilities: frozenset

    def __post_init__(self):
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        object.__setattr__(self, "positions", tuple(tuple(p) for p in self.positions))


@dataclass(frozen=True)
class TeamTrajectory:
    """All individual trajectories, sampled on a common clock 0..horizon."""

    entries: tuple[TeamEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("team trajectory needs at least one agent")
        lengths = {len(e.positions) for e in self.entries}
        if len(lengths) != 1:
            raise ValueError(f"trajectories have mixed lengths {sorted(lengths)}")
        if next(iter(lengths)) < 1:
            raise ValueError("trajectories must contain at least one sample")

    @property
    def horizon(self) -> int:
        return len(self.entries[0].positions) - 1

    def carriers(self, capability: str) -> list[int]:
        return [i for i, e in enumerate(self.entries) if capability in e.capabilities]


@dataclass(frozen=True)
class RobustnessParams:
    """Knobs of the exponential metric.

    alpha > 0 sharpens the task logistic; beta in [0, 1] blends the
    critical value into conjunctions (beta=1 reduces to the traditional
    min).
    """

    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


def _check_window(team: TeamTrajectory, formula: Formula, t: int):
    if t < 0:
        raise ValueError(f"negative evaluation time {t}")
    needed = t + horizon(formula)
    if needed > team.horizon:
        raise TraceTooShortError(
            f"formula horizon needs samples up to t={needed} "
            f"but the trajectory ends at t={team.horizon}"
        )


# ---------------------------------------------------------------------------
# Boolean semantics
# ---------------------------------------------------------------------------

def _bool_inner(positions, phi: Formula, t: int, memo) -> bool:
    key = (id(phi), t)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(phi, TrueNode):
        out = True
    elif isinstance(phi, Atom):
        out = ad.value_of(phi.predicate.value(positions[t])) >= 0.0
    elif isinstance(phi, Not):
        out = not _bool_inner(positions, phi.child, t, memo)
    elif isinstance(phi, And):
        out = all(_bool_inner(positions, c, t, memo) for c in phi.children)
    elif isinstance(phi, Or):
        out = any(_bool_inner(positions, c, t, memo) for c in phi.children)
    elif isinstance(phi, Eventually):
        out = any(
            _bool_inner(positions, phi.child, tp, memo)
            for tp in range(t + phi.interval.start, t + phi.interval.end + 1)
        )
    elif isinstance(phi, Always):
        out = all(
            _bool_inner(positions, phi.child, tp, memo)
            for tp in range(t + phi.interval.start, t + phi.interval.end + 1)
        )
    elif isinstance(phi, Until):
        out = any(
            _bool_inner(positions, phi.right, tp, memo)
            and all(_bool_inner(positions, phi.left, u, memo) for u in range(t, tp))
            for tp in range(t + phi.interval.start, t + phi.interval.end + 1)
        )
    elif isinstance(phi, Task):
        raise TypeError("task found inside an inner formula")
    else:
        raise TypeError(f"not a formula node: {phi!r}")
    memo[key] = out
    return out


def count(team: TeamTrajectory, capability: str, phi: Formula, t: int) -> int:
    """How many capability carriers satisfy the inner formula at t."""
    total = 0
    for j in team.carriers(capability):
        if _bool_inner(team.entries[j].positions, phi, t, {}):
            total += 1
    return total


def eval_bool(team: TeamTrajectory, formula: Formula, t: int = 0) -> bool:
    """Whether the team trajectory satisfies the outer formula at time t."""
    _check_window(team, formula, t)
    return _bool_outer(team, formula, t, {}, {})


def _bool_outer(team, node: Formula, t: int, memo, inner_memos) -> bool:
    key = (id(node), t)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, TrueNode):
        out = True
    elif isinstance(node, Task):
        n = 0
        for j in team.carriers(node.capability):
            jmemo = inner_memos.setdefault((j, id(node.inner)), {})
            if _bool_inner(team.entries[j].positions, node.inner, t, jmemo):
                n += 1
        out = n >= node.count
    elif isinstance(node, Not):
        out = not _bool_outer(team, node.child, t, memo, inner_memos)
    elif isinstance(node, And):
        out = all(_bool_outer(team, c, t, memo, inner_memos) for c in node.children)
    elif isinstance(node, Or):
        out = any(_bool_outer(team, c, t, memo, inner_memos) for c in node.children)
    elif isinstance(node, Eventually):
        out = any(
            _bool_outer(team, node.child, tp, memo, inner_memos)
            for tp in range(t + node.interval.start, t + node.interval.end + 1)
        )
    elif isinstance(node, Always):
        out = all(
            _bool_outer(team, node.child, tp, memo, inner_memos)
            for tp in range(t + node.interval.start, t + node.interval.end + 1)
        )
    elif isinstance(node, Until):
        out = any(
            _bool_outer(team, node.right, tp, memo, inner_memos)
            and all(_bool_outer(team, node.left, u, memo, inner_memos) for u in range(t, tp))
            for tp in range(t + node.interval.start, t + node.interval.end + 1)
        )
    elif isinstance(node, Atom):
        raise TypeError("predicate found at the team level (must sit inside a task)")
    else:
        raise TypeError(f"not a formula node: {node!r}")
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# Exponential operators
# ---------------------------------------------------------------------------

def conj_exp(etas, beta: float):
    """Exponential conjunction of component robustness values.

    Each component is reshaped so it keeps the sign of the minimum and
    grows monotonically with its own value; the result blends the minimum
    with the mean of the reshaped components. With beta=1 this is exactly
    min(etas). A zero minimum yields exactly 0 (continuous boundary).
    """
    if not len(etas):
        raise ValueError("conjunction of zero components")
    mn = ad.minimum(etas)
    mnv = ad.value_of(mn)
    if mnv == 0.0:
        tape = mn.tape if isinstance(mn, ad.ADValue) else None
        if tape is not None:
            tape.nonsmooth_events += 1
            return tape.node(0.0)
        return 0.0
    effective = []
    if mnv < 0.0:
        for eta in etas:
            effective.append(mn * ad.exp(ad.clamp((eta - mn) / mn, -EXP_CLAMP, EXP_CLAMP)))
    else:
        for eta in etas:
            effective.append(mn * (2.0 - ad.exp(ad.clamp((mn - eta) / mn, -EXP_CLAMP, EXP_CLAMP))))
    return beta * mn + (1.0 - beta) * ad.mean(effective)


def disj_exp(etas, beta: float):
    """Exponential disjunction via negation: -conj(-etas)."""
    return -conj_exp([-e for e in etas], beta)


def task_exp(etas, m: int, alpha: float):
    """Exponential task robustness from per-carrier inner values.

    The m-th largest value is the critical one; every carrier contributes
    a logistic-weighted share of the critical exponential magnitude, so
    all carriers share the critical sign and extra satisfying agents raise
    the score. Exactly zero critical value gives exactly 0.
    """
    n = len(etas)
    if not 1 <= m <= n:
        raise ValueError(f"task count {m} out of range for {n} carriers")
    critical = ad.kth_largest(etas, m)
    critical_value = ad.value_of(critical)
    effective = []
    if critical_value > 0.0:
        numer = 2.0 * alpha * (ad.exp(ad.clamp(critical, -EXP_CLAMP, EXP_CLAMP)) - 1.0)
        for eta in etas:
            gate = 1.0 + ad.exp(ad.clamp(-alpha * (eta - critical), -EXP_CLAMP, EXP_CLAMP))
            effective.append(numer / gate)
    else:
        numer = -2.0 * alpha * (ad.exp(ad.clamp(-critical, -EXP_CLAMP, EXP_CLAMP)) - 1.0)
        for eta in etas:
            gate = 1.0 + ad.exp(ad.clamp(alpha * (eta - critical), -EXP_CLAMP, EXP_CLAMP))
            effective.append(numer / gate)
    return ad.mean(effective)


# ---------------------------------------------------------------------------
# Quantitative semantics (shared recursion, two operator sets)
# ---------------------------------------------------------------------------

class _TraditionalOps:
    @staticmethod
    def conj(values, params):
        return ad.minimum(values)

    @staticmethod
    def disj(values, params):
        return ad.maximum(values)

    @staticmethod
    def task(values, m, params):
        return ad.kth_largest(values, m)


class _ExponentialOps:
    @staticmethod
    def conj(values, params):
        return conj_exp(values, params.beta)

    @staticmethod
    def disj(values, params):
        return disj_exp(values, params.beta)

    @staticmethod
    def task(values, m, params):
        return task_exp(values, m, params.alpha)


def _quant_inner(positions, phi, t, ops, params, memo):
    key = (id(phi), t)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(phi, TrueNode):
        out = 0.0
    elif isinstance(phi, Atom):
        out = phi.predicate.value(positions[t])
    elif isinstance(phi, Not):
        out = -_quant_inner(positions, phi.child, t, ops, params, memo)
    elif isinstance(phi, And):
        out = ops.conj([_quant_inner(positions, c, t, ops, params, memo) for c in phi.children], params)
    elif isinstance(phi, Or):
        out = ops.disj([_quant_inner(positions, c, t, ops, params, memo) for c in phi.children], params)
    elif isinstance(phi, Always):
        window = [
            _quant_inner(positions, phi.child, tp, ops, params, memo)
            for tp in range(t + phi.interval.start, t + phi.interval.end + 1)
        ]
        out = ops.conj(window, params)
    elif isinstance(phi, Eventually):
        window = [
            _quant_inner(positions, phi.child, tp, ops, params, memo)
            for tp in range(t + phi.interval.start, t + phi.interval.end + 1)
        ]
        out = ops.disj(window, params)
    elif isinstance(phi, Until):
        out = _quant_until(
            lambda u: _quant_inner(positions, phi.left, u, ops, params, memo),
            lambda u: _quant_inner(positions, phi.right, u, ops, params, memo),
            phi.interval, t, ops, params,
        )
    elif isinstance(phi, Task):
        raise TypeError("task found inside an inner formula")
    else:
        raise TypeError(f"not a formula node: {phi!r}")
    memo[key] = out
    return out


def _quant_until(left_at, right_at, interval, t, ops, params):
    # right must hold at some t' in [t+a, t+b] with left holding on [t, t'-1];
    # expanded as the disjunction over t' of conjunctions and fed to the
    # metric's own operators.
    branches = []
    for tp in range(t + interval.start, t + interval.end + 1):
        parts = [right_at(tp)]
        parts.extend(left_at(u) for u in range(t, tp))
        branches.append(parts[0] if len(parts) == 1 else ops.conj(parts, params))
    return branches[0] if len(branches) == 1 else ops.disj(branches, params)


def _quant_outer(team, node, t, ops, params, memo, inner_memos):
    key = (id(node), t)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, TrueNode):
        out = 0.0
    elif isinstance(node, Task):
        carriers = team.carriers(node.capability)
        if node.count > len(carriers):
            raise ValueError(
                f"task needs {node.count} agents with '{node.capability}' "
                f"but the team only has {len(carriers)}"
            )
        values = []
        for j in carriers:
            jmemo = inner_memos.setdefault((j, id(node.inner)), {})
            values.append(_quant_inner(team.entries[j].positions, node.inner, t, ops, params, jmemo))
        out = ops.task(values, node.count, params)
    elif isinstance(node, Not):
        out = -_quant_outer(team, node.child, t, ops, params, memo, inner_memos)
    elif isinstance(node, And):
        out = ops.conj(
            [_quant_outer(team, c, t, ops, params, memo, inner_memos) for c in node.children], params
        )
    elif isinstance(node, Or):
        out = ops.disj(
            [_quant_outer(team, c, t, ops, params, memo, inner_memos) for c in node.children], params
        )
    elif isinstance(node, Always):
        window = [
            _quant_outer(team, node.child, tp, ops, params, memo, inner_memos)
            for tp in range(t + node.interval.start, t + node.interval.end + 1)
        ]
        out = ops.conj(window, params)
    elif isinstance(node, Eventually):
        window = [
            _quant_outer(team, node.child, tp, ops, params, memo, inner_memos)
            for tp in range(t + node.interval.start, t + node.interval.end + 1)
        ]
        out = ops.disj(window, params)
    elif isinstance(node, Until):
        out = _quant_until(
            lambda u: _quant_outer(team, node.left, u, ops, params, memo, inner_memos),
            lambda u: _quant_outer(team, node.right, u, ops, params, memo, inner_memos),
            node.interval, t, ops, params,
        )
    elif isinstance(node, Atom):
        raise TypeError("predicate found at the team level (must sit inside a task)")
    else:
        raise TypeError(f"not a formula node: {node!r}")
    memo[key] = out
    return out


def rho_traditional(team: TeamTrajectory, formula: Formula, t: int = 0):
    """Traditional (min/max) robustness of the outer formula at time t.

    Positive iff satisfied (up to the measure-zero boundary). Works on
    plain floats or on autodiff values carried in the trajectory.
    """
    _check_window(team, formula, t)
    return _quant_outer(team, formula, t, _TraditionalOps, None, {}, {})


def eta_exponential(team: TeamTrajectory, formula: Formula, t: int = 0,
                    params: RobustnessParams = RobustnessParams()):
    """Exponential robustness of the outer formula at time t (sound,
    differentiable almost everywhere, no masking)."""
    _check_window(team, formula, t)
    return _quant_outer(team, formula, t, _ExponentialOps, params, {}, {})


def rho_traditional_individual(positions, phi: Formula, t: int = 0):
    """Traditional robustness of an inner formula over one trajectory."""
    if t + horizon(phi) > len(positions) - 1:
        raise TraceTooShortError("inner formula horizon exceeds the trajectory")
    return _quant_inner(positions, phi, t, _TraditionalOps, None, {})


def eta_exponential_individual(positions, phi: Formula, t: int = 0,
                               params: RobustnessParams = RobustnessParams()):
    """Exponential robustness of an inner formula over one trajectory."""
    if t + horizon(phi) > len(positions) - 1:
        raise TraceTooShortError("inner formula horizon exceeds the trajectory")
    return _quant_inner(positions, phi, t, _ExponentialOps, params, {})
