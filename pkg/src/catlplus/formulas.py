"""Formula ASTs for the two-layer team logic CaTL+.

The inner layer is an STL formula over one agent's workspace trajectory.
The outer layer composes *tasks*: a task ``<phi, c, m>`` holds at time t
when at least ``m`` agents carrying capability ``c`` satisfy the inner
formula ``phi`` at t. Both layers share the same node classes; leaves
differ (predicates inside tasks, tasks at the outer level).

All nodes are immutable and hash/compare structurally, so formulas can be
shared freely across concurrent evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


class FormulaError(ValueError):
    """Raised for structurally invalid formulas or malformed imports."""


@dataclass(frozen=True)
class Interval:
    """A closed integer time window [start, end] with 0 <= start <= end."""

    start: int
    end: int

    def __post_init__(self):
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise FormulaError("interval bounds must be integers")
        if self.start < 0:
            raise FormulaError(f"interval start must be >= 0, got {self.start}")
        if self.end < self.start:
            raise FormulaError(f"empty interval [{self.start},{self.end}]")

    def __str__(self):
        return f"[{self.start},{self.end}]"


# ---------------------------------------------------------------------------
# Predicates over a workspace point (x, y). value() is an affine/quadratic
# expression, so it also works on autodiff scalars.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Halfplane:
    """Linear predicate: normal . p + offset >= 0."""

    normal: tuple[float, float]
    offset: float
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.normal[0] == 0.0 and self.normal[1] == 0.0:
            raise FormulaError("halfplane normal must be nonzero")

    def value(self, point):
        return self.normal[0] * point[0] + self.normal[1] * point[1] + self.offset


@dataclass(frozen=True)
class Circle:
    """Quadratic disc predicate, kept in squared form so it stays smooth.

    inside=True:  radius^2 - |p - center|^2 >= 0
    inside=False: |p - center|^2 - radius^2 >= 0
    """

    center: tuple[float, float]
    radius: float
    inside: bool = True
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise FormulaError(f"circle radius must be positive, got {self.radius}")

    def value(self, point):
        dx = point[0] - self.center[0]
        dy = point[1] - self.center[1]
        sq = dx * dx + dy * dy
        if self.inside:
            return self.radius * self.radius - sq
        return sq - self.radius * self.radius


Predicate = Union[Halfplane, Circle]


# ---------------------------------------------------------------------------
# Formula nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrueNode:
    """The `true` literal (valid in either layer)."""


@dataclass(frozen=True)
class Atom:
    """Inner-layer leaf: a predicate over the agent's workspace point."""

    predicate: Predicate


@dataclass(frozen=True)
class Task:
    """Outer-layer leaf: at least `count` agents with `capability` satisfy `inner`."""

    inner: "Formula"
    capability: str
    count: int

    def __post_init__(self):
        if not isinstance(self.count, int) or self.count < 1:
            raise FormulaError(f"task count must be a positive integer, got {self.count}")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise FormulaError("conjunction needs at least 2 children")


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise FormulaError("disjunction needs at least 2 children")


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Eventually:
    child: "Formula"
    interval: Interval


@dataclass(frozen=True)
class Always:
    child: "Formula"
    interval: Interval


Formula = Union[TrueNode, Atom, Task, Not, And, Or, Until, Eventually, Always]

TRUE = TrueNode()


def horizon(formula: Formula) -> int:
    """Furthest future step needed to decide the formula at time t.

    Temporal nodes add their interval end on top of their children; a task
    adds the horizon of its inner formula; plain leaves need only t itself.
    """
    if isinstance(formula, (TrueNode, Atom)):
        return 0
    if isinstance(formula, Task):
        return horizon(formula.inner)
    if isinstance(formula, Not):
        return horizon(formula.child)
    if isinstance(formula, (And, Or)):
        return max(horizon(c) for c in formula.children)
    if isinstance(formula, (Eventually, Always)):
        return formula.interval.end + horizon(formula.child)
    if isinstance(formula, Until):
        return formula.interval.end + max(horizon(formula.left), horizon(formula.right))
    raise FormulaError(f"not a formula node: {formula!r}")


def iter_tasks(formula: Formula):
    """Yield every Task leaf of an outer-layer formula."""
    stack = [formula]
    while stack:
        node = stack.pop()
        if isinstance(node, Task):
            yield node
        elif isinstance(node, Not):
            stack.append(node.child)
        elif isinstance(node, (And, Or)):
            stack.extend(node.children)
        elif isinstance(node, Until):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, (Eventually, Always)):
            stack.append(node.child)


def _inner_ok(formula: Formula) -> bool:
    if isinstance(formula, (TrueNode, Atom)):
        return True
    if isinstance(formula, Task):
        return False
    if isinstance(formula, Not):
        return _inner_ok(formula.child)
    if isinstance(formula, (And, Or)):
        return all(_inner_ok(c) for c in formula.children)
    if isinstance(formula, Until):
        return _inner_ok(formula.left) and _inner_ok(formula.right)
    if isinstance(formula, (Eventually, Always)):
        return _inner_ok(formula.child)
    return False


def validate(formula: Formula, team) -> list[str]:
    """Check an outer formula against a team; returns diagnostics (empty = ok).

    `team` is any iterable of objects with a `capabilities` attribute.
    Flags tasks whose capability no agent carries, counts exceeding the
    number of carriers, predicates used outside a task, and (defensively)
    empty intervals on hand-built nodes.
    """
    agents = list(team)
    diagnostics: list[str] = []

    def carriers(capability: str) -> int:
        return sum(1 for a in agents if capability in a.capabilities)

    def walk(node: Formula, in_task: bool):
        if isinstance(node, TrueNode):
            return
        if isinstance(node, Atom):
            if not in_task:
                diagnostics.append("predicate used at the team level (must sit inside a task)")
            return
        if isinstance(node, Task):
            if in_task:
                diagnostics.append("task nested inside another task's inner formula")
            n = carriers(node.capability)
            if n == 0:
                diagnostics.append(f"no agent carries capability '{node.capability}'")
            elif node.count > n:
                diagnostics.append(
                    f"task needs {node.count} agents with '{node.capability}' "
                    f"but the team only has {n}"
                )
            if not _inner_ok(node.inner):
                diagnostics.append("task inner formula contains a task")
            walk(node.inner, True)
            return
        if isinstance(node, Not):
            walk(node.child, in_task)
        elif isinstance(node, (And, Or)):
            for c in node.children:
                walk(c, in_task)
        elif isinstance(node, Until):
            if node.interval.end < node.interval.start:
                diagnostics.append(f"empty interval {node.interval}")
            walk(node.left, in_task)
            walk(node.right, in_task)
        elif isinstance(node, (Eventually, Always)):
            if node.interval.end < node.interval.start:
                diagnostics.append(f"empty interval {node.interval}")
            walk(node.child, in_task)
        else:
            diagnostics.append(f"unknown node {node!r}")

    walk(formula, False)
    return diagnostics


# ---------------------------------------------------------------------------
# Import from the single-layer predecessor logic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatlTask:
    """Single-layer task: hold a region for `duration` steps with per-capability quotas."""

    duration: int
    region: str
    requirements: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not isinstance(self.duration, int) or self.duration < 0:
            raise FormulaError(f"duration must be a nonnegative integer, got {self.duration}")
        if not self.requirements:
            raise FormulaError("a task needs at least one (capability, count) requirement")
        for cap, count in self.requirements:
            if not isinstance(count, int) or count < 1:
                raise FormulaError(f"requirement count must be >= 1, got {count} for '{cap}'")


def import_catl_task(task: CatlTask, region_map: dict[str, Formula]) -> Formula:
    """Translate a single-layer task into the two-layer logic.

    <d, region, {(c_i, m_i)}> becomes the conjunction over i of
    Always[0,d] <phi_region, c_i, m_i>; a single requirement yields the
    bare Always node.
    """
    if task.region not in region_map:
        raise FormulaError(f"unknown region label '{task.region}'")
    inner = region_map[task.region]
    window = Interval(0, task.duration)
    parts = tuple(
        Always(Task(inner, cap, count), window) for cap, count in task.requirements
    )
    if len(parts) == 1:
        return parts[0]
    return And(parts)
