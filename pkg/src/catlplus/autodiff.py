"""Scalar reverse-mode automatic differentiation on a flat tape.

A `Tape` records one scalar node per arithmetic operation: its value, its
parent node ids and the local partial derivatives. `backward` sweeps the
tape once in reverse to get d(root)/d(node) for every node. Each
evaluation owns a private tape, so concurrent evaluations never share
state.

The module-level helpers (`exp`, `sqrt`, `minimum`, `maximum`,
`kth_largest`, ...) dispatch on their argument type: fed plain floats they
compute plain floats through the exact same arithmetic, fed `ADValue`s
they grow the tape. Non-smooth selections (min/max/kth ties, clamp
saturation) take a deterministic one-sided choice and bump the tape's
`nonsmooth_events` counter so callers can report it.
"""

from __future__ import annotations

import math
from typing import Sequence


class Tape:
    """Append-only record of scalar operations for one evaluation."""

    __slots__ = ("values", "parents", "partials", "nonsmooth_events")

    def __init__(self):
        self.values: list[float] = []
        self.parents: list[tuple[int, ...]] = []
        self.partials: list[tuple[float, ...]] = []
        self.nonsmooth_events = 0

    def __len__(self):
        return len(self.values)

    def node(self, value: float, parents: tuple[int, ...] = (), partials: tuple[float, ...] = ()) -> "ADValue":
        nid = len(self.values)
        self.values.append(value)
        self.parents.append(parents)
        self.partials.append(partials)
        return ADValue(self, nid, value)

    def var(self, value: float) -> "ADValue":
        """Create an input (leaf) node."""
        return self.node(float(value))


class ADValue:
    """One scalar node: a value plus its id on the owning tape."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape: Tape, nid: int, value: float):
        self.tape = tape
        self.id = nid
        self.value = value

    def __repr__(self):
        return f"ADValue({self.value!r}, id={self.id})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, ADValue):
            return self.tape.node(self.value + other.value, (self.id, other.id), (1.0, 1.0))
        return self.tape.node(self.value + other, (self.id,), (1.0,))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ADValue):
            return self.tape.node(self.value - other.value, (self.id, other.id), (1.0, -1.0))
        return self.tape.node(self.value - other, (self.id,), (1.0,))

    def __rsub__(self, other):
        return self.tape.node(other - self.value, (self.id,), (-1.0,))

    def __mul__(self, other):
        if isinstance(other, ADValue):
            return self.tape.node(self.value * other.value, (self.id, other.id), (other.value, self.value))
        return self.tape.node(self.value * other, (self.id,), (float(other),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ADValue):
            inv = 1.0 / other.value
            return self.tape.node(
                self.value * inv, (self.id, other.id), (inv, -self.value * inv * inv)
            )
        inv = 1.0 / other
        return self.tape.node(self.value * inv, (self.id,), (inv,))

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        return self.tape.node(other * inv, (self.id,), (-other * inv * inv,))

    def __neg__(self):
        return self.tape.node(-self.value, (self.id,), (-1.0,))


def value_of(x) -> float:
    return x.value if isinstance(x, ADValue) else float(x)


def _tape_of(values) -> Tape | None:
    for v in values:
        if isinstance(v, ADValue):
            return v.tape
    return None


# -- elementary functions ---------------------------------------------------

def exp(x):
    if isinstance(x, ADValue):
        e = math.exp(x.value)
        return x.tape.node(e, (x.id,), (e,))
    return math.exp(x)


def sin(x):
    if isinstance(x, ADValue):
        return x.tape.node(math.sin(x.value), (x.id,), (math.cos(x.value),))
    return math.sin(x)


def cos(x):
    if isinstance(x, ADValue):
        return x.tape.node(math.cos(x.value), (x.id,), (-math.sin(x.value),))
    return math.cos(x)


def sqrt(x):
    # derivative at exactly 0 taken as 0 (one-sided, keeps gradients finite)
    if isinstance(x, ADValue):
        r = math.sqrt(x.value)
        d = 0.0 if r == 0.0 else 0.5 / r
        if r == 0.0:
            x.tape.nonsmooth_events += 1
        return x.tape.node(r, (x.id,), (d,))
    return math.sqrt(x)


def clamp(x, lo: float, hi: float):
    """Clip to [lo, hi]; the derivative is 1 inside (boundary included), 0 outside."""
    if isinstance(x, ADValue):
        v = x.value
        if v < lo:
            x.tape.nonsmooth_events += 1
            return x.tape.node(lo, (x.id,), (0.0,))
        if v > hi:
            x.tape.nonsmooth_events += 1
            return x.tape.node(hi, (x.id,), (0.0,))
        return x.tape.node(v, (x.id,), (1.0,))
    return min(max(x, lo), hi)


# -- selections --------------------------------------------------------------

def _extremal_index(values: Sequence, smallest: bool) -> tuple[int, bool]:
    """Index of the smallest/largest value; smallest index wins ties."""
    best = 0
    bestv = value_of(values[0])
    tie = False
    for i in range(1, len(values)):
        v = value_of(values[i])
        if (v < bestv) if smallest else (v > bestv):
            best, bestv, tie = i, v, False
        elif v == bestv:
            tie = True
    return best, tie


def _select(values: Sequence, idx: int, tie: bool):
    """Return values[idx] as a node routed only through that element."""
    tape = _tape_of(values)
    if tape is None:
        return value_of(values[idx])
    if tie:
        tape.nonsmooth_events += 1
    chosen = values[idx]
    if isinstance(chosen, ADValue):
        return tape.node(chosen.value, (chosen.id,), (1.0,))
    return tape.node(float(chosen))


def minimum(values: Sequence):
    """Min of a nonempty sequence; gradient goes to the first minimizer."""
    if not values:
        raise ValueError("minimum of empty sequence")
    idx, tie = _extremal_index(values, smallest=True)
    return _select(values, idx, tie)


def maximum(values: Sequence):
    """Max of a nonempty sequence; gradient goes to the first maximizer."""
    if not values:
        raise ValueError("maximum of empty sequence")
    idx, tie = _extremal_index(values, smallest=False)
    return _select(values, idx, tie)


def kth_largest(values: Sequence, k: int):
    """The k-th largest element (duplicates count); k is 1-based.

    The gradient routes to the smallest-index element equal to the
    selected value.
    """
    n = len(values)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} values")
    ordered = sorted((value_of(v) for v in values), reverse=True)
    critical = ordered[k - 1]
    idx = next(i for i, v in enumerate(values) if value_of(v) == critical)
    tie = sum(1 for v in values if value_of(v) == critical) > 1
    return _select(values, idx, tie)


def mean(values: Sequence):
    """Arithmetic mean, summed left to right."""
    if not values:
        raise ValueError("mean of empty sequence")
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total * (1.0 / len(values))


def backward(root: ADValue) -> list[float]:
    """Reverse sweep from `root`; returns adjoints indexed by node id.

    adjoint[i] is d(root)/d(node i); nodes the root does not depend on get 0.
    """
    tape = root.tape
    adjoint = [0.0] * len(tape.values)
    adjoint[root.id] = 1.0
    parents = tape.parents
    partials = tape.partials
    for nid in range(root.id, -1, -1):
        a = adjoint[nid]
        if a == 0.0:
            continue
        for pid, p in zip(parents[nid], partials[nid]):
            adjoint[pid] += a * p
    return adjoint
