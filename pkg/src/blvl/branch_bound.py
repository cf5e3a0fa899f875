"""Exact MILP solver over binary variables, layered on the simplex module.

Best-first branch and bound: nodes are ordered by their LP relaxation bound
(ties by insertion order), the branching variable is the most fractional
binary (ties by lowest index), and the zero-fixing child is created first.
Because arithmetic is exact, integrality tests are exact comparisons and the
returned optimum equals the final global bound identically.

`enumerate_all_binary_patterns` solves one LP per 0/1 assignment and serves
as an independent oracle for cross-checking `solve_milp`.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import product
from typing import Sequence

from .errors import EnumerationLimitError, SolverInternalError
from .model import MilpModel
from .rational import Rat, ZERO
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpOutcome, lp_model, solve_lp


@dataclass(frozen=True)
class BoundLogEntry:
    """State when a node is taken from the queue: the global lower bound at
    that moment and the incumbent objective, if any."""

    node: int
    bound: Rat | float
    incumbent: Rat | None


@dataclass(frozen=True)
class MilpOutcome:
    status: str
    x: tuple[Rat, ...] | None
    objective: Rat | None
    node_count: int
    bound_log: tuple[BoundLogEntry, ...]
    incumbents: tuple[tuple[int, tuple[Rat, ...], Rat], ...] = ()


def _node_lp(model: MilpModel, fixings: dict[int, int]) -> LpOutcome:
    lower = list(model.lower)
    upper = list(model.upper)
    for var, val in fixings.items():
        lower[var] = Rat(val)
        upper[var] = Rat(val)
    return solve_lp(lp_model(model.objective, model.rows, lower, upper))


def _fractional_binary(model: MilpModel, point: Sequence[Rat]) -> int | None:
    """Most fractional binary (ties by lowest index); None if all integral."""
    best = None
    best_score = ZERO
    for j in model.binary_indices:
        v = point[j]
        score = min(v, 1 - v)
        if score > best_score:
            best, best_score = j, score
    return best


def _check_incumbent(model: MilpModel, point: Sequence[Rat]) -> None:
    for j in model.binary_indices:
        if point[j] != 0 and point[j] != 1:
            raise SolverInternalError("incumbent is not integral on a binary")
    for row in model.rows:
        if not row.satisfied(point):
            raise SolverInternalError("incumbent violates a model row")


def solve_milp(model: MilpModel) -> MilpOutcome:
    """Exact global optimum via best-first branch and bound.

    The LP relaxation keeps binaries inside [0, 1].  When several optima
    exist, the first incumbent reaching the optimal value under the
    deterministic node order is returned.  A node whose relaxation is
    unbounded cannot be pruned by bound; it is branched on its lowest-index
    unfixed binary until all binaries are fixed, at which point an unbounded
    relaxation is an unbounded mixed-integer program.
    """
    const = model.obj_const
    heap: list = []
    counter = 0
    node_count = 0
    best_obj: Rat | None = None
    best_x: tuple[Rat, ...] | None = None
    log: list[BoundLogEntry] = []
    incumbents: list[tuple[int, tuple[Rat, ...], Rat]] = []

    def admit(fixings: dict[int, int]) -> MilpOutcome | None:
        """Solve a node LP and either record an incumbent, enqueue, or prune."""
        nonlocal counter, node_count, best_obj, best_x
        node_count += 1
        node_id = node_count
        out = _node_lp(model, fixings)
        if out.status == INFEASIBLE:
            return None
        if out.status == UNBOUNDED:
            if len(fixings) == len(model.binary_indices):
                return MilpOutcome(status=UNBOUNDED, x=out.x, objective=None,
                                   node_count=node_count, bound_log=tuple(log),
                                   incumbents=tuple(incumbents))
            counter += 1
            heapq.heappush(heap, (float("-inf"), counter, node_id, fixings, out))
            return None
        obj = out.objective + const
        branch_var = _fractional_binary(model, out.x)
        if branch_var is None:
            if best_obj is None or obj < best_obj:
                _check_incumbent(model, out.x)
                best_obj, best_x = obj, out.x
                incumbents.append((node_id, out.x, obj))
            return None
        if best_obj is not None and obj >= best_obj:
            return None
        counter += 1
        heapq.heappush(heap, (obj, counter, node_id, fixings, out))
        return None

    result = admit({})
    if result is not None:
        return result
    while heap:
        bound, _, node_id, fixings, out = heapq.heappop(heap)
        # The proven global lower bound: the queue minimum capped by the
        # incumbent (the optimum can never exceed the incumbent).
        proven = bound if best_obj is None else min(bound, best_obj)
        log.append(BoundLogEntry(node=node_id, bound=proven, incumbent=best_obj))
        if best_obj is not None and bound >= best_obj:
            continue
        if out.status == UNBOUNDED:
            branch_var = next(j for j in model.binary_indices if j not in fixings)
        else:
            branch_var = _fractional_binary(model, out.x)
            if branch_var is None:
                raise SolverInternalError("integral node was enqueued")
        for val in (0, 1):
            child = dict(fixings)
            child[branch_var] = val
            result = admit(child)
            if result is not None:
                return result
    if best_obj is None:
        return MilpOutcome(status=INFEASIBLE, x=None, objective=None,
                           node_count=node_count, bound_log=tuple(log))
    log.append(BoundLogEntry(node=0, bound=best_obj, incumbent=best_obj))
    return MilpOutcome(status=OPTIMAL, x=best_x, objective=best_obj,
                       node_count=node_count, bound_log=tuple(log),
                       incumbents=tuple(incumbents))


def enumerate_all_binary_patterns(model: MilpModel, limit: int = 20) -> MilpOutcome:
    """Solve the LP for every 0/1 assignment of the binaries and keep the best.

    Independent of the branch-and-bound path; the two must agree in value.
    """
    bins = model.binary_indices
    if len(bins) > limit:
        raise EnumerationLimitError(
            f"{len(bins)} binaries exceed the enumeration limit of {limit}")
    const = model.obj_const
    best_obj: Rat | None = None
    best_x: tuple[Rat, ...] | None = None
    count = 0
    for pattern in product((0, 1), repeat=len(bins)):
        count += 1
        out = _node_lp(model, dict(zip(bins, pattern)))
        if out.status == INFEASIBLE:
            continue
        if out.status == UNBOUNDED:
            return MilpOutcome(status=UNBOUNDED, x=out.x, objective=None,
                               node_count=count, bound_log=())
        obj = out.objective + const
        if best_obj is None or obj < best_obj:
            best_obj, best_x = obj, out.x
    if best_obj is None:
        return MilpOutcome(status=INFEASIBLE, x=None, objective=None,
                           node_count=count, bound_log=())
    _check_incumbent(model, best_x)
    return MilpOutcome(status=OPTIMAL, x=best_x, objective=best_obj,
                       node_count=count, bound_log=())
