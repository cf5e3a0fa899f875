"""Ground-truth machinery, independent of the reformulation chain.

A linear bilevel problem always has an optimal solution at a vertex of the
polyhedron obtained by intersecting the leader polyhedron, the coupling rows,
and the lower-level rows, so enumerating those vertices and filtering by
follower optimality yields an exact reference solver.  This module also
provides the bilevel feasibility checker, the point lifting used to move
between the original and lifted formulations, and a one-dimensional sampler
that reports the (possibly disconnected) bilevel-feasible intervals.

Vertex enumeration is combinatorial over row subsets, which is fine at desk
scale (roughly a dozen dimensions and a few dozen rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Sequence

from .errors import (DimensionDeficientError, InfeasibleProblemError,
                     SolverInternalError, UnboundedPolyhedronError,
                     UnboundedProblemError)
from .model import (EQ, GE, BilevelInstance, BilevelSolution, FeasibilityCheck,
                    FeasibilityReport, LinRow)
from .rational import Rat, ZERO
from .simplex import (INFEASIBLE, OPTIMAL, UNBOUNDED, lower_level_solve,
                      lp_model, solve_lp)


@dataclass(frozen=True)
class VertexList:
    """All vertices of an inequality system, with their tight-row index sets."""

    dim: int
    vertices: tuple[tuple[Rat, ...], ...]
    active_sets: tuple[frozenset[int], ...]


@dataclass(frozen=True)
class SampleRecord:
    """One grid sample: the leader point, the follower's reply, whether the
    coupling rows hold at the reply, and the leader objective there."""

    x: tuple[Rat, ...]
    status: str
    y: tuple[Rat, ...] | None
    coupling_ok: bool | None
    objective: Rat | None


@dataclass(frozen=True)
class SampleReport:
    records: tuple[SampleRecord, ...]
    intervals: tuple[tuple[Rat, Rat], ...] | None


def _scale_row(coeffs: Sequence[Rat], rhs: Rat) -> tuple[list[int], int]:
    denom = rhs.denominator
    for c in coeffs:
        if c:
            denom = lcm(denom, c.denominator)
    return [int(c * denom) for c in coeffs], int(rhs * denom)


def _solve_square_int(a: list[list[int]], b: list[int]) -> list[Rat] | None:
    """Solve an integer square system exactly; None if singular.

    Fraction-free forward elimination, then exact back-substitution.
    """
    n = len(a)
    m = [row[:] + [bv] for row, bv in zip(a, b)]
    prev = 1
    for k in range(n):
        p = -1
        for i in range(k, n):
            if m[i][k]:
                p = i
                break
        if p < 0:
            return None
        if p != k:
            m[k], m[p] = m[p], m[k]
        pk = m[k][k]
        for i in range(k + 1, n):
            f = m[i][k]
            row_i = m[i]
            row_k = m[k]
            m[i] = [0] * (k + 1) + \
                [(pk * row_i[j] - f * row_k[j]) // prev for j in range(k + 1, n + 1)]
        prev = pk
    x = [ZERO] * n
    for i in range(n - 1, -1, -1):
        s = Fraction(m[i][n])
        for j in range(i + 1, n):
            if m[i][j]:
                s -= m[i][j] * x[j]
        x[i] = s / m[i][i]
    return x


def _probe_boundedness(rows: Sequence[LinRow], dim: int) -> bool:
    """True if the polyhedron is nonempty; raises if it is unbounded."""
    for j in range(dim):
        for sign in (1, -1):
            objective = tuple(Fraction(sign * int(t == j)) for t in range(dim))
            out = solve_lp(lp_model(objective, rows))
            if out.status == INFEASIBLE:
                return False
            if out.status == UNBOUNDED:
                raise UnboundedPolyhedronError(
                    f"polyhedron is unbounded along coordinate {j}")
    return True


def enumerate_vertices(rows: Sequence[LinRow], dim: int, *,
                       require_bounded: bool = True) -> VertexList:
    """All vertices of {v : row.coeffs . v >= row.rhs for every row}.

    Every size-`dim` row subset with an invertible coefficient submatrix is
    solved exactly and the solution kept when it satisfies all rows; the
    recorded active set is the full set of rows tight at the vertex.
    Vertices are sorted lexicographically.

    By default the polyhedron must be bounded (detected by LP probes along
    each coordinate before enumerating); `require_bounded=False` skips the
    probe and enumerates the basic feasible points of a possibly unbounded
    pointed polyhedron.
    """
    for row in rows:
        if row.sense != GE:
            raise ValueError("enumerate_vertices expects all rows in >= form")
        if len(row.coeffs) != dim:
            raise ValueError("row width does not match the ambient dimension")
    if dim == 0:
        ok = all(row.rhs <= 0 for row in rows)
        if not ok:
            return VertexList(dim=0, vertices=(), active_sets=())
        tight = frozenset(i for i, row in enumerate(rows) if row.rhs == 0)
        return VertexList(dim=0, vertices=((),), active_sets=(tight,))
    if len(rows) < dim:
        raise DimensionDeficientError(
            f"{len(rows)} rows cannot define a vertex in dimension {dim}")
    if require_bounded and not _probe_boundedness(rows, dim):
        return VertexList(dim=dim, vertices=(), active_sets=())
    int_rows = [_scale_row(row.coeffs, row.rhs) for row in rows]
    found: dict[tuple[Rat, ...], frozenset[int]] = {}
    for subset in combinations(range(len(rows)), dim):
        a = [int_rows[i][0] for i in subset]
        b = [int_rows[i][1] for i in subset]
        sol = _solve_square_int(a, b)
        if sol is None:
            continue
        key = tuple(sol)
        if key in found:
            continue
        denom = 1
        for c in sol:
            denom = lcm(denom, c.denominator)
        nums = [int(c * denom) for c in sol]
        feasible = True
        tight: list[int] = []
        for ridx, (ic, ir) in enumerate(int_rows):
            v = sum(cj * nj for cj, nj in zip(ic, nums)) - ir * denom
            if v < 0:
                feasible = False
                break
            if v == 0:
                tight.append(ridx)
        if feasible:
            found[key] = frozenset(tight)
    ordered = sorted(found.items())
    return VertexList(dim=dim,
                      vertices=tuple(v for v, _ in ordered),
                      active_sets=tuple(s for _, s in ordered))


def _combined_rows(inst: BilevelInstance, *, include_coupling: bool) -> list[LinRow]:
    """Rows of the intersected polyhedron over (x, y)."""
    zeros_y = (ZERO,) * inst.m
    rows = [LinRow(tuple(Gi) + zeros_y, GE, gi) for Gi, gi in zip(inst.G, inst.g)]
    if include_coupling:
        rows += [LinRow(tuple(Ai) + tuple(Bi), GE, ai)
                 for Ai, Bi, ai in zip(inst.A, inst.B, inst.a)]
    rows += [LinRow(tuple(Ci) + tuple(Di), GE, bi)
             for Ci, Di, bi in zip(inst.C, inst.D, inst.b)]
    return rows


def bilevel_feasible_vertices(inst: BilevelInstance
                              ) -> tuple[tuple[tuple[Rat, ...], tuple[Rat, ...]], ...]:
    """Vertices of the intersected polyhedron that are bilevel feasible.

    Raises `UnboundedPolyhedronError` when the intersected polyhedron is
    unbounded and `UnboundedProblemError` when the follower problem admits no
    optimal reply because it is unbounded below.
    """
    rows = _combined_rows(inst, include_coupling=True)
    vlist = enumerate_vertices(rows, inst.n + inst.m)
    kept: list[tuple[tuple[Rat, ...], tuple[Rat, ...]]] = []
    value_cache: dict[tuple[Rat, ...], Rat | None] = {}
    for vertex in vlist.vertices:
        x, y = vertex[:inst.n], vertex[inst.n:]
        if x not in value_cache:
            reply = lower_level_solve(inst, x)
            if reply.status == UNBOUNDED:
                raise UnboundedProblemError(
                    "lower level is unbounded: no optimal follower reply exists")
            if reply.status == INFEASIBLE:
                raise SolverInternalError(
                    "lower level infeasible at a point satisfying its rows")
            value_cache[x] = reply.objective
        if sum((fj * yj for fj, yj in zip(inst.f, y)), ZERO) == value_cache[x]:
            kept.append((x, y))
    return tuple(kept)


def solve_bilevel_bruteforce(inst: BilevelInstance) -> BilevelSolution:
    """Reference bilevel solver by vertex enumeration.

    Keeps the intersected polyhedron's vertices whose follower part is
    optimal for the lower level, and returns the one minimizing the leader
    objective (ties: lexicographically smallest point).
    """
    kept = bilevel_feasible_vertices(inst)
    if not kept:
        raise InfeasibleProblemError("no bilevel-feasible vertex: instance infeasible")
    best = min(kept, key=lambda xy: (inst.leader_objective(*xy), xy[0] + xy[1]))
    x, y = best
    report = check_bilevel_feasible(inst, x, y)
    if not report.ok:
        raise SolverInternalError("reference optimum failed its own feasibility check")
    return BilevelSolution(x=x, y=y, objective=inst.leader_objective(x, y),
                           method="oracle", certificate=report)


def check_bilevel_feasible(inst: BilevelInstance, x: Sequence[Rat],
                           y: Sequence[Rat]) -> FeasibilityReport:
    """Verify leader feasibility, coupling, lower-level feasibility, and
    follower optimality of (x, y); failures carry exact residuals."""
    if len(x) != inst.n or len(y) != inst.m:
        raise ValueError("point dimensions do not match the instance")
    x = tuple(x)
    y = tuple(y)
    checks: list[FeasibilityCheck] = []
    for i, (Gi, gi) in enumerate(zip(inst.G, inst.g)):
        res = sum((cij * xj for cij, xj in zip(Gi, x)), ZERO) - gi
        checks.append(FeasibilityCheck(f"X row {i}", res >= 0, res))
    for i, (Ai, Bi, ai) in enumerate(zip(inst.A, inst.B, inst.a)):
        res = sum((cij * xj for cij, xj in zip(Ai, x)), ZERO) \
            + sum((cij * yj for cij, yj in zip(Bi, y)), ZERO) - ai
        checks.append(FeasibilityCheck(f"coupling row {i}", res >= 0, res))
    for i, (Ci, Di, bi) in enumerate(zip(inst.C, inst.D, inst.b)):
        res = sum((cij * xj for cij, xj in zip(Ci, x)), ZERO) \
            + sum((cij * yj for cij, yj in zip(Di, y)), ZERO) - bi
        checks.append(FeasibilityCheck(f"lower row {i}", res >= 0, res))
    reply = lower_level_solve(inst, x)
    if reply.status != OPTIMAL:
        checks.append(FeasibilityCheck(
            f"follower optimality (lower level {reply.status})", False, None))
    else:
        fy = sum((fj * yj for fj, yj in zip(inst.f, y)), ZERO)
        checks.append(FeasibilityCheck("follower optimality", fy == reply.objective,
                                       fy - reply.objective))
    return FeasibilityReport(tuple(checks))


def lift_point(inst: BilevelInstance, x: Sequence[Rat], y: Sequence[Rat]
               ) -> tuple[tuple[Rat, ...], tuple[Rat, ...], Rat]:
    """Extend a lower-level-feasible point by the smallest violation slack
    that makes every coupling row hold; zero when they already do."""
    if len(x) != inst.n or len(y) != inst.m:
        raise ValueError("point dimensions do not match the instance")
    x = tuple(x)
    y = tuple(y)
    for i, (Ci, Di, bi) in enumerate(zip(inst.C, inst.D, inst.b)):
        lhs = sum((cij * xj for cij, xj in zip(Ci, x)), ZERO) \
            + sum((cij * yj for cij, yj in zip(Di, y)), ZERO)
        if lhs < bi:
            raise ValueError(f"point violates lower row {i}; cannot lift")
    eps = ZERO
    for Ai, Bi, ai in zip(inst.A, inst.B, inst.a):
        residual = ai - sum((cij * xj for cij, xj in zip(Ai, x)), ZERO) \
            - sum((cij * yj for cij, yj in zip(Bi, y)), ZERO)
        if residual > eps:
            eps = residual
    return x, y, eps


# ----------------------------------------------------------------------
# Induced-set sampling


def _grid(start: Rat, stop: Rat, step: Rat) -> list[Rat]:
    out = []
    v = start
    while v <= stop:
        out.append(v)
        v = v + step
    return out


def _membership_test(inst: BilevelInstance, xv: Rat) -> bool:
    """Is some follower-optimal reply at x = (xv,) bilevel feasible?"""
    x = (xv,)
    for Gi, gi in zip(inst.G, inst.g):
        if Gi[0] * xv < gi:
            return False
    reply = lower_level_solve(inst, x)
    if reply.status != OPTIMAL:
        return False
    if inst.k == 0:
        return True
    rows = [LinRow(tuple(Di), GE, bi - Ci[0] * xv)
            for Ci, Di, bi in zip(inst.C, inst.D, inst.b)]
    rows += [LinRow(tuple(Bi), GE, ai - Ai[0] * xv)
             for Ai, Bi, ai in zip(inst.A, inst.B, inst.a)]
    rows.append(LinRow(inst.f, EQ, reply.objective))
    probe = solve_lp(lp_model((ZERO,) * inst.m, rows))
    return probe.status == OPTIMAL


def _breakpoint_candidates(inst: BilevelInstance, start: Rat, stop: Rat) -> list[Rat]:
    """Exact x-values at which 1-D induced-set membership can change.

    These are x-coordinates of vertices of the feasibility polyhedron (leader
    rows plus lower rows), of that polyhedron cut by the coupling rows, and of
    the cut polyhedron intersected with each linear piece of the follower's
    optimal-value function (whose breakpoints are the first set).
    """
    dim = 1 + inst.m
    base_rows = _combined_rows(inst, include_coupling=False)
    base = enumerate_vertices(base_rows, dim)
    xs0 = sorted({v[0] for v in base.vertices})
    full_rows = _combined_rows(inst, include_coupling=True)
    xs1 = {v[0] for v in enumerate_vertices(full_rows, dim).vertices}
    xs2: set[Rat] = set()
    for u, v in zip(xs0, xs0[1:]):
        ru = lower_level_solve(inst, (u,))
        rv = lower_level_solve(inst, (v,))
        if ru.status != OPTIMAL or rv.status != OPTIMAL:
            continue
        beta = (rv.objective - ru.objective) / (v - u)
        alpha = ru.objective - beta * u
        level_pos = LinRow((-beta,) + tuple(inst.f), GE, alpha)
        level_neg = LinRow((beta,) + tuple(-fj for fj in inst.f), GE, -alpha)
        piece = enumerate_vertices(full_rows + [level_pos, level_neg], dim)
        xs2 |= {v[0] for v in piece.vertices}
    merged = set(xs0) | xs1 | xs2 | {start, stop}
    return sorted(c for c in merged if start <= c <= stop)


def _refine_intervals(inst: BilevelInstance, grid: list[Rat], member: list[bool],
                      candidates: list[Rat]) -> tuple[tuple[Rat, Rat], ...]:
    intervals: list[tuple[Rat, Rat]] = []
    i = 0
    n = len(grid)
    while i < n:
        if not member[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and member[j + 1]:
            j += 1
        left = grid[i]
        if i > 0:
            inside = [c for c in candidates if grid[i - 1] < c < grid[i]]
            for c in reversed(inside):
                if _membership_test(inst, c):
                    left = c
                else:
                    break
        right = grid[j]
        if j + 1 < n:
            inside = [c for c in candidates if grid[j] < c < grid[j + 1]]
            for c in inside:
                if _membership_test(inst, c):
                    right = c
                else:
                    break
        intervals.append((left, right))
        i = j + 1
    return tuple(intervals)


def sample_induced_set(inst: BilevelInstance, axis: int, start: Rat, stop: Rat,
                       step: Rat) -> SampleReport:
    """Sample follower replies along one leader coordinate.

    Every grid point gets a record (other leader coordinates are held at
    zero).  For single-variable leaders the report also carries the maximal
    bilevel-feasible closed intervals: grid transitions are refined to exact
    endpoints by testing membership at the exact breakpoints of the active
    rows, so reported endpoints are exact rationals rather than grid points.
    Features narrower than the grid step can be missed between grid points.
    """
    if not 0 <= axis < inst.n:
        raise ValueError(f"axis {axis} out of range for n={inst.n}")
    if step <= 0:
        raise ValueError("step must be positive")
    if start > stop:
        raise ValueError("empty sampling range")
    records: list[SampleRecord] = []
    grid = _grid(start, stop, step)
    for xv in grid:
        x = tuple(xv if t == axis else ZERO for t in range(inst.n))
        reply = lower_level_solve(inst, x)
        if reply.status != OPTIMAL:
            records.append(SampleRecord(x=x, status=reply.status, y=None,
                                        coupling_ok=None, objective=None))
            continue
        y = reply.x
        coupling_ok = all(
            sum((cij * xj for cij, xj in zip(Ai, x)), ZERO)
            + sum((cij * yj for cij, yj in zip(Bi, y)), ZERO) >= ai
            for Ai, Bi, ai in zip(inst.A, inst.B, inst.a))
        records.append(SampleRecord(x=x, status=OPTIMAL, y=y,
                                    coupling_ok=coupling_ok,
                                    objective=inst.leader_objective(x, y)))
    intervals = None
    if inst.n == 1:
        member = [_membership_test(inst, xv) for xv in grid]
        candidates = _breakpoint_candidates(inst, start, stop)
        intervals = _refine_intervals(inst, grid, member, candidates)
    return SampleReport(records=tuple(records), intervals=intervals)


def render_samples(report: SampleReport) -> str:
    """Comma-separated records, then the interval summary as # comments."""
    lines = []
    for rec in report.records:
        xs = " ".join(str(v) for v in rec.x)
        if rec.status == OPTIMAL:
            ys = " ".join(str(v) for v in rec.y)
            flag = "true" if rec.coupling_ok else "false"
            obj = str(rec.objective)
        else:
            ys = flag = obj = ""
        lines.append(f"{xs},{rec.status},{ys},{flag},{obj}")
    if report.intervals is not None:
        for lo, hi in report.intervals:
            lines.append(f"# interval {lo} {hi}")
    return "\n".join(lines) + "\n"
