"""The reformulation chain that removes coupling constraints.

Stages, each exact and invertible in value:

1. `lift_coupling` moves every coupling row into the follower problem, padded
   by a shared nonnegative violation scalar, leaving a single scalar coupling
   constraint (violation = 0) at the upper level.
2. `kkt_reformulate` replaces the lifted follower LP by stationarity, primal
   and dual feasibility, and complementarity pairs, producing a single-level
   system.
3. `linearize_big_m` encodes each complementarity pair with one binary and a
   big-M value, yielding a plain MILP equivalent to the original problem.
4. `penalize` drops the violation = 0 row and charges kappa * violation in
   the objective instead: the KKT form of a bilevel problem with no coupling
   constraints at all.  For a large enough finite kappa the optima coincide,
   and `auto_kappa` finds such a kappa by doubling, certifying the result
   against the reference feasibility checker.

`bound_big_m` computes a safe big-M by exact vertex enumeration rather than
an asymptotic construction: desk-scale correctness over polynomial bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .branch_bound import MilpOutcome, solve_milp
from .errors import (InfeasibleProblemError, SolverInternalError,
                     UnboundedProblemError)
from .model import (EQ, GE, LE, BilevelInstance, BilevelSolution, LiftedInstance,
                    LinRow, MilpModel)
from .oracle import check_bilevel_feasible, enumerate_vertices
from .rational import ONE, Rat, ZERO
from .simplex import INFEASIBLE, UNBOUNDED


@dataclass(frozen=True)
class LinExpr:
    """An affine expression coeffs . v + const over a system's variables."""

    coeffs: tuple[Rat, ...]
    const: Rat

    def value(self, point: Sequence[Rat]) -> Rat:
        return sum((c * v for c, v in zip(self.coeffs, point)), ZERO) + self.const


@dataclass(frozen=True)
class ComplementaritySystem:
    """Single-level system for the lifted problem, complementarity split out.

    Variables, in order: leader x (n), follower y (m), the violation scalar,
    duals of the lifted coupling rows (k), duals of the original lower rows
    (l), and the dual of the violation bound.  `rows` holds every linear row
    of the system (leader polyhedron, violation = 0, primal feasibility,
    stationarity, dual nonnegativity); `pairs` holds the complementarity
    conditions as (nonnegative variable index, nonnegative expression) whose
    products must vanish.
    """

    n: int
    m: int
    k: int
    l: int
    var_names: tuple[str, ...]
    rows: tuple[LinRow, ...]
    pairs: tuple[tuple[int, LinExpr], ...]
    objective: tuple[Rat, ...]

    @property
    def num_vars(self) -> int:
        return self.n + self.m + 1 + self.k + self.l + 1

    @property
    def eps_index(self) -> int:
        return self.n + self.m

    @property
    def couple_dual_slice(self) -> slice:
        base = self.n + self.m + 1
        return slice(base, base + self.k)

    @property
    def lower_dual_slice(self) -> slice:
        base = self.n + self.m + 1 + self.k
        return slice(base, base + self.l)

    @property
    def viol_dual_index(self) -> int:
        return self.n + self.m + 1 + self.k + self.l


def lift_coupling(inst: BilevelInstance) -> LiftedInstance:
    """Move the coupling rows into the follower problem.

    The follower gains one variable (the violation scalar, zero cost, last
    position); each coupling row gains that variable at coefficient 1 and
    becomes a lower-level row; the bound "violation >= 0" is appended.  The
    upper level keeps only the leader polyhedron plus the single coupling
    constraint that the violation be zero.
    """
    zeros_m = (ZERO,) * inst.m
    C = tuple(tuple(Ai) for Ai in inst.A) \
        + tuple(tuple(Ci) for Ci in inst.C) \
        + ((ZERO,) * inst.n,)
    D = tuple(tuple(Bi) + (ONE,) for Bi in inst.B) \
        + tuple(tuple(Di) + (ZERO,) for Di in inst.D) \
        + (zeros_m + (ONE,),)
    b = tuple(inst.a) + tuple(inst.b) + (ZERO,)
    base = BilevelInstance(
        n=inst.n, m=inst.m + 1,
        c=inst.c, d=tuple(inst.d) + (ZERO,), f=tuple(inst.f) + (ZERO,),
        G=inst.G, g=inst.g,
        A=(), B=(), a=(),
        C=C, D=D, b=b)
    return LiftedInstance(base=base, epsilon_index=inst.m, coupling_rows=inst.k)


def original_instance(lifted: LiftedInstance) -> BilevelInstance:
    """Invert `lift_coupling`, recovering the coupling-constrained instance."""
    base = lifted.base
    m = lifted.original_m
    k = lifted.coupling_rows
    l = lifted.original_l
    return BilevelInstance(
        n=base.n, m=m,
        c=base.c, d=base.d[:m], f=base.f[:m],
        G=base.G, g=base.g,
        A=tuple(base.C[:k]),
        B=tuple(row[:m] for row in base.D[:k]),
        a=base.b[:k],
        C=tuple(base.C[k:k + l]),
        D=tuple(row[:m] for row in base.D[k:k + l]),
        b=base.b[k:k + l])


def penalized_instance(lifted: LiftedInstance, kappa: Rat) -> BilevelInstance:
    """The coupling-free bilevel problem whose leader pays kappa per unit of
    coupling violation; its KKT reformulation is exactly `penalize`'s MILP."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    base = lifted.base
    d = base.d[:lifted.epsilon_index] + (kappa,) + base.d[lifted.epsilon_index + 1:]
    return BilevelInstance(n=base.n, m=base.m, c=base.c, d=d, f=base.f,
                           G=base.G, g=base.g, A=base.A, B=base.B, a=base.a,
                           C=base.C, D=base.D, b=base.b)


def project_solution(lifted: LiftedInstance, x: Sequence[Rat],
                     y_ext: Sequence[Rat]) -> tuple[tuple[Rat, ...], tuple[Rat, ...]]:
    """Drop the violation coordinate from a lifted follower point."""
    if len(y_ext) != lifted.base.m:
        raise ValueError("lifted follower point has the wrong length")
    e = lifted.epsilon_index
    return tuple(x), tuple(y_ext[:e]) + tuple(y_ext[e + 1:])


def kkt_reformulate(lifted: LiftedInstance) -> ComplementaritySystem:
    """Replace the lifted follower LP by its KKT conditions.

    Emits, over (x, y, violation, coupling duals, lower duals, violation
    dual): the leader polyhedron, violation = 0, primal feasibility of the
    lifted lower level, stationarity in y (B^T u_c + D^T u_l = f) and in the
    violation (sum of coupling duals + violation dual = 0), dual
    nonnegativity, and one complementarity pair per lifted coupling row, per
    lower row, and for the violation bound: k + l + 1 pairs.
    """
    inst = original_instance(lifted)
    n, m, k, l = inst.n, inst.m, inst.k, inst.l
    nv = n + m + 1 + k + l + 1
    eps = n + m
    cd0 = n + m + 1
    ld0 = cd0 + k
    vd = ld0 + l

    names = tuple(f"x{j}" for j in range(n)) + tuple(f"y{j}" for j in range(m)) \
        + ("eps",) + tuple(f"u_couple{i}" for i in range(k)) \
        + tuple(f"u_lower{i}" for i in range(l)) + ("u_viol",)

    def filled(pairs: dict[int, Rat]) -> tuple[Rat, ...]:
        return tuple(pairs.get(j, ZERO) for j in range(nv))

    rows: list[LinRow] = []
    for Gi, gi in zip(inst.G, inst.g):
        rows.append(LinRow(filled({j: Gi[j] for j in range(n)}), GE, gi))
    rows.append(LinRow(filled({eps: ONE}), EQ, ZERO))
    primal_exprs: list[LinExpr] = []
    for Ai, Bi, ai in zip(inst.A, inst.B, inst.a):
        coeffs = {j: Ai[j] for j in range(n)}
        coeffs.update({n + j: Bi[j] for j in range(m)})
        coeffs[eps] = ONE
        rows.append(LinRow(filled(coeffs), GE, ai))
        primal_exprs.append(LinExpr(filled(coeffs), -ai))
    for Ci, Di, bi in zip(inst.C, inst.D, inst.b):
        coeffs = {j: Ci[j] for j in range(n)}
        coeffs.update({n + j: Di[j] for j in range(m)})
        rows.append(LinRow(filled(coeffs), GE, bi))
        primal_exprs.append(LinExpr(filled(coeffs), -bi))
    rows.append(LinRow(filled({eps: ONE}), GE, ZERO))
    for j in range(m):
        coeffs = {cd0 + i: inst.B[i][j] for i in range(k)}
        coeffs.update({ld0 + i: inst.D[i][j] for i in range(l)})
        rows.append(LinRow(filled(coeffs), EQ, inst.f[j]))
    coeffs = {cd0 + i: ONE for i in range(k)}
    coeffs[vd] = ONE
    rows.append(LinRow(filled(coeffs), EQ, ZERO))
    for i in range(k + l + 1):
        rows.append(LinRow(filled({cd0 + i: ONE}), GE, ZERO))

    pairs: list[tuple[int, LinExpr]] = []
    for i in range(k):
        pairs.append((cd0 + i, primal_exprs[i]))
    for i in range(l):
        pairs.append((ld0 + i, primal_exprs[k + i]))
    pairs.append((vd, LinExpr(filled({eps: ONE}), ZERO)))

    objective = filled({j: inst.c[j] for j in range(n)}
                       | {n + j: inst.d[j] for j in range(m)})
    return ComplementaritySystem(n=n, m=m, k=k, l=l, var_names=names,
                                 rows=tuple(rows), pairs=tuple(pairs),
                                 objective=objective)


def _dual_feasibility_rows(inst: BilevelInstance) -> list[LinRow]:
    """The lifted follower's dual polyhedron over (coupling duals, lower
    duals, violation dual), equalities written as opposed >= pairs."""
    k, l, m = inst.k, inst.l, inst.m
    dim = k + l + 1
    rows: list[LinRow] = []
    for j in range(m):
        coeffs = tuple(inst.B[i][j] for i in range(k)) \
            + tuple(inst.D[i][j] for i in range(l)) + (ZERO,)
        rows.append(LinRow(coeffs, GE, inst.f[j]))
        rows.append(LinRow(tuple(-c for c in coeffs), GE, -inst.f[j]))
    ones = (ONE,) * k + (ZERO,) * l + (ONE,)
    rows.append(LinRow(ones, GE, ZERO))
    rows.append(LinRow(tuple(-c for c in ones), GE, ZERO))
    for i in range(dim):
        rows.append(LinRow(tuple(ONE if t == i else ZERO for t in range(dim)),
                           GE, ZERO))
    return rows


def _dual_vertex_bound(lifted: LiftedInstance) -> Rat:
    """Largest coordinate magnitude over the dual polyhedron's vertices.

    The dual polyhedron lives in the nonnegative orthant, hence is pointed
    and has vertices even when unbounded (opposed bound rows in the lower
    level always give it recession directions), so no boundedness is asked.
    """
    inst = original_instance(lifted)
    rows = _dual_feasibility_rows(inst)
    vlist = enumerate_vertices(rows, inst.k + inst.l + 1, require_bounded=False)
    bound = ZERO
    for vertex in vlist.vertices:
        for coord in vertex:
            if abs(coord) > bound:
                bound = abs(coord)
    return bound


def bound_big_m(lifted: LiftedInstance) -> Rat:
    """A big-M valid for the linearized system, by exact vertex enumeration.

    Enumerates the vertices of the (x, y) polyhedron cut out by the leader
    rows and the original lower rows; the violation scalar never needs to
    exceed the worst coupling violation over that polytope (plus one), so
    coordinates and row slacks of the lifted system are bounded over the
    product of that polytope with the truncated violation range.  Dual
    variables are bounded by the dual polyhedron's vertex coordinates.
    Returns twice the largest magnitude seen (at least 1).  Raises
    `UnboundedPolyhedronError` when the primal polyhedron is unbounded.
    """
    from .oracle import _combined_rows  # row assembly shared with the oracle

    inst = original_instance(lifted)
    rows = _combined_rows(inst, include_coupling=False)
    vlist = enumerate_vertices(rows, inst.n + inst.m)
    top = ZERO
    viol_max = ZERO
    for vertex in vlist.vertices:
        x, y = vertex[:inst.n], vertex[inst.n:]
        for coord in vertex:
            top = max(top, abs(coord))
        for Ai, Bi, ai in zip(inst.A, inst.B, inst.a):
            residual = ai - sum((c * v for c, v in zip(Ai, x)), ZERO) \
                - sum((c * v for c, v in zip(Bi, y)), ZERO)
            viol_max = max(viol_max, residual)
    eps_bar = viol_max + 1
    top = max(top, eps_bar)
    for vertex in vlist.vertices:
        x, y = vertex[:inst.n], vertex[inst.n:]
        for Gi, gi in zip(inst.G, inst.g):
            top = max(top, abs(sum((c * v for c, v in zip(Gi, x)), ZERO) - gi))
        for Ci, Di, bi in zip(inst.C, inst.D, inst.b):
            top = max(top, abs(sum((c * v for c, v in zip(Ci, x)), ZERO)
                               + sum((c * v for c, v in zip(Di, y)), ZERO) - bi))
        for Ai, Bi, ai in zip(inst.A, inst.B, inst.a):
            base_val = sum((c * v for c, v in zip(Ai, x)), ZERO) \
                + sum((c * v for c, v in zip(Bi, y)), ZERO) - ai
            top = max(top, abs(base_val), abs(base_val + eps_bar))
    top = max(top, _dual_vertex_bound(lifted))
    return max(2 * top, ONE)


def _binary_names(k: int, l: int) -> tuple[str, ...]:
    return tuple(f"z_couple{i}" for i in range(k)) \
        + tuple(f"z_lower{i}" for i in range(l)) + ("z_viol",)


def _assemble_milp(sys: ComplementaritySystem, big_m: Rat, *,
                   keep_viol_row: bool, viol_cost: Rat) -> MilpModel:
    n, m, k, l = sys.n, sys.m, sys.k, sys.l
    ncont = sys.num_vars
    nbin = k + l + 1
    nv = ncont + nbin
    names = sys.var_names + _binary_names(k, l)
    is_binary = (False,) * ncont + (True,) * nbin
    lower: list[Rat | None] = [None] * nv
    upper: list[Rat | None] = [None] * nv
    lower[sys.eps_index] = ZERO
    for idx in range(ncont - (k + l + 1), ncont):
        lower[idx] = ZERO
    for idx in range(ncont, nv):
        lower[idx] = ZERO
        upper[idx] = ONE

    def widen(coeffs: Sequence[Rat]) -> tuple[Rat, ...]:
        return tuple(coeffs) + (ZERO,) * nbin

    rows: list[LinRow] = []
    for row in sys.rows:
        single = [j for j, c in enumerate(row.coeffs) if c]
        if row.sense == GE and row.rhs == 0 and len(single) == 1 \
                and row.coeffs[single[0]] == 1 and lower[single[0]] == 0:
            continue  # nonnegativity already carried by the variable bound
        if row.sense == EQ and row.rhs == 0 and single == [sys.eps_index] \
                and not keep_viol_row:
            continue
        rows.append(LinRow(widen(row.coeffs), row.sense, row.rhs))

    for which, (var, expr) in enumerate(sys.pairs):
        zcol = ncont + which
        cap = [ZERO] * nv
        cap[var] = ONE
        cap[zcol] = big_m
        rows.append(LinRow(tuple(cap), LE, big_m))
    for which, (var, expr) in enumerate(sys.pairs):
        zcol = ncont + which
        cap = list(widen(expr.coeffs))
        cap[zcol] = -big_m
        rows.append(LinRow(tuple(cap), LE, -expr.const))

    objective = list(widen(sys.objective))
    if viol_cost:
        objective[sys.eps_index] += viol_cost
    return MilpModel(var_names=names, is_binary=is_binary, lower=tuple(lower),
                     upper=tuple(upper), rows=tuple(rows),
                     objective=tuple(objective), obj_const=ZERO)


def linearize_big_m(sys: ComplementaritySystem, big_m: Rat) -> MilpModel:
    """Encode every complementarity pair with one binary and the big-M rows
    "dual <= (1 - z) M" and "expression <= z M"; all linear rows of the
    single-level system are kept, including the violation = 0 row."""
    if big_m <= 0:
        raise ValueError("big-M must be positive")
    return _assemble_milp(sys, big_m, keep_viol_row=True, viol_cost=ZERO)


def penalize(sys: ComplementaritySystem, big_m: Rat, kappa: Rat) -> MilpModel:
    """Like `linearize_big_m` but the violation = 0 row is removed and the
    objective charges kappa per unit of violation: the single-level form of
    the coupling-free penalized bilevel problem."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if big_m <= 0:
        raise ValueError("big-M must be positive")
    return _assemble_milp(sys, big_m, keep_viol_row=False, viol_cost=kappa)


def serialize_system(sys: ComplementaritySystem) -> str:
    """Canonical text for the single-level system, complementarity pairs as
    (variable, expression) entries."""
    import json

    from .rational import format_rational

    def vec(values: Sequence[Rat]) -> list[str]:
        return [format_rational(v) for v in values]

    doc = {
        "variables": list(sys.var_names),
        "rows": [{"coeffs": vec(row.coeffs), "sense": row.sense,
                  "rhs": format_rational(row.rhs)} for row in sys.rows],
        "pairs": [{"var": sys.var_names[var],
                   "expr": {"coeffs": vec(expr.coeffs),
                            "constant": format_rational(expr.const)}}
                  for var, expr in sys.pairs],
        "objective": {"coeffs": vec(sys.objective), "constant": "0"},
    }
    return json.dumps(doc, indent=2) + "\n"


# ----------------------------------------------------------------------
# Solve pipelines


def _raise_for_status(out: MilpOutcome, what: str) -> None:
    if out.status == INFEASIBLE:
        raise InfeasibleProblemError(f"{what} is infeasible")
    if out.status == UNBOUNDED:
        raise UnboundedProblemError(f"{what} is unbounded")


def _extract_point(sys: ComplementaritySystem, out: MilpOutcome
                   ) -> tuple[tuple[Rat, ...], tuple[Rat, ...], Rat]:
    point = out.x
    x = point[:sys.n]
    y = point[sys.n:sys.n + sys.m]
    eps = point[sys.eps_index]
    for value in point[sys.couple_dual_slice]:
        if value != 0:
            raise SolverInternalError("coupling dual must vanish at feasibility")
    if point[sys.viol_dual_index] != 0:
        raise SolverInternalError("violation dual must vanish at feasibility")
    return x, y, eps


def solve_with_kkt(inst: BilevelInstance, big_m: Rat | None = None
                   ) -> BilevelSolution:
    """Full chain: lift, KKT, big-M linearization, exact MILP solve."""
    lifted = lift_coupling(inst)
    sys = kkt_reformulate(lifted)
    m_val = big_m if big_m is not None else bound_big_m(lifted)
    out = solve_milp(linearize_big_m(sys, m_val))
    _raise_for_status(out, "the linearized single-level model")
    x, y, eps = _extract_point(sys, out)
    if eps != 0:
        raise SolverInternalError("violation must be zero under its fixing row")
    objective = inst.leader_objective(x, y)
    if objective != out.objective:
        raise SolverInternalError("single-level objective mismatch")
    report = check_bilevel_feasible(inst, x, y)
    if not report.ok:
        raise SolverInternalError("single-level optimum is not bilevel feasible")
    return BilevelSolution(x=x, y=y, objective=objective, method="kkt-milp",
                           certificate=report)


def solve_with_penalty(inst: BilevelInstance, kappa: Rat,
                       big_m: Rat | None = None) -> BilevelSolution:
    """Solve the penalized coupling-free reformulation at a fixed kappa.

    The reported objective includes the kappa * violation charge.  When the
    optimal violation is zero the certificate checks the point against the
    original instance; otherwise against the penalized coupling-free one.
    """
    lifted = lift_coupling(inst)
    sys = kkt_reformulate(lifted)
    m_val = big_m if big_m is not None else bound_big_m(lifted)
    out = solve_milp(penalize(sys, m_val, kappa))
    _raise_for_status(out, "the penalized single-level model")
    x, y, eps = _extract_point(sys, out)
    objective = inst.leader_objective(x, y) + kappa * eps
    if objective != out.objective:
        raise SolverInternalError("penalized objective mismatch")
    if eps == 0:
        report = check_bilevel_feasible(inst, x, y)
    else:
        report = check_bilevel_feasible(penalized_instance(lifted, kappa),
                                        x, tuple(y) + (eps,))
    if not report.ok:
        raise SolverInternalError("penalized optimum failed its feasibility check")
    return BilevelSolution(x=x, y=y, objective=objective, method="penalty",
                           epsilon=eps, kappa=kappa, certificate=report)


def auto_kappa(inst: BilevelInstance, big_m: Rat | None = None,
               max_doublings: int = 64) -> tuple[Rat, BilevelSolution]:
    """Find an exact penalty weight by doubling from 1.

    Stops at the first kappa whose penalized optimum has violation exactly
    zero; a finite such kappa exists whenever the original problem is
    solvable.  The returned point is certified bilevel feasible for the
    original instance with the objective the MILP reported.  If the first
    weight already shows a positive violation, a one-off feasibility probe of
    the violation-fixed model distinguishes "coupling can never be satisfied"
    from "kappa still too small".
    """
    lifted = lift_coupling(inst)
    sys = kkt_reformulate(lifted)
    m_val = big_m if big_m is not None else bound_big_m(lifted)
    kappa = ONE
    probed = False
    for _ in range(max_doublings):
        out = solve_milp(penalize(sys, m_val, kappa))
        _raise_for_status(out, "the penalized single-level model")
        x, y, eps = _extract_point(sys, out)
        if eps == 0:
            objective = inst.leader_objective(x, y)
            if objective != out.objective:
                raise SolverInternalError("penalized objective mismatch")
            report = check_bilevel_feasible(inst, x, y)
            if not report.ok:
                raise SolverInternalError(
                    "certification failure: penalized optimum not bilevel feasible")
            sol = BilevelSolution(x=x, y=y, objective=objective, method="penalty",
                                  epsilon=ZERO, kappa=kappa, certificate=report)
            return kappa, sol
        if not probed:
            probed = True
            probe = solve_milp(linearize_big_m(sys, m_val))
            if probe.status == INFEASIBLE:
                raise InfeasibleProblemError(
                    "no bilevel-feasible point satisfies the coupling rows")
        kappa = kappa * 2
    raise SolverInternalError("penalty weight search failed to terminate")
