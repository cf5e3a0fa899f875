"""Exact rational LP solver.

Dense two-phase tableau simplex with Bland's anticycling rule.  Internally
the tableau is an integer matrix together with a positive scalar divisor
(fraction-free pivoting), so the hot loop runs on Python ints; every reported
quantity is an exact `Rat`.

Every optimal outcome carries dual multipliers per row and is certified
internally: primal and dual feasibility, complementary slackness, and strong
duality are checked exactly on every solve; any violation raises
`SolverInternalError`.  Infeasible outcomes carry a Farkas certificate and
unbounded outcomes a feasible point plus an improving ray; both re-verify by
plain arithmetic via `verify_farkas` / `verify_ray`.

Dual sign convention for `min c.x`: multipliers are >= 0 on ">=" rows, <= 0
on "<=" rows, free on "=" rows; bound multipliers are reported separately and
are >= 0.  The dual objective is sum(duals * rhs) + sum(lb_duals * lb)
- sum(ub_duals * ub).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

from .errors import SolverInternalError
from .model import EQ, GE, LE, BilevelInstance, LinRow
from .rational import Rat, ZERO

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpModel:
    num_vars: int
    objective: tuple[Rat, ...]
    rows: tuple[LinRow, ...]
    lower: tuple[Rat | None, ...]
    upper: tuple[Rat | None, ...]


def lp_model(objective: Sequence[Rat], rows: Sequence[LinRow],
             lower: Sequence[Rat | None] | None = None,
             upper: Sequence[Rat | None] | None = None) -> LpModel:
    """Build an LpModel, defaulting bounds to free variables."""
    nv = len(objective)
    lo = tuple(lower) if lower is not None else (None,) * nv
    hi = tuple(upper) if upper is not None else (None,) * nv
    if len(lo) != nv or len(hi) != nv:
        raise ValueError("bound arrays must match the variable count")
    for row in rows:
        if len(row.coeffs) != nv:
            raise ValueError("row length does not match the variable count")
    return LpModel(num_vars=nv, objective=tuple(objective), rows=tuple(rows),
                   lower=lo, upper=hi)


@dataclass(frozen=True)
class FarkasCertificate:
    """Row and bound multipliers proving infeasibility by pure arithmetic."""

    row_mults: tuple[Rat, ...]
    lb_mults: tuple[Rat, ...]
    ub_mults: tuple[Rat, ...]


@dataclass(frozen=True)
class LpOutcome:
    status: str
    x: tuple[Rat, ...] | None = None
    objective: Rat | None = None
    duals: tuple[Rat, ...] | None = None
    lb_duals: tuple[Rat, ...] | None = None
    ub_duals: tuple[Rat, ...] | None = None
    farkas: FarkasCertificate | None = None
    ray: tuple[Rat, ...] | None = None


def verify_farkas(model: LpModel, cert: FarkasCertificate) -> bool:
    """Re-verify an infeasibility certificate with no solver involvement."""
    if len(cert.row_mults) != len(model.rows):
        return False
    for y, row in zip(cert.row_mults, model.rows):
        if row.sense == GE and y < 0:
            return False
        if row.sense == LE and y > 0:
            return False
    for j in range(model.num_vars):
        if cert.lb_mults[j] < 0 or cert.ub_mults[j] < 0:
            return False
        if cert.lb_mults[j] != 0 and model.lower[j] is None:
            return False
        if cert.ub_mults[j] != 0 and model.upper[j] is None:
            return False
        combo = sum((y * row.coeffs[j]
                     for y, row in zip(cert.row_mults, model.rows)), ZERO)
        if combo + cert.lb_mults[j] - cert.ub_mults[j] != 0:
            return False
    rhs = sum((y * row.rhs for y, row in zip(cert.row_mults, model.rows)), ZERO)
    for j in range(model.num_vars):
        if cert.lb_mults[j]:
            rhs += cert.lb_mults[j] * model.lower[j]
        if cert.ub_mults[j]:
            rhs -= cert.ub_mults[j] * model.upper[j]
    return rhs > 0


def verify_ray(model: LpModel, point: Sequence[Rat], ray: Sequence[Rat]) -> bool:
    """Check that `point` is feasible and `ray` is an improving recession
    direction, with no solver involvement."""
    if not _feasible(model, point):
        return False
    if all(r == 0 for r in ray):
        return False
    for row in model.rows:
        val = sum((c * r for c, r in zip(row.coeffs, ray)), ZERO)
        if row.sense == GE and val < 0:
            return False
        if row.sense == LE and val > 0:
            return False
        if row.sense == EQ and val != 0:
            return False
    for j in range(model.num_vars):
        if model.lower[j] is not None and ray[j] < 0:
            return False
        if model.upper[j] is not None and ray[j] > 0:
            return False
    return sum((c * r for c, r in zip(model.objective, ray)), ZERO) < 0


def _feasible(model: LpModel, point: Sequence[Rat]) -> bool:
    for row in model.rows:
        if not row.satisfied(point):
            return False
    for j in range(model.num_vars):
        if model.lower[j] is not None and point[j] < model.lower[j]:
            return False
        if model.upper[j] is not None and point[j] > model.upper[j]:
            return False
    return True


# ----------------------------------------------------------------------
# Canonical equality form over nonnegative variables, with integer data.
#
# A variable with a finite lower bound is shifted (x = lb + w); one with only
# an upper bound is reflected (x = ub - w); a free variable is split
# (x = w+ - w-).  A variable with both bounds keeps its shift and gains an
# internal "x <= ub" row.  Each row is scaled to integers, given a slack when
# it is an inequality, and sign-normalized so its right-hand side is >= 0.

_POS = 0
_NEG = 1
_SPLIT = 2


class _Canonical:
    __slots__ = ("model", "transforms", "col_of_var", "num_struct", "eq_rows",
                 "origins", "back_scale", "slack_coeff", "slack_of", "art_of",
                 "obj_scale", "obj_int")

    def __init__(self, model: LpModel):
        self.model = model
        self.transforms: list[tuple[int, Rat | None]] = []
        self.col_of_var: list[tuple[int, ...]] = []
        ncols = 0
        for j in range(model.num_vars):
            lo, hi = model.lower[j], model.upper[j]
            if lo is not None:
                self.transforms.append((_POS, lo))
                self.col_of_var.append((ncols,))
                ncols += 1
            elif hi is not None:
                self.transforms.append((_NEG, hi))
                self.col_of_var.append((ncols,))
                ncols += 1
            else:
                self.transforms.append((_SPLIT, None))
                self.col_of_var.append((ncols, ncols + 1))
                ncols += 2
        self.num_struct = ncols

        work: list[tuple[Sequence[Rat], str, Rat, tuple]] = []
        for i, row in enumerate(model.rows):
            work.append((row.coeffs, row.sense, row.rhs, ("row", i)))
        for j in range(model.num_vars):
            if model.lower[j] is not None and model.upper[j] is not None:
                unit = tuple(Fraction(int(t == j)) for t in range(model.num_vars))
                work.append((unit, LE, model.upper[j], ("ub", j)))

        num_slack = sum(1 for _, sense, _, _ in work if sense != EQ)
        self.eq_rows: list[list[int]] = []
        self.origins: list[tuple] = []
        self.back_scale: list[Fraction | None] = []
        self.slack_coeff: list[int] = []
        self.slack_of: list[int] = []
        self.art_of: list[int] = []

        slack_seen = 0
        for coeffs, sense, rhs, origin in work:
            tcoeffs = [ZERO] * self.num_struct
            trhs = rhs
            for j, cj in enumerate(coeffs):
                if not cj:
                    continue
                kind, bound = self.transforms[j]
                cols = self.col_of_var[j]
                if kind == _POS:
                    tcoeffs[cols[0]] += cj
                    trhs -= cj * bound
                elif kind == _NEG:
                    tcoeffs[cols[0]] -= cj
                    trhs -= cj * bound
                else:
                    tcoeffs[cols[0]] += cj
                    tcoeffs[cols[1]] -= cj
            scale = _lcm_denoms(tcoeffs, trhs)
            ints = [int(c * scale) for c in tcoeffs]
            irhs = int(trhs * scale)
            slacks = [0] * num_slack
            scol = -1
            if sense != EQ:
                scol = self.num_struct + slack_seen
                slacks[slack_seen] = -1 if sense == GE else 1
                slack_seen += 1
            sgnscale = Fraction(scale)
            if irhs < 0:
                ints = [-v for v in ints]
                slacks = [-v for v in slacks]
                irhs = -irhs
                sgnscale = -sgnscale
            self.eq_rows.append(ints + slacks + [irhs])
            self.origins.append(origin)
            self.back_scale.append(sgnscale)
            self.slack_of.append(scol)
            self.slack_coeff.append(slacks[scol - self.num_struct] if scol >= 0 else 0)
            self.art_of.append(-1)

        obj = [ZERO] * self.num_struct
        for j, cj in enumerate(model.objective):
            if not cj:
                continue
            kind, _ = self.transforms[j]
            cols = self.col_of_var[j]
            if kind == _POS:
                obj[cols[0]] += cj
            elif kind == _NEG:
                obj[cols[0]] -= cj
            else:
                obj[cols[0]] += cj
                obj[cols[1]] -= cj
        self.obj_scale = _lcm_denoms(obj, ZERO)
        self.obj_int = [int(c * self.obj_scale) for c in obj]

    def model_point(self, w: Sequence[Rat]) -> tuple[Rat, ...]:
        out = []
        for j in range(self.model.num_vars):
            kind, bound = self.transforms[j]
            cols = self.col_of_var[j]
            if kind == _POS:
                out.append(bound + w[cols[0]])
            elif kind == _NEG:
                out.append(bound - w[cols[0]])
            else:
                out.append(w[cols[0]] - w[cols[1]])
        return tuple(out)

    def model_direction(self, dw: Sequence[Rat]) -> tuple[Rat, ...]:
        out = []
        for j in range(self.model.num_vars):
            kind, _ = self.transforms[j]
            cols = self.col_of_var[j]
            if kind == _POS:
                out.append(dw[cols[0]])
            elif kind == _NEG:
                out.append(-dw[cols[0]])
            else:
                out.append(dw[cols[0]] - dw[cols[1]])
        return tuple(out)


def _lcm_denoms(coeffs: Sequence[Fraction], extra: Fraction) -> int:
    denom = extra.denominator
    for c in coeffs:
        if c:
            denom = lcm(denom, c.denominator)
    return denom


# ----------------------------------------------------------------------
# Integer-pivot tableau.  Stored entries equal the real simplex tableau times
# a positive integer divisor `div`; the Bareiss-style update keeps every
# entry integral, so pivoting never touches a Fraction.


class _Tableau:
    __slots__ = ("rows", "row_ids", "obj2", "obj1", "div", "basis",
                 "enterable", "rhs_col", "dropped")

    def __init__(self, can: _Canonical):
        nrows = len(can.eq_rows)
        ncols_base = (len(can.eq_rows[0]) - 1) if nrows else can.num_struct
        n_art = 0
        for i in range(nrows):
            scol = can.slack_of[i]
            if scol >= 0 and can.eq_rows[i][scol] == 1:
                continue
            can.art_of[i] = ncols_base + n_art
            n_art += 1
        self.rhs_col = ncols_base + n_art
        self.rows: list[list[int]] = []
        self.row_ids: list[int] = []
        self.basis: list[int] = []
        self.dropped: set[int] = set()
        for i in range(nrows):
            base = can.eq_rows[i]
            arts = [0] * n_art
            if can.art_of[i] >= 0:
                arts[can.art_of[i] - ncols_base] = 1
                self.basis.append(can.art_of[i])
            else:
                self.basis.append(can.slack_of[i])
            self.rows.append(base[:-1] + arts + [base[-1]])
            self.row_ids.append(i)
        self.div = 1
        self.enterable = list(range(ncols_base))
        obj2 = [0] * (self.rhs_col + 1)
        obj2[:len(can.obj_int)] = can.obj_int
        self.obj2 = obj2
        obj1 = [0] * (self.rhs_col + 1)
        for i in range(nrows):
            if can.art_of[i] >= 0:
                row = self.rows[i]
                for j in range(self.rhs_col + 1):
                    obj1[j] -= row[j]
                obj1[can.art_of[i]] += 1
        self.obj1: list[int] | None = obj1

    def pivot(self, r: int, c: int) -> None:
        rows = self.rows
        prow = rows[r]
        piv = prow[c]
        d = self.div
        for i in range(len(rows)):
            if i == r:
                continue
            t = rows[i]
            f = t[c]
            if f:
                rows[i] = [(piv * tv - f * rv) // d for tv, rv in zip(t, prow)]
            elif piv != d:
                rows[i] = [(piv * tv) // d for tv in t]
        t = self.obj2
        f = t[c]
        if f:
            self.obj2 = [(piv * tv - f * rv) // d for tv, rv in zip(t, prow)]
        elif piv != d:
            self.obj2 = [(piv * tv) // d for tv in t]
        if self.obj1 is not None:
            t = self.obj1
            f = t[c]
            if f:
                self.obj1 = [(piv * tv - f * rv) // d for tv, rv in zip(t, prow)]
            elif piv != d:
                self.obj1 = [(piv * tv) // d for tv in t]
        self.basis[r] = c
        self.div = piv
        if self.div < 0:
            self.div = -self.div
            self.rows = [[-v for v in row] for row in self.rows]
            self.obj2 = [-v for v in self.obj2]
            if self.obj1 is not None:
                self.obj1 = [-v for v in self.obj1]

    def run(self, phase: int) -> str:
        """Iterate with Bland's rule; returns "optimal" or "unbounded"."""
        rhs = self.rhs_col
        while True:
            obj = self.obj1 if phase == 1 else self.obj2
            enter = -1
            for c in self.enterable:
                if obj[c] < 0:
                    enter = c
                    break
            if enter < 0:
                return OPTIMAL
            best = -1
            bnum = bden = 0
            bvar = -1
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a > 0:
                    num = row[rhs]
                    if best < 0 or num * bden < bnum * a or \
                            (num * bden == bnum * a and self.basis[i] < bvar):
                        best, bnum, bden, bvar = i, num, a, self.basis[i]
            if best < 0:
                return UNBOUNDED
            self.pivot(best, enter)


def solve_lp(model: LpModel) -> LpOutcome:
    """Solve min objective.x subject to the model's rows and bounds.

    Deterministic: Bland's rule over a fixed variable order, so identical
    models yield identical outcomes.
    """
    can = _Canonical(model)
    tab = _Tableau(can)
    if any(a >= 0 for a in can.art_of):
        status = tab.run(1)
        if status != OPTIMAL:
            raise SolverInternalError("phase-1 objective cannot be unbounded")
        if tab.obj1[tab.rhs_col] < 0:
            return _infeasible_outcome(model, can, tab)
        _drive_out_artificials(can, tab)
    tab.obj1 = None
    status = tab.run(2)
    if status == UNBOUNDED:
        return _unbounded_outcome(model, can, tab)
    return _optimal_outcome(model, can, tab)


def _drive_out_artificials(can: _Canonical, tab: _Tableau) -> None:
    art_start = min(a for a in can.art_of if a >= 0)
    pos = 0
    while pos < len(tab.rows):
        if tab.basis[pos] < art_start:
            pos += 1
            continue
        row = tab.rows[pos]
        enter = next((c for c in tab.enterable if row[c] != 0), -1)
        if enter >= 0:
            tab.pivot(pos, enter)
            pos += 1
        else:
            # Redundant row (zero on every real column); its dual is zero.
            tab.dropped.add(tab.row_ids[pos])
            del tab.rows[pos]
            del tab.basis[pos]
            del tab.row_ids[pos]


def _basic_w(can: _Canonical, tab: _Tableau) -> list[Rat]:
    w = [ZERO] * can.num_struct
    d = tab.div
    for i, col in enumerate(tab.basis):
        if col < can.num_struct:
            w[col] = Fraction(tab.rows[i][tab.rhs_col], d)
    return w


def _canonical_duals(can: _Canonical, tab: _Tableau, obj: list[int],
                     obj_scale: int, art_cost: int) -> list[Rat]:
    """One dual value per canonical row, read off the objective row.

    The reduced cost of a row's artificial column (cost `art_cost`) is
    art_cost - y_i; the reduced cost of its slack column with stored
    coefficient s is -s * y_i.  Dropped rows get dual zero.
    """
    duals: list[Rat] = []
    denom = tab.div * obj_scale
    for idx in range(len(can.eq_rows)):
        if idx in tab.dropped:
            duals.append(ZERO)
            continue
        acol = can.art_of[idx]
        if acol >= 0:
            raw = Fraction(obj[acol], denom)
            y_eq = art_cost - raw
        else:
            scol = can.slack_of[idx]
            raw = Fraction(obj[scol], denom)
            y_eq = -raw * can.slack_coeff[idx]
        duals.append(y_eq * can.back_scale[idx])
    return duals


def _optimal_outcome(model: LpModel, can: _Canonical, tab: _Tableau) -> LpOutcome:
    x = can.model_point(_basic_w(can, tab))
    objective = sum((c * v for c, v in zip(model.objective, x)), ZERO)
    y_eq = _canonical_duals(can, tab, tab.obj2, can.obj_scale, 0)
    row_duals = [ZERO] * len(model.rows)
    ub_duals = [ZERO] * model.num_vars
    for idx, origin in enumerate(can.origins):
        kind, pos = origin
        if kind == "row":
            row_duals[pos] = y_eq[idx]
        else:
            ub_duals[pos] = -y_eq[idx]
    lb_duals = [ZERO] * model.num_vars
    denom = tab.div * can.obj_scale
    for j in range(model.num_vars):
        kind, _ = can.transforms[j]
        col = can.col_of_var[j][0]
        if kind == _POS:
            lb_duals[j] = Fraction(tab.obj2[col], denom)
        elif kind == _NEG:
            ub_duals[j] = Fraction(tab.obj2[col], denom)
    _certify_optimal(model, x, objective, row_duals, lb_duals, ub_duals)
    return LpOutcome(status=OPTIMAL, x=x, objective=objective,
                     duals=tuple(row_duals), lb_duals=tuple(lb_duals),
                     ub_duals=tuple(ub_duals))


def _certify_optimal(model: LpModel, x: Sequence[Rat], objective: Rat,
                     row_duals: Sequence[Rat], lb_duals: Sequence[Rat],
                     ub_duals: Sequence[Rat]) -> None:
    if not _feasible(model, x):
        raise SolverInternalError("optimal point fails primal feasibility")
    for row, y in zip(model.rows, row_duals):
        if row.sense == GE and y < 0:
            raise SolverInternalError("negative dual on a >= row")
        if row.sense == LE and y > 0:
            raise SolverInternalError("positive dual on a <= row")
        if y != 0 and row.value(x) != row.rhs:
            raise SolverInternalError("complementary slackness violated on a row")
    dual_obj = sum((y * row.rhs for y, row in zip(row_duals, model.rows)), ZERO)
    for j in range(model.num_vars):
        lam_lo, lam_hi = lb_duals[j], ub_duals[j]
        if lam_lo < 0 or lam_hi < 0:
            raise SolverInternalError("negative bound multiplier")
        combo = sum((y * row.coeffs[j]
                     for y, row in zip(row_duals, model.rows)), ZERO)
        if combo + lam_lo - lam_hi != model.objective[j]:
            raise SolverInternalError("dual feasibility violated")
        if model.lower[j] is not None:
            if lam_lo != 0 and x[j] != model.lower[j]:
                raise SolverInternalError("complementary slackness violated on a lower bound")
            dual_obj += lam_lo * model.lower[j]
        elif lam_lo != 0:
            raise SolverInternalError("lower-bound multiplier without a bound")
        if model.upper[j] is not None:
            if lam_hi != 0 and x[j] != model.upper[j]:
                raise SolverInternalError("complementary slackness violated on an upper bound")
            dual_obj -= lam_hi * model.upper[j]
        elif lam_hi != 0:
            raise SolverInternalError("upper-bound multiplier without a bound")
    if dual_obj != objective:
        raise SolverInternalError("strong duality violated")


def _infeasible_outcome(model: LpModel, can: _Canonical, tab: _Tableau) -> LpOutcome:
    y_all = _canonical_duals(can, tab, tab.obj1, 1, 1)
    row_mults = [ZERO] * len(model.rows)
    ub_mults = [ZERO] * model.num_vars
    combo = [ZERO] * model.num_vars
    for idx, origin in enumerate(can.origins):
        y = y_all[idx]
        kind, pos = origin
        if kind == "row":
            row_mults[pos] = y
            if y:
                for j, cj in enumerate(model.rows[pos].coeffs):
                    if cj:
                        combo[j] += y * cj
        else:
            ub_mults[pos] += -y
            combo[pos] += y
    lb_mults = [ZERO] * model.num_vars
    for j in range(model.num_vars):
        kind, _ = can.transforms[j]
        if kind == _POS:
            lb_mults[j] = -combo[j]
        elif kind == _NEG:
            ub_mults[j] += combo[j]
    cert = FarkasCertificate(row_mults=tuple(row_mults),
                             lb_mults=tuple(lb_mults), ub_mults=tuple(ub_mults))
    if not verify_farkas(model, cert):
        raise SolverInternalError("Farkas certificate failed to verify")
    return LpOutcome(status=INFEASIBLE, farkas=cert)


def _unbounded_outcome(model: LpModel, can: _Canonical, tab: _Tableau) -> LpOutcome:
    obj = tab.obj2
    enter = next(c for c in tab.enterable
                 if obj[c] < 0 and all(row[c] <= 0 for row in tab.rows))
    dw = [ZERO] * can.num_struct
    if enter < can.num_struct:
        dw[enter] = Fraction(tab.div)
    for i, col in enumerate(tab.basis):
        if col < can.num_struct:
            dw[col] += Fraction(-tab.rows[i][enter])
    point = can.model_point(_basic_w(can, tab))
    ray = can.model_direction(dw)
    if not verify_ray(model, point, ray):
        raise SolverInternalError("unbounded ray failed to verify")
    return LpOutcome(status=UNBOUNDED, x=point, ray=ray)


def lower_level_solve(inst: BilevelInstance, x: Sequence[Rat]) -> LpOutcome:
    """Solve the x-parameterized follower problem min f.y s.t. D y >= b - C x.

    Duals are reported per lower-level row for stationarity cross-checks.
    """
    if len(x) != inst.n:
        raise ValueError(f"x has {len(x)} entries, expected n={inst.n}")
    rows = []
    for Ci, Di, bi in zip(inst.C, inst.D, inst.b):
        shift = sum((cij * xj for cij, xj in zip(Ci, x)), ZERO)
        rows.append(LinRow(coeffs=Di, sense=GE, rhs=bi - shift))
    return solve_lp(lp_model(inst.f, rows))
