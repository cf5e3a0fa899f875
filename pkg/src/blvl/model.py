"""Domain types for all problem formulations and the instance file format.

The central type is `BilevelInstance`, the full data of a linear bilevel
problem in which the leader minimizes c.x + d.y subject to x in X = {Gx >= g},
the coupling rows A x + B y >= a, and y being an optimal solution of the
follower problem min f.y s.t. C x + D y >= b.  Every constraint row is stored
in ">=" form; users pre-negate "<=" rows when preparing instances.

All entries are exact rationals (`Rat`); instances serialize to a canonical
JSON form in which rationals appear as strings, so files round-trip
bit-exactly.  All types are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ParseError
from .rational import Rat, ZERO, format_rational, parse_rational

GE = ">="
LE = "<="
EQ = "="

Vector = tuple[Rat, ...]
Matrix = tuple[Vector, ...]


@dataclass(frozen=True)
class LinRow:
    """One linear constraint: coeffs . v  <sense>  rhs."""

    coeffs: Vector
    sense: str
    rhs: Rat

    def value(self, point: Sequence[Rat]) -> Rat:
        return sum((c * v for c, v in zip(self.coeffs, point)), ZERO)

    def satisfied(self, point: Sequence[Rat]) -> bool:
        lhs = self.value(point)
        if self.sense == GE:
            return lhs >= self.rhs
        if self.sense == LE:
            return lhs <= self.rhs
        return lhs == self.rhs


@dataclass(frozen=True)
class BilevelInstance:
    """Data of a linear bilevel problem with coupling constraints.

    n, m        leader / follower variable counts
    c, d        leader objective on x and on y
    f           follower objective on y
    G, g        leader polyhedron X = {x : G x >= g}
    A, B, a     coupling block A x + B y >= a (k rows; k = 0 means none)
    C, D, b     lower-level block C x + D y >= b (l rows)
    """

    n: int
    m: int
    c: Vector
    d: Vector
    f: Vector
    G: Matrix
    g: Vector
    A: Matrix
    B: Matrix
    a: Vector
    C: Matrix
    D: Matrix
    b: Vector

    @property
    def p(self) -> int:
        return len(self.G)

    @property
    def k(self) -> int:
        return len(self.A)

    @property
    def l(self) -> int:
        return len(self.C)

    def leader_objective(self, x: Sequence[Rat], y: Sequence[Rat]) -> Rat:
        return _dot(self.c, x) + _dot(self.d, y)


@dataclass(frozen=True)
class LiftedInstance:
    """A bilevel instance after moving the coupling rows into the follower.

    `base` is itself a coupling-free `BilevelInstance` whose follower owns one
    extra variable (the violation scalar, at `epsilon_index`, always the last
    follower position).  Its lower-level rows are ordered: the
    `coupling_rows` lifted rows (each original coupling row with the
    violation column added at coefficient 1), then the original lower-level
    rows, then the bound row "violation >= 0".  The represented upper level
    keeps only x in X plus the single scalar coupling constraint requiring
    the violation to be zero; `base.A/B/a` are therefore empty.
    """

    base: BilevelInstance
    epsilon_index: int
    coupling_rows: int

    @property
    def original_m(self) -> int:
        return self.base.m - 1

    @property
    def original_l(self) -> int:
        return self.base.l - self.coupling_rows - 1


@dataclass(frozen=True)
class MilpModel:
    """A generic mixed-integer linear model.

    Binary variables carry bounds {0, 1}; continuous variables may carry
    optional bounds.  Rows reference variables positionally.
    """

    var_names: tuple[str, ...]
    is_binary: tuple[bool, ...]
    lower: tuple[Rat | None, ...]
    upper: tuple[Rat | None, ...]
    rows: tuple[LinRow, ...]
    objective: Vector
    obj_const: Rat = ZERO

    def __post_init__(self) -> None:
        nv = len(self.var_names)
        if not (len(self.is_binary) == len(self.lower) == len(self.upper) == nv
                and len(self.objective) == nv):
            raise ValueError("inconsistent variable arrays in MilpModel")
        for name, flag, lo, hi in zip(self.var_names, self.is_binary, self.lower, self.upper):
            if flag and (lo != 0 or hi != 1):
                raise ValueError(f"binary variable {name} must have bounds {{0,1}}")
        for row in self.rows:
            if len(row.coeffs) != nv:
                raise ValueError("constraint row references undeclared variables")

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def binary_indices(self) -> tuple[int, ...]:
        return tuple(i for i, flag in enumerate(self.is_binary) if flag)


@dataclass(frozen=True)
class FeasibilityCheck:
    """One verified condition with its exact residual (lhs - rhs)."""

    label: str
    ok: bool
    residual: Rat | None = None


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple[FeasibilityCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> tuple[FeasibilityCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)


@dataclass(frozen=True)
class BilevelSolution:
    """A solved point with provenance and a feasibility certificate.

    The objective is always recomputable from the point: c.x + d.y, plus
    kappa * epsilon when the method is "penalty".
    """

    x: Vector
    y: Vector
    objective: Rat
    method: str
    epsilon: Rat | None = None
    kappa: Rat | None = None
    certificate: FeasibilityReport = field(default=FeasibilityReport(()))


def _dot(u: Sequence[Rat], v: Sequence[Rat]) -> Rat:
    return sum((a * b for a, b in zip(u, v)), ZERO)


# ----------------------------------------------------------------------
# Parsing helpers


def _reject_duplicates(pairs: list[tuple[str, object]]) -> dict:
    out: dict = {}
    for key, value in pairs:
        if key in out:
            raise ParseError(f"duplicate field: {key!r}")
        out[key] = value
    return out


def _take(obj: dict, key: str, where: str) -> object:
    if key not in obj:
        raise ParseError(f"missing field {key!r} in {where}")
    return obj.pop(key)


def _check_empty(obj: dict, where: str) -> None:
    if obj:
        raise ParseError(f"unknown field(s) {sorted(obj)} in {where}")


def _parse_vector(raw: object, where: str) -> Vector:
    if not isinstance(raw, list):
        raise ParseError(f"{where} must be an array of rational strings")
    return tuple(parse_rational(entry) for entry in raw)


def _parse_matrix(raw: object, where: str) -> Matrix:
    if not isinstance(raw, list):
        raise ParseError(f"{where} must be an array of rows")
    return tuple(_parse_vector(row, where) for row in raw)


def _parse_count(raw: object, where: str) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool) or raw < 0:
        raise ParseError(f"{where} must be a nonnegative integer")
    return raw


def _instance_from_dict(doc: dict, where: str = "instance") -> BilevelInstance:
    n = _parse_count(_take(doc, "n", where), "n")
    m = _parse_count(_take(doc, "m", where), "m")
    c = _parse_vector(_take(doc, "c", where), "c")
    d = _parse_vector(_take(doc, "d", where), "d")
    f = _parse_vector(_take(doc, "f", where), "f")
    xblock = _take(doc, "X", where)
    coupling = _take(doc, "coupling", where)
    lower = _take(doc, "lower", where)
    _check_empty(doc, where)
    if not isinstance(xblock, dict) or not isinstance(coupling, dict) or not isinstance(lower, dict):
        raise ParseError("X, coupling, and lower must be objects")
    G = _parse_matrix(_take(xblock, "G", "X"), "X.G")
    g = _parse_vector(_take(xblock, "g", "X"), "X.g")
    _check_empty(xblock, "X")
    A = _parse_matrix(_take(coupling, "A", "coupling"), "coupling.A")
    B = _parse_matrix(_take(coupling, "B", "coupling"), "coupling.B")
    a = _parse_vector(_take(coupling, "a", "coupling"), "coupling.a")
    _check_empty(coupling, "coupling")
    C = _parse_matrix(_take(lower, "C", "lower"), "lower.C")
    D = _parse_matrix(_take(lower, "D", "lower"), "lower.D")
    b = _parse_vector(_take(lower, "b", "lower"), "lower.b")
    _check_empty(lower, "lower")
    inst = BilevelInstance(n=n, m=m, c=c, d=d, f=f, G=G, g=g,
                           A=A, B=B, a=a, C=C, D=D, b=b)
    problems = validate(inst)
    if problems:
        raise ParseError("dimension mismatch: " + "; ".join(problems))
    return inst


def parse_instance(text: str) -> BilevelInstance:
    """Parse instance-file contents; every entry is parsed exactly."""
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid instance syntax: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("instance file must contain a single object")
    return _instance_from_dict(doc)


def _format_vector(vec: Iterable[Rat]) -> list[str]:
    return [format_rational(v) for v in vec]


def _format_matrix(mat: Iterable[Iterable[Rat]]) -> list[list[str]]:
    return [_format_vector(row) for row in mat]


def _instance_to_dict(inst: BilevelInstance) -> dict:
    return {
        "n": inst.n,
        "m": inst.m,
        "c": _format_vector(inst.c),
        "d": _format_vector(inst.d),
        "f": _format_vector(inst.f),
        "X": {"G": _format_matrix(inst.G), "g": _format_vector(inst.g)},
        "coupling": {"A": _format_matrix(inst.A), "B": _format_matrix(inst.B),
                     "a": _format_vector(inst.a)},
        "lower": {"C": _format_matrix(inst.C), "D": _format_matrix(inst.D),
                  "b": _format_vector(inst.b)},
    }


def serialize_instance(inst: BilevelInstance) -> str:
    """Canonical text: fixed field order, rationals in lowest terms.

    parse_instance(serialize_instance(i)) == i, and serializing a parsed
    canonical file reproduces it byte for byte.
    """
    return json.dumps(_instance_to_dict(inst), indent=2) + "\n"


def validate(inst: BilevelInstance) -> tuple[str, ...]:
    """List every dimensional inconsistency; empty iff invariants hold."""
    problems: list[str] = []
    if inst.n < 0 or inst.m < 0:
        problems.append("objective: variable counts must be nonnegative")
    if len(inst.c) != inst.n:
        problems.append(f"objective: c has {len(inst.c)} entries, expected n={inst.n}")
    if len(inst.d) != inst.m:
        problems.append(f"objective: d has {len(inst.d)} entries, expected m={inst.m}")
    if len(inst.f) != inst.m:
        problems.append(f"objective: f has {len(inst.f)} entries, expected m={inst.m}")
    for i, row in enumerate(inst.G):
        if len(row) != inst.n:
            problems.append(f"X: G row {i} has {len(row)} entries, expected n={inst.n}")
    if len(inst.g) != len(inst.G):
        problems.append(f"X: g has {len(inst.g)} entries, expected {len(inst.G)} rows")
    if len(inst.B) != len(inst.A):
        problems.append(f"coupling: A has {len(inst.A)} rows but B has {len(inst.B)}")
    if len(inst.a) != len(inst.A):
        problems.append(f"coupling: a has {len(inst.a)} entries, expected {len(inst.A)} rows")
    for i, row in enumerate(inst.A):
        if len(row) != inst.n:
            problems.append(f"coupling: A row {i} has {len(row)} entries, expected n={inst.n}")
    for i, row in enumerate(inst.B):
        if len(row) != inst.m:
            problems.append(f"coupling: B row {i} has {len(row)} entries, expected m={inst.m}")
    if len(inst.D) != len(inst.C):
        problems.append(f"lower: C has {len(inst.C)} rows but D has {len(inst.D)}")
    if len(inst.b) != len(inst.C):
        problems.append(f"lower: b has {len(inst.b)} entries, expected {len(inst.C)} rows")
    for i, row in enumerate(inst.C):
        if len(row) != inst.n:
            problems.append(f"lower: C row {i} has {len(row)} entries, expected n={inst.n}")
    for i, row in enumerate(inst.D):
        if len(row) != inst.m:
            problems.append(f"lower: D row {i} has {len(row)} entries, expected m={inst.m}")
    return tuple(problems)


# ----------------------------------------------------------------------
# Lifted-instance and MILP-model files (same structured textual format)


def serialize_lifted(lifted: LiftedInstance) -> str:
    doc = {
        "epsilon_index": lifted.epsilon_index,
        "coupling_rows": lifted.coupling_rows,
        "base": _instance_to_dict(lifted.base),
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_lifted(text: str) -> LiftedInstance:
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid lifted-instance syntax: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("lifted-instance file must contain a single object")
    eps_index = _parse_count(_take(doc, "epsilon_index", "lifted"), "epsilon_index")
    rows = _parse_count(_take(doc, "coupling_rows", "lifted"), "coupling_rows")
    base_raw = _take(doc, "base", "lifted")
    _check_empty(doc, "lifted")
    if not isinstance(base_raw, dict):
        raise ParseError("base must be an object")
    base = _instance_from_dict(base_raw, "base")
    return LiftedInstance(base=base, epsilon_index=eps_index, coupling_rows=rows)


def _row_to_dict(row: LinRow) -> dict:
    return {"coeffs": _format_vector(row.coeffs), "sense": row.sense,
            "rhs": format_rational(row.rhs)}


def _row_from_dict(raw: object, nv: int, where: str) -> LinRow:
    if not isinstance(raw, dict):
        raise ParseError(f"{where} must be an object")
    raw = dict(raw)
    coeffs = _parse_vector(_take(raw, "coeffs", where), where)
    sense = _take(raw, "sense", where)
    rhs = parse_rational(_take(raw, "rhs", where))
    _check_empty(raw, where)
    if sense not in (GE, LE, EQ):
        raise ParseError(f"{where}: unknown sense {sense!r}")
    if len(coeffs) != nv:
        raise ParseError(f"{where}: expected {nv} coefficients, got {len(coeffs)}")
    return LinRow(coeffs=coeffs, sense=str(sense), rhs=rhs)


def serialize_milp(model: MilpModel, *, big_m: Rat | None = None,
                   kappa: Rat | None = None) -> str:
    """Canonical MILP text; big-M and kappa go in the header when present."""
    doc: dict = {}
    if big_m is not None:
        doc["big_m"] = format_rational(big_m)
    if kappa is not None:
        doc["kappa"] = format_rational(kappa)
    doc["variables"] = [
        {"name": name,
         "lb": None if lo is None else format_rational(lo),
         "ub": None if hi is None else format_rational(hi)}
        for name, lo, hi in zip(model.var_names, model.lower, model.upper)
    ]
    doc["binaries"] = [model.var_names[i] for i in model.binary_indices]
    doc["rows"] = [_row_to_dict(row) for row in model.rows]
    doc["objective"] = {"coeffs": _format_vector(model.objective),
                        "constant": format_rational(model.obj_const)}
    return json.dumps(doc, indent=2) + "\n"


def parse_milp(text: str) -> MilpModel:
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid model syntax: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("model file must contain a single object")
    doc.pop("big_m", None)
    doc.pop("kappa", None)
    variables = _take(doc, "variables", "model")
    binaries = _take(doc, "binaries", "model")
    rows_raw = _take(doc, "rows", "model")
    obj_raw = _take(doc, "objective", "model")
    _check_empty(doc, "model")
    if not isinstance(variables, list) or not isinstance(binaries, list) \
            or not isinstance(rows_raw, list) or not isinstance(obj_raw, dict):
        raise ParseError("model blocks have the wrong shapes")
    names: list[str] = []
    lower: list[Rat | None] = []
    upper: list[Rat | None] = []
    for entry in variables:
        if not isinstance(entry, dict):
            raise ParseError("variable entries must be objects")
        entry = dict(entry)
        names.append(str(_take(entry, "name", "variable")))
        lo = _take(entry, "lb", "variable")
        hi = _take(entry, "ub", "variable")
        _check_empty(entry, "variable")
        lower.append(None if lo is None else parse_rational(lo))
        upper.append(None if hi is None else parse_rational(hi))
    binary_set = set(binaries)
    unknown = binary_set - set(names)
    if unknown:
        raise ParseError(f"binaries reference undeclared variables: {sorted(unknown)}")
    obj_raw = dict(obj_raw)
    objective = _parse_vector(_take(obj_raw, "coeffs", "objective"), "objective")
    constant = parse_rational(_take(obj_raw, "constant", "objective"))
    _check_empty(obj_raw, "objective")
    nv = len(names)
    rows = tuple(_row_from_dict(r, nv, f"row {i}") for i, r in enumerate(rows_raw))
    if len(objective) != nv:
        raise ParseError("objective length does not match the variable count")
    return MilpModel(
        var_names=tuple(names),
        is_binary=tuple(name in binary_set for name in names),
        lower=tuple(lower),
        upper=tuple(upper),
        rows=rows,
        objective=objective,
        obj_const=constant,
    )


# ----------------------------------------------------------------------
# Solution records


def serialize_solution(sol: BilevelSolution) -> str:
    doc: dict = {"method": sol.method}
    if sol.kappa is not None:
        doc["kappa"] = format_rational(sol.kappa)
    doc["x"] = _format_vector(sol.x)
    doc["y"] = _format_vector(sol.y)
    if sol.epsilon is not None:
        doc["epsilon"] = format_rational(sol.epsilon)
    doc["objective"] = format_rational(sol.objective)
    return json.dumps(doc, indent=2) + "\n"


def parse_solution(text: str) -> BilevelSolution:
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid solution syntax: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("solution file must contain a single object")
    method = str(_take(doc, "method", "solution"))
    kappa = parse_rational(doc.pop("kappa")) if "kappa" in doc else None
    x = _parse_vector(_take(doc, "x", "solution"), "x")
    y = _parse_vector(_take(doc, "y", "solution"), "y")
    epsilon = parse_rational(doc.pop("epsilon")) if "epsilon" in doc else None
    objective = parse_rational(_take(doc, "objective", "solution"))
    _check_empty(doc, "solution")
    return BilevelSolution(x=x, y=y, objective=objective, method=method,
                           epsilon=epsilon, kappa=kappa)
