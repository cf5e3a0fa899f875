"""Deterministic random instance generation.

Coefficients are integers drawn uniformly from [-range, range].  Box rows are
appended to the leader polyhedron and to the lower level so the intersected
polyhedron is bounded, which the reference solver requires.  With
`require_solvable` the generator rejection-samples until the reference solver
succeeds, within a bounded retry budget.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import GenerationError, InfeasibleProblemError
from .model import BilevelInstance
from .oracle import solve_bilevel_bruteforce
from .rational import Rat

_MAX_ATTEMPTS = 200


@dataclass(frozen=True)
class GeneratorParams:
    n: int
    m: int
    k: int
    l: int
    p: int
    coeff_range: int
    seed: int
    require_solvable: bool = False

    def __post_init__(self) -> None:
        if min(self.n, self.m, self.k, self.l, self.p) < 0:
            raise ValueError("dimension counts must be nonnegative")
        if self.coeff_range < 1:
            raise ValueError("coefficient range must be at least 1")


def _draw_instance(rng: random.Random, params: GeneratorParams) -> BilevelInstance:
    def scalar() -> Rat:
        return Rat(rng.randint(-params.coeff_range, params.coeff_range))

    def vector(length: int) -> tuple[Rat, ...]:
        return tuple(scalar() for _ in range(length))

    def matrix(rows: int, cols: int) -> tuple[tuple[Rat, ...], ...]:
        return tuple(vector(cols) for _ in range(rows))

    n, m = params.n, params.m
    c = vector(n)
    d = vector(m)
    f = vector(m)
    G = list(matrix(params.p, n))
    g = list(vector(params.p))
    A = matrix(params.k, n)
    B = matrix(params.k, m)
    a = vector(params.k)
    C = list(matrix(params.l, n))
    D = list(matrix(params.l, m))
    b = list(vector(params.l))

    x_box = Rat(params.coeff_range * max(n, 1))
    for i in range(n):
        unit = tuple(Rat(int(t == i)) for t in range(n))
        G.append(unit)
        g.append(-x_box)
        G.append(tuple(-v for v in unit))
        g.append(-x_box)
    y_box = Rat(params.coeff_range * max(m, 1))
    zeros_n = (Rat(0),) * n
    for j in range(m):
        unit = tuple(Rat(int(t == j)) for t in range(m))
        C.append(zeros_n)
        D.append(unit)
        b.append(-y_box)
        C.append(zeros_n)
        D.append(tuple(-v for v in unit))
        b.append(-y_box)

    return BilevelInstance(n=n, m=m, c=c, d=d, f=f,
                           G=tuple(G), g=tuple(g), A=A, B=B, a=a,
                           C=tuple(C), D=tuple(D), b=tuple(b))


def generate_instance(params: GeneratorParams) -> BilevelInstance:
    """Deterministic in the seed; byte-identical files for identical params."""
    rng = random.Random(params.seed)
    if not params.require_solvable:
        return _draw_instance(rng, params)
    for _ in range(_MAX_ATTEMPTS):
        inst = _draw_instance(rng, params)
        try:
            solve_bilevel_bruteforce(inst)
        except InfeasibleProblemError:
            continue
        return inst
    raise GenerationError(
        f"no solvable instance found in {_MAX_ATTEMPTS} attempts for seed {params.seed}")
