from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence
import itertools
import math

import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel

from .algebra_providers import Side, mul_many, round_half_away_array, valuation
from .config_providers import BudgetConfiguration, resolve_budget
from .console_providers import warn
from .dset_providers import DSet, RowIndex, require_unit_ball, subset
from .errors_providers import BudgetExceeded, DivisionByNegligible, EmptyGraph, EmptyInput
from .files_providers import tool_header, write_frame
from .setops_providers import (PairSet, check_compatible, difference_set, product_multiset, scalar_image,
                               sum_multiset, sumset)


class CountReport(BaseModel):
    """
    An exact count with its case breakdown and, when the exponents are known, the predicted bound.
    ``total`` always equals the sum of ``breakdown``.
    """
    total: int
    breakdown: dict[str, int]
    bound: float | None = None
    bound_exponent: float | None = None
    ratio: float | None = None
    tolerance: str
    extras: dict[str, float | int] = {}


def _tolerance(alg) -> str:
    if alg.is_real:
        return f"l-infinity distance at most 2^-{alg.m} (same or adjacent grid point)"
    return f"congruent modulo {alg.p}^{alg.m}"


def additive_energy(A: DSet, B: DSet, budget: BudgetConfiguration | None = None) -> int:
    """``#{(a, a', b, b') : a + b = a' + b'}``, as the sum of squared sum multiplicities."""
    check_compatible(A.alg, B.alg)
    require_unit_ball(A, "additive_energy")
    require_unit_ball(B, "additive_energy")
    _, counts = sum_multiset(A.alg, A.points, B.points, budget)
    return int(np.sum(counts.astype(np.int64) ** 2))


def multiplicative_energy(A: DSet, B: DSet, side: Side = Side.left, budget: BudgetConfiguration | None = None) -> int:
    check_compatible(A.alg, B.alg)
    require_unit_ball(A, "multiplicative_energy")
    require_unit_ball(B, "multiplicative_energy")
    _, counts = product_multiset(A.alg, A.points, B.points, Side(side), budget)
    return int(np.sum(counts.astype(np.int64) ** 2))


def _difference_index(A: DSet, budget: BudgetConfiguration) -> RowIndex:
    negated = -A.points if A.alg.is_real else (-A.points) % A.alg.modulus
    values, counts = sum_multiset(A.alg, A.points, negated, budget)
    return RowIndex(values, weights=counts)


def _predicted(alg, exponent: float, size_factor: float) -> tuple[float, float]:
    return float(alg.radix) ** (-alg.m * exponent) * size_factor, exponent


def quintuple_count_tv(A: DSet, X: DSet, rho_exp: int, symmetric: bool = False,
                       s: float | None = None, sigma: float | None = None, t: float | None = None,
                       eps: float = 0.0, budget: BudgetConfiguration | None = None) -> CountReport:
    """
    Exact ``#{(a, b, c, d, x) in A^4 x X : |a + x b - (c - x d)| <= delta}``, or with ``c + x d``
    when ``symmetric``.

    Real points are compared exactly at scale ``2**-2m`` (products are not rounded); Padic points
    modulo ``p**m``. The breakdown splits on ``|b - d| <= rho``. When ``s``, ``sigma`` and ``t`` are
    given the bound ``delta^(s (t - sigma + eps) / t) |A|^3 |X|`` is attached.

    ### External Effects
    Raises ``BudgetExceeded`` when ``|X| |A|^2 3^d`` exceeds the count budget.
    """
    check_compatible(A.alg, X.alg)
    require_unit_ball(A, "quintuple_count_tv")
    require_unit_ball(X, "quintuple_count_tv")
    budget = resolve_budget(budget)
    alg = A.alg
    n = len(A)
    work = len(X) * n * n * 3 ** alg.d
    if work > budget.count_cap:
        raise BudgetExceeded(f"Quintuple count needs {work} lookups; lower m or the set sizes",
                             partial={"A": n, "X": len(X)})
    differences = _difference_index(A, budget)
    b = np.repeat(A.points, n, axis=0)
    d = np.tile(A.points, (n, 1))
    combined = b - d if symmetric else b + d
    gap = b - d
    if alg.is_real:
        near = np.sum(gap * gap, axis=1) <= 4 ** (alg.m - rho_exp)
    else:
        combined %= alg.modulus
        near = np.all(gap % alg.p ** rho_exp == 0, axis=1)

    near_total = 0
    far_total = 0
    for x in X.points:
        if alg.is_real:
            z = mul_many(alg, x, combined, rounded=False)
            unit = alg.unit
            base = np.floor_divide(-z, unit)
            weights = np.zeros(z.shape[0], dtype=np.int64)
            for offset in itertools.product((-1, 0, 1), repeat=alg.d):
                e = base + np.asarray(offset, dtype=np.int64)
                close = np.all(np.abs(e * unit + z) <= unit, axis=1)
                weights += np.where(close, differences.weights(np.asarray(e, dtype=np.int64)), 0)
        else:
            z = mul_many(alg, x, combined)
            weights = differences.weights((-z) % alg.modulus)
        near_total += int(weights[near].sum())
        far_total += int(weights[~near].sum())

    total = near_total + far_total
    report = CountReport(total=total, breakdown={"near": near_total, "far": far_total},
                         tolerance=_tolerance(alg), extras={"rho_exp": rho_exp, "symmetric": int(symmetric)})
    if s is not None and sigma is not None and t is not None:
        exponent = s * (t - sigma + eps) / t
        report.bound, report.bound_exponent = _predicted(alg, exponent, float(n) ** 3 * len(X))
        report.ratio = total / report.bound if report.bound else None
    return report


def _close_pair_weight(values: np.ndarray, weights: np.ndarray, radius: int, count_cap: int) -> int:
    """``sum w_i w_j`` over ordered pairs of rows within l-infinity distance ``radius``."""
    d = values.shape[1]
    cells = np.floor_divide(values, radius)
    keys, group, sizes = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    group = group.reshape(-1)
    order = np.argsort(group, kind="stable")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    ordered_values = values[order]
    ordered_weights = weights[order]
    lookup = RowIndex(keys, weights=np.arange(1, keys.shape[0] + 1))
    total = 0
    for offset in itertools.product((-1, 0, 1), repeat=d):
        target = lookup.weights(cells + np.asarray(offset, dtype=np.int64)) - 1
        source = np.flatnonzero(target >= 0)
        target = target[source]
        spans = sizes[target]
        if int(spans.sum()) > count_cap:
            raise BudgetExceeded("Close-pair count exceeds the count budget", partial={"pairs": int(spans.sum())})
        left = np.repeat(source, spans)
        inner = np.arange(int(spans.sum())) - np.repeat(np.cumsum(spans) - spans, spans)
        right = np.repeat(starts[target], spans) + inner
        close = np.all(np.abs(values[left] - ordered_values[right]) <= radius, axis=1)
        total += int(np.sum(weights[left][close] * ordered_weights[right][close]))
    return total


def quadruple_count_sparse(A: DSet, p: Sequence[int], q: Sequence[int], rho_exp: int | None = None,
                           s: float | None = None, budget: BudgetConfiguration | None = None) -> CountReport:
    """
    Exact ``#{(a1, a2, a3, a4) in A^4 : |a1 q + a3 p - (a2 q + a4 p)| <= delta}``.

    The extras carry the Cauchy-Schwarz lower bound ``|A|^4 / |Y|`` for the number of grid points of
    ``Aq + Ap`` and that number itself.
    """
    if len(A) == 0:
        raise EmptyInput("quadruple_count_sparse needs a nonempty set")
    require_unit_ball(A, "quadruple_count_sparse")
    budget = resolve_budget(budget)
    alg = A.alg
    q_point = np.asarray(q, dtype=np.int64).reshape(1, alg.d)
    p_point = np.asarray(p, dtype=np.int64).reshape(1, alg.d)
    if alg.is_real:
        size = int(np.sum(q_point * q_point))
        floor = 4 ** (alg.m - rho_exp) if rho_exp is not None else 1
        if size == 0 or size < floor:
            raise DivisionByNegligible(f"q={tuple(q)} is below the rho floor")
    else:
        v = valuation(alg, q)
        if v >= alg.m or (rho_exp is not None and v > rho_exp):
            raise DivisionByNegligible(f"q={tuple(q)} is below the rho floor")
    n = len(A)
    if n * n > budget.count_cap:
        raise BudgetExceeded("Quadruple count exceeds the count budget", partial={"A": n})

    exact = not alg.is_real
    left = mul_many(alg, A.points, q_point, rounded=exact)
    right = mul_many(alg, A.points, p_point, rounded=exact)
    values, counts = sum_multiset(alg, left, right, budget)
    diagonal = int(np.sum(counts ** 2))
    if alg.is_real:
        total = _close_pair_weight(values, counts, alg.unit, budget.count_cap)
        rounded = np.unique(round_half_away_array(values, alg.unit), axis=0)
        measured = int(rounded.shape[0])
    else:
        total = diagonal
        measured = int(values.shape[0])
    report = CountReport(total=total, breakdown={"equal": diagonal, "adjacent": total - diagonal},
                         tolerance=_tolerance(alg),
                         extras={"cs_lower_bound": n ** 4 / total, "measured_cover": measured})
    if s is not None and rho_exp is not None:
        scale = float(alg.radix) ** (-(alg.m + rho_exp) * s)
        report.bound = scale * float(n) ** 4
        report.bound_exponent = s * (alg.m + rho_exp) / alg.m
        report.ratio = total / report.bound
    return report


# exponent of K in the stated popular-paths bound; the measured one is ``achieved_exponent``
BSG_GUARANTEE_EXPONENT = 4.0


class BsgSummary(BaseModel):
    edges: int
    popular_edges: int
    partial_sumset: int
    K: float
    density_A: float
    density_B: float
    sumset_count: int
    guarantee_exponent: float
    guarantee: float
    within_guarantee: bool
    achieved_exponent: float | None
    degenerate: bool


@dataclass(frozen=True)
class BsgResult:
    A_sub: DSet
    B_sub: DSet
    summary: BsgSummary


def bsg_extract(H: PairSet, A: DSet, B: DSet, budget: BudgetConfiguration | None = None,
                guarantee_exponent: float = BSG_GUARANTEE_EXPONENT) -> BsgResult:
    """
    Graph Balog-Szemeredi-Gowers through popular sums.

    Edges whose sum has at least half the average multiplicity are kept; ``A_sub`` holds the
    vertices of ``A`` with at least half the average popular degree and ``B_sub`` the vertices of
    ``B`` joined to at least half the average number of ``A_sub`` vertices. The summary records
    ``K = max(|A||B| / |H|, N(A +_H B) / sqrt(|A||B|))`` and the exponent achieved by
    ``|A_sub + B_sub| <= K^e sqrt(|A||B|)``, next to the stated bound with ``e = guarantee_exponent``.
    """
    check_compatible(H.alg, A.alg)
    check_compatible(A.alg, B.alg)
    require_unit_ball(A, "bsg_extract")
    require_unit_ball(B, "bsg_extract")
    budget = resolve_budget(budget)
    a_index = RowIndex(A.points, weights=np.arange(1, len(A) + 1))
    b_index = RowIndex(B.points, weights=np.arange(1, len(B) + 1))
    a_ids = a_index.weights(H.first) - 1
    b_ids = b_index.weights(H.second) - 1
    inside = (a_ids >= 0) & (b_ids >= 0)
    if not inside.all():
        warn(f"bsg_extract dropped {int((~inside).sum())} edge(s) outside A x B")
    a_ids, b_ids = a_ids[inside], b_ids[inside]
    if a_ids.size == 0:
        raise EmptyGraph("No edge of H joins A and B")

    sums = A.points[a_ids] + B.points[b_ids]
    if not A.alg.is_real:
        sums %= A.alg.modulus
    _, sum_ids, multiplicity = np.unique(sums, axis=0, return_inverse=True, return_counts=True)
    sum_ids = sum_ids.reshape(-1)
    average = a_ids.size / multiplicity.size
    popular = multiplicity[sum_ids] * 2 >= average

    graph = nx.Graph()
    graph.add_nodes_from((("A", i) for i in range(len(A))), bipartite=0)
    graph.add_nodes_from((("B", j) for j in range(len(B))), bipartite=1)
    graph.add_edges_from((("A", int(i)), ("B", int(j))) for i, j in zip(a_ids[popular], b_ids[popular]))

    a_degree = np.array([graph.degree(("A", i)) for i in range(len(A))])
    a_keep = (a_degree > 0) & (2 * a_degree * len(A) >= graph.number_of_edges())
    kept_a = {("A", i) for i in np.flatnonzero(a_keep)}
    reach = np.array([sum(1 for nb in graph.neighbors(("B", j)) if nb in kept_a) for j in range(len(B))])
    b_keep = (reach > 0) & (2 * reach * len(B) >= reach.sum())

    A_sub, B_sub = subset(A, a_keep), subset(B, b_keep)
    sumset_count = len(sumset(A_sub, B_sub, budget)) if len(A_sub) and len(B_sub) else 0
    scale = math.sqrt(len(A) * len(B))
    K = max(len(A) * len(B) / a_ids.size, multiplicity.size / scale)
    achieved = math.log(sumset_count / scale) / math.log(K) if K > 1 and sumset_count > 0 else None
    summary = BsgSummary(edges=int(a_ids.size), popular_edges=int(popular.sum()), partial_sumset=int(multiplicity.size),
                         K=K, density_A=len(A_sub) / len(A), density_B=len(B_sub) / len(B),
                         sumset_count=sumset_count, guarantee_exponent=guarantee_exponent,
                         guarantee=K ** guarantee_exponent * scale,
                         within_guarantee=sumset_count <= K ** guarantee_exponent * scale,
                         achieved_exponent=achieved, degenerate=K * K >= min(len(A), len(B)))
    return BsgResult(A_sub=A_sub, B_sub=B_sub, summary=summary)


@dataclass(frozen=True)
class Ref:
    index: int

    def __str__(self) -> str:
        return f"S{self.index}"


@dataclass(frozen=True)
class Scale:
    y: tuple[int, ...]
    inner: "SetExpr"
    side: Side = Side.left

    def __str__(self) -> str:
        return f"{list(self.y)}*{self.inner}" if self.side is Side.left else f"{self.inner}*{list(self.y)}"


@dataclass(frozen=True)
class Plus:
    left: "SetExpr"
    right: "SetExpr"

    def __str__(self) -> str:
        return f"({self.left}+{self.right})"


@dataclass(frozen=True)
class Minus:
    left: "SetExpr"
    right: "SetExpr"

    def __str__(self) -> str:
        return f"({self.left}-{self.right})"


SetExpr = Ref | Scale | Plus | Minus


@dataclass
class SetEvaluator:
    """Evaluates addition-only expressions over a list of sets, caching every intermediate set."""
    sets: list[DSet]
    budget: BudgetConfiguration
    cache: dict[str, DSet] = field(default_factory=dict)

    def __call__(self, expr: SetExpr) -> DSet:
        key = str(expr)
        if key in self.cache:
            return self.cache[key]
        match expr:
            case Ref(index):
                value = self.sets[index]
            case Scale(y, inner, side):
                value = scalar_image(y, self(inner), side)
            case Plus(left, right):
                value = sumset(self(left), self(right), self.budget)
            case Minus(left, right):
                value = difference_set(self(left), self(right), self.budget)
        self.cache[key] = value
        return value

    def size(self, expr: SetExpr) -> int:
        return len(self(expr))


@dataclass(frozen=True)
class LedgerInstance:
    """``prod |lhs_i| <= prod |rhs_j|``, each factor an expression over the ledger's sets."""
    name: str
    theorem: str
    lhs: tuple[SetExpr, ...]
    rhs: tuple[SetExpr, ...]


class LedgerRow(BaseModel):
    instance: str
    lhs: int
    rhs: int
    slack: float
    theorem: str
    holds: bool


def triangle(a: SetExpr, b: SetExpr, c: SetExpr) -> LedgerInstance:
    return LedgerInstance(name=f"|{a}||{b}-{c}| <= |{a}-{b}||{a}-{c}|", theorem="Ruzsa triangle",
                          lhs=(a, Minus(b, c)), rhs=(Minus(a, b), Minus(a, c)))


def sum_triangle(a: SetExpr, b: SetExpr, c: SetExpr) -> LedgerInstance:
    return LedgerInstance(name=f"|{a}+{c}||{b}| <= |{a}+{b}||{b}+{c}|", theorem="Ruzsa triangle for sums",
                          lhs=(Plus(a, c), b), rhs=(Plus(a, b), Plus(b, c)))


def plunnecke(a: SetExpr, b: SetExpr) -> LedgerInstance:
    return LedgerInstance(name=f"|2{b}-{b}||{a}|^2 <= |{a}+{b}|^3", theorem="Plunnecke-Ruzsa",
                          lhs=(Minus(Plus(b, b), b), a, a), rhs=(Plus(a, b),) * 3)


def multi_sum(a: SetExpr, summands: Sequence[SetExpr]) -> LedgerInstance:
    """``|B_1 + .. + B_k| |A|^(k-1) <= prod |A + B_i|``."""
    total = summands[0]
    for expr in summands[1:]:
        total = Plus(total, expr)
    name = f"|{total}||{a}|^{len(summands) - 1} <= " + "".join(f"|{a}+{expr}|" for expr in summands)
    return LedgerInstance(name=name, theorem="Plunnecke-Ruzsa for several summands",
                          lhs=(total,) + (a,) * (len(summands) - 1), rhs=tuple(Plus(a, expr) for expr in summands))


def babyproj_chain(a: SetExpr, y1: Sequence[int], y2: Sequence[int]) -> LedgerInstance:
    """``|A + y1 A - y2 A| |A|^2 <= |A + A| |A + y1 A| |A - y2 A|``."""
    y1_image = Scale(tuple(int(c) for c in y1), a)
    y2_image = Scale(tuple(int(c) for c in y2), a)
    lhs = (Minus(Plus(a, y1_image), y2_image), a, a)
    rhs = (Plus(a, a), Plus(a, y1_image), Minus(a, y2_image))
    return LedgerInstance(name=f"|{a}+{y1_image}-{y2_image}||{a}|^2 <= |{a}+{a}||{a}+{y1_image}||{a}-{y2_image}|",
                          theorem="Plunnecke-Ruzsa for several summands", lhs=lhs, rhs=rhs)


def default_instances(count: int) -> list[LedgerInstance]:
    refs = [Ref(i) for i in range(count)]
    if count == 1:
        return [plunnecke(refs[0], refs[0]), triangle(refs[0], refs[0], refs[0])]
    if count == 2:
        return [plunnecke(refs[0], refs[1]), plunnecke(refs[1], refs[0]), triangle(refs[0], refs[1], refs[1])]
    a, b, c = refs[:3]
    return [triangle(a, b, c), sum_triangle(a, b, c), plunnecke(a, b), multi_sum(a, [b, c])]


def ruzsa_ledger(sets: Sequence[DSet], instances: Sequence[LedgerInstance] | None = None,
                 budget: BudgetConfiguration | None = None) -> list[LedgerRow]:
    """
    Evaluate both sides of each inequality exactly. ``slack = rhs / lhs``; an instance with
    ``holds = False`` would contradict a theorem of the grid group.
    """
    if not sets:
        raise EmptyInput("ruzsa_ledger needs at least one set")
    for other in sets[1:]:
        check_compatible(sets[0].alg, other.alg)
    evaluator = SetEvaluator(sets=list(sets), budget=resolve_budget(budget))
    rows: list[LedgerRow] = []
    for instance in instances if instances is not None else default_instances(len(sets)):
        lhs = math.prod(evaluator.size(expr) for expr in instance.lhs)
        rhs = math.prod(evaluator.size(expr) for expr in instance.rhs)
        rows.append(LedgerRow(instance=instance.name, lhs=lhs, rhs=rhs, slack=rhs / lhs if lhs else math.inf,
                              theorem=instance.theorem, holds=lhs <= rhs))
    return rows


LEDGER_COLUMNS = ["instance", "lhs", "rhs", "slack", "theorem", "holds"]


def ledger_frame(rows: Sequence[LedgerRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows], columns=LEDGER_COLUMNS)


def write_ledger_csv(rows: Sequence[LedgerRow], path: str | Path, config: dict[str, Any] | None = None) -> None:
    write_frame(ledger_frame(rows), path, tool_header("ledger"), config)
