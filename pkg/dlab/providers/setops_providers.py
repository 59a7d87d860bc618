from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence
import math

import numpy as np
import sympy

from .algebra_providers import (AlgebraDescriptor, Element, Side, inversion_floor_exp, inv, mul_many,
                                multiplication_matrix, round_half_away, round_half_away_array, valuations_many,
                                _product_int)
from .config_providers import BudgetConfiguration, resolve_budget
from .console_providers import warn
from .dset_providers import (DSet, ball_algebra, fit_radius_exp, intersect_ball, make_dset, require_unit_ball,
                             widen_radius)
from .errors_providers import (AlgebraMismatch, BudgetExceeded, DivisionByNegligible, NoAdmissiblePairs,
                               OutOfBall, RangeError, ScaleMismatch, ScaleOutOfRange, SingularMap)


_CHUNK_ROWS = 1 << 21
_INT64_SAFE = 1 << 61


@dataclass(frozen=True, eq=False)
class PairSet:
    """Finite subset of ``E x E``; ``pairs`` is an ``(n, 2d)`` array, deduplicated and sorted."""
    alg: AlgebraDescriptor
    radius_exp: int
    pairs: np.ndarray

    def __post_init__(self) -> None:
        self.pairs.setflags(write=False)

    @property
    def scale_exp(self) -> int:
        return self.alg.m

    @property
    def first(self) -> np.ndarray:
        return self.pairs[:, :self.alg.d]

    @property
    def second(self) -> np.ndarray:
        return self.pairs[:, self.alg.d:]

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairSet):
            return NotImplemented
        return (self.alg == other.alg and self.radius_exp == other.radius_exp
                and np.array_equal(self.pairs, other.pairs))

    __hash__ = None


def make_pairset(alg: AlgebraDescriptor, pairs, radius_exp: int | None = None) -> PairSet:
    rows = np.asarray(pairs, dtype=np.int64).reshape(-1, 2 * alg.d)
    if not alg.is_real:
        rows = rows % alg.modulus
        radius_exp = 0
    rows = np.unique(rows, axis=0) if rows.shape[0] else rows.copy()
    fitted = fit_radius_exp(alg, rows)
    if radius_exp is None:
        radius_exp = fitted
    elif fitted > radius_exp:
        raise OutOfBall(f"Pairs reach radius exponent {fitted}, outside B(0, {alg.radix}^{radius_exp})")
    return PairSet(alg=alg, radius_exp=int(radius_exp), pairs=np.ascontiguousarray(rows))


def check_compatible(left: AlgebraDescriptor, right: AlgebraDescriptor) -> None:
    if not left.same_algebra(right):
        raise AlgebraMismatch(f"Operands live in {left.label} and {right.label}")
    if left.m != right.m:
        raise ScaleMismatch(f"Operands have scale exponents {left.m} and {right.m}")


def _merge_counts(values: list[np.ndarray], counts: list[np.ndarray], d: int) -> tuple[np.ndarray, np.ndarray]:
    if not values:
        return np.zeros((0, d), dtype=np.int64), np.zeros(0, dtype=np.int64)
    stacked = np.vstack(values)
    weights = np.concatenate(counts)
    uniq, inverse = np.unique(stacked, axis=0, return_inverse=True)
    return uniq, np.bincount(inverse.reshape(-1), weights=weights, minlength=uniq.shape[0]).astype(np.int64)


def _fft_sums(alg: AlgebraDescriptor, P: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if alg.is_real:
        loP, loQ = P.min(axis=0), Q.min(axis=0)
        sizeP = tuple(int(x) for x in P.max(axis=0) - loP + 1)
        sizeQ = tuple(int(x) for x in Q.max(axis=0) - loQ + 1)
        shape = tuple(a + b - 1 for a, b in zip(sizeP, sizeQ))
        bP = np.zeros(sizeP)
        bQ = np.zeros(sizeQ)
        bP[tuple((P - loP).T)] = 1.0
        bQ[tuple((Q - loQ).T)] = 1.0
        conv = np.fft.irfftn(np.fft.rfftn(bP, s=shape) * np.fft.rfftn(bQ, s=shape), s=shape)
        counts = np.rint(conv).astype(np.int64)
        positions = np.argwhere(counts > 0)
        return positions + loP + loQ, counts[tuple(positions.T)]
    shape = (alg.modulus,) * alg.d
    bP = np.zeros(shape)
    bQ = np.zeros(shape)
    np.add.at(bP, tuple(P.T), 1.0)
    np.add.at(bQ, tuple(Q.T), 1.0)
    conv = np.fft.ifftn(np.fft.fftn(bP) * np.fft.fftn(bQ)).real
    counts = np.rint(conv).astype(np.int64)
    positions = np.argwhere(counts > 0)
    return positions.astype(np.int64), counts[tuple(positions.T)]


def _pairwise_sums(alg: AlgebraDescriptor, P: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    step = max(1, _CHUNK_ROWS // max(1, Q.shape[0]))
    values: list[np.ndarray] = []
    counts: list[np.ndarray] = []
    pending = 0
    for start in range(0, P.shape[0], step):
        sums = (P[start:start + step, None, :] + Q[None, :, :]).reshape(-1, alg.d)
        if not alg.is_real:
            sums %= alg.modulus
        uniq, cnt = np.unique(sums, axis=0, return_counts=True)
        values.append(uniq)
        counts.append(cnt)
        pending += uniq.shape[0]
        if pending > 4 * _CHUNK_ROWS:
            merged = _merge_counts(values, counts, alg.d)
            values, counts = [merged[0]], [merged[1]]
            pending = merged[0].shape[0]
    return _merge_counts(values, counts, alg.d)


def sum_multiset(alg: AlgebraDescriptor, P: np.ndarray, Q: np.ndarray,
                 budget: BudgetConfiguration | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Distinct sums ``p + q`` with their multiplicities, sorted.

    A bitmap convolution through ``numpy.fft`` is used when the bounding box is within the cell cap
    and smaller than the number of pairs; otherwise pairs are enumerated in chunks.
    """
    budget = resolve_budget(budget)
    P = np.asarray(P, dtype=np.int64).reshape(-1, alg.d)
    Q = np.asarray(Q, dtype=np.int64).reshape(-1, alg.d)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        return np.zeros((0, alg.d), dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = P.shape[0] * Q.shape[0]
    if alg.is_real:
        extent = (P.max(axis=0) - P.min(axis=0)) + (Q.max(axis=0) - Q.min(axis=0)) + 1
        cells = math.prod(int(x) for x in extent)
    else:
        cells = alg.modulus ** alg.d
    fits = cells <= budget.fft_cell_cap
    if fits and (pairs > cells or pairs > budget.count_cap):
        return _fft_sums(alg, P, Q)
    if pairs > budget.count_cap:
        raise BudgetExceeded("Sum kernel exceeds the count budget",
                             partial={"left": int(P.shape[0]), "right": int(Q.shape[0])})
    return _pairwise_sums(alg, P, Q)


def _negated(alg: AlgebraDescriptor, points: np.ndarray) -> np.ndarray:
    return -points if alg.is_real else (-points) % alg.modulus


def _kept_radius(A: DSet) -> int | None:
    """Padic results stay in the ball of their operands; Real results are refitted."""
    return None if A.alg.is_real else A.radius_exp


def _common_radius(A: DSet, B: DSet) -> tuple[DSet, DSet]:
    radius_exp = max(A.radius_exp, B.radius_exp)
    return widen_radius(A, radius_exp), widen_radius(B, radius_exp)


def _checked_output(alg: AlgebraDescriptor, values: np.ndarray, budget: BudgetConfiguration, op: str,
                    radius_exp: int | None = None) -> DSet:
    if values.shape[0] > budget.points_cap:
        raise BudgetExceeded(f"{op} exceeds the point budget", partial={op: int(values.shape[0])})
    return make_dset(alg, values, radius_exp=radius_exp)


def sumset(A: DSet, B: DSet, budget: BudgetConfiguration | None = None) -> DSet:
    check_compatible(A.alg, B.alg)
    budget = resolve_budget(budget)
    A, B = _common_radius(A, B)
    values, _ = sum_multiset(ball_algebra(A.alg, A.radius_exp), A.points, B.points, budget)
    return _checked_output(A.alg, values, budget, "sumset", _kept_radius(A))


def difference_set(A: DSet, B: DSet, budget: BudgetConfiguration | None = None) -> DSet:
    check_compatible(A.alg, B.alg)
    budget = resolve_budget(budget)
    A, B = _common_radius(A, B)
    ball = ball_algebra(A.alg, A.radius_exp)
    values, _ = sum_multiset(ball, A.points, _negated(ball, B.points), budget)
    return _checked_output(A.alg, values, budget, "difference", _kept_radius(A))


def negate(A: DSet) -> DSet:
    return make_dset(A.alg, _negated(ball_algebra(A.alg, A.radius_exp), A.points), radius_exp=_kept_radius(A))


def product_multiset(alg: AlgebraDescriptor, P: np.ndarray, Q: np.ndarray, side: Side = Side.left,
                     budget: BudgetConfiguration | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Distinct products ``pq`` (left) or ``qp`` (right) with their multiplicities, sorted."""
    budget = resolve_budget(budget)
    P = np.asarray(P, dtype=np.int64).reshape(-1, alg.d)
    Q = np.asarray(Q, dtype=np.int64).reshape(-1, alg.d)
    if P.shape[0] * Q.shape[0] > budget.count_cap:
        raise BudgetExceeded("Product kernel exceeds the count budget",
                             partial={"left": int(P.shape[0]), "right": int(Q.shape[0])})
    if P.shape[0] == 0 or Q.shape[0] == 0:
        return np.zeros((0, alg.d), dtype=np.int64), np.zeros(0, dtype=np.int64)
    step = max(1, _CHUNK_ROWS // Q.shape[0])
    values: list[np.ndarray] = []
    counts: list[np.ndarray] = []
    for start in range(0, P.shape[0], step):
        chunk = P[start:start + step]
        X = np.repeat(chunk, Q.shape[0], axis=0)
        Y = np.tile(Q, (chunk.shape[0], 1))
        products = mul_many(alg, X, Y) if Side(side) is Side.left else mul_many(alg, Y, X)
        uniq, cnt = np.unique(products, axis=0, return_counts=True)
        values.append(uniq)
        counts.append(cnt)
    return _merge_counts(values, counts, alg.d)


def product_set(A: DSet, B: DSet, side: Side = Side.left, budget: BudgetConfiguration | None = None) -> DSet:
    """
    ``{ab}`` for ``Side.left`` or ``{ba}`` for ``Side.right``; Real products are rounded once.
    Padic radius exponents add up.
    """
    check_compatible(A.alg, B.alg)
    budget = resolve_budget(budget)
    radius_exp = A.radius_exp + B.radius_exp
    values, _ = product_multiset(ball_algebra(A.alg, radius_exp), A.points, B.points, Side(side), budget)
    return _checked_output(A.alg, values, budget, "product", None if A.alg.is_real else radius_exp)


def iterated(A: DSet, n_sum: int, n_prod: int, budget: BudgetConfiguration | None = None) -> DSet:
    """
    ``n_sum (A^(n_prod) - A^(n_prod)) ∩ B(0, 1)``.

    ### External Effects
    Raises ``BudgetExceeded`` carrying the sizes of every stage reached so far.
    """
    if n_sum < 1 or n_prod < 1:
        raise RangeError(f"iterated needs n_sum, n_prod >= 1, got ({n_sum}, {n_prod})")
    budget = resolve_budget(budget)
    sizes: dict[str, int] = {"input": len(A)}
    try:
        power = A
        for i in range(2, n_prod + 1):
            power = product_set(power, A, Side.left, budget)
            sizes[f"product_{i}"] = len(power)
        difference = difference_set(power, power, budget)
        sizes["difference"] = len(difference)
        total = difference
        for i in range(2, n_sum + 1):
            total = sumset(total, difference, budget)
            sizes[f"sum_{i}"] = len(total)
    except BudgetExceeded as e:
        raise BudgetExceeded(f"iterated({n_sum}, {n_prod}) ran out of budget: {e.args[0]}",
                             partial={**sizes, **e.partial}) from e
    return intersect_ball(total, 0)


def scalar_image(x: Sequence[int], A: DSet, side: Side = Side.left) -> DSet:
    """``{xa}`` (left) or ``{ax}`` (right)."""
    if len(x) != A.d:
        raise AlgebraMismatch(f"Scalar {tuple(x)} does not have {A.d} coordinates")
    if len(A) == 0:
        return A
    scalar = np.asarray([x], dtype=np.int64)
    ball = ball_algebra(A.alg, A.radius_exp)
    values = mul_many(ball, scalar, A.points) if Side(side) is Side.left else mul_many(ball, A.points, scalar)
    return make_dset(A.alg, values, radius_exp=_kept_radius(A))


def project(x: Sequence[int], G: PairSet, side: Side = Side.left) -> DSet:
    """``{a + x b}`` (left) or the variant ``{a + b x}`` (right), rounded once."""
    if len(x) != G.alg.d:
        raise AlgebraMismatch(f"Direction {tuple(x)} does not have {G.alg.d} coordinates")
    alg = G.alg
    if len(G) == 0:
        return make_dset(alg, np.zeros((0, alg.d), dtype=np.int64))
    scalar = np.asarray([x], dtype=np.int64)
    products = mul_many(alg, scalar, G.second) if Side(side) is Side.left else mul_many(alg, G.second, scalar)
    values = G.first + products
    if not alg.is_real:
        values %= alg.modulus
    return make_dset(alg, values)


@dataclass(frozen=True)
class QuotientResult:
    """The quotient set at scale ``Delta = delta / rho**3`` with one ``(a, b, c, d)`` witness per point."""
    q: DSet
    witnesses: np.ndarray
    delta_exp: int
    rho_exp: int
    side: Side

    @property
    def Delta_exp(self) -> int:
        return self.q.alg.m


def _difference_representatives(A: DSet, budget: BudgetConfiguration) -> tuple[np.ndarray, np.ndarray]:
    """Distinct differences ``a - b`` with the lexicographically smallest ``(a, b)`` producing each."""
    n = len(A)
    if n * n > budget.count_cap:
        raise BudgetExceeded("Difference table exceeds the count budget", partial={"points": n})
    P = A.points
    first = np.repeat(P, n, axis=0)
    second = np.tile(P, (n, 1))
    diffs = first - second
    if not A.alg.is_real:
        diffs %= A.alg.modulus
    # rows come in lexicographic (a, b) order, so the first occurrence is the smallest witness
    uniq, index = np.unique(diffs, axis=0, return_index=True)
    return uniq, np.hstack([first[index], second[index]])


def _best_per_cell(cells: np.ndarray, witnesses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys = [witnesses[:, j] for j in reversed(range(witnesses.shape[1]))]
    keys += [cells[:, j] for j in reversed(range(cells.shape[1]))]
    order = np.lexsort(keys)
    cells, witnesses = cells[order], witnesses[order]
    uniq, index = np.unique(cells, axis=0, return_index=True)
    return uniq, witnesses[index]


def _admissible(alg: AlgebraDescriptor, W: np.ndarray, rho_exp: int) -> np.ndarray:
    if alg.is_real:
        return np.sum(W * W, axis=1) > 4 ** (alg.m - rho_exp)
    return np.any(W % alg.p ** rho_exp != 0, axis=1)


def _real_quotient_cells(alg: AlgebraDescriptor, U: np.ndarray, W: np.ndarray, side: Side,
                         Delta_exp: int) -> np.ndarray:
    conj_w = W.copy()
    conj_w[:, 1:] *= -1
    numer = mul_many(alg, U, conj_w, rounded=False) if side is Side.left else mul_many(alg, conj_w, U, rounded=False)
    denom = np.sum(W * W, axis=1)
    bound = int(np.abs(numer).max(initial=0)) * 2 ** Delta_exp
    if bound >= _INT64_SAFE:
        numer = numer.astype(object)
        denom = denom.astype(object)
    cells = round_half_away_array(numer * 2 ** Delta_exp, denom[:, None])
    return cells.astype(np.int64)


def _padic_quotient_cells(alg: AlgebraDescriptor, U: np.ndarray, w: np.ndarray, valuation: int, top: int,
                          side: Side, Delta_exp: int) -> np.ndarray:
    """``p**top * u w^-1`` mod ``p**(Delta_exp + top)`` for each row ``u`` of ``U``; ``w`` has valuation ``<= top``."""
    ball = alg.with_precision(Delta_exp + top)
    w_inverse = np.asarray([inv(ball, [int(c) // alg.p ** valuation for c in w])])
    numer = U % ball.modulus
    ratio = mul_many(ball, numer, w_inverse) if side is Side.left else mul_many(ball, w_inverse, numer)
    return ratio * alg.p ** (top - valuation) % ball.modulus


def _fit_padic_radius(alg_Delta: AlgebraDescriptor, cells: np.ndarray, top: int) -> DSet:
    """Drop the powers of ``p`` every scaled ratio shares; the radius exponent left is the smallest that fits."""
    ball = alg_Delta.with_precision(alg_Delta.m + top)
    lowest = int(valuations_many(ball, cells).min(initial=ball.m))
    radius_exp = max(0, top - lowest)
    return make_dset(alg_Delta, cells // alg_Delta.p ** (top - radius_exp), radius_exp=radius_exp)


def quotient_witnesses(A: DSet, rho_exp: int, side: Side = Side.left,
                       budget: BudgetConfiguration | None = None) -> QuotientResult:
    """
    Quotient set ``{(a-b)(c-d)^-1}`` (left) or ``{(c-d)^-1 (a-b)}`` (right) over pairs with
    ``|c - d| > rho``, discretized at ``Delta = delta / rho**3``.

    Real ratios are computed exactly from integers and rounded once onto the Delta grid. Padic ratios
    are exact modulo ``p**Delta_exp``; a ratio of norm ``p**R > 1`` makes the result a set of radius
    exponent ``R``, stored as ``p**R * ratio``. Each point carries the lexicographically smallest
    witness ``(a, b, c, d)``.
    """
    budget = resolve_budget(budget)
    require_unit_ball(A, "quotient_set")
    alg = A.alg
    side = Side(side)
    Delta_exp = alg.m - 3 * rho_exp
    if rho_exp < 0 or Delta_exp < 1:
        raise ScaleOutOfRange(f"rho exponent {rho_exp} leaves no room for Delta = delta/rho^3 at m={alg.m}")
    U, U_pairs = _difference_representatives(A, budget)
    admissible = _admissible(alg, U, rho_exp)
    W, W_pairs = U[admissible], U_pairs[admissible]
    if W.shape[0] == 0:
        raise NoAdmissiblePairs(f"No pair c, d in A with |c - d| > {alg.radix}^-{rho_exp}")
    if U.shape[0] * W.shape[0] > budget.count_cap:
        raise BudgetExceeded("Quotient set exceeds the count budget", partial={"differences": int(U.shape[0]),
                                                                              "admissible": int(W.shape[0])})
    alg_Delta = alg.with_precision(Delta_exp)
    best_cells = np.zeros((0, alg.d), dtype=np.int64)
    best_witness = np.zeros((0, 4 * alg.d), dtype=np.int64)
    step = max(1, _CHUNK_ROWS // U.shape[0])

    if not alg.is_real:
        # admissible differences have valuation below rho_exp, so p**top * ratio is integral
        valuations = valuations_many(alg, W, rho_exp)
        top = int(valuations.max())

    for start in range(0, W.shape[0], step):
        W_chunk = W[start:start + step]
        Wp_chunk = W_pairs[start:start + step]
        if alg.is_real:
            cells = _real_quotient_cells(alg, np.tile(U, (W_chunk.shape[0], 1)),
                                         np.repeat(W_chunk, U.shape[0], axis=0), side, Delta_exp)
        else:
            cells = np.vstack([_padic_quotient_cells(alg, U, w, int(valuations[start + offset]), top, side, Delta_exp)
                               for offset, w in enumerate(W_chunk)])
        witness = np.hstack([np.tile(U_pairs, (W_chunk.shape[0], 1)), np.repeat(Wp_chunk, U.shape[0], axis=0)])
        best_cells, best_witness = _best_per_cell(np.vstack([best_cells, cells]),
                                                  np.vstack([best_witness, witness]))
        if best_cells.shape[0] > budget.points_cap:
            raise BudgetExceeded("Quotient set exceeds the point budget", partial={"quotients": int(best_cells.shape[0])})

    q = make_dset(alg_Delta, best_cells) if alg.is_real else _fit_padic_radius(alg_Delta, best_cells, top)
    return QuotientResult(q=q, witnesses=best_witness, delta_exp=alg.m, rho_exp=rho_exp, side=side)


def quotient_set(A: DSet, rho_exp: int, side: Side = Side.left, budget: BudgetConfiguration | None = None) -> DSet:
    return quotient_witnesses(A, rho_exp, side, budget).q


LinearMap = tuple[tuple[Element, Element], tuple[Element, Element]]


def coordinate_change(alg: AlgebraDescriptor, x1: Sequence[int], x2: Sequence[int]) -> LinearMap:
    """The map ``(g, g') -> (g + x1 g', g + x2 g')``: its coordinates are the projections in directions x1, x2."""
    one = alg.one()
    return ((one, tuple(int(c) for c in x1)), (one, tuple(int(c) for c in x2)))


def _block_matrix(blocks: list[list[list[list[int]]]]) -> sympy.Matrix:
    rows = []
    for block_row in blocks:
        for i in range(len(block_row[0])):
            rows.append([entry for block in block_row for entry in block[i]])
    return sympy.Matrix(rows)


def _action_matrix(alg: AlgebraDescriptor, L: LinearMap) -> sympy.Matrix:
    return _block_matrix([[multiplication_matrix(alg, L[r][c], Side.left) for c in range(2)] for r in range(2)])


def _as_fraction(value) -> Fraction:
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def _check_invertible(alg: AlgebraDescriptor, L: LinearMap, det_floor: Fraction | None) -> None:
    det = int(_action_matrix(alg, L).det(method="bareiss"))
    floor = det_floor if det_floor is not None else Fraction(1, alg.radix ** inversion_floor_exp(alg))
    if alg.is_real:
        size = Fraction(abs(det), alg.unit ** (2 * alg.d))
    else:
        det %= alg.modulus
        size = Fraction(0) if det == 0 else Fraction(1, alg.p ** sympy.multiplicity(alg.p, det))
    if size < floor:
        raise SingularMap(f"Linear map has determinant {size} below the floor {floor}")


def apply_linear_map(L: LinearMap, G: PairSet, det_floor: Fraction | None = None) -> PairSet:
    """``(g, g') -> (l11 g + l12 g', l21 g + l22 g')``, each coordinate rounded once."""
    alg = G.alg
    _check_invertible(alg, L, det_floor)
    if len(G) == 0:
        return G
    images = []
    for row in L:
        left = mul_many(alg, np.asarray([row[0]]), G.first, rounded=False)
        right = mul_many(alg, np.asarray([row[1]]), G.second, rounded=False)
        total = left + right
        if alg.is_real:
            total = round_half_away_array(total, alg.unit).astype(np.int64)
        images.append(np.asarray(total, dtype=np.int64))
    return make_pairset(alg, np.hstack(images))


def _dual_real(alg: AlgebraDescriptor, system: sympy.Matrix, x: Sequence[int]) -> Element | None:
    rhs = sympy.Matrix([alg.unit] + [0] * (alg.d - 1) + [int(c) for c in x])
    solution = system.LUsolve(rhs)
    alpha = [_as_fraction(v) for v in solution[:alg.d]]
    beta = [_as_fraction(v) for v in solution[alg.d:]]
    size = sum(a * a for a in alpha)
    if size < Fraction(1, 4 ** inversion_floor_exp(alg)):
        return None
    alpha_conj = [alpha[0]] + [-a for a in alpha[1:]]
    ratio = _product_int(alg.structure_constants, alpha_conj, beta)
    out = []
    for value in ratio:
        scaled = value / size * alg.unit
        out.append(round_half_away(scaled.numerator, scaled.denominator))
    return tuple(out)


def _dual_padic(alg: AlgebraDescriptor, system_inverse: sympy.Matrix, x: Sequence[int]) -> Element | None:
    rhs = sympy.Matrix([1] + [0] * (alg.d - 1) + [int(c) for c in x])
    solution = [int(v) % alg.modulus for v in system_inverse * rhs]
    alpha, beta = solution[:alg.d], solution[alg.d:]
    try:
        alpha_inverse = inv(alg, alpha)
    except DivisionByNegligible:
        return None
    return tuple(int(c) for c in mul_many(alg, np.asarray([alpha_inverse]), np.asarray([beta]))[0])


def apply_dual(L: LinearMap, X: DSet, det_floor: Fraction | None = None) -> DSet:
    """
    Directions after the change of coordinates: ``x -> alpha^-1 beta`` where ``(alpha, beta) L = (1, x)``,
    so that ``pi_x(G)`` is a rescaling of ``pi_{x'}(L G)``. Directions whose ``alpha`` is not invertible
    are skipped with a warning.
    """
    require_unit_ball(X, "apply_dual")
    alg = X.alg
    _check_invertible(alg, L, det_floor)
    right = [[multiplication_matrix(alg, L[r][c], Side.right) for c in range(2)] for r in range(2)]
    # (alpha, beta) L = (alpha l11 + beta l21, alpha l12 + beta l22)
    system = _block_matrix([[right[0][0], right[1][0]], [right[0][1], right[1][1]]])
    if not alg.is_real:
        try:
            system_inverse = system.inv_mod(alg.modulus)
        except ValueError as e:
            raise SingularMap(f"Dual map is not invertible over the integers at precision {alg.m}: {e}") from e
    images: list[Element] = []
    skipped = 0
    for x in X.elements():
        image = _dual_real(alg, system, x) if alg.is_real else _dual_padic(alg, system_inverse, x)
        if image is None:
            skipped += 1
            continue
        images.append(image)
    if skipped:
        warn(f"apply_dual skipped {skipped} direction(s) mapped to infinity")
    return make_dset(alg, np.asarray(images, dtype=np.int64).reshape(-1, alg.d))


def recentering_point(A: DSet) -> Element:
    """The point of ``A`` minimizing the largest l-infinity distance to ``A`` (lexicographic tie-break)."""
    if len(A) == 0:
        raise RangeError("Cannot recenter an empty set")
    if not A.alg.is_real:
        return tuple(int(c) for c in A.points[0])
    lo, hi = A.points.min(axis=0), A.points.max(axis=0)
    spread = np.maximum(hi - A.points, A.points - lo).max(axis=1)
    return tuple(int(c) for c in A.points[int(np.argmin(spread))])


def recenter(A: DSet) -> DSet:
    if len(A) == 0:
        return A
    center = np.asarray(recentering_point(A), dtype=np.int64)
    return make_dset(A.alg, A.points - center, radius_exp=_kept_radius(A))


def pairset_product(A: DSet, B: DSet, budget: BudgetConfiguration | None = None) -> PairSet:
    check_compatible(A.alg, B.alg)
    require_unit_ball(A, "pairset_product")
    require_unit_ball(B, "pairset_product")
    budget = resolve_budget(budget)
    if len(A) * len(B) > budget.points_cap:
        raise BudgetExceeded("Product pair set exceeds the point budget", partial={"left": len(A), "right": len(B)})
    rows = np.hstack([np.repeat(A.points, len(B), axis=0), np.tile(B.points, (len(A), 1))])
    return make_pairset(A.alg, rows)


def pairset_union(G: PairSet, H: PairSet) -> PairSet:
    check_compatible(G.alg, H.alg)
    return make_pairset(G.alg, np.vstack([G.pairs, H.pairs]))
