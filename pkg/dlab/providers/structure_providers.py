from dataclasses import dataclass, field
from .._compat import StrEnum
from fractions import Fraction
from typing import Protocol, Sequence
import itertools
import math

import numpy as np
from pydantic import BaseModel
import sympy
from sympy.combinatorics import Permutation

from .algebra_providers import (AlgebraDescriptor, Element, Side, det_basis, mul, mul_many, power, valuations_many)
from .config_providers import BudgetConfiguration, resolve_budget
from .dset_providers import DSet, RowIndex, ball_algebra, covering_number, require_unit_ball
from .errors_providers import (BudgetExceeded, EmptyInput, NotRealBase, RangeError, ScaleMismatch,
                               SubAlgebraTrapped, DlabValidationError)
from .setops_providers import QuotientResult


class SubAlgebra(Protocol):
    label: str
    dimension: int

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Distance of every row to the sub-algebra, as floats in ``[0, 1]``-scaled units."""
        ...

    def distance(self, x: Sequence[int]) -> float | Fraction:
        ...


@dataclass(frozen=True)
class RealSpanMember:
    """Linear span of an orthonormal float basis inside a Real algebra."""
    alg: AlgebraDescriptor
    label: str
    basis: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    def distances(self, points: np.ndarray) -> np.ndarray:
        P = np.asarray(points, dtype=np.float64).reshape(-1, self.alg.d)
        coefficients = P @ self.basis.T
        residual = np.sum(P * P, axis=1) - np.sum(coefficients * coefficients, axis=1)
        return np.sqrt(np.maximum(residual, 0.0)) / self.alg.unit

    def distance(self, x: Sequence[int]) -> float:
        return float(self.distances(np.asarray([x]))[0])


@dataclass(frozen=True)
class PadicSubfieldMember:
    """
    The unramified subfield of degree ``e`` in ``Qp_ext(p, d)``, spanned by powers of a Teichmüller
    generator ``eta``. ``change`` maps standard coordinates to coordinates in the basis
    ``1, eta, .., eta^(e-1)`` completed by standard vectors; the completion coordinates measure the
    distance.
    """
    alg: AlgebraDescriptor
    label: str
    e: int
    eta: Element
    change: tuple[tuple[int, ...], ...]

    @property
    def dimension(self) -> int:
        return self.e

    def _complement_valuations(self, points: np.ndarray) -> np.ndarray:
        alg = self.alg
        M = alg.modulus
        P = np.asarray(points, dtype=np.int64).reshape(-1, alg.d) % M
        change = np.asarray(self.change, dtype=np.int64)
        coords = np.zeros((P.shape[0], alg.d - self.e), dtype=np.int64)
        for row, target in enumerate(range(self.e, alg.d)):
            for j in range(alg.d):
                coords[:, row] = (coords[:, row] + (change[target, j] * P[:, j]) % M) % M
        complement = AlgebraDescriptor(kind=alg.kind, d=alg.d - self.e, m=alg.m, structure_constants=(), p=alg.p)
        return valuations_many(complement, coords)

    def distances(self, points: np.ndarray) -> np.ndarray:
        v = self._complement_valuations(points)
        return np.where(v >= self.alg.m, 0.0, np.power(float(self.alg.p), -v.astype(np.float64)))

    def distance(self, x: Sequence[int]) -> Fraction:
        v = int(self._complement_valuations(np.asarray([x]))[0])
        return Fraction(0) if v >= self.alg.m else Fraction(1, self.alg.p ** v)

    def is_closed(self) -> bool:
        """``eta^(p^e) == eta`` at the working precision, so the span is closed under products."""
        return power(self.alg, self.eta, self.alg.p ** self.e) == self.alg.reduce(self.eta)


@dataclass(frozen=True)
class SubAlgebraFamily:
    alg: AlgebraDescriptor
    members: list[SubAlgebra] = field(default_factory=list)
    net_exp: int | None = None


def _imaginary_net(n: int) -> np.ndarray:
    """Integer points on the surface of the cube ``[-n, n]^3``, one per antipodal pair."""
    axis = np.arange(-n, n + 1)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    surface = grid[np.abs(grid).max(axis=1) == n]
    nonzero = surface != 0
    first = surface[np.arange(surface.shape[0]), np.argmax(nonzero, axis=1)]
    return surface[first > 0]


def _primitive_residue(alg: AlgebraDescriptor) -> Element:
    residue = alg.with_precision(1)
    order = alg.p ** alg.d - 1
    factors = list(sympy.factorint(order))
    for candidate in itertools.product(range(alg.p), repeat=alg.d):
        if not any(candidate):
            continue
        if all(power(residue, candidate, order // q) != residue.one() for q in factors):
            return tuple(candidate)
    raise DlabValidationError(f"No primitive element found in the residue field of {alg.label}")


def _subfield_member(alg: AlgebraDescriptor, generator: Element, e: int) -> PadicSubfieldMember:
    M = alg.modulus
    teichmuller = power(alg, generator, alg.p ** (alg.d * alg.m))
    eta = power(alg, teichmuller, (alg.p ** alg.d - 1) // (alg.p ** e - 1))
    columns = [alg.one()]
    for _ in range(1, e):
        columns.append(mul(alg, columns[-1], eta))
    for extra in itertools.combinations(range(alg.d), alg.d - e):
        full = columns + [alg.basis_element(j) for j in extra]
        matrix = sympy.Matrix([[int(full[c][r]) for c in range(alg.d)] for r in range(alg.d)])
        if int(matrix.det()) % alg.p != 0:
            inverse = matrix.inv_mod(M)
            change = tuple(tuple(int(inverse[r, c]) % M for c in range(alg.d)) for r in range(alg.d))
            return PadicSubfieldMember(alg=alg, label=f"subfield(e={e})", e=e, eta=eta, change=change)
    raise DlabValidationError(f"Subfield of degree {e} in {alg.label} has no unimodular completion")


def subalgebra_family(alg: AlgebraDescriptor, net_exp: int | None = None) -> SubAlgebraFamily:
    """
    Proper sub-algebras of ``alg``: ``R`` inside ``C``; ``R`` and the copies ``span(1, u)`` of ``C``
    inside ``H`` over a net of imaginary directions of fineness ``2**-net_exp`` (default ``ceil(m/2)``);
    the unramified subfields of degree ``e | d, e < d`` inside ``Qp_ext``. ``R`` and ``Qp`` have none.
    """
    if alg.is_real:
        if alg.d == 1:
            return SubAlgebraFamily(alg=alg)
        real_line = RealSpanMember(alg=alg, label="R", basis=np.eye(alg.d)[:1])
        if alg.d == 2:
            return SubAlgebraFamily(alg=alg, members=[real_line])
        net_exp = math.ceil(alg.m / 2) if net_exp is None else net_exp
        if net_exp < 0:
            raise RangeError(f"Net exponent must be nonnegative, got {net_exp}")
        members: list[SubAlgebra] = [real_line]
        for u in _imaginary_net(2 ** net_exp):
            direction = u / np.linalg.norm(u)
            basis = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, *direction]])
            members.append(RealSpanMember(alg=alg, label=f"span(1,{tuple(int(c) for c in u)})", basis=basis))
        return SubAlgebraFamily(alg=alg, members=members, net_exp=net_exp)

    if alg.d == 1:
        return SubAlgebraFamily(alg=alg)
    generator = _primitive_residue(alg)
    members = [_subfield_member(alg, generator, e) for e in sympy.divisors(alg.d) if e < alg.d]
    return SubAlgebraFamily(alg=alg, members=members)


def distance_to_subalgebra(a: Sequence[int], F: SubAlgebra) -> float | Fraction:
    return F.distance(a)


class AvoidanceReport(BaseModel):
    result: bool
    C: float
    threshold: float
    members: int
    worst_member: str | None = None
    worst_distance: float | None = None
    trapped_count: int = 0
    best_point: list[int] | None = None
    net_exp: int | None = None


def _distance_table(A: DSet, family: SubAlgebraFamily) -> list[tuple[SubAlgebra, np.ndarray]]:
    return [(member, member.distances(A.points)) for member in family.members]


def _meets(distance: float, threshold: float) -> bool:
    return distance >= threshold * (1 - 1e-12)


def avoids_subalgebras(A: DSet, C: float, family: SubAlgebraFamily | None = None) -> AvoidanceReport:
    """
    Whether every proper sub-algebra has a point of ``A`` at distance at least ``1/C``.

    The report names the member whose farthest point is nearest, with that distance, the number of
    points trapped within ``1/C`` of it and the farthest point itself.
    """
    if len(A) == 0:
        raise EmptyInput("avoids_subalgebras needs a nonempty set")
    require_unit_ball(A, "avoids_subalgebras")
    family = family if family is not None else subalgebra_family(A.alg)
    threshold = 1.0 / C
    report = AvoidanceReport(result=True, C=C, threshold=threshold, members=len(family.members),
                             net_exp=family.net_exp)
    for member, distances in _distance_table(A, family):
        farthest = int(np.argmax(distances))
        if report.worst_distance is None or distances[farthest] < report.worst_distance:
            report.worst_member = member.label
            report.worst_distance = float(distances[farthest])
            report.trapped_count = int(np.sum(~(distances >= threshold * (1 - 1e-12))))
            report.best_point = [int(c) for c in A.points[farthest]]
    if report.worst_distance is not None:
        report.result = _meets(report.worst_distance, threshold)
    return report


class StrongAvoidanceReport(BaseModel):
    result: bool
    sufficient: bool
    necessary: bool
    C: float
    subset_size: int
    worst_member: str | None = None
    worst_trapped: int = 0


def strongly_avoids(A: DSet, C: float, family: SubAlgebraFamily | None = None) -> StrongAvoidanceReport:
    """
    Whether every ``B ⊂ A`` with ``|B| >= |A|/C`` has a point ``1/C``-far from every sub-algebra,
    one sub-algebra at a time.

    With ``k = ceil(|A|/C)`` and ``trapped(F)`` the points within ``1/C`` of ``F``: ``trapped(F) < k``
    for every ``F`` is sufficient (and decides ``result``), ``trapped(F) <= |A| - k`` is necessary.
    """
    if len(A) == 0:
        raise EmptyInput("strongly_avoids needs a nonempty set")
    require_unit_ball(A, "strongly_avoids")
    family = family if family is not None else subalgebra_family(A.alg)
    threshold = 1.0 / C
    k = math.ceil(len(A) / C)
    worst_member, worst_trapped = None, -1
    for member, distances in _distance_table(A, family):
        trapped = int(np.sum(~(distances >= threshold * (1 - 1e-12))))
        if trapped > worst_trapped:
            worst_member, worst_trapped = member.label, trapped
    worst_trapped = max(worst_trapped, 0)
    sufficient = worst_trapped < k
    necessary = worst_trapped <= len(A) - k
    return StrongAvoidanceReport(result=sufficient, sufficient=sufficient, necessary=necessary, C=C,
                                 subset_size=k, worst_member=worst_member, worst_trapped=worst_trapped)


class EscapeCertificate(BaseModel):
    basis: list[list[int]]
    det: float
    det_exact: str
    pool_size: int
    sampled: bool


def _candidate_pool(A: DSet, budget: BudgetConfiguration, seed: int) -> tuple[np.ndarray, bool]:
    """Products of at most ``d`` elements of ``A``: enumerated when small, sampled otherwise."""
    alg = A.alg
    n = len(A)
    rng = np.random.default_rng(seed)
    layers = [A.points]
    sampled = False
    current = A.points
    for depth in range(2, alg.d + 1):
        if current.shape[0] * n <= budget.candidate_cap:
            X = np.repeat(current, n, axis=0)
            Y = np.tile(A.points, (current.shape[0], 1))
            current = np.unique(mul_many(alg, X, Y), axis=0)
        else:
            sampled = True
            picks = rng.integers(0, n, size=(budget.candidate_cap, depth))
            current = A.points[picks[:, 0]]
            for column in range(1, depth):
                current = mul_many(alg, current, A.points[picks[:, column]])
            current = np.unique(current, axis=0)
        layers.append(current)
    return np.unique(np.vstack(layers), axis=0), sampled


def _leibniz_minor_valuations(alg: AlgebraDescriptor, fixed: list[Element], candidates: np.ndarray) -> np.ndarray:
    """For each candidate ``c``, the smallest valuation over maximal minors of ``[fixed | c]``."""
    M = alg.modulus
    k = len(fixed) + 1
    best = np.full(candidates.shape[0], alg.m, dtype=np.int64)
    unit = AlgebraDescriptor(kind=alg.kind, d=1, m=alg.m, structure_constants=(), p=alg.p)
    for rows in itertools.combinations(range(alg.d), k):
        det = np.zeros(candidates.shape[0], dtype=np.int64)
        for perm in itertools.permutations(range(k)):
            sign = Permutation(list(perm)).signature()
            coefficient = 1
            for column in range(k - 1):
                coefficient = coefficient * int(fixed[column][rows[perm[column]]]) % M
            term = (coefficient * candidates[:, rows[perm[k - 1]]]) % M
            det = (det + sign * term) % M
        best = np.minimum(best, valuations_many(unit, det))
    return best


def _greedy_real(A: DSet, pool: np.ndarray) -> list[Element]:
    norms = np.sum(A.points.astype(np.float64) ** 2, axis=1)
    top = norms.max()
    if top == 0:
        raise SubAlgebraTrapped("Every point of A is zero", span=[])
    first = A.points[np.flatnonzero(norms == top)[-1]]
    basis = [tuple(int(c) for c in first)]
    frame = [first / np.linalg.norm(first)]
    P = pool.astype(np.float64)
    for _ in range(1, A.d):
        Q = np.asarray(frame)
        residual = P - (P @ Q.T) @ Q
        lengths = np.linalg.norm(residual, axis=1)
        best = int(np.argmax(lengths))
        if lengths[best] <= 0.5:
            raise SubAlgebraTrapped(f"Products of A stay inside a {len(basis)}-dimensional span",
                                    span=[list(v) for v in basis])
        basis.append(tuple(int(c) for c in pool[best]))
        frame.append(residual[best] / lengths[best])
    return basis


def _greedy_padic(A: DSet, pool: np.ndarray) -> list[Element]:
    alg = A.alg
    v = valuations_many(alg, A.points)
    if v.min() >= alg.m:
        raise SubAlgebraTrapped("Every point of A is zero", span=[])
    basis = [tuple(int(c) for c in A.points[np.flatnonzero(v == v.min())[-1]])]
    for _ in range(1, alg.d):
        volume = _leibniz_minor_valuations(alg, basis, pool)
        best = int(np.argmin(volume))
        if volume[best] >= alg.m:
            raise SubAlgebraTrapped(f"Products of A stay inside a {len(basis)}-dimensional span",
                                    span=[list(v) for v in basis])
        basis.append(tuple(int(c) for c in pool[best]))
    return basis


def escape_basis(A: DSet, floor: float | Fraction, seed: int = 0,
                 budget: BudgetConfiguration | None = None) -> EscapeCertificate:
    """
    Greedy search for ``d`` elements of ``A^(d)`` with determinant at least ``floor``.

    ``v_1`` is the largest element of ``A`` (ties go to the lexicographically largest); every next
    vector maximizes the volume spanned together with the previous ones over the candidate pool.

    ### External Effects
    Raises ``SubAlgebraTrapped`` with the span reached when the greedy stalls or the final
    determinant is below ``floor``.
    """
    if len(A) == 0:
        raise EmptyInput("escape_basis needs a nonempty set")
    require_unit_ball(A, "escape_basis")
    budget = resolve_budget(budget)
    pool, sampled = _candidate_pool(A, budget, seed)
    basis = _greedy_real(A, pool) if A.alg.is_real else _greedy_padic(A, pool)
    det = abs(det_basis(A.alg, basis))
    if det < Fraction(floor):
        raise SubAlgebraTrapped(f"Greedy basis has determinant {float(det):.6g} below the floor {float(floor):.6g}",
                                span=[list(v) for v in basis])
    return EscapeCertificate(basis=[list(v) for v in basis], det=float(det), det_exact=str(det),
                             pool_size=int(pool.shape[0]), sampled=sampled)


def halving_map(alg: AlgebraDescriptor, v: Sequence[Sequence[int]], bits: Sequence[int], x: Sequence[int]) -> Element:
    """``(x + sum_j bits_j v_j) / 2`` rounded to the grid; in ``v``-coordinates, ``x_j -> (x_j + bits_j) / 2``."""
    if not alg.is_real:
        raise NotRealBase(f"halving_map needs a Real algebra, got {alg.label}")
    total = [int(c) for c in x]
    for bit, vector in zip(bits, v):
        if bit:
            total = [t + int(c) for t, c in zip(total, vector)]
    return tuple((t + 1) // 2 if t >= 0 else -((-t + 1) // 2) for t in total)


class DichotomyMode(StrEnum):
    halving = "halving"
    translate = "translate"
    field = "field"


class DichotomyCase(StrEnum):
    dense = "Dense"
    sparse = "Sparse"


class ClosureViolation(BaseModel):
    x: list[int]
    y: list[int]
    op: str
    result: list[int]
    radius_exp: int = 0


class SparseWitness(BaseModel):
    x: list[int]
    image: list[int]
    image_scale_exp: int
    image_radius_exp: int = 0
    bits: list[int] | None = None
    index: int | None = None
    closure: ClosureViolation | None = None
    quadruple: list[int] | None = None
    p: list[int] | None = None
    q: list[int] | None = None
    u: list[int] | None = None
    v: list[int] | None = None


class DenseAudit(BaseModel):
    measured: int
    bound: float
    det: float
    holds: bool


class DichotomyOutcome(BaseModel):
    case: DichotomyCase
    mode: DichotomyMode
    delta_exp: int
    rho_exp: int
    Delta_exp: int
    checked: int
    sparse: SparseWitness | None = None
    dense: DenseAudit | None = None


def _bit_vectors(d: int) -> list[tuple[int, ...]]:
    return [tuple((b >> j) & 1 for j in range(d)) for b in range(2 ** d)]


def _near_grid(index: RowIndex, values: np.ndarray, step: int) -> np.ndarray:
    """Whether some grid point ``q`` (stored in ``index``) has ``|q * step - value|_inf <= step``."""
    base = np.floor_divide(values, step)
    found = np.zeros(values.shape[0], dtype=bool)
    for offset in itertools.product((-1, 0, 1), repeat=values.shape[1]):
        candidate = base + np.asarray(offset, dtype=np.int64)
        close = np.all(np.abs(candidate * step - values) <= step, axis=1)
        found |= close & index.contains(candidate)
    return found


def _quadruple(quotient: QuotientResult | None, row: int) -> list[int] | None:
    if quotient is None:
        return None
    return [int(c) for c in quotient.witnesses[row]]


def _split_quadruple(alg: AlgebraDescriptor, quadruple: list[int]) -> tuple[np.ndarray, np.ndarray]:
    a, b, c, d = (np.asarray(quadruple[i * alg.d:(i + 1) * alg.d], dtype=np.int64) for i in range(4))
    top, bottom = a - b, c - d
    if not alg.is_real:
        top, bottom = top % alg.modulus, bottom % alg.modulus
    return top, bottom


def _halving_case(Q: DSet, v: list[Element], delta_exp: int, quotient: QuotientResult | None,
                  side: Side) -> tuple[int, SparseWitness | None]:
    # images live on the grid of step 2^-(delta_exp+1), where Q has step 2^(delta_exp+1-Delta_exp)
    step = 2 ** (delta_exp + 1 - Q.alg.m)
    index = RowIndex(Q.points)
    base = Q.points * 2 ** (delta_exp - Q.alg.m)
    first: tuple[int, int] | None = None
    bit_vectors = _bit_vectors(Q.d)
    for position, bits in enumerate(bit_vectors):
        shift = np.zeros(Q.d, dtype=np.int64)
        for bit, vector in zip(bits, v):
            if bit:
                shift = shift + np.asarray(vector, dtype=np.int64)
        missing = np.flatnonzero(~_near_grid(index, base + shift, step))
        if missing.size and (first is None or (int(missing[0]), position) < first):
            first = (int(missing[0]), position)
    checked = len(Q) * len(bit_vectors)
    if first is None:
        return checked, None
    row, position = first
    bits = bit_vectors[position]
    shift = sum((np.asarray(vector, dtype=np.int64) for bit, vector in zip(bits, v) if bit), np.zeros(Q.d, dtype=np.int64))
    witness = SparseWitness(x=[int(c) for c in Q.points[row]], image=[int(c) for c in base[row] + shift],
                            image_scale_exp=delta_exp + 1, bits=list(bits), quadruple=_quadruple(quotient, row))
    if witness.quadruple is not None:
        alg = Q.alg.with_precision(delta_exp)
        top, bottom = _split_quadruple(alg, witness.quadruple)
        moved = mul_many(alg, shift, bottom) if side is Side.left else mul_many(alg, bottom, shift)
        witness.p = [int(c) for c in top + moved[0]]
        witness.q = [int(c) for c in 2 * bottom]
    return checked, witness


def _translate_case(Q: DSet, v: list[Element], quotient: QuotientResult | None,
                    side: Side) -> tuple[int, SparseWitness | None]:
    # x + v_j on the stored coordinates p**R x
    M = ball_algebra(Q.alg, Q.radius_exp).modulus
    shift = Q.alg.p ** Q.radius_exp
    index = RowIndex(Q.points)
    first: tuple[int, int] | None = None
    for j, vector in enumerate(v):
        images = (Q.points + shift * np.asarray(vector, dtype=np.int64)) % M
        missing = np.flatnonzero(~index.contains(images))
        if missing.size and (first is None or (int(missing[0]), j) < first):
            first = (int(missing[0]), j)
    checked = len(Q) * len(v)
    if first is None:
        return checked, None
    row, j = first
    image = (Q.points[row] + shift * np.asarray(v[j], dtype=np.int64)) % M
    witness = SparseWitness(x=[int(c) for c in Q.points[row]], image=[int(c) for c in image],
                            image_scale_exp=Q.alg.m, image_radius_exp=Q.radius_exp, index=j,
                            quadruple=_quadruple(quotient, row))
    if witness.quadruple is not None:
        alg = quotient.q.alg.with_precision(quotient.delta_exp)
        top, bottom = _split_quadruple(alg, witness.quadruple)
        vector = np.asarray(v[j], dtype=np.int64)
        moved = mul_many(alg, vector, bottom) if side is Side.left else mul_many(alg, bottom, vector)
        witness.p = [int(c) for c in (top + moved[0]) % alg.modulus]
        witness.q = [int(c) for c in bottom]
    return checked, witness


def closure_check(Q: DSet, budget: BudgetConfiguration | None = None) -> ClosureViolation | None:
    """
    First pair ``(x, y)`` of ``Q`` in lexicographic order with ``x + y`` or ``x y`` outside ``Q``
    (the Padic field case, where ``Q`` is a set of residues); ``None`` when ``Q`` is closed.

    A product that leaves the ball of ``Q`` is a violation; its ``result`` is stored at twice the
    radius exponent of ``Q``.
    """
    if Q.alg.is_real:
        raise DlabValidationError("closure_check applies to p-adic quotient sets")
    budget = resolve_budget(budget)
    n = len(Q)
    if n * n > budget.count_cap:
        raise BudgetExceeded("Closure check exceeds the count budget", partial={"quotients": n})
    M = ball_algebra(Q.alg, Q.radius_exp).modulus
    wide = ball_algebra(Q.alg, 2 * Q.radius_exp)
    scale = Q.alg.p ** Q.radius_exp
    index = RowIndex(Q.points)
    for i, x in enumerate(Q.points):
        sums = (x + Q.points) % M
        raw = mul_many(wide, x, Q.points)
        inside = np.all(raw % scale == 0, axis=1)
        products = np.where(inside[:, None], (raw // scale) % M, raw)
        bad_sum = ~index.contains(sums)
        bad_product = ~inside | ~index.contains(products)
        bad = np.flatnonzero(bad_sum | bad_product)
        if bad.size:
            j = int(bad[0])
            if bad_sum[j]:
                op, result, radius_exp = "sum", sums[j], Q.radius_exp
            else:
                op, result = "product", products[j]
                radius_exp = Q.radius_exp if inside[j] else 2 * Q.radius_exp
            return ClosureViolation(x=[int(c) for c in x], y=[int(c) for c in Q.points[j]], op=op,
                                    result=[int(c) for c in result], radius_exp=radius_exp)
    return None


def _field_case(Q: DSet, quotient: QuotientResult | None,
                budget: BudgetConfiguration) -> tuple[int, SparseWitness | None]:
    violation = closure_check(Q, budget)
    checked = len(Q) * len(Q)
    if violation is None:
        return checked, None
    witness = SparseWitness(x=violation.x, image=violation.result, image_scale_exp=Q.alg.m,
                            image_radius_exp=violation.radius_exp, closure=violation)
    if quotient is not None:
        rows = {tuple(int(c) for c in point): i for i, point in enumerate(Q.points)}
        alg = Q.alg.with_precision(quotient.delta_exp)
        u1, w1 = _split_quadruple(alg, _quadruple(quotient, rows[tuple(violation.x)]))
        u2, w2 = _split_quadruple(alg, _quadruple(quotient, rows[tuple(violation.y)]))
        witness.quadruple = _quadruple(quotient, rows[tuple(violation.x)]) + _quadruple(quotient, rows[tuple(violation.y)])
        denominator = mul_many(alg, w1, w2)[0]
        if violation.op == "sum":
            numerator = (mul_many(alg, u1, w2) + mul_many(alg, u2, w1))[0] % alg.modulus
        else:
            numerator = mul_many(alg, u1, u2)[0]
        witness.u = [int(c) for c in numerator]
        witness.v = [int(c) for c in denominator]
    return checked, witness


def _dense_audit(Q: DSet, v: list[Element], delta_exp: int) -> DenseAudit:
    alg = Q.alg.with_precision(delta_exp)
    det = abs(det_basis(alg, v))
    measured = covering_number(Q, Q.alg.m)
    if alg.is_real:
        bound = float(det) / 2 ** alg.d * 2 ** (alg.d * Q.alg.m)
    else:
        bound = float(det) * alg.p ** (alg.d * Q.alg.m)
    return DenseAudit(measured=measured, bound=bound, det=float(det), holds=measured >= bound * (1 - 1e-12))


def dichotomy_check(Q: DSet | QuotientResult, v: Sequence[Sequence[int]], delta_exp: int, rho_exp: int,
                    mode: DichotomyMode | str | None = None, side: Side = Side.left,
                    budget: BudgetConfiguration | None = None) -> DichotomyOutcome:
    """
    Test whether the quotient set at scale ``Delta = delta / rho**3`` is stable under the maps of
    the dense case: the halving maps ``f_i`` (Real), the translations ``x -> x + v_j`` (Padic) or
    closure under sums and products (Padic field case).

    ### Arguments
    ``Q`` -- a quotient set, or a ``QuotientResult`` whose witnesses then give the ``(p, q)``
    (or ``u / v``) decomposition of the violating point
    ``v`` -- basis at precision ``delta_exp``, usually from ``escape_basis``

    ### Returns
    ``DichotomyOutcome``: Sparse with the first violation (points in lexicographic order, then bit
    vectors ``(0,..,0), (1,0,..), (0,1,..), ..`` or basis index), or Dense with the measured
    covering number of ``Q`` at scale ``Delta`` against ``|det v| / 2^d * Delta^-d``
    (Real) or ``|det v|_p * Delta^-d`` (Padic).
    """
    quotient = Q if isinstance(Q, QuotientResult) else None
    if quotient is not None:
        Q, side = quotient.q, quotient.side
    Delta_exp = delta_exp - 3 * rho_exp
    if Q.alg.m != Delta_exp:
        raise ScaleMismatch(f"Q has scale exponent {Q.alg.m}, expected delta_exp - 3 rho_exp = {Delta_exp}")
    if len(Q) == 0:
        raise EmptyInput("dichotomy_check needs a nonempty quotient set")
    basis = [tuple(int(c) for c in vector) for vector in v]
    if len(basis) != Q.d or any(len(vector) != Q.d for vector in basis):
        raise DlabValidationError(f"Basis must hold {Q.d} elements with {Q.d} coordinates")
    if mode is None:
        mode = DichotomyMode.halving if Q.alg.is_real else DichotomyMode.translate
    mode = DichotomyMode(mode)
    if Q.alg.is_real != (mode is DichotomyMode.halving):
        raise DlabValidationError(f"Mode {mode} does not apply to {Q.alg.label}")
    budget = resolve_budget(budget)
    side = Side(side)

    if mode is DichotomyMode.halving:
        checked, witness = _halving_case(Q, basis, delta_exp, quotient, side)
    elif mode is DichotomyMode.translate:
        checked, witness = _translate_case(Q, basis, quotient, side)
    else:
        checked, witness = _field_case(Q, quotient, budget)

    outcome = DichotomyOutcome(case=DichotomyCase.sparse if witness else DichotomyCase.dense, mode=mode,
                               delta_exp=delta_exp, rho_exp=rho_exp, Delta_exp=Delta_exp, checked=checked)
    if witness is not None:
        outcome.sparse = witness
    else:
        outcome.dense = _dense_audit(Q, basis, delta_exp)
    return outcome


def verify_sparse_witness(outcome: DichotomyOutcome, Q: DSet) -> bool:
    """Recompute by a plain scan over ``Q`` that the witness image is farther than ``Delta`` from ``Q``."""
    if outcome.sparse is None:
        return False
    image = np.asarray(outcome.sparse.image, dtype=np.int64)
    if Q.alg.is_real:
        step = 2 ** (outcome.sparse.image_scale_exp - Q.alg.m)
        for q in Q.points:
            if np.all(np.abs(q * step - image) <= step):
                return False
        return True
    shift = outcome.sparse.image_radius_exp - Q.radius_exp
    if shift > 0:
        if np.any(image % Q.alg.p ** shift != 0):
            return True
        image = image // Q.alg.p ** shift
    image = image * Q.alg.p ** max(0, -shift) % ball_algebra(Q.alg, Q.radius_exp).modulus
    for q in Q.points:
        if np.array_equal(q, image):
            return False
    return True


class DyadicLevel(BaseModel):
    level: int
    points: int
    present: int


def dyadic_closure_audit(Q: DSet, v: Sequence[Sequence[int]], delta_exp: int, n: int,
                         budget: BudgetConfiguration | None = None) -> list[DyadicLevel]:
    """
    For each level ``l <= n``, how many of the points ``sum_j k_j 2^-l v_j`` with ``0 <= k_j <= 2^l``
    lie within ``Delta`` of ``Q``.
    """
    if not Q.alg.is_real:
        raise NotRealBase(f"dyadic_closure_audit needs a Real algebra, got {Q.alg.label}")
    if not 0 <= n <= 6:
        raise RangeError(f"Dyadic depth must be between 0 and 6, got {n}")
    budget = resolve_budget(budget)
    V = np.asarray(v, dtype=np.int64).reshape(Q.d, Q.d)
    index = RowIndex(Q.points)
    levels: list[DyadicLevel] = []
    for level in range(n + 1):
        total = (2 ** level + 1) ** Q.d
        if total > budget.points_cap:
            raise BudgetExceeded("Dyadic audit exceeds the point budget", partial={f"level_{level}": total})
        ks = np.array(list(itertools.product(range(2 ** level + 1), repeat=Q.d)), dtype=np.int64)
        # points on the grid of step 2^-(delta_exp + level)
        values = ks @ V
        step = 2 ** (delta_exp + level - Q.alg.m)
        present = int(_near_grid(index, values, step).sum())
        levels.append(DyadicLevel(level=level, points=total, present=present))
    return levels
