from dataclasses import dataclass, replace
from .._compat import StrEnum
from fractions import Fraction
from typing import Sequence
from .._compat import Self
import itertools
import math

import numpy as np
import sympy

from .errors_providers import (DlabError, DlabValidationError, DivisionByNegligible, NonPrime,
                               ReduciblePoly, ScaleOutOfRange, UnsupportedRealDim, BudgetExceeded)


Element = tuple[int, ...]

# grid units and residues must stay below this so that a product of two fits in int64
GRID_LIMIT = 1 << 31
_INT64_SAFE = 1 << 62


class AlgebraKind(StrEnum):
    R = "R"
    C = "C"
    H = "H"
    Qp = "Qp"
    Qp_ext = "Qp_ext"


class Base(StrEnum):
    real = "R"
    padic = "Qp"


class Side(StrEnum):
    left = "left"
    right = "right"


@dataclass(frozen=True)
class AlgebraDescriptor:
    """
    One of the supported normed division algebras at a fixed working precision ``m``.

    Real algebras store a coordinate ``c`` as the value ``c * 2**-m``; p-adic algebras
    store residues modulo ``p**m`` in the basis ``1, zeta, ..., zeta**(d-1)``.
    ``structure_constants[i][j]`` is the coordinate vector of ``e_i * e_j``.
    """
    kind: AlgebraKind
    d: int
    m: int
    structure_constants: tuple[tuple[tuple[int, ...], ...], ...]
    p: int | None = None
    defining_poly: tuple[int, ...] | None = None

    @property
    def base(self) -> Base:
        return Base.real if self.kind in (AlgebraKind.R, AlgebraKind.C, AlgebraKind.H) else Base.padic

    @property
    def is_real(self) -> bool:
        return self.base is Base.real

    @property
    def radix(self) -> int:
        return 2 if self.is_real else self.p

    @property
    def unit(self) -> int:
        """Grid units per 1 (Real) or the residue modulus ``p**m`` (Padic)."""
        return self.radix ** self.m

    @property
    def modulus(self) -> int | None:
        return None if self.is_real else self.p ** self.m

    @property
    def label(self) -> str:
        if self.is_real:
            return str(self.kind)
        if self.kind is AlgebraKind.Qp:
            return f"Qp({self.p})"
        return f"Qp_ext({self.p},{self.d})"

    def one(self) -> Element:
        lead = self.unit if self.is_real else 1
        return (lead,) + (0,) * (self.d - 1)

    def zero(self) -> Element:
        return (0,) * self.d

    def basis_element(self, j: int) -> Element:
        lead = self.unit if self.is_real else 1
        return tuple(lead if k == j else 0 for k in range(self.d))

    def with_precision(self, m: int) -> Self:
        if m < 0:
            raise ScaleOutOfRange(f"Precision {m} is negative")
        return replace(self, m=m)

    def same_algebra(self, other: "AlgebraDescriptor") -> bool:
        return (self.kind, self.d, self.p, self.defining_poly) == (other.kind, other.d, other.p, other.defining_poly)

    def reduce(self, x: Sequence[int]) -> Element:
        if self.is_real:
            return tuple(int(c) for c in x)
        return tuple(int(c) % self.modulus for c in x)


_QUATERNION_UNITS = {
    (1, 1): (-1, 0), (1, 2): (1, 3), (1, 3): (-1, 2),
    (2, 1): (-1, 3), (2, 2): (-1, 0), (2, 3): (1, 1),
    (3, 1): (1, 2), (3, 2): (-1, 1), (3, 3): (-1, 0),
}


def _real_table(d: int) -> list[list[list[int]]]:
    table = [[[0] * d for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            if i == 0 or j == 0:
                table[i][j][i + j] = 1
            elif d == 2:
                table[i][j][0] = -1
            else:
                sign, k = _QUATERNION_UNITS[(i, j)]
                table[i][j][k] = sign
    return table


def _power_basis_table(poly: Sequence[int]) -> list[list[list[int]]]:
    """Products of ``zeta**i * zeta**j`` reduced by the monic integer polynomial ``poly`` (low to high)."""
    d = len(poly) - 1
    powers: list[list[int]] = []
    current = [1] + [0] * (d - 1)
    for _ in range(2 * d - 1):
        powers.append(current)
        carry = current[-1]
        shifted = [0] + current[:-1]
        current = [shifted[i] - carry * poly[i] for i in range(d)]
    return [[list(powers[i + j]) for j in range(d)] for i in range(d)]


def _freeze(table: list[list[list[int]]]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    return tuple(tuple(tuple(vec) for vec in row) for row in table)


def _is_irreducible(coeffs_low_to_high: Sequence[int], p: int) -> bool:
    x = sympy.Symbol("x")
    return sympy.Poly(list(reversed(coeffs_low_to_high)), x, modulus=p).is_irreducible


def default_defining_poly(p: int, d: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible polynomial of degree ``d`` over Z/p, low to high."""
    for tail in itertools.product(range(p), repeat=d):
        coeffs = tuple(reversed((1,) + tail))
        if _is_irreducible(coeffs, p):
            return coeffs
    raise ReduciblePoly(f"No irreducible polynomial of degree {d} found over Z/{p}")


def _validated_poly(poly: Sequence[int], p: int, d: int) -> tuple[int, ...]:
    coeffs = [int(c) for c in poly]
    if len(coeffs) != d + 1:
        raise ReduciblePoly(f"Defining polynomial {coeffs} does not have degree {d}")
    if coeffs[-1] != 1:
        raise ReduciblePoly(f"Defining polynomial {coeffs} is not monic")
    coeffs = [c % p for c in coeffs[:-1]] + [1]
    if not _is_irreducible(coeffs, p):
        raise ReduciblePoly(f"Defining polynomial {coeffs} is reducible mod {p}")
    return tuple(coeffs)


def _product_int(table, x: Sequence[int], y: Sequence[int]) -> list[int]:
    d = len(x)
    out = [0] * d
    for i, xi in enumerate(x):
        if xi == 0:
            continue
        for j, yj in enumerate(y):
            if yj == 0:
                continue
            t = xi * yj
            for k, c in enumerate(table[i][j]):
                if c:
                    out[k] += c * t
    return out


def _verify_table(alg: AlgebraDescriptor) -> None:
    table = alg.structure_constants
    d = alg.d
    basis = [[1 if k == j else 0 for k in range(d)] for j in range(d)]
    for j in range(d):
        if _product_int(table, basis[0], basis[j]) != basis[j] or _product_int(table, basis[j], basis[0]) != basis[j]:
            raise DlabError(f"e_1 is not the identity for {alg.label}")
    # multiplication is trilinear, so basis triples decide associativity exactly
    for i, j, k in itertools.product(range(d), repeat=3):
        left = _product_int(table, _product_int(table, basis[i], basis[j]), basis[k])
        right = _product_int(table, basis[i], _product_int(table, basis[j], basis[k]))
        if alg.modulus is not None:
            left = [c % alg.modulus for c in left]
            right = [c % alg.modulus for c in right]
        if left != right:
            raise DlabError(f"Structure constants of {alg.label} are not associative at {(i, j, k)}")


def make_algebra(kind: str | AlgebraKind, p: int | None = None, d: int | None = None,
                 m: int = 8, poly: Sequence[int] | None = None) -> AlgebraDescriptor:
    """
    Build and verify an algebra descriptor.

    ### Arguments
    ``kind`` -- one of ``R``, ``C``, ``H``, ``Qp``, ``Qp_ext``
    ``p`` -- prime for the p-adic kinds
    ``d`` -- dimension over the base; ``R`` with ``d`` in (1, 2, 4) selects R, C or H
    ``m`` -- precision exponent, the finest scale is ``radix**-m``
    ``poly`` -- defining polynomial of ``Qp_ext`` as coefficients low to high; synthesized when omitted

    ### Returns
    ``AlgebraDescriptor``
    """
    try:
        kind = AlgebraKind(kind)
    except ValueError as e:
        raise DlabValidationError(f"Unknown algebra kind {kind!r}") from e
    if m < 1:
        raise ScaleOutOfRange(f"Precision exponent must be at least 1, got m={m}")

    if kind in (AlgebraKind.R, AlgebraKind.C, AlgebraKind.H):
        implied = {AlgebraKind.R: None, AlgebraKind.C: 2, AlgebraKind.H: 4}[kind]
        if d is None:
            d = implied or 1
        if d not in (1, 2, 4):
            raise UnsupportedRealDim(f"Real algebras have dimension 1, 2 or 4, got d={d}")
        if implied is not None and d != implied:
            raise UnsupportedRealDim(f"{kind} has dimension {implied}, got d={d}")
        if 2 ** m >= GRID_LIMIT:
            raise ScaleOutOfRange(f"Precision m={m} is too fine for the integer kernels")
        alg = AlgebraDescriptor(kind={1: AlgebraKind.R, 2: AlgebraKind.C, 4: AlgebraKind.H}[d], d=d, m=m,
                                structure_constants=_freeze(_real_table(d)))
    else:
        if p is None or not sympy.isprime(p):
            raise NonPrime(f"p={p} is not prime")
        if d is None:
            d = len(poly) - 1 if poly is not None else 1
        if d < 1:
            raise DlabValidationError(f"Dimension must be positive, got d={d}")
        if p ** m >= GRID_LIMIT:
            raise ScaleOutOfRange(f"Precision p**m = {p}**{m} is too fine for the integer kernels")
        if d == 1:
            if poly is not None:
                _validated_poly(poly, p, 1)
            alg = AlgebraDescriptor(kind=AlgebraKind.Qp, d=1, m=m, structure_constants=_freeze([[[1]]]), p=p)
        else:
            coeffs = _validated_poly(poly, p, d) if poly is not None else default_defining_poly(p, d)
            alg = AlgebraDescriptor(kind=AlgebraKind.Qp_ext, d=d, m=m,
                                    structure_constants=_freeze(_power_basis_table(coeffs)),
                                    p=p, defining_poly=coeffs)
    _verify_table(alg)
    return alg


def round_half_away(num: int, den: int) -> int:
    """``num / den`` rounded to the nearest integer, halves away from zero; ``den > 0``."""
    q = (2 * abs(num) + den) // (2 * den)
    return -q if num < 0 else q


def round_half_away_array(num: np.ndarray, den) -> np.ndarray:
    q = (2 * np.abs(num) + den) // (2 * den)
    return np.where(num < 0, -q, q)


def mul_exact(alg: AlgebraDescriptor, x: Sequence[int], y: Sequence[int]) -> Element:
    """Product before rounding: Real coordinates at scale ``2**-2m``; Padic residues mod ``p**m``."""
    out = _product_int(alg.structure_constants, [int(c) for c in x], [int(c) for c in y])
    return alg.reduce(out)


def mul(alg: AlgebraDescriptor, x: Sequence[int], y: Sequence[int]) -> Element:
    out = _product_int(alg.structure_constants, [int(c) for c in x], [int(c) for c in y])
    if alg.is_real:
        return tuple(round_half_away(c, alg.unit) for c in out)
    return alg.reduce(out)


def _as_int64(values: np.ndarray) -> np.ndarray:
    if values.dtype == object:
        if values.size and max(abs(int(v)) for v in values.flat) >= _INT64_SAFE:
            raise BudgetExceeded("Coordinates left the int64 range; lower the precision")
        return values.astype(np.int64)
    return values


def mul_many(alg: AlgebraDescriptor, X: np.ndarray, Y: np.ndarray, rounded: bool = True) -> np.ndarray:
    """
    Row-wise products of two point arrays (either may have a single row and broadcast).

    ### Arguments
    ``rounded`` -- Real only: when ``False`` return the exact products at scale ``2**-2m``

    ### Returns
    ``np.ndarray`` of shape ``(n, d)``
    """
    X, Y = np.broadcast_arrays(np.asarray(X, dtype=np.int64).reshape(-1, alg.d),
                               np.asarray(Y, dtype=np.int64).reshape(-1, alg.d))
    n, d = X.shape
    table = alg.structure_constants
    if not alg.is_real:
        M = alg.modulus
        X = X % M
        Y = Y % M
        out = np.zeros((n, d), dtype=np.int64)
        for i in range(d):
            for j in range(d):
                coeffs = [c % M for c in table[i][j]]
                if not any(coeffs):
                    continue
                term = (X[:, i] * Y[:, j]) % M
                for k, c in enumerate(coeffs):
                    if c:
                        out[:, k] = (out[:, k] + term * c) % M
        return out

    bound = int(np.abs(X).max(initial=0)) * int(np.abs(Y).max(initial=0)) * d * d
    dtype = np.int64 if bound < _INT64_SAFE else object
    Xw = X.astype(dtype)
    Yw = Y.astype(dtype)
    out = np.zeros((n, d), dtype=dtype)
    for i in range(d):
        for j in range(d):
            term = Xw[:, i] * Yw[:, j]
            for k, c in enumerate(table[i][j]):
                if c:
                    out[:, k] = out[:, k] + c * term
    if not rounded:
        return out
    return _as_int64(round_half_away_array(out, alg.unit))


def add(alg: AlgebraDescriptor, x: Sequence[int], y: Sequence[int]) -> Element:
    return alg.reduce([int(a) + int(b) for a, b in zip(x, y)])


def sub(alg: AlgebraDescriptor, x: Sequence[int], y: Sequence[int]) -> Element:
    return alg.reduce([int(a) - int(b) for a, b in zip(x, y)])


def neg(alg: AlgebraDescriptor, x: Sequence[int]) -> Element:
    return alg.reduce([-int(a) for a in x])


def conj(alg: AlgebraDescriptor, x: Sequence[int]) -> Element:
    if not alg.is_real:
        return alg.reduce(x)
    return (int(x[0]),) + tuple(-int(c) for c in x[1:])


def valuation(alg: AlgebraDescriptor, x: Sequence[int]) -> int:
    """p-adic valuation ``min_j v_p(x_j)``; ``m`` for zero at this precision."""
    residues = [int(c) % alg.modulus for c in x]
    nonzero = [c for c in residues if c]
    if not nonzero:
        return alg.m
    return min(sympy.multiplicity(alg.p, c) for c in nonzero)


def valuations_many(alg: AlgebraDescriptor, X: np.ndarray, top: int | None = None) -> np.ndarray:
    """Row-wise ``valuation``, capped at ``top`` (default ``m``)."""
    X = np.asarray(X, dtype=np.int64).reshape(-1, alg.d) % alg.modulus
    top = alg.m if top is None else top
    v = np.zeros(X.shape[0], dtype=np.int64)
    for e in range(1, top + 1):
        v += np.all(X % alg.p ** e == 0, axis=1)
    return v


def norm_squared(alg: AlgebraDescriptor, x: Sequence[int]) -> Fraction:
    """Exact squared Euclidean norm of a Real element."""
    return Fraction(sum(int(c) * int(c) for c in x), alg.unit * alg.unit)


def norm(alg: AlgebraDescriptor, x: Sequence[int]) -> float | Fraction:
    """
    Real: Euclidean norm of the coordinate vector as a float.
    Padic: ``p**-v`` as an exact ``Fraction``, with ``norm(0) = 0``.
    """
    if alg.is_real:
        return math.sqrt(sum(int(c) * int(c) for c in x)) / alg.unit
    v = valuation(alg, x)
    if v >= alg.m:
        return Fraction(0)
    return Fraction(1, alg.p ** v)


def inversion_floor_exp(alg: AlgebraDescriptor) -> int:
    return alg.m // 2


def multiplication_matrix(alg: AlgebraDescriptor, x: Sequence[int], side: Side = Side.left) -> list[list[int]]:
    """Integer matrix of ``y -> x*y`` (left) or ``y -> y*x`` (right); columns are images of the basis."""
    table = alg.structure_constants
    d = alg.d
    matrix = [[0] * d for _ in range(d)]
    for j in range(d):
        for i, xi in enumerate(x):
            vec = table[i][j] if side is Side.left else table[j][i]
            for k, c in enumerate(vec):
                matrix[k][j] += c * int(xi)
    return matrix


def inv(alg: AlgebraDescriptor, x: Sequence[int]) -> Element:
    """
    Inverse at the working precision.

    Real elements need ``norm(x) >= 2**-(m//2)``. Padic elements must be units; the inverse of a
    non-unit leaves the integral ball, use ``inv_scaled`` for those.
    """
    if alg.is_real:
        total = sum(int(c) * int(c) for c in x)
        floor = 4 ** (alg.m - inversion_floor_exp(alg))
        if total < floor:
            raise DivisionByNegligible(f"norm of {tuple(x)} is below the inversion floor 2^-{inversion_floor_exp(alg)}")
        scale = alg.unit * alg.unit
        return tuple(round_half_away(c * scale, total) for c in conj(alg, x))

    v = valuation(alg, x)
    if v >= alg.m or v > inversion_floor_exp(alg):
        raise DivisionByNegligible(f"valuation {v} of {tuple(x)} is below the inversion floor at m={alg.m}")
    if v > 0:
        raise DivisionByNegligible(f"{tuple(x)} is not a unit; its inverse leaves the integral ball")
    M = alg.modulus
    if alg.d == 1:
        return (int(sympy.mod_inverse(int(x[0]) % M, M)),)
    inverse = sympy.Matrix(multiplication_matrix(alg, x)).inv_mod(M)
    return tuple(int(inverse[k, 0]) % M for k in range(alg.d))


def inv_scaled(alg: AlgebraDescriptor, x: Sequence[int]) -> tuple[int, Element]:
    """
    Padic inverse of a non-unit: returns ``(v, w)`` with ``x**-1 = p**-v * w``, where ``w`` is
    the unit inverse of ``x / p**v`` at precision ``m - v``.
    """
    if alg.is_real:
        raise DlabValidationError("inv_scaled is defined for p-adic algebras only")
    v = valuation(alg, x)
    if v >= alg.m or v > inversion_floor_exp(alg):
        raise DivisionByNegligible(f"valuation {v} of {tuple(x)} is below the inversion floor at m={alg.m}")
    shifted = alg.with_precision(alg.m - v)
    unit = [(int(c) % alg.modulus) // alg.p ** v for c in x]
    return v, inv(shifted, unit)


def power(alg: AlgebraDescriptor, x: Sequence[int], exponent: int) -> Element:
    result = alg.one()
    base = alg.reduce(x)
    while exponent > 0:
        if exponent & 1:
            result = mul(alg, result, base)
        base = mul(alg, base, base)
        exponent >>= 1
    return result


def det_basis(alg: AlgebraDescriptor, vectors: Sequence[Sequence[int]]) -> Fraction:
    """
    Determinant of the coordinate matrix whose columns are ``vectors``.

    ### Returns
    Real -- signed determinant normalized so the standard basis gives 1.
    Padic -- p-adic absolute value of the determinant (0 when it vanishes mod ``p**m``).
    """
    if len(vectors) != alg.d:
        raise DlabValidationError(f"det_basis needs exactly {alg.d} elements, got {len(vectors)}")
    matrix = sympy.Matrix([[int(vectors[j][k]) for j in range(alg.d)] for k in range(alg.d)])
    det = int(matrix.det(method="bareiss"))
    if alg.is_real:
        return Fraction(det, alg.unit ** alg.d)
    det %= alg.modulus
    if det == 0:
        return Fraction(0)
    return Fraction(1, alg.p ** sympy.multiplicity(alg.p, det))
