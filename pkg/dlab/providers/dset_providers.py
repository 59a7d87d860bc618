from dataclasses import dataclass
from typing import Sequence
import itertools
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .algebra_providers import AlgebraDescriptor, Element
from .config_providers import BudgetConfiguration, resolve_budget
from .errors_providers import BudgetExceeded, EmptyInput, OutOfBall, RangeError, ScaleOutOfRange


@dataclass(frozen=True, eq=False)
class DSet:
    """
    A finite subset of the grid at scale ``radix**-m`` inside the ball ``B(0, radix**radius_exp)``.

    Padic sets with ``radius_exp = R > 0`` store ``p**R * x`` as a residue mod ``p**(m+R)``.

    ``points`` is an ``(n, d)`` int64 array, deduplicated, sorted lexicographically and read-only.
    Build instances with ``make_dset``.
    """
    alg: AlgebraDescriptor
    radius_exp: int
    points: np.ndarray

    def __post_init__(self) -> None:
        self.points.setflags(write=False)

    @property
    def scale_exp(self) -> int:
        return self.alg.m

    @property
    def d(self) -> int:
        return self.alg.d

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DSet):
            return NotImplemented
        return (self.alg == other.alg and self.radius_exp == other.radius_exp
                and np.array_equal(self.points, other.points))

    __hash__ = None

    def elements(self) -> list[Element]:
        return [tuple(int(c) for c in row) for row in self.points]

    def contains(self, x: Sequence[int]) -> bool:
        return bool(RowIndex(self.points).contains(np.asarray([x], dtype=np.int64))[0])


class RowIndex:
    """Exact lookup of integer rows, optionally carrying a weight per row."""
    def __init__(self, rows: np.ndarray, weights: np.ndarray | None = None) -> None:
        rows = np.asarray(rows, dtype=np.int64)
        self._d = rows.shape[1] if rows.ndim == 2 else 0
        self._empty = rows.shape[0] == 0
        if weights is None:
            weights = np.ones(rows.shape[0], dtype=np.int64)
        if self._empty:
            return
        self._lo = rows.min(axis=0)
        self._hi = rows.max(axis=0)
        span = [int(h - l + 1) for l, h in zip(self._lo, self._hi)]
        self._encoded = math.prod(span) < (1 << 62)
        self._span = np.asarray(span, dtype=np.int64)
        if self._encoded:
            keys = self._encode(rows)
            order = np.argsort(keys, kind="stable")
            self._keys = keys[order]
            self._weights = np.asarray(weights)[order]
        else:
            self._table = {tuple(int(c) for c in row): int(w) for row, w in zip(rows, weights)}

    def _encode(self, rows: np.ndarray) -> np.ndarray:
        keys = np.zeros(rows.shape[0], dtype=np.int64)
        for j in range(self._d):
            keys = keys * self._span[j] + (rows[:, j] - self._lo[j])
        return keys

    def weights(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.int64).reshape(-1, max(self._d, 1))
        out = np.zeros(query.shape[0], dtype=np.int64)
        if self._empty or query.shape[0] == 0:
            return out
        if not self._encoded:
            return np.array([self._table.get(tuple(int(c) for c in row), 0) for row in query], dtype=np.int64)
        inside = np.all((query >= self._lo) & (query <= self._hi), axis=1)
        if not inside.any():
            return out
        keys = self._encode(query[inside])
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, self._keys.shape[0] - 1)
        found = self._keys[pos] == keys
        sub = np.zeros(keys.shape[0], dtype=np.int64)
        sub[found] = self._weights[pos[found]]
        out[inside] = sub
        return out

    def contains(self, query: np.ndarray) -> np.ndarray:
        return self.weights(query) > 0


def fit_radius_exp(alg: AlgebraDescriptor, points: np.ndarray) -> int:
    """Smallest ``R >= 0`` with every coordinate inside ``radix**(m+R)`` grid units."""
    if not alg.is_real or points.size == 0:
        return 0
    top = int(np.abs(points).max())
    if top <= alg.unit:
        return 0
    return max(0, (top - 1).bit_length() - alg.m)


def ball_algebra(alg: AlgebraDescriptor, radius_exp: int) -> AlgebraDescriptor:
    """The algebra whose residues are the stored coordinates of a Padic set of radius ``p**radius_exp``."""
    if alg.is_real or radius_exp == 0:
        return alg
    return alg.with_precision(alg.m + radius_exp)


def widen_radius(A: DSet, radius_exp: int) -> DSet:
    """The same Padic set stored at a radius exponent ``radius_exp >= A.radius_exp``."""
    if A.alg.is_real or radius_exp == A.radius_exp:
        return A
    if radius_exp < A.radius_exp:
        raise RangeError(f"Cannot narrow radius exponent {A.radius_exp} to {radius_exp}; use intersect_ball")
    return make_dset(A.alg, A.points * A.alg.p ** (radius_exp - A.radius_exp), radius_exp=radius_exp)


def make_dset(alg: AlgebraDescriptor, points, radius_exp: int | None = None) -> DSet:
    """
    Build a ``DSet`` from raw coordinates: reduce (Padic), deduplicate, sort, and check the ball bound.

    ### Arguments
    ``points`` -- anything ``np.asarray`` can turn into ``(n, d)`` integers
    ``radius_exp`` -- ball exponent; fitted to the points when omitted (Real) or 0 (Padic)

    ### Returns
    ``DSet``
    """
    pts = np.asarray(points, dtype=np.int64).reshape(-1, alg.d)
    if not alg.is_real:
        radius_exp = 0 if radius_exp is None else radius_exp
        if radius_exp < 0:
            raise RangeError(f"Padic radius exponent must be nonnegative, got {radius_exp}")
        pts = pts % ball_algebra(alg, radius_exp).modulus
    pts = np.unique(pts, axis=0) if pts.shape[0] else pts.copy()
    fitted = fit_radius_exp(alg, pts)
    if radius_exp is None:
        radius_exp = fitted
    elif fitted > radius_exp:
        raise OutOfBall(f"Points reach radius exponent {fitted}, outside B(0, {alg.radix}^{radius_exp})")
    return DSet(alg=alg, radius_exp=int(radius_exp), points=np.ascontiguousarray(pts))


def subset(A: DSet, mask: np.ndarray) -> DSet:
    return DSet(alg=A.alg, radius_exp=A.radius_exp, points=np.ascontiguousarray(A.points[mask]))


def require_unit_ball(A: DSet, op: str) -> None:
    if not A.alg.is_real and A.radius_exp > 0:
        raise OutOfBall(f"{op} needs p-adic sets in the unit ball, got radius exponent {A.radius_exp}")


def intersect_ball(A: DSet, radius_exp: int = 0) -> DSet:
    """Restrict to ``B(0, radix**radius_exp)``; Padic sets are restored to that radius exponent."""
    if not A.alg.is_real:
        if radius_exp >= A.radius_exp:
            return A
        scale = A.alg.p ** (A.radius_exp - radius_exp)
        mask = np.all(A.points % scale == 0, axis=1)
        return make_dset(A.alg, A.points[mask] // scale, radius_exp=radius_exp)
    mask = np.all(np.abs(A.points) <= A.alg.unit * 2 ** radius_exp, axis=1)
    return DSet(alg=A.alg, radius_exp=min(radius_exp, A.radius_exp), points=np.ascontiguousarray(A.points[mask]))


def _check_scale(A: DSet, k: int) -> None:
    if not 0 <= k <= A.alg.m:
        raise ScaleOutOfRange(f"Scale exponent {k} outside 0..{A.alg.m}")


def cell_ids_of(alg: AlgebraDescriptor, radius_exp: int, points: np.ndarray, k: int,
                clamp_finest: bool = False) -> np.ndarray:
    """
    Ids of the ``radix**-k`` cells containing each point.

    Real cells are half-open boxes; the top face of the ball joins the last cell below the finest
    scale (and at the finest scale too when ``clamp_finest``). Padic cells are the stored
    coordinates mod ``p**(k+radius_exp)``.
    """
    if not alg.is_real:
        return points % (alg.p ** (k + radius_exp))
    ids = np.floor_divide(points, 2 ** (alg.m - k))
    if k < alg.m or clamp_finest:
        ids = np.minimum(ids, 2 ** (k + radius_exp) - 1)
    return ids


def cell_ids(A: DSet, k: int, clamp_finest: bool = False) -> np.ndarray:
    _check_scale(A, k)
    return cell_ids_of(A.alg, A.radius_exp, A.points, k, clamp_finest)


def _unique_rows(rows: np.ndarray):
    uniq, inverse, counts = np.unique(rows, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


def covering_number(A: DSet, k: int) -> int:
    _check_scale(A, k)
    if len(A) == 0:
        return 0
    return int(np.unique(cell_ids(A, k), axis=0).shape[0])


class NCReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    passed: bool = Field(alias="pass")
    s: float
    C: float
    size: int
    worst_center: list[int]
    worst_radius_exp: int
    worst_count: int
    best_C: float


def _level_max_counts(A: DSet):
    for k in range(A.alg.m + 1):
        _, inverse, counts = _unique_rows(cell_ids(A, k))
        idx = int(np.argmax(counts))
        yield k, idx, inverse, int(counts[idx])


def is_nonconcentrated(A: DSet, s: float, C: float) -> NCReport:
    """
    Check ``N(A ∩ B(x, r)) <= C r^s N(A)`` for centers in ``A`` and radii ``radix**-k``, ``0 <= k <= m``.

    Balls are the grid cells containing each center. The worst ratio over all scales gives ``best_C``;
    the witness center is the lexicographically smallest point of the worst cell.
    """
    n = len(A)
    if n == 0:
        raise EmptyInput("is_nonconcentrated needs a nonempty set")
    radix = A.alg.radix
    best = -1.0
    worst = (0, 0, None, 0)
    for k, idx, inverse, count in _level_max_counts(A):
        ratio = count * radix ** (k * s) / n
        if ratio > best:
            best = ratio
            worst = (k, idx, inverse, count)
    k, idx, inverse, count = worst
    center = A.points[int(np.argmax(inverse == idx))]
    return NCReport(passed=best <= C * (1 + 1e-12), s=s, C=C, size=n,
                    worst_center=[int(c) for c in center], worst_radius_exp=k,
                    worst_count=count, best_C=best)


def verified_exponent(A: DSet, C: float) -> float:
    """Largest ``s`` in ``[0, d]`` for which ``A`` passes ``is_nonconcentrated(A, s, C)``."""
    n = len(A)
    if n == 0:
        return 0.0
    log_radix = math.log(A.alg.radix)
    best = float(A.d)
    for k, _, _, count in _level_max_counts(A):
        if k == 0:
            continue
        best = min(best, math.log(C * n / count) / (k * log_radix))
    return max(0.0, min(best, float(A.d)))


def _dilate_axis(bitmap: np.ndarray, axis: int, h: int) -> np.ndarray:
    padded = np.moveaxis(bitmap, axis, 0).astype(np.int32)
    cs = np.concatenate([np.zeros((1,) + padded.shape[1:], dtype=np.int64), np.cumsum(padded, axis=0)], axis=0)
    length = padded.shape[0]
    lo = np.clip(np.arange(length) - h, 0, length)
    hi = np.clip(np.arange(length) + h + 1, 0, length)
    out = (cs[hi] - cs[lo]) > 0
    return np.moveaxis(out, 0, axis)


def neighborhood(A: DSet, k: int, budget: BudgetConfiguration | None = None) -> DSet:
    """
    Grid points within ``radix**-k`` of ``A``: an l-infinity box around each point (Real, clipped to
    the ball of ``A``) or the whole residue class mod ``p**k`` (Padic).
    """
    _check_scale(A, k)
    budget = resolve_budget(budget)
    alg = A.alg
    if len(A) == 0:
        return A
    if not alg.is_real:
        cell_modulus = alg.p ** (k + A.radius_exp)
        cells = np.unique(A.points % cell_modulus, axis=0)
        per_cell = alg.p ** ((alg.m - k) * alg.d)
        if cells.shape[0] * per_cell > budget.points_cap:
            raise BudgetExceeded("Neighborhood exceeds the point budget",
                                 partial={"cells": int(cells.shape[0]), "points_per_cell": per_cell})
        lifts = np.array(list(itertools.product(range(alg.p ** (alg.m - k)), repeat=alg.d)), dtype=np.int64)
        pts = (cells[:, None, :] + cell_modulus * lifts[None, :, :]).reshape(-1, alg.d)
        return make_dset(alg, pts, radius_exp=A.radius_exp)

    h = 2 ** (alg.m - k)
    bound = alg.unit * 2 ** A.radius_exp
    lo = np.maximum(A.points.min(axis=0) - h, -bound)
    hi = np.minimum(A.points.max(axis=0) + h, bound)
    shape = tuple(int(x) for x in hi - lo + 1)
    if math.prod(shape) <= budget.fft_cell_cap:
        bitmap = np.zeros(shape, dtype=bool)
        bitmap[tuple((A.points - lo).T)] = True
        for axis in range(alg.d):
            bitmap = _dilate_axis(bitmap, axis, h)
        pts = np.argwhere(bitmap) + lo
        if pts.shape[0] > budget.points_cap:
            raise BudgetExceeded("Neighborhood exceeds the point budget", partial={"points": int(pts.shape[0])})
        return make_dset(alg, pts, radius_exp=A.radius_exp)

    collected = np.zeros((0, alg.d), dtype=np.int64)
    for offset in itertools.product(range(-h, h + 1), repeat=alg.d):
        shifted = A.points + np.asarray(offset, dtype=np.int64)
        shifted = shifted[np.all(np.abs(shifted) <= bound, axis=1)]
        collected = np.unique(np.vstack([collected, shifted]), axis=0)
        if collected.shape[0] > budget.points_cap:
            raise BudgetExceeded("Neighborhood exceeds the point budget", partial={"points": int(collected.shape[0])})
    return make_dset(alg, collected, radius_exp=A.radius_exp)


def _radix_class(count: int, radix: int) -> int:
    """The ``i`` with ``radix**(i-1) <= count < radix**i``."""
    i = 1
    while count >= radix ** i:
        i += 1
    return i


def _stage_levels(m: int, T: int) -> list[int]:
    if T < 1:
        raise RangeError(f"Levels per stage must be positive, got T={T}")
    levels = list(range(m, -1, -T))
    if levels[-1] != 0:
        levels.append(0)
    return levels


def _children_per_parent(alg: AlgebraDescriptor, radius_exp: int, points: np.ndarray,
                         child_level: int, parent_level: int):
    child = cell_ids_of(alg, radius_exp, points, child_level, clamp_finest=True)
    parent = cell_ids_of(alg, radius_exp, points, parent_level, clamp_finest=True)
    pairs = np.unique(np.hstack([parent, child]), axis=0)
    _, children = np.unique(pairs[:, :alg.d], axis=0, return_counts=True)
    _, point_parent, _ = _unique_rows(parent)
    return children, point_parent


def uniform_subset(A: DSet, T: int = 1) -> DSet:
    """
    Refine ``A`` to a uniform subset, fine scales first.

    Each stage groups the cells of one level by their parent ``T`` levels up, classes parents by
    the radix power of their number of nonempty children, and keeps the class of largest mass
    (ties go to the larger class). Stages never undo each other because whole parents are dropped.

    ### Returns
    ``DSet`` with at least ``(d*T + 1)**-stages * |A|`` points
    """
    if len(A) == 0:
        raise EmptyInput("uniform_subset needs a nonempty set")
    alg = A.alg
    levels = _stage_levels(alg.m, T)
    keep = np.ones(len(A), dtype=bool)
    for child_level, parent_level in zip(levels, levels[1:]):
        current = np.flatnonzero(keep)
        children, point_parent = _children_per_parent(alg, A.radius_exp, A.points[current],
                                                      child_level, parent_level)
        classes = np.array([_radix_class(int(c), alg.radix) for c in children], dtype=np.int64)
        point_class = classes[point_parent]
        masses = np.bincount(point_class)
        chosen = max(range(len(masses)), key=lambda i: (masses[i], i))
        keep[current[point_class != chosen]] = False
    return subset(A, keep)


class StageProfile(BaseModel):
    child_level: int
    parent_level: int
    parents: int
    min_children: int
    max_children: int


class UniformityAudit(BaseModel):
    T: int
    passed: bool
    stages: list[StageProfile]


def uniformity_audit(A: DSet, T: int = 1) -> UniformityAudit:
    """Per stage, the spread of nonempty-children counts; passes when ``max <= radix**T * min`` everywhere."""
    if len(A) == 0:
        raise EmptyInput("uniformity_audit needs a nonempty set")
    alg = A.alg
    levels = _stage_levels(alg.m, T)
    stages: list[StageProfile] = []
    for child_level, parent_level in zip(levels, levels[1:]):
        children, _ = _children_per_parent(alg, A.radius_exp, A.points, child_level, parent_level)
        stages.append(StageProfile(child_level=child_level, parent_level=parent_level, parents=int(children.size),
                                   min_children=int(children.min()), max_children=int(children.max())))
    passed = all(stage.max_children <= alg.radix ** T * stage.min_children for stage in stages)
    return UniformityAudit(T=T, passed=passed, stages=stages)


def remove_ball(A: DSet, center: Sequence[int], k: int) -> DSet:
    """
    Drop the points near ``center`` at radius ``radix**-k``: the open Euclidean ball (Real) or the
    residue class mod ``p**k`` (Padic). At ``k = m`` at most the center itself goes.
    """
    if len(A) == 0:
        return A
    alg = A.alg
    c = np.asarray(center, dtype=np.int64).reshape(1, alg.d)
    if alg.is_real:
        diff = A.points - c
        keep = np.sum(diff * diff, axis=1) >= 4 ** (alg.m - k)
    else:
        keep = np.any((A.points - c) % alg.p ** (k + A.radius_exp) != 0, axis=1)
    return subset(A, keep)
