from dataclasses import dataclass, field
from .._compat import StrEnum
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence
from .._compat import Self
import itertools
import math

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator

from .algebra_providers import AlgebraDescriptor, AlgebraKind, Element, make_algebra, mul_many
from .config_providers import BudgetConfiguration, resolve_budget
from .console_providers import progress
from .dset_providers import (DSet, cell_ids_of, covering_number, fit_radius_exp, intersect_ball, is_nonconcentrated,
                             make_dset, uniform_subset, verified_exponent)
from .errors_providers import EmptyInput, GenerationFailed, RangeError, TrappedInput
from .files_providers import tool_header, write_frame
from .setops_providers import PairSet, iterated, make_pairset, pairset_union, project, recenter, scalar_image, sumset
from .structure_providers import SubAlgebraFamily, avoids_subalgebras


Number = int | float | Fraction


def _exact(value: Number) -> Fraction:
    """Rational value of a parameter; floats are read through their shortest decimal form."""
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def choose_c1(s: Number, d: Number) -> Fraction:
    """``c1 = s (1 - s/d) / 4``, the exponent gained per expansion round."""
    s, d = _exact(s), _exact(d)
    if not 0 < s < d:
        raise RangeError(f"choose_c1 needs 0 < s < d, got s={s}, d={d}")
    return s * (1 - s / d) / 4


class RhoChoice(BaseModel):
    exponent: str
    rho_exp: int
    realized: float
    clamped: bool


def _clamped_rho(exponent: Fraction, delta_exp: int, lo: int, hi: int) -> RhoChoice:
    if lo > hi:
        raise RangeError(f"No admissible rho exponent at delta_exp={delta_exp}")
    target = round(exponent * delta_exp)
    rho_exp = min(max(target, lo), hi)
    return RhoChoice(exponent=str(exponent), rho_exp=rho_exp, realized=rho_exp / delta_exp, clamped=rho_exp != target)


def choose_rho_expand(s: Number, d: Number, delta_exp: int) -> RhoChoice:
    """
    ``rho = delta^((d - s) / (3 (d + s)))`` rounded to the nearest radix power, clamped so that
    ``Delta = delta / rho^3`` stays strictly between ``delta`` and 1.
    """
    s, d = _exact(s), _exact(d)
    if not 0 < s <= d:
        raise RangeError(f"choose_rho_expand needs 0 < s <= d, got s={s}, d={d}")
    exponent = (d - s) / (3 * (d + s))
    return _clamped_rho(exponent, delta_exp, 1, math.ceil(delta_exp / 3) - 1)


class TvChoice(BaseModel):
    rho: RhoChoice
    c: str
    c_value: float
    degenerate: bool


def choose_rho_tv(s: Number, sigma: Number, t: Number, eps: Number, delta_exp: int) -> TvChoice:
    """``rho = delta^((t - sigma + eps) / t)`` and ``c = s (t - sigma + eps) / t``; ``t = sigma`` is flagged."""
    s, sigma, t, eps = _exact(s), _exact(sigma), _exact(t), _exact(eps)
    if t <= 0 or s <= 0 or eps < 0 or sigma > t:
        raise RangeError(f"choose_rho_tv needs s, t > 0, eps >= 0 and sigma <= t, got s={s}, sigma={sigma}, t={t}")
    exponent = (t - sigma + eps) / t
    c = s * exponent
    return TvChoice(rho=_clamped_rho(exponent, delta_exp, 0, delta_exp), c=str(c), c_value=float(c),
                    degenerate=t == sigma)


def predicted_trajectory(s: float, d: float, rounds: int) -> list[float]:
    """``s_0 = s, s_(k+1) = s_k + c1(s_k) / 2``, stopping early once ``d`` is reached."""
    trajectory = [float(s)]
    for _ in range(rounds):
        current = trajectory[-1]
        if current >= d:
            break
        trajectory.append(current + current * (1 - current / d) / 8)
    return trajectory


class IterationBudget(BaseModel):
    n: int
    trajectory: list[float]
    n_bound: float
    N_expression: str
    N_digits: int
    N: int | None = None


def iteration_budget(s: float, t: float, d: float, commutative: bool) -> IterationBudget:
    """
    Rounds of expansion needed to lift ``s`` to ``t`` by running the recursion, with the theoretical
    set-size budget ``N`` (reported, never used to run anything).
    """
    if not 0 < s < t < d:
        raise RangeError(f"iteration_budget needs 0 < s < t < d, got s={s}, t={t}, d={d}")
    trajectory = [float(s)]
    while trajectory[-1] < t:
        current = trajectory[-1]
        trajectory.append(current + current * (1 - current / d) / 8)
    n = len(trajectory) - 1
    n_bound = max((t - s) / float(choose_c1(s, d)), (t - s) / float(choose_c1(t, d)))
    base = 20 if commutative else 4 * int(d)
    exponent = base ** n
    expression = f"20^(20^{n})" if commutative else f"20^(({base})^{n})"
    return IterationBudget(n=n, trajectory=trajectory, n_bound=n_bound, N_expression=expression,
                           N_digits=math.floor(exponent * math.log10(20)) + 1,
                           N=20 ** exponent if exponent <= 400 else None)


def _child_digits(alg: AlgebraDescriptor) -> np.ndarray:
    return np.array(list(itertools.product(range(alg.radix), repeat=alg.d)), dtype=np.int64)


def _grow_tree(alg: AlgebraDescriptor, s: float, rng: np.random.Generator) -> np.ndarray:
    digits = _child_digits(alg)
    branching = float(alg.radix) ** s
    low = math.floor(branching)
    cells = np.zeros((1, alg.d), dtype=np.int64)
    for level in range(alg.m):
        keep = low + (rng.random(cells.shape[0]) < branching - low)
        keep = np.clip(keep, 1, digits.shape[0])
        ranks = np.argsort(rng.random((cells.shape[0], digits.shape[0])), axis=1)
        chosen = ranks < keep[:, None]
        parent, child = np.nonzero(chosen)
        if alg.is_real:
            cells = 2 * cells[parent] + digits[child]
        else:
            cells = cells[parent] + alg.p ** level * digits[child]
    return cells


def gen_random_dset(alg: AlgebraDescriptor, s: float, seed: int, m: int | None = None, C: float = 8.0,
                    retries: int = 10) -> DSet:
    """
    Random ``(delta, s, C)``-set in ``[0, 1)^d`` (Real) or the integers (Padic).

    Each cell gets ``floor(radix^s)`` or ``ceil(radix^s)`` children (mean ``radix^s``), picked
    uniformly; the draw is re-made until it passes ``is_nonconcentrated``.

    ### External Effects
    Raises ``GenerationFailed`` after ``retries`` failed draws.
    """
    if m is not None:
        alg = alg.with_precision(m)
    if not 0 < s <= alg.d:
        raise RangeError(f"gen_random_dset needs 0 < s <= d, got s={s}")
    rng = np.random.default_rng(seed)
    worst = None
    for _ in range(retries):
        A = make_dset(alg, _grow_tree(alg, s, rng), radius_exp=0)
        report = is_nonconcentrated(A, s, C)
        if report.passed:
            return A
        worst = report.best_C
    raise GenerationFailed(f"No ({alg.radix}^-{alg.m}, {s}, {C})-set in {retries} draws; best C was {worst:.3g}")


def gen_full_grid(alg: AlgebraDescriptor) -> DSet:
    """Every grid point of ``B(0, 1)``: the box ``[-1, 1]^d`` (Real) or all residues (Padic)."""
    if alg.is_real:
        axis = range(-alg.unit, alg.unit + 1)
    else:
        axis = range(alg.modulus)
    return make_dset(alg, np.array(list(itertools.product(axis, repeat=alg.d)), dtype=np.int64), radius_exp=0)


def gen_circle_net(m: int) -> DSet:
    """Grid points of ``C`` within half a grid unit of the unit circle."""
    alg = make_algebra(AlgebraKind.C, m=m)
    axis = np.arange(-alg.unit - 1, alg.unit + 2, dtype=np.int64)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    norm4 = 4 * (a * a + b * b)
    inside = (norm4 >= (2 * alg.unit - 1) ** 2) & (norm4 < (2 * alg.unit + 1) ** 2)
    return make_dset(alg, np.stack([a[inside], b[inside]], axis=1))


def gen_arithmetic_progression(alg: AlgebraDescriptor, n: int, step: int = 1, start: int = 0) -> DSet:
    """``start + k * step`` along the first basis direction, ``k < n``, in grid units."""
    if n < 1:
        raise RangeError(f"Progression length must be positive, got {n}")
    points = np.zeros((n, alg.d), dtype=np.int64)
    points[:, 0] = start + step * np.arange(n)
    return make_dset(alg, points)


@dataclass(frozen=True)
class PlantedBsg:
    H: PairSet
    A: DSet
    B: DSet
    block_A: DSet
    block_B: DSet


def gen_planted_bsg(alg: AlgebraDescriptor, n: int, noise: int, seed: int) -> PlantedBsg:
    """
    ``H = (P x P) ∪ noise edges`` on ``A = B = P ∪ N``: ``P`` an ``n``-term progression, ``N`` ``n``
    random points and ``noise`` random edges of ``A x B``.
    """
    rng = np.random.default_rng(seed)
    block = gen_arithmetic_progression(alg, n)
    if alg.is_real:
        scattered = rng.integers(-alg.unit, alg.unit + 1, size=(n, alg.d))
    else:
        scattered = rng.integers(0, alg.modulus, size=(n, alg.d))
    A = make_dset(alg, np.vstack([block.points, scattered]))
    pairs = [np.hstack([np.repeat(block.points, n, axis=0), np.tile(block.points, (n, 1))])]
    picks = rng.integers(0, len(A), size=(noise, 2))
    pairs.append(np.hstack([A.points[picks[:, 0]], A.points[picks[:, 1]]]))
    return PlantedBsg(H=make_pairset(alg, np.vstack(pairs)), A=A, B=A, block_A=block, block_B=block)


class CounterexampleKind(StrEnum):
    one = "One"
    two = "Two"


@dataclass(frozen=True)
class Counterexample:
    """Pairs ``G``, directions ``X`` and, for ``Two``, the parts ``G0`` and ``G1`` of ``G``."""
    G: PairSet
    X: DSet
    components: dict[str, PairSet] = field(default_factory=dict)


def gen_counterexample(which: CounterexampleKind | str, m: int, literal: bool = False) -> Counterexample:
    """
    Sets in ``C`` at ``delta = 2^-m`` built from ``A = {0, delta, .., 1}``.

    ``One``: ``G = A x A`` and ``X = A ∪ {i}``. ``Two``: ``G = G0 ∪ G1`` with ``G0 = A x A``,
    ``G1 = iA x A`` and ``X = A ∪ iA``, so every direction has a part projecting onto about
    ``|G|^(1/2)`` points; ``literal`` builds ``G1 = iA x iA`` instead.
    """
    value = str(which)
    which = {"1": CounterexampleKind.one, "2": CounterexampleKind.two}.get(value) or CounterexampleKind(value)
    alg = make_algebra(AlgebraKind.C, m=m)
    line = np.zeros((alg.unit + 1, 2), dtype=np.int64)
    line[:, 0] = np.arange(alg.unit + 1)
    rotated = line[:, ::-1].copy()
    A = make_dset(alg, line)
    iA = make_dset(alg, rotated)
    G0 = make_pairset(alg, np.hstack([np.repeat(A.points, len(A), axis=0), np.tile(A.points, (len(A), 1))]))
    if which is CounterexampleKind.one:
        X = make_dset(alg, np.vstack([A.points, [[0, alg.unit]]]))
        return Counterexample(G=G0, X=X)
    second = iA if literal else A
    G1 = make_pairset(alg, np.hstack([np.repeat(iA.points, len(second), axis=0),
                                      np.tile(second.points, (len(iA), 1))]))
    X = make_dset(alg, np.vstack([A.points, iA.points]))
    return Counterexample(G=pairset_union(G0, G1), X=X, components={"G0": G0, "G1": G1})


class ExperimentRecord(BaseModel):
    exp_id: str
    algebra: str
    p: int | None = None
    d: int
    m: int
    s: float | None = None
    sigma: float | None = None
    t: float | None = None
    op: str
    x_coords: list[int] | None = None
    count: int
    exponent: float
    seed: int | None = None
    extra: dict[str, Any] = {}

    def to_row(self) -> dict[str, Any]:
        row = self.model_dump(exclude={"extra"})
        row["x_coords"] = " ".join(str(c) for c in self.x_coords) if self.x_coords is not None else ""
        return row


RECORD_COLUMNS = ["exp_id", "algebra", "p", "d", "m", "s", "sigma", "t", "op", "x_coords", "count", "exponent", "seed"]


def _record(alg: AlgebraDescriptor, exp_id: str, op: str, count: int, exponent: float, x: Element | None = None,
            seed: int | None = None, **params: Any) -> ExperimentRecord:
    return ExperimentRecord(exp_id=exp_id, algebra=alg.label, p=alg.p, d=alg.d, m=alg.m, op=op,
                            x_coords=list(x) if x is not None else None, count=count, exponent=exponent,
                            seed=seed, s=params.pop("s", None), sigma=params.pop("sigma", None),
                            t=params.pop("t", None), extra=params)


def _log_exponent(alg: AlgebraDescriptor, count: float) -> float:
    return math.log(count) / (alg.m * math.log(alg.radix)) if count > 0 else 0.0


def measure_projection_profile(G: PairSet, X: DSet, exp_id: str = "projection", seed: int | None = None,
                               budget: BudgetConfiguration | None = None) -> list[ExperimentRecord]:
    """Covering number of ``pi_x(G)`` at the finest scale, and its exponent, for every ``x`` in ``X``."""
    budget = resolve_budget(budget)
    records = []
    for x in progress(X.elements(), desc="projections", total=len(X), budget=budget):
        count = covering_number(project(x, G), G.alg.m)
        records.append(_record(G.alg, exp_id, "proj", count, _log_exponent(G.alg, count), x=x, seed=seed,
                               pairs=len(G)))
    return records


def audit_counterexample(example: Counterexample) -> list[ExperimentRecord]:
    """Per direction, the smallest projection over the parts of ``G`` (``G`` itself for ``One``)."""
    parts = example.components or {"G": example.G}
    records = []
    for x in example.X.elements():
        counts = {name: covering_number(project(x, part), part.alg.m) for name, part in parts.items()}
        best = min(counts, key=lambda name: (counts[name], name))
        records.append(_record(example.G.alg, "counterexample", "proj", counts[best],
                               _log_exponent(example.G.alg, counts[best]), x=x, part=best,
                               bound=2 * math.sqrt(len(example.G)) + 1, **{f"count_{k}": v for k, v in counts.items()}))
    return records


class Schedule(BaseModel):
    """Exponents and round sizes for one expansion experiment."""
    s: float
    sigma: float | None = None
    t: float | None = None
    d: int
    delta_exp: int
    rho_exp: int
    Delta_exp: int
    c1: float
    c_tv: float | None = None
    n_iters: int
    N_budget: str
    C: float = 4.0
    C_nc: float = 1.0
    n_sum: int = 2
    n_prod: int = 2
    rounds: int = 1
    T: int = 1

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if not 0 < self.s <= self.d:
            raise ValueError(f"s={self.s} must lie in (0, d={self.d}]")
        if self.sigma is not None and self.sigma < self.s:
            raise ValueError(f"sigma={self.sigma} must be at least s={self.s}")
        if not 0 < self.Delta_exp < self.delta_exp:
            raise ValueError("Delta = delta/rho^3 must lie strictly between delta and 1")
        if min(self.n_sum, self.n_prod, self.rounds, self.T) < 1:
            raise ValueError("n_sum, n_prod, rounds and T must be positive")
        return self


def build_schedule(s: float, d: int, delta_exp: int, sigma: float | None = None, t: float | None = None,
                   eps: float = 0.0, commutative: bool | None = None, **overrides: Any) -> Schedule:
    rho = choose_rho_expand(s, d, delta_exp)
    c1 = float(choose_c1(s, d)) if s < d else 0.0
    target = t if t is not None and s < t < d else None
    if commutative is None:
        commutative = d <= 2
    iterations = iteration_budget(s, target, d, commutative) if target is not None else None
    c_tv = choose_rho_tv(s, sigma, t, eps, delta_exp).c_value if sigma is not None and t is not None else None
    return Schedule(s=s, sigma=sigma, t=t, d=d, delta_exp=delta_exp, rho_exp=rho.rho_exp,
                    Delta_exp=delta_exp - 3 * rho.rho_exp, c1=c1, c_tv=c_tv,
                    n_iters=iterations.n if iterations else 1,
                    N_budget=iterations.N_expression if iterations else "budget", **overrides)


def run_expansion(A: DSet, schedule: Schedule, family: SubAlgebraFamily | None = None,
                  budget: BudgetConfiguration | None = None) -> list[ExperimentRecord]:
    """
    Rounds of ``n_sum (A^(n_prod) - A^(n_prod))``, each recentered into ``B(0, 1)`` and made uniform,
    recording the verified non-concentration exponent against the predicted ``s + k c1 / 2`` path.

    ### External Effects
    Raises ``TrappedInput`` when ``A`` does not avoid sub-algebras at ``schedule.C``.
    """
    if len(A) == 0:
        raise EmptyInput("run_expansion needs a nonempty set")
    budget = resolve_budget(budget)
    avoidance = avoids_subalgebras(A, schedule.C, family)
    if not avoidance.result:
        raise TrappedInput(f"Input stays within 1/{schedule.C} of {avoidance.worst_member}")
    start = verified_exponent(A, schedule.C_nc)
    predicted = predicted_trajectory(start, A.d, schedule.rounds)
    records = [_record(A.alg, "expansion", "input", len(A), start, round=0, predicted=start,
                       s=schedule.s, sigma=schedule.sigma, t=schedule.t)]
    current = A
    for round_index in progress(range(1, schedule.rounds + 1), desc="expansion", total=schedule.rounds, budget=budget):
        grown = iterated(current, schedule.n_sum, schedule.n_prod, budget)
        grown = intersect_ball(recenter(grown), 0)
        grown = uniform_subset(grown, schedule.T)
        exponent = verified_exponent(grown, schedule.C_nc)
        records.append(_record(A.alg, "expansion", "expand", len(grown), exponent, round=round_index,
                               predicted=predicted[min(round_index, len(predicted) - 1)],
                               covering=covering_number(grown, A.alg.m), input_exponent=start,
                               s=schedule.s, sigma=schedule.sigma, t=schedule.t))
        current = grown
    return records


def probe_babyproj(A: DSet, X: DSet, schedule: Schedule | None = None, seed: int | None = None,
                   budget: BudgetConfiguration | None = None) -> ExperimentRecord:
    """The direction ``x`` in ``X`` maximizing ``N(A + xA)``, with the gain over ``|A|`` as exponent."""
    if len(A) == 0 or len(X) == 0:
        raise EmptyInput("probe_babyproj needs nonempty A and X")
    budget = resolve_budget(budget)
    best_x, best_count = None, -1
    for x in progress(X.elements(), desc="babyproj", total=len(X), budget=budget):
        count = covering_number(sumset(A, scalar_image(x, A), budget), A.alg.m)
        if count > best_count:
            best_x, best_count = x, count
    gain = math.log(best_count / len(A)) / (A.alg.m * math.log(A.alg.radix))
    params = {"s": schedule.s, "sigma": schedule.sigma, "t": schedule.t} if schedule else {}
    return _record(A.alg, "babyproj", "babyproj", best_count, gain, x=best_x, seed=seed, size=len(A),
                   gain_factor=best_count / len(A), directions=len(X), **params)


class FibreRecord(BaseModel):
    x: list[int]
    cells: int
    max_mass: int
    max_cell: list[int]
    threshold: float
    big_fibres: int
    mass_in_big: int


def fibre_profile(G: PairSet, X: DSet, c1: float, rho_exp: int) -> list[FibreRecord]:
    """
    For each ``x``, the masses ``|pi_x^-1(I) ∩ G|`` over the ``rho``-cells ``I``, against the big-fibre
    threshold ``delta^(10 c1) |G|^(1/2)``.
    """
    alg = G.alg
    if not 0 <= rho_exp <= alg.m:
        raise RangeError(f"rho exponent {rho_exp} outside 0..{alg.m}")
    threshold = float(alg.radix) ** (-10 * c1 * alg.m) * math.sqrt(len(G))
    records = []
    for x in X.elements():
        values = G.first + mul_many(alg, np.asarray([x]), G.second)
        if not alg.is_real:
            values %= alg.modulus
        cells = cell_ids_of(alg, fit_radius_exp(alg, values), values, rho_exp)
        keys, masses = np.unique(cells, axis=0, return_counts=True)
        top = int(np.argmax(masses))
        big = masses >= threshold
        records.append(FibreRecord(x=list(x), cells=int(keys.shape[0]), max_mass=int(masses[top]),
                                   max_cell=[int(c) for c in keys[top]], threshold=threshold,
                                   big_fibres=int(big.sum()), mass_in_big=int(masses[big].sum())))
    return records


def records_frame(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.to_row() for record in records], columns=RECORD_COLUMNS)


def write_records_csv(records: Sequence[ExperimentRecord], path: str | Path, config: dict[str, Any] | None = None) -> None:
    write_frame(records_frame(records), path, tool_header("records"), config)
