import numpy as np
import pytest

from ..providers.algebra_providers import AlgebraKind, make_algebra
from ..providers.config_providers import BudgetConfiguration
from ..providers.dset_providers import (RowIndex, covering_number, intersect_ball, is_nonconcentrated, make_dset,
                                        neighborhood, remove_ball, uniform_subset, uniformity_audit,
                                        verified_exponent)
from ..providers.errors_providers import BudgetExceeded, EmptyInput, OutOfBall, ScaleOutOfRange
from ..providers.lab_providers import gen_arithmetic_progression, gen_full_grid, gen_random_dset


@pytest.fixture(scope="module")
def real_line():
    return make_algebra(AlgebraKind.R, m=4)


@pytest.fixture(scope="module")
def complex_alg():
    return make_algebra(AlgebraKind.C, m=5)


@pytest.fixture(scope="module")
def padic_alg():
    return make_algebra(AlgebraKind.Qp, p=3, m=4)


def test_make_dset_deduplicates_and_sorts(real_line):
    A = make_dset(real_line, [[3], [1], [3], [-2]])
    assert A.elements() == [(-2,), (1,), (3,)], f"Unexpected points {A.elements()}"
    assert A.radius_exp == 0
    assert A.contains((1,)) and not A.contains((2,))


def test_make_dset_out_of_ball(real_line):
    with pytest.raises(OutOfBall):
        make_dset(real_line, [[real_line.unit + 1]], radius_exp=0)
    A = make_dset(real_line, [[real_line.unit + 1]])
    assert A.radius_exp == 1, "the ball is fitted to the points when no radius is given"


def test_padic_points_are_reduced(padic_alg):
    A = make_dset(padic_alg, [[-1], [80], [81]])
    assert A.elements() == [(0,), (80,)], f"Unexpected residues {A.elements()}"


def test_full_grid_covering_numbers(complex_alg):
    A = gen_full_grid(complex_alg)
    side = 2 * complex_alg.unit + 1
    assert len(A) == side ** 2
    assert covering_number(A, complex_alg.m) == len(A), "the finest scale separates every grid point"
    assert covering_number(A, 0) == 4, "B(0, 1) meets four unit cells"


def test_covering_number_scale_range(complex_alg):
    A = gen_full_grid(complex_alg)
    with pytest.raises(ScaleOutOfRange):
        covering_number(A, complex_alg.m + 1)


def test_padic_covering_number(padic_alg):
    A = gen_full_grid(padic_alg)
    assert [covering_number(A, k) for k in range(padic_alg.m + 1)] == [1, 3, 9, 27, 81]


def test_row_index_weights():
    index = RowIndex(np.array([[0, 1], [2, 3], [-1, 4]]), weights=np.array([5, 6, 7]))
    assert list(index.weights(np.array([[2, 3], [9, 9], [-1, 4]]))) == [6, 0, 7]
    assert list(index.contains(np.array([[0, 1], [1, 0]]))) == [True, False]


def test_single_point_is_concentrated(real_line):
    A = make_dset(real_line, [[0]])
    report = is_nonconcentrated(A, 0.5, 1.0)
    assert not report.passed, "a single point cannot look half-dimensional"
    assert report.worst_radius_exp == real_line.m
    assert verified_exponent(A, 1.0) == 0.0


def test_full_grid_is_full_dimensional(complex_alg):
    A = gen_full_grid(complex_alg)
    assert is_nonconcentrated(A, 2.0, 8.0).passed
    assert verified_exponent(A, 8.0) == pytest.approx(2.0)


def test_nonconcentration_on_empty_set(real_line):
    with pytest.raises(EmptyInput):
        is_nonconcentrated(make_dset(real_line, np.zeros((0, 1))), 0.5, 1.0)


def test_nc_report_alias(real_line):
    report = is_nonconcentrated(make_dset(real_line, [[0], [8]]), 0.5, 4.0)
    assert "pass" in report.model_dump(by_alias=True)


def test_intersect_ball(real_line):
    A = make_dset(real_line, [[-40], [0], [16], [17]])
    restricted = intersect_ball(A, 0)
    assert restricted.elements() == [(0,), (16,)]
    assert restricted.radius_exp == 0


def test_neighborhood(real_line):
    A = make_dset(real_line, [[0]], radius_exp=0)
    grown = neighborhood(A, real_line.m - 1)
    assert grown.elements() == [(-2,), (-1,), (0,), (1,), (2,)], "radius 2^-(m-1) is two grid units"


def test_neighborhood_budget(complex_alg):
    A = gen_full_grid(complex_alg)
    tiny = BudgetConfiguration(points_cap=10)
    with pytest.raises(BudgetExceeded) as e:
        neighborhood(A, 1, tiny)
    assert e.value.partial, "the budget error reports the size reached"


def test_remove_ball(real_line, padic_alg):
    A = make_dset(real_line, [[0], [1], [4], [8]])
    assert remove_ball(A, (0,), real_line.m - 2).elements() == [(4,), (8,)]
    assert remove_ball(A, (0,), real_line.m).elements() == [(1,), (4,), (8,)], "the finest ball is the center"
    B = make_dset(padic_alg, [[0], [3], [9], [1]])
    assert remove_ball(B, (0,), 1).elements() == [(1,)]


@pytest.mark.slow
@pytest.mark.parametrize("kind, p", [(AlgebraKind.R, None), (AlgebraKind.C, None), (AlgebraKind.Qp, 2),
                                     (AlgebraKind.Qp_ext, 3)])
@pytest.mark.parametrize("T", [1, 2])
def test_uniform_subset_passes_audit(kind, p, T):
    d = 2 if kind in (AlgebraKind.C, AlgebraKind.Qp_ext) else 1
    alg = make_algebra(kind, p=p, d=d, m=8)
    for seed in range(100):
        A = gen_random_dset(alg, s=0.6 * d, seed=seed, C=1e6)
        refined = uniform_subset(A, T)
        audit = uniformity_audit(refined, T)
        assert audit.passed, f"seed {seed} left a non-uniform stage"
        assert len(refined) * (d * T + 1) ** len(audit.stages) >= len(A), f"seed {seed} lost too many points"
        assert set(refined.elements()) <= set(A.elements())


def test_uniform_subset_of_empty_set(real_line):
    with pytest.raises(EmptyInput):
        uniform_subset(make_dset(real_line, np.zeros((0, 1))))


def test_covering_number_of_nearby_points():
    alg = make_algebra(AlgebraKind.R, m=5)
    # 0, 1/4 and 9/32: the last two share a cell of width 1/4
    A = make_dset(alg, [[0], [8], [9]])
    assert covering_number(A, 2) == 2
    assert covering_number(A, alg.m) == 3


def test_progression_to_one_is_one_dimensional():
    alg = make_algebra(AlgebraKind.R, m=6)
    A = gen_arithmetic_progression(alg, alg.unit + 1)
    report = is_nonconcentrated(A, 1.0, 4.0)
    assert report.passed
    # the cell of width 1/32 at the top face also holds the point 1
    assert report.best_C == pytest.approx(96 / 65)
    assert report.worst_radius_exp == 5
