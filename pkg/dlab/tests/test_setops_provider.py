from fractions import Fraction

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from ..providers.algebra_providers import AlgebraKind, Side, make_algebra
from ..providers.config_providers import BudgetConfiguration
from ..providers.dset_providers import intersect_ball, make_dset
from ..providers.errors_providers import (AlgebraMismatch, BudgetExceeded, NoAdmissiblePairs, ScaleMismatch,
                                          ScaleOutOfRange, SingularMap)
from ..providers.lab_providers import gen_arithmetic_progression, gen_circle_net, gen_random_dset
from ..providers.setops_providers import (apply_dual, apply_linear_map, coordinate_change, difference_set, iterated,
                                          make_pairset, negate, pairset_product, pairset_union, product_set, project,
                                          quotient_set, quotient_witnesses, recenter, recentering_point,
                                          scalar_image, sum_multiset, sumset)
from .oracles import (brute_difference_set, brute_product_set, brute_quotient_radius, brute_quotient_set,
                      brute_sumset)


@pytest.fixture(scope="module")
def complex_alg():
    return make_algebra(AlgebraKind.C, m=6)


@pytest.fixture(scope="module")
def quaternion_alg():
    return make_algebra(AlgebraKind.H, m=4)


@pytest.fixture(scope="module")
def random_complex_sets(complex_alg):
    rng = np.random.default_rng(11)
    return [make_dset(complex_alg, rng.integers(-complex_alg.unit, complex_alg.unit + 1, size=(12, 2)))
            for _ in range(6)]


def test_sum_with_zero_is_identity(complex_alg, random_complex_sets):
    A = random_complex_sets[0]
    zero = make_dset(complex_alg, [[0, 0]])
    assert sumset(A, zero) == A


def test_two_point_sumset():
    alg = make_algebra(AlgebraKind.R, m=3)
    A = make_dset(alg, [[0], [1]])
    assert sumset(A, A).elements() == [(0,), (1,), (2,)]


@pytest.mark.parametrize("n", [1, 5, 17])
def test_progression_sumset_size(complex_alg, n):
    P = gen_arithmetic_progression(complex_alg, n)
    assert len(sumset(P, P)) == 2 * n - 1, f"|P + P| should be {2 * n - 1}"


def test_set_operations_match_enumeration(random_complex_sets):
    for A, B in zip(random_complex_sets, random_complex_sets[1:]):
        assert set(sumset(A, B).elements()) == brute_sumset(A, B)
        assert set(difference_set(A, B).elements()) == brute_difference_set(A, B)
        assert set(product_set(A, B).elements()) == brute_product_set(A, B)


def test_fft_and_pairwise_sums_agree(complex_alg, random_complex_sets):
    A, B = random_complex_sets[:2]
    fft_values, fft_counts = sum_multiset(complex_alg, A.points, B.points, BudgetConfiguration(count_cap=1))
    pair_values, pair_counts = sum_multiset(complex_alg, A.points, B.points, BudgetConfiguration(fft_cell_cap=1))
    assert np.array_equal(fft_values, pair_values)
    assert np.array_equal(fft_counts, pair_counts)
    assert int(fft_counts.sum()) == len(A) * len(B)


def test_padic_sums_wrap():
    alg = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=2)
    A = make_dset(alg, [[8, 8], [1, 0]])
    assert set(sumset(A, A).elements()) == brute_sumset(A, A)
    assert (7, 7) in sumset(A, A).elements(), "(8,8) + (8,8) wraps modulo 9"


def test_padic_arithmetic_outside_the_unit_ball():
    alg = make_algebra(AlgebraKind.Qp, p=3, m=2)
    third = make_dset(alg, [[1]], radius_exp=1)
    one = make_dset(alg, [[1]])
    assert sumset(third, third).elements() == [(2,)] and sumset(third, third).radius_exp == 1
    assert sumset(third, one).elements() == [(4,)], "1/3 + 1 is stored as 4 at radius exponent 1"
    ninth = product_set(third, third)
    assert ninth.elements() == [(1,)] and ninth.radius_exp == 2, "radius exponents add under products"
    assert len(intersect_ball(ninth, 0)) == 0
    assert negate(third).elements() == [(26,)]
    assert scalar_image((0,), third).elements() == [(0,)]


def test_quaternion_products_depend_on_side(quaternion_alg):
    u = quaternion_alg.unit
    A = make_dset(quaternion_alg, [[0, u, 0, 0]])
    B = make_dset(quaternion_alg, [[0, 0, u, 0]])
    assert product_set(A, B, Side.left).elements() == [(0, 0, 0, u)]
    assert product_set(A, B, Side.right).elements() == [(0, 0, 0, -u)]


def test_mismatched_inputs(complex_alg):
    A = make_dset(complex_alg, [[0, 0]])
    with pytest.raises(AlgebraMismatch):
        sumset(A, make_dset(make_algebra(AlgebraKind.H, m=6), [[0, 0, 0, 0]]))
    with pytest.raises(ScaleMismatch):
        sumset(A, make_dset(complex_alg.with_precision(5), [[0, 0]]))


def test_negate(complex_alg):
    A = make_dset(complex_alg, [[1, -2], [3, 4]])
    assert negate(A).elements() == [(-3, -4), (-1, 2)]


def test_iterated_small_cases():
    alg = make_algebra(AlgebraKind.R, m=3)
    A = make_dset(alg, [[0], [1]])
    assert iterated(A, 1, 1) == difference_set(A, A)
    assert iterated(A, 2, 1).elements() == [(-2,), (-1,), (0,), (1,), (2,)]


def test_iterated_matches_composition():
    A = gen_circle_net(4)
    squares = product_set(A, A)
    diff = difference_set(squares, squares)
    expected = sumset(diff, diff).elements()
    result = iterated(A, 2, 2)
    bound = A.alg.unit
    assert result.elements() == [x for x in expected if max(abs(c) for c in x) <= bound]


def test_iterated_budget_reports_stages():
    A = gen_circle_net(6)
    with pytest.raises(BudgetExceeded) as e:
        iterated(A, 3, 2, BudgetConfiguration(points_cap=2000))
    assert "input" in e.value.partial, f"partial sizes should name the stages, got {e.value.partial}"


def test_scalar_image_and_projection(complex_alg):
    u = complex_alg.unit
    A = gen_arithmetic_progression(complex_alg, 5)
    i = (0, u)
    assert scalar_image(i, A).elements() == [(0, k) for k in range(5)]
    assert scalar_image((0, 0), A).elements() == [(0, 0)], "the zero scalar collapses A to 0"
    G = pairset_product(A, A)
    assert len(project(i, G)) == 25, "A + iA is a 5 x 5 grid"
    assert project((0, 0), G) == A, "projection in direction 0 keeps the first coordinate"


def test_projection_right_side(quaternion_alg):
    u = quaternion_alg.unit
    G = make_pairset(quaternion_alg, [[0, 0, 0, 0, 0, u, 0, 0]])
    j = (0, 0, u, 0)
    assert project(j, G, Side.left).elements() == [(0, 0, 0, -u)], "j i = -k"
    assert project(j, G, Side.right).elements() == [(0, 0, 0, u)], "i j = k"


def test_direction_with_wrong_dimension(complex_alg):
    G = pairset_product(gen_arithmetic_progression(complex_alg, 2), gen_arithmetic_progression(complex_alg, 2))
    with pytest.raises(AlgebraMismatch):
        project((1, 2, 3), G)


def _random_points(alg, rng, size):
    if alg.is_real:
        return rng.integers(-alg.unit, alg.unit + 1, size=(size, alg.d))
    return rng.integers(0, alg.modulus, size=(size, alg.d))


@pytest.mark.parametrize("side", [Side.left, Side.right])
@pytest.mark.parametrize("kind, p, d, m, rho_exp", [(AlgebraKind.R, None, None, 7, 1),
                                                    (AlgebraKind.C, None, None, 7, 2),
                                                    (AlgebraKind.H, None, None, 5, 1),
                                                    (AlgebraKind.Qp, 3, None, 5, 1),
                                                    (AlgebraKind.Qp, 2, None, 7, 2),
                                                    (AlgebraKind.Qp, 3, None, 7, 2),
                                                    (AlgebraKind.Qp_ext, 3, 2, 4, 1),
                                                    (AlgebraKind.Qp_ext, 2, 2, 7, 2)])
def test_quotient_set_matches_enumeration(kind, p, d, m, rho_exp, side):
    alg = make_algebra(kind, p=p, d=d, m=m)
    for seed in range(5):
        A = make_dset(alg, _random_points(alg, np.random.default_rng(seed), 8))
        q = quotient_set(A, rho_exp, side)
        assert set(q.elements()) == brute_quotient_set(A, rho_exp, side), f"seed {seed} differs from enumeration"
        if not alg.is_real:
            assert q.radius_exp == brute_quotient_radius(A, rho_exp), f"seed {seed} has the wrong radius"


def test_padic_quotients_keep_ratios_outside_the_unit_ball():
    alg = make_algebra(AlgebraKind.Qp, p=3, m=7)
    A = make_dset(alg, [[0], [1], [3]])
    result = quotient_witnesses(A, 2)
    q = result.q
    # stored as 3 * ratio mod 9: 1/3 -> 1 and 2/3 -> 2, the integral ratios 0, 1, 2 -> 0, 3, 6
    assert q.radius_exp == 1
    assert q.elements() == [(0,), (1,), (2,), (3,), (6,), (7,), (8,)]
    assert intersect_ball(q, 0).elements() == [(0,), (1,), (2,)], "the integral ratios mod 3"
    for (point,), witness in zip(q.elements(), result.witnesses):
        a, b, c, d = (int(v) for v in witness)
        assert (point * (c - d) - 3 * (a - b)) % 9 == 0, f"witness {witness} does not produce {point}"


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["C", "Qp", "Qp_ext"]), st.lists(st.integers(0, 2 ** 12), min_size=0, max_size=8))
def test_commutative_quotients_do_not_depend_on_side(label, raw):
    alg, rho_exp = {"C": (make_algebra(AlgebraKind.C, m=6), 1),
                    "Qp": (make_algebra(AlgebraKind.Qp, p=3, m=7), 2),
                    "Qp_ext": (make_algebra(AlgebraKind.Qp_ext, p=2, d=2, m=7), 2)}[label]
    coords = np.asarray(raw[:len(raw) - len(raw) % alg.d], dtype=np.int64).reshape(-1, alg.d)
    coords = coords % (2 * alg.unit + 1) - alg.unit if alg.is_real else coords % alg.modulus
    A = make_dset(alg, np.vstack([coords, [alg.zero(), alg.one()]]))
    assert quotient_set(A, rho_exp, Side.left) == quotient_set(A, rho_exp, Side.right)


def test_quotient_witnesses_reproduce_points():
    alg = make_algebra(AlgebraKind.R, m=7)
    A = make_dset(alg, [[0], [64], [128], [-40]])
    result = quotient_witnesses(A, 1)
    assert result.Delta_exp == 4
    for point, witness in zip(result.q.elements(), result.witnesses):
        a, b, c, d = (int(v) for v in witness)
        expected = round((a - b) * 2 ** 4 / (c - d))
        assert abs(point[0] - expected) <= 1, f"witness {witness} does not produce {point}"


def test_quotient_errors():
    alg = make_algebra(AlgebraKind.R, m=7)
    with pytest.raises(NoAdmissiblePairs):
        quotient_set(make_dset(alg, [[0], [1]]), 1)
    with pytest.raises(ScaleOutOfRange):
        quotient_set(make_dset(alg, [[0], [128]]), 3)


def test_linear_map_is_a_pair_of_projections(complex_alg):
    u = complex_alg.unit
    A = gen_arithmetic_progression(complex_alg, 4)
    G = pairset_product(A, A)
    x1, x2 = (0, 0), (u, 0)
    image = apply_linear_map(coordinate_change(complex_alg, x1, x2), G)
    assert set(map(tuple, image.first.tolist())) == set(project(x1, G).elements())
    assert set(map(tuple, image.second.tolist())) == set(project(x2, G).elements())


def test_singular_linear_map(complex_alg):
    u = complex_alg.unit
    G = pairset_product(gen_arithmetic_progression(complex_alg, 2), gen_arithmetic_progression(complex_alg, 2))
    with pytest.raises(SingularMap):
        apply_linear_map(coordinate_change(complex_alg, (u, 0), (u, 0)), G)


def test_dual_directions(complex_alg):
    u = complex_alg.unit
    L = coordinate_change(complex_alg, (0, 0), (u, 0))
    X = make_dset(complex_alg, [[u // 2, 0], [u, 0]])
    # (alpha, beta) L = (1, x) gives alpha = 1 - x and beta = x; x = 1 has no finite image
    assert apply_dual(L, X, det_floor=Fraction(0)).elements() == [(u, 0)]


def test_recentering():
    alg = make_algebra(AlgebraKind.R, m=4)
    A = make_dset(alg, [[2], [5], [9]])
    assert recentering_point(A) == (5,)
    assert recenter(A).elements() == [(-3,), (0,), (4,)]


def test_pairset_union(complex_alg):
    A = gen_arithmetic_progression(complex_alg, 3)
    G = pairset_product(A, A)
    H = make_pairset(complex_alg, [[0, 0, 0, 0], [5, 5, 5, 5]])
    assert len(pairset_union(G, H)) == 10


def test_sumset_of_random_set_contains_a_translate(complex_alg):
    A = gen_random_dset(complex_alg, 1.0, seed=1, C=1e6)
    S = sumset(A, A)
    shift = A.points[0]
    assert set(S.elements()) >= {tuple(int(c) for c in row + shift) for row in A.points}
