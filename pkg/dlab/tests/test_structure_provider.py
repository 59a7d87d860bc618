from fractions import Fraction

import numpy as np
import pytest

from ..providers.algebra_providers import AlgebraKind, make_algebra
from ..providers.dset_providers import make_dset
from ..providers.errors_providers import (DlabValidationError, EmptyInput, NotRealBase, RangeError, ScaleMismatch,
                                          SubAlgebraTrapped)
from ..providers.lab_providers import gen_arithmetic_progression, gen_circle_net, gen_full_grid
from ..providers.setops_providers import quotient_witnesses
from .oracles import brute_strongly_avoids
from ..providers.structure_providers import (DichotomyCase, DichotomyMode, avoids_subalgebras, closure_check,
                                             dichotomy_check, distance_to_subalgebra, dyadic_closure_audit, escape_basis,
                                             halving_map, strongly_avoids, subalgebra_family, verify_sparse_witness)


@pytest.fixture(scope="module")
def complex_alg():
    return make_algebra(AlgebraKind.C, m=6)


@pytest.fixture(scope="module")
def real_line():
    return make_algebra(AlgebraKind.R, m=7)


@pytest.fixture(scope="module")
def coarse_real_line():
    # the quotient scale for delta_exp = 7 and rho_exp = 1
    return make_algebra(AlgebraKind.R, m=4)


@pytest.fixture(scope="module")
def padic_quotient_alg():
    return make_algebra(AlgebraKind.Qp, p=3, m=2)


def test_subalgebra_families():
    assert subalgebra_family(make_algebra(AlgebraKind.R, m=4)).members == []
    assert subalgebra_family(make_algebra(AlgebraKind.Qp, p=5, m=3)).members == []
    assert [member.label for member in subalgebra_family(make_algebra(AlgebraKind.C, m=4)).members] == ["R"]
    family = subalgebra_family(make_algebra(AlgebraKind.H, m=4))
    assert family.net_exp == 2
    assert len(family.members) > 1 and family.members[0].label == "R"
    assert all(member.dimension == 2 for member in family.members[1:])


def test_padic_subfields_are_closed():
    family = subalgebra_family(make_algebra(AlgebraKind.Qp_ext, p=2, d=4, m=4))
    assert sorted(member.dimension for member in family.members) == [1, 2]
    assert all(member.is_closed() for member in family.members)


def test_distance_to_subalgebra(complex_alg):
    u = complex_alg.unit
    [real_line] = subalgebra_family(complex_alg).members
    assert distance_to_subalgebra((u // 2, 0), real_line) == pytest.approx(0.0)
    assert distance_to_subalgebra((u, -u // 2), real_line) == pytest.approx(0.5)
    padic = make_algebra(AlgebraKind.Qp_ext, p=2, d=4, m=4)
    [base_field] = [member for member in subalgebra_family(padic).members if member.dimension == 1]
    assert distance_to_subalgebra((7, 0, 0, 0), base_field) == 0
    assert distance_to_subalgebra((0, 1, 0, 0), base_field) == 1
    assert distance_to_subalgebra((5, 2, 0, 4), base_field) == Fraction(1, 2)


def test_real_line_is_trapped(complex_alg):
    A = gen_arithmetic_progression(complex_alg, 10)
    report = avoids_subalgebras(A, 4.0)
    assert not report.result
    assert report.worst_member == "R"
    assert report.trapped_count == len(A)


def test_one_and_i_avoid(complex_alg):
    u = complex_alg.unit
    A = make_dset(complex_alg, [[u, 0], [0, u]])
    report = avoids_subalgebras(A, 2.0)
    assert report.result
    assert report.best_point == [0, u]
    assert report.worst_distance == pytest.approx(1.0)


def test_circle_avoids():
    assert avoids_subalgebras(gen_circle_net(6), 4.0).result


def test_quaternion_units_avoid_every_complex_copy():
    alg = make_algebra(AlgebraKind.H, m=4)
    u = alg.unit
    A = make_dset(alg, [[u, 0, 0, 0], [0, u, 0, 0], [0, 0, u, 0]])
    report = avoids_subalgebras(A, 2.0)
    assert report.result, f"nearest member {report.worst_member} at {report.worst_distance}"
    assert report.members == len(subalgebra_family(alg).members)


def test_padic_avoidance():
    alg = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=3)
    assert not avoids_subalgebras(make_dset(alg, [[1, 0], [2, 0]]), 1.0).result
    assert avoids_subalgebras(make_dset(alg, [[1, 0], [0, 1]]), 1.0).result


def test_avoidance_of_empty_set(complex_alg):
    with pytest.raises(EmptyInput):
        avoids_subalgebras(make_dset(complex_alg, np.zeros((0, 2))), 2.0)


def test_strong_avoidance(complex_alg):
    u = complex_alg.unit
    line = gen_arithmetic_progression(complex_alg, 10)
    mostly_real = make_dset(complex_alg, np.vstack([line.points, [[0, u]]]))
    weak = avoids_subalgebras(mostly_real, 2.0)
    strong = strongly_avoids(mostly_real, 2.0)
    assert weak.result, "one point off the real line is enough for plain avoidance"
    assert not strong.result and not strong.sufficient and not strong.necessary
    assert strong.worst_trapped == 10 and strong.subset_size == 6
    circle = strongly_avoids(gen_circle_net(5), 4.0)
    assert circle.result and circle.necessary


def _mixed_points(alg, rng, n: int) -> np.ndarray:
    if alg.is_real:
        u = alg.unit
        points = rng.integers(-u, u + 1, size=(n, 2))
        points[:, 1] //= rng.choice([1, 16], size=n)
        return points
    points = rng.integers(0, alg.modulus, size=(n, 2))
    points[:, 1] *= rng.choice([1, alg.p], size=n)
    return points


@pytest.mark.parametrize("alg", [make_algebra(AlgebraKind.C, m=6), make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=3)],
                         ids=["C", "Qp_ext"])
@pytest.mark.parametrize("C", [2.0, 3.0])
@pytest.mark.parametrize("seed", range(10))
def test_strong_avoidance_bounds_bracket_subset_enumeration(alg, C, seed):
    rng = np.random.default_rng(seed)
    A = make_dset(alg, _mixed_points(alg, rng, int(rng.integers(4, 17))))
    family = subalgebra_family(alg)
    report = strongly_avoids(A, C, family)
    exhaustive = brute_strongly_avoids(A, C, family.members)
    assert not report.sufficient or exhaustive, f"sufficient bound holds but a subset is trapped (seed {seed})"
    assert not exhaustive or report.necessary, f"necessary bound fails on an avoiding set (seed {seed})"
    assert report.result == exhaustive


def test_escape_from_one_and_i(complex_alg):
    u = complex_alg.unit
    certificate = escape_basis(make_dset(complex_alg, [[u, 0], [0, u]]), 0.5)
    assert certificate.det == pytest.approx(1.0)
    assert certificate.basis == [[u, 0], [0, u]]
    assert not certificate.sampled


def test_escape_in_unramified_extension():
    alg = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=3)
    certificate = escape_basis(make_dset(alg, [[1, 0], [0, 1]]), Fraction(1, 2))
    assert certificate.det == 1.0
    assert Fraction(certificate.det_exact) == 1


def test_escape_from_real_set_fails(complex_alg):
    A = gen_arithmetic_progression(complex_alg, 6, start=1)
    with pytest.raises(SubAlgebraTrapped) as e:
        escape_basis(A, 0.5)
    assert len(e.value.span) == 1, "the greedy stalls after the first vector"


def test_escape_below_floor(complex_alg):
    u = complex_alg.unit
    A = make_dset(complex_alg, [[u, 0], [0, u // 8]])
    with pytest.raises(SubAlgebraTrapped):
        escape_basis(A, 0.5)


def test_halving_map(real_line):
    v = [real_line.one()]
    assert halving_map(real_line, v, [1], (0,)) == (64,)
    assert halving_map(real_line, v, [0], (1,)) == (1,), "halves round away from zero"
    assert halving_map(real_line, v, [0], (-1,)) == (-1,)


def test_halving_map_needs_real_base(padic_quotient_alg):
    with pytest.raises(NotRealBase):
        halving_map(padic_quotient_alg, [(1,)], [1], (0,))


def test_full_grid_is_dense(real_line, coarse_real_line):
    Q = gen_full_grid(coarse_real_line)
    outcome = dichotomy_check(Q, [real_line.one()], delta_exp=7, rho_exp=1)
    assert outcome.case is DichotomyCase.dense
    assert outcome.mode is DichotomyMode.halving
    assert outcome.checked == 2 * len(Q)
    assert outcome.dense.measured == len(Q)
    assert outcome.dense.bound == pytest.approx(8.0)
    assert outcome.dense.holds


def test_single_point_is_sparse(real_line, coarse_real_line):
    Q = make_dset(coarse_real_line, [[0]])
    outcome = dichotomy_check(Q, [real_line.one()], delta_exp=7, rho_exp=1)
    assert outcome.case is DichotomyCase.sparse
    assert outcome.sparse.bits == [1]
    assert outcome.sparse.image == [128] and outcome.sparse.image_scale_exp == 8, "(0 + 1) / 2 on the 2^-8 grid"
    assert verify_sparse_witness(outcome, Q)


@pytest.mark.parametrize("seed", range(10))
def test_sparse_witnesses_verify_across_seeds(real_line, coarse_real_line, seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        # one point cannot sit near both fixed points 0 and 1 of the halving maps
        Q = make_dset(coarse_real_line, [[int(rng.integers(-coarse_real_line.unit, coarse_real_line.unit + 1))]])
        outcome = dichotomy_check(Q, [real_line.one()], delta_exp=7, rho_exp=1)
    else:
        alg = make_algebra(AlgebraKind.Qp, p=int(rng.choice([3, 5])), m=2)
        size = int(rng.integers(1, alg.modulus))
        Q = make_dset(alg, rng.choice(alg.modulus, size=size, replace=False).reshape(-1, 1))
        # a unit translation generates Z / p^2, so no proper subset is stable under it
        unit = int(rng.integers(0, alg.p)) * alg.p + int(rng.integers(1, alg.p))
        outcome = dichotomy_check(Q, [(unit,)], delta_exp=5, rho_exp=1)
    assert outcome.case is DichotomyCase.sparse, f"seed {seed}"
    assert verify_sparse_witness(outcome, Q), f"witness for seed {seed} does not re-verify"


def test_dichotomy_scale_and_mode_checks(real_line, coarse_real_line):
    Q = gen_full_grid(coarse_real_line)
    with pytest.raises(ScaleMismatch):
        dichotomy_check(Q, [real_line.one()], delta_exp=7, rho_exp=2)
    with pytest.raises(DlabValidationError):
        dichotomy_check(Q, [real_line.one()], delta_exp=7, rho_exp=1, mode=DichotomyMode.translate)


def test_padic_translation_case(padic_quotient_alg):
    full = gen_full_grid(padic_quotient_alg)
    dense = dichotomy_check(full, [(1,)], delta_exp=5, rho_exp=1)
    assert dense.case is DichotomyCase.dense
    assert dense.dense.measured == 9 and dense.dense.holds
    sparse = dichotomy_check(make_dset(padic_quotient_alg, [[0]]), [(1,)], delta_exp=5, rho_exp=1)
    assert sparse.case is DichotomyCase.sparse
    assert sparse.sparse.index == 0 and sparse.sparse.image == [1]
    assert verify_sparse_witness(sparse, make_dset(padic_quotient_alg, [[0]]))


def test_padic_field_case(padic_quotient_alg):
    closed = dichotomy_check(gen_full_grid(padic_quotient_alg), [(1,)], delta_exp=5, rho_exp=1,
                             mode=DichotomyMode.field)
    assert closed.case is DichotomyCase.dense
    Q = make_dset(padic_quotient_alg, [[0], [1]])
    violation = closure_check(Q)
    assert violation is not None
    assert (violation.x, violation.y, violation.op, violation.result) == ([1], [1], "sum", [2])


def test_dichotomy_on_quotients_outside_the_unit_ball():
    alg = make_algebra(AlgebraKind.Qp, p=3, m=7)
    quotient = quotient_witnesses(make_dset(alg, [[0], [1], [3]]), 2)
    Q = quotient.q
    assert Q.radius_exp == 1
    translated = dichotomy_check(quotient, [(1,)], delta_exp=7, rho_exp=2)
    assert translated.case is DichotomyCase.sparse
    # 1/3 + 1 is stored as 4, which Q misses
    assert (translated.sparse.x, translated.sparse.image, translated.sparse.image_radius_exp) == ([1], [4], 1)
    assert verify_sparse_witness(translated, Q)
    violation = closure_check(Q)
    # (1/3)^2 leaves the ball of radius 3
    assert (violation.x, violation.y, violation.op, violation.result, violation.radius_exp) == \
        ([1], [1], "product", [1], 2)
    field = dichotomy_check(quotient, [(1,)], delta_exp=7, rho_exp=2, mode=DichotomyMode.field)
    assert field.case is DichotomyCase.sparse and verify_sparse_witness(field, Q)


def test_closure_check_needs_padic(coarse_real_line):
    with pytest.raises(DlabValidationError):
        closure_check(gen_full_grid(coarse_real_line))


def test_dyadic_closure_audit(real_line, coarse_real_line):
    Q = gen_full_grid(coarse_real_line)
    levels = dyadic_closure_audit(Q, [real_line.one()], delta_exp=7, n=2)
    assert [(level.points, level.present) for level in levels] == [(2, 2), (3, 3), (5, 5)]
    with pytest.raises(RangeError):
        dyadic_closure_audit(Q, [real_line.one()], delta_exp=7, n=7)
