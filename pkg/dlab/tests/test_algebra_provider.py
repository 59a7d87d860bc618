from fractions import Fraction

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from ..providers.algebra_providers import (AlgebraKind, Side, add, conj, default_defining_poly, det_basis, inv, inv_scaled,
                                           make_algebra, mul, mul_exact, mul_many, multiplication_matrix, neg, norm,
                                           norm_squared, power, round_half_away, sub, valuation, valuations_many)
from ..providers.errors_providers import DivisionByNegligible, NonPrime, ReduciblePoly, UnsupportedRealDim
from .oracles import rounded_product


@pytest.fixture(scope="module")
def complex_alg():
    return make_algebra(AlgebraKind.C, m=6)


@pytest.fixture(scope="module")
def quaternion_alg():
    return make_algebra(AlgebraKind.H, m=6)


@pytest.mark.parametrize("num, den, expected", [(3, 2, 2), (-3, 2, -2), (5, 4, 1), (-5, 4, -1), (1, 2, 1), (0, 7, 0)])
def test_round_half_away(num, den, expected):
    assert round_half_away(num, den) == expected, f"round({num}/{den}) should be {expected}"


def test_complex_unit_squares_to_minus_one(complex_alg):
    u = complex_alg.unit
    assert mul(complex_alg, (0, u), (0, u)) == (-u, 0), "i*i should be -1"


def test_quaternions_do_not_commute(quaternion_alg):
    u = quaternion_alg.unit
    i, j, k = (0, u, 0, 0), (0, 0, u, 0), (0, 0, 0, u)
    assert mul(quaternion_alg, i, j) == k, "ij should be k"
    assert mul(quaternion_alg, j, i) == tuple(-c for c in k), "ji should be -k"
    assert mul(quaternion_alg, k, k) == (-u, 0, 0, 0), "k*k should be -1"


def test_mul_many_matches_scalar_products(quaternion_alg):
    rng = np.random.default_rng(3)
    X = rng.integers(-quaternion_alg.unit, quaternion_alg.unit + 1, size=(20, 4))
    Y = rng.integers(-quaternion_alg.unit, quaternion_alg.unit + 1, size=(20, 4))
    many = mul_many(quaternion_alg, X, Y)
    for row, (x, y) in enumerate(zip(X, Y)):
        assert tuple(many[row]) == rounded_product(quaternion_alg, x, y), f"row {row} differs"


def test_multiplication_matrix_sides(quaternion_alg):
    u = quaternion_alg.unit
    i = (0, u, 0, 0)
    left = np.asarray(multiplication_matrix(quaternion_alg, i, Side.left))
    right = np.asarray(multiplication_matrix(quaternion_alg, i, Side.right))
    assert not np.array_equal(left, right), "left and right multiplication by i differ in H"


@pytest.mark.parametrize("kind, d", [(AlgebraKind.R, 3), (AlgebraKind.C, 4)])
def test_unsupported_real_dimension(kind, d):
    with pytest.raises(UnsupportedRealDim):
        make_algebra(kind, d=d)


def test_non_prime_rejected():
    with pytest.raises(NonPrime):
        make_algebra(AlgebraKind.Qp, p=9, m=3)


def test_reducible_poly_rejected():
    # x^2 + 1 = (x + 2)(x + 3) mod 5
    with pytest.raises(ReduciblePoly):
        make_algebra(AlgebraKind.Qp_ext, p=5, d=2, m=3, poly=[1, 0, 1])


def test_default_poly_is_irreducible():
    assert default_defining_poly(2, 2) == (1, 1, 1), "x^2 + x + 1 is the smallest irreducible quadratic mod 2"
    alg = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=4)
    assert alg.defining_poly == default_defining_poly(3, 2)


def test_real_inverse(complex_alg):
    u = complex_alg.unit
    half = (u // 2, 0)
    assert inv(complex_alg, half) == (2 * u, 0), "1/(1/2) should be 2"
    assert inv(complex_alg, (0, u)) == (0, -u), "1/i should be -i"


def test_real_inverse_below_floor(complex_alg):
    with pytest.raises(DivisionByNegligible):
        inv(complex_alg, (1, 0))


def test_padic_inverse_of_unit():
    alg = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=5)
    x = (2, 7)
    assert mul(alg, x, inv(alg, x)) == alg.one(), "x * x^-1 should be 1"


def test_padic_inverse_of_non_unit():
    alg = make_algebra(AlgebraKind.Qp, p=5, m=6)
    with pytest.raises(DivisionByNegligible):
        inv(alg, (10,))
    v, w = inv_scaled(alg, (10,))
    assert v == 1, "10 has 5-adic valuation 1"
    assert (2 * w[0]) % 5 ** 5 == 1, "the scaled inverse inverts 10 / 5"


def test_norms_and_valuations():
    real = make_algebra(AlgebraKind.C, m=4)
    assert norm_squared(real, (16, 16)) == Fraction(2), "|1 + i|^2 should be 2"
    padic = make_algebra(AlgebraKind.Qp, p=3, m=5)
    assert valuation(padic, (18,)) == 2
    assert norm(padic, (18,)) == Fraction(1, 9)
    assert norm(padic, (0,)) == 0
    assert list(valuations_many(padic, np.array([[1], [3], [9], [0]]))) == [0, 1, 2, 5]


def test_conjugate_and_power(quaternion_alg):
    u = quaternion_alg.unit
    x = (u, u, 0, 0)
    assert conj(quaternion_alg, x) == (u, -u, 0, 0)
    assert power(quaternion_alg, (0, u, 0, 0), 4) == quaternion_alg.one(), "i^4 should be 1"


def test_exact_product_keeps_the_fine_scale(complex_alg):
    u = complex_alg.unit
    half = (u // 2 + 1, 0)
    assert mul_exact(complex_alg, half, half) == ((u // 2 + 1) ** 2, 0)
    assert mul(complex_alg, half, half) == (u // 4 + 1, 0), "(33/64)^2 rounds to 17/64"


def test_additive_helpers():
    padic = make_algebra(AlgebraKind.Qp_ext, p=5, d=2, m=2)
    assert add(padic, (20, 3), (7, 24)) == (2, 2)
    assert sub(padic, (0, 0), (1, 2)) == (24, 23)
    assert neg(padic, (1, 2)) == sub(padic, padic.zero(), (1, 2))
    real = make_algebra(AlgebraKind.C, m=3)
    assert neg(real, (3, -5)) == (-3, 5)


def test_det_basis():
    real = make_algebra(AlgebraKind.C, m=4)
    assert det_basis(real, [real.basis_element(0), real.basis_element(1)]) == 1
    padic = make_algebra(AlgebraKind.Qp_ext, p=3, d=2, m=4)
    assert det_basis(padic, [(1, 0), (0, 3)]) == Fraction(1, 3)
    assert det_basis(padic, [(1, 0), (2, 0)]) == 0


@pytest.fixture(scope="module")
def padic_algebras():
    return {(p, d): make_algebra(AlgebraKind.Qp if d == 1 else AlgebraKind.Qp_ext, p=p, d=d, m=4)
            for p in (2, 3, 5) for d in (1, 2, 3)}


padic_pairs = st.tuples(st.sampled_from([2, 3, 5]), st.sampled_from([1, 2, 3])).flatmap(
    lambda pd: st.tuples(st.just(pd),
                         st.lists(st.integers(0, pd[0] ** 4 - 1), min_size=pd[1], max_size=pd[1]),
                         st.lists(st.integers(0, pd[0] ** 4 - 1), min_size=pd[1], max_size=pd[1])))


@pytest.mark.slow
@settings(max_examples=10_000, deadline=None)
@given(padic_pairs)
def test_padic_ultrametric(padic_algebras, sample):
    key, x, y = sample
    alg = padic_algebras[key]
    total = tuple((a + b) % alg.modulus for a, b in zip(x, y))
    assert norm(alg, total) <= max(norm(alg, x), norm(alg, y)), f"ultrametric fails for {x}, {y}"


@pytest.mark.slow
@settings(max_examples=10_000, deadline=None)
@given(padic_pairs)
def test_padic_norm_is_multiplicative(padic_algebras, sample):
    key, x, y = sample
    alg = padic_algebras[key]
    if valuation(alg, x) + valuation(alg, y) >= alg.m:
        assert valuation(alg, mul(alg, x, y)) >= min(valuation(alg, x) + valuation(alg, y), alg.m)
        return
    assert norm(alg, mul(alg, x, y)) == norm(alg, x) * norm(alg, y), f"|xy| != |x||y| for {x}, {y}"
