import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdverify.arith import (
    crt_combine,
    euler_phi,
    factorize,
    is_prime,
    is_squarefree,
    jacobi,
    jacobi_array,
    largest_prime_factor,
    moebius,
)

odd_k = st.integers(1, 1000).map(lambda k: 2 * (k // 2) + 1)


@pytest.mark.parametrize("m,k,expected", [(1, 3, 1), (21, 7, 0), (2, 15, 1), (5, 13, -1), (-1, 5, 1), (-1, 7, -1)])
def test_jacobi_examples(m, k, expected):
    assert jacobi(m, k) == expected


@pytest.mark.parametrize("k", [0, -3, 4])
def test_jacobi_rejects_bad_modulus(k):
    with pytest.raises(ValueError):
        jacobi(3, k)


@settings(max_examples=500, deadline=None)
@given(st.integers(-1000, 1000), st.integers(-1000, 1000), odd_k)
def test_jacobi_multiplicative_in_m(m1, m2, k):
    assert jacobi(m1, k) * jacobi(m2, k) == jacobi(m1 * m2, k)


@settings(max_examples=300, deadline=None)
@given(st.integers(-1000, 1000), odd_k, odd_k)
def test_jacobi_multiplicative_in_k(m, k1, k2):
    assert jacobi(m, k1) * jacobi(m, k2) == jacobi(m, k1 * k2)


@settings(max_examples=300, deadline=None)
@given(st.integers(-10**6, 10**6), odd_k)
def test_jacobi_periodic(m, k):
    assert jacobi(m, k) == jacobi(m + k, k)


def test_jacobi_euler_criterion():
    for p in range(3, 200):
        if not is_prime(p):
            continue
        for m in range(p):
            e = pow(m, (p - 1) // 2, p)
            assert jacobi(m, p) == (e if e <= 1 else -1)


def test_jacobi_array_matches_scalar():
    rng = np.random.default_rng(0)
    m = rng.integers(-10**6, 10**6, 500)
    for k in (1, 3, 15, 97, 1253, 3315):
        assert jacobi_array(m, k).tolist() == [jacobi(int(x), k) for x in m]


def test_factorize_examples():
    assert factorize(1).factors == ()
    assert factorize(3315).factors == ((3, 1), (5, 1), (13, 1), (17, 1))
    assert factorize(959595).factors == ((3, 1), (5, 1), (7, 1), (13, 1), (19, 1), (37, 1))
    with pytest.raises(ValueError):
        factorize(0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10**12))
def test_factorization_invariants(n):
    f = factorize(n)
    assert math.prod(p**e for p, e in f.factors) == n
    primes = [p for p, _ in f.factors]
    assert primes == sorted(set(primes))
    assert all(is_prime(p) and e >= 1 for p, e in f.factors)


def test_squarefree_and_moebius():
    assert is_squarefree(21) and not is_squarefree(45) and is_squarefree(1253)
    assert (moebius(1), moebius(4), moebius(6), moebius(30)) == (1, 0, 1, -1)
    for n in range(1, 10**5 + 1):
        assert is_squarefree(n) == (moebius(n) != 0)


def test_euler_phi_small():
    for n in range(1, 300):
        assert euler_phi(n) == sum(1 for x in range(1, n + 1) if math.gcd(x, n) == 1)


def test_crt_combine():
    assert crt_combine([(0, 3), (0, 5)]) == (0, 15)
    assert crt_combine([(2, 3), (3, 5)]) == (8, 15)
    assert crt_combine([(1, 2), (1, 3)]) == (1, 6)
    with pytest.raises(ValueError):
        crt_combine([(1, 4), (1, 6)])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43]), min_size=1, max_size=6, unique=True),
       st.data())
def test_crt_combine_property(moduli, data):
    res = [(data.draw(st.integers(-100, 100)), m) for m in moduli]
    x, M = crt_combine(res)
    assert M == math.prod(moduli) and 0 <= x < M
    assert all((x - r) % m == 0 for r, m in res)


def test_largest_prime_factor():
    assert largest_prime_factor(127) == 127
    assert largest_prime_factor(1235) == 19
    assert largest_prime_factor(12) == 3
    with pytest.raises(ValueError):
        largest_prime_factor(1)
