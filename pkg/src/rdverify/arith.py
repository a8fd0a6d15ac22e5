"""Exact integer helpers: Jacobi symbols, trial-division factorization, CRT."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np


@dataclass(frozen=True)
class Factorization:
    value: int
    factors: tuple[tuple[int, int], ...]

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)


def jacobi(m: int, k: int) -> int:
    """Jacobi symbol (m/k) for odd k >= 1; negative m is reduced mod k first."""
    if k <= 0 or k % 2 == 0:
        raise ValueError(f"Jacobi symbol needs an odd positive modulus, got {k}")
    m %= k
    result = 1
    while m:
        while m % 2 == 0:
            m //= 2
            if k % 8 in (3, 5):
                result = -result
        m, k = k, m
        if m % 4 == 3 and k % 4 == 3:
            result = -result
        m %= k
    return result if k == 1 else 0


def jacobi_array(m, k: int) -> np.ndarray:
    """Jacobi symbols (m_i / k) for an integer array m and one odd k >= 1."""
    if k <= 0 or k % 2 == 0:
        raise ValueError(f"Jacobi symbol needs an odd positive modulus, got {k}")
    a = np.asarray(m, dtype=np.int64) % k
    b = np.full(a.shape, k, dtype=np.int64)
    result = np.ones(a.shape, dtype=np.int64)
    live = a != 0
    while live.any():
        while True:
            even = live & (a % 2 == 0)
            if not even.any():
                break
            a = np.where(even, a // 2, a)
            result = np.where(even & ((b % 8 == 3) | (b % 8 == 5)), -result, result)
        flip = live & (a % 4 == 3) & (b % 4 == 3)
        result = np.where(flip, -result, result)
        a, b = np.where(live, b % np.maximum(a, 1), a), np.where(live, a, b)
        live = a != 0
    return np.where(b == 1, result, 0)


@lru_cache(maxsize=4096)
def factorize(n: int) -> Factorization:
    if n <= 0:
        raise ValueError(f"cannot factorize {n}")
    factors = []
    rest = n
    for p in (2, 3):
        e = 0
        while rest % p == 0:
            rest //= p
            e += 1
        if e:
            factors.append((p, e))
    p = 5
    step = 2
    while p * p <= rest:
        e = 0
        while rest % p == 0:
            rest //= p
            e += 1
        if e:
            factors.append((p, e))
        p += step
        step = 6 - step
    if rest > 1:
        factors.append((rest, 1))
    return Factorization(n, tuple(factors))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return factorize(n).factors == ((n, 1),)


def is_squarefree(n: int) -> bool:
    return all(e == 1 for _, e in factorize(n).factors)


def moebius(n: int) -> int:
    fac = factorize(n).factors
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def euler_phi(n: int) -> int:
    out = n
    for p, _ in factorize(n).factors:
        out = out // p * (p - 1)
    return out


def largest_prime_factor(n: int) -> int:
    if n <= 1:
        raise ValueError(f"{n} has no prime factor")
    return factorize(n).factors[-1][0]


def crt_combine(residues) -> tuple[int, int]:
    """Combine ``[(r_i, m_i), ...]`` with pairwise coprime moduli into ``(r, prod m_i)``."""
    x, mod = 0, 1
    for r, m in residues:
        if m <= 0:
            raise ValueError(f"modulus must be positive, got {m}")
        if math.gcd(mod, m) != 1:
            raise ValueError(f"moduli {mod} and {m} are not coprime")
        t = ((r - x) * pow(mod, -1, m)) % m
        x += mod * t
        mod *= m
    return x % mod, mod


def lcm(*values: int) -> int:
    return reduce(lambda x, y: x * y // math.gcd(x, y), values, 1)


def multiplicative_order(x: int, m: int) -> int:
    """Order of x in (Z/m)^*."""
    if math.gcd(x, m) != 1:
        raise ValueError(f"{x} is not a unit mod {m}")
    if m == 1:
        return 1
    order = euler_phi(m)
    for p, _ in factorize(order).factors:
        while order % p == 0 and pow(x, order // p, m) == 1:
            order //= p
    return order


def next_prime(n: int) -> int:
    n += 1
    while not is_prime(n):
        n += 1
    return n
