"""Exact arithmetic in Q(zeta_N) and reduction modulo primes above r.

Elements are stored in the power basis 1, zeta, ..., zeta^(phi(N)-1) as an
integer numerator vector over one positive common denominator, kept in
lowest terms, so equality is structural.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_factor, gf_irreducible_p, gf_rem

from rdverify.arith import euler_phi, is_prime, jacobi, multiplicative_order
from rdverify.characters import DirichletCharacter, kronecker_chi_d
from rdverify.errors import PreconditionError


def _poly_divexact(num: list[int], den: list[int]) -> list[int]:
    # low-to-high coefficient lists, den monic
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        c = num[i + len(den) - 1]
        out[i] = c
        if c:
            for j, dj in enumerate(den):
                num[i + j] -= c * dj
    assert not any(num[: len(den) - 1]), "inexact polynomial division"
    return out


@lru_cache(maxsize=None)
def cyclotomic_poly(N: int) -> tuple[int, ...]:
    """Coefficients of Phi_N, lowest degree first."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    poly = [-1] + [0] * (N - 1) + [1]
    for d in range(1, N):
        if N % d == 0:
            poly = _poly_divexact(poly, list(cyclotomic_poly(d)))
    return tuple(poly)


@lru_cache(maxsize=None)
def _power_table(N: int) -> tuple[tuple[int, ...], ...]:
    """Row k holds zeta_N^k in the power basis, for 0 <= k < N."""
    phi = euler_phi(N)
    cyc = cyclotomic_poly(N)
    rows = []
    cur = [1] + [0] * (phi - 1)
    for _ in range(N):
        rows.append(tuple(cur))
        lead = cur[-1]
        cur = [0] + cur[:-1]
        if lead:
            cur = [c - lead * cyc[j] for j, c in enumerate(cur)]
    return tuple(rows)


@lru_cache(maxsize=None)
def power_matrix(N: int) -> np.ndarray:
    m = np.array(_power_table(N), dtype=np.int64)
    m.setflags(write=False)
    return m


def _normalize(num, den):
    g = den
    for c in num:
        g = math.gcd(g, c)
        if g == 1:
            break
    if den < 0:
        g = -g
    if g != 1:
        num = tuple(c // g for c in num)
        den //= g
    return tuple(num), den


@dataclass(frozen=True)
class CycElement:
    N: int
    num: tuple[int, ...]
    den: int = 1

    def __post_init__(self):
        if len(self.num) != euler_phi(self.N):
            raise ValueError(f"need {euler_phi(self.N)} coefficients for N={self.N}")
        num, den = _normalize(tuple(int(c) for c in self.num), int(self.den))
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    # constructors
    @classmethod
    def zero(cls, N: int) -> CycElement:
        return cls(N, (0,) * euler_phi(N))

    @classmethod
    def one(cls, N: int) -> CycElement:
        return cls.integer(N, 1)

    @classmethod
    def integer(cls, N: int, c) -> CycElement:
        c = Fraction(c)
        return cls(N, (c.numerator,) + (0,) * (euler_phi(N) - 1), c.denominator)

    @classmethod
    def zeta(cls, N: int, k: int = 1) -> CycElement:
        return cls(N, _power_table(N)[k % N])

    @classmethod
    def from_histogram(cls, N: int, hist) -> CycElement:
        """sum_k hist[k] * zeta_N^k."""
        table = _power_table(N)
        acc = [0] * euler_phi(N)
        for k, c in enumerate(hist):
            c = int(c)
            if c:
                for j, t in enumerate(table[k % N]):
                    if t:
                        acc[j] += c * t
        return cls(N, tuple(acc))

    @classmethod
    def from_exponents(cls, N: int, exponents, weights) -> CycElement:
        """sum_i weights[i] * zeta_N^exponents[i] (negative exponents mean the term is zero)."""
        e = np.asarray(exponents, dtype=np.int64)
        w = np.asarray(weights, dtype=np.int64)
        mask = e >= 0
        hist = np.zeros(N, dtype=object)
        for k, c in zip(e[mask].tolist(), w[mask].tolist()):
            hist[k] += c
        return cls.from_histogram(N, hist)

    # structure
    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.den) for c in self.num)

    @property
    def is_integral(self) -> bool:
        return self.den == 1

    def is_zero(self) -> bool:
        return not any(self.num)

    def lift(self, M: int) -> CycElement:
        """The same element written in Q(zeta_M), for N | M."""
        if M == self.N:
            return self
        if M % self.N:
            raise ValueError(f"cannot lift from order {self.N} to {M}")
        step = M // self.N
        hist = [0] * M
        for j, c in enumerate(self.num):
            hist[j * step] = c
        return CycElement.from_histogram(M, hist).scale(Fraction(1, self.den))

    def _coerce(self, other) -> tuple[CycElement, CycElement]:
        if isinstance(other, (int, Fraction)):
            return self, CycElement.integer(self.N, other)
        if not isinstance(other, CycElement):
            return NotImplemented, NotImplemented
        if other.N == self.N:
            return self, other
        M = max(self.N, other.N)
        if M % self.N or M % other.N:
            raise ValueError(f"incompatible cyclotomic orders {self.N} and {other.N}")
        return self.lift(M), other.lift(M)

    def __add__(self, other):
        x, y = self._coerce(other)
        if x is NotImplemented:
            return NotImplemented
        den = x.den * y.den // math.gcd(x.den, y.den)
        fx, fy = den // x.den, den // y.den
        return CycElement(x.N, tuple(a * fx + b * fy for a, b in zip(x.num, y.num)), den)

    __radd__ = __add__

    def __neg__(self):
        return CycElement(self.N, tuple(-c for c in self.num), self.den)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        x, y = self._coerce(other)
        if x is NotImplemented:
            return NotImplemented
        N = x.N
        prod = [0] * N
        for i, a in enumerate(x.num):
            if a:
                for j, b in enumerate(y.num):
                    if b:
                        prod[(i + j) % N] += a * b
        out = CycElement.from_histogram(N, prod)
        return CycElement(N, out.num, x.den * y.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(1 / Fraction(other))
        return NotImplemented

    def scale(self, c) -> CycElement:
        c = Fraction(c)
        return CycElement(self.N, tuple(x * c.numerator for x in self.num), self.den * c.denominator)

    def galois(self, k: int) -> CycElement:
        """Apply zeta -> zeta^k (gcd(k, N) = 1)."""
        if math.gcd(k, self.N) != 1:
            raise ValueError(f"{k} is not a unit mod {self.N}")
        hist = [0] * self.N
        for j, c in enumerate(self.num):
            hist[(j * k) % self.N] += c
        return CycElement.from_histogram(self.N, hist).scale(Fraction(1, self.den))

    def conj(self) -> CycElement:
        return self.galois(-1)

    def embed(self, k: int = 1) -> complex:
        return embed_complex(self, k)

    def __repr__(self) -> str:
        terms = [f"{c}*z^{j}" for j, c in enumerate(self.num) if c]
        body = " + ".join(terms) or "0"
        return f"CycElement(N={self.N}, ({body})/{self.den})" if self.den != 1 else f"CycElement(N={self.N}, {body})"


def embed_complex(x: CycElement, k: int = 1) -> complex:
    """Image of x under zeta_N -> exp(2 pi i k / N)."""
    if math.gcd(k, x.N) != 1:
        raise ValueError(f"embedding index {k} is not a unit mod {x.N}")
    w = cmath.exp(2j * math.pi * k / x.N)
    return sum(c * w**j for j, c in enumerate(x.num)) / x.den


# finite fields F_{r^deg} = F_r[x]/(poly); elements are int64 vectors of length deg

def _ff_mulx_matrix(poly: tuple[int, ...], r: int) -> np.ndarray:
    deg = len(poly) - 1
    m = np.zeros((deg, deg), dtype=np.int64)
    for j in range(deg - 1):
        m[j, j + 1] = 1
    m[deg - 1, :] = [(-c) % r for c in poly[:-1]]
    return m


def ff_mul(x: np.ndarray, y: np.ndarray, poly: tuple[int, ...], r: int) -> np.ndarray:
    deg = len(poly) - 1
    prod = np.zeros(2 * deg - 1, dtype=object)
    for i in range(deg):
        if x[i]:
            prod[i: i + deg] += int(x[i]) * y.astype(object)
    for k in range(2 * deg - 2, deg - 1, -1):
        c = prod[k] % r
        if c:
            for j in range(deg + 1):
                prod[k - deg + j] -= c * poly[j]
    return np.array([int(c) % r for c in prod[:deg]], dtype=np.int64)


@dataclass(frozen=True)
class ResidueFieldTarget:
    """A prime R above r in Z[zeta_N], given by an irreducible factor of Phi_N mod r."""

    r: int
    N: int
    poly: tuple[int, ...]  # monic, lowest degree first, coefficients in [0, r)
    zpow: np.ndarray = field(repr=False, compare=False)  # row k = image of zeta^k

    @classmethod
    def build(cls, r: int, N: int, poly) -> ResidueFieldTarget:
        poly = tuple(int(c) % r for c in poly)
        if poly[-1] != 1:
            raise ValueError("residue field polynomial must be monic")
        deg = len(poly) - 1
        mulx = _ff_mulx_matrix(poly, r)
        rows = np.zeros((N, deg), dtype=np.int64)
        cur = np.zeros(deg, dtype=np.int64)
        cur[0] = 1
        for k in range(N):
            rows[k] = cur
            cur = cur @ mulx % r
        rows.setflags(write=False)
        return cls(r, N, poly, rows)

    @property
    def deg(self) -> int:
        return len(self.poly) - 1

    @property
    def zeta_image(self) -> np.ndarray:
        return self.zpow[1 % self.N]

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return ff_mul(x, y, self.poly, self.r)

    def mul_matrix(self, y: np.ndarray) -> np.ndarray:
        """Matrix M with x @ M = x * y for row vectors x."""
        mulx = _ff_mulx_matrix(self.poly, self.r)
        rows = np.zeros((self.deg, self.deg), dtype=np.int64)
        cur = np.asarray(y, dtype=np.int64) % self.r
        for j in range(self.deg):
            rows[j] = cur
            cur = cur @ mulx % self.r
        return rows

    def reduce_histogram(self, hist) -> np.ndarray:
        """Image of sum_k hist[k] zeta^k; hist may be (N,) or (m, N)."""
        h = np.asarray(hist, dtype=np.int64) % self.r
        return h @ self.zpow % self.r

    def to_dict(self) -> dict:
        return {"r": str(self.r), "N": str(self.N), "poly": [str(c) for c in self.poly]}

    @classmethod
    def from_dict(cls, data: dict) -> ResidueFieldTarget:
        return cls.build(int(data["r"]), int(data["N"]), [int(c) for c in data["poly"]])

    def is_valid(self) -> bool:
        """poly is monic irreducible mod r and divides Phi_N mod r."""
        if not is_prime(self.r) or any(not 0 <= c < self.r for c in self.poly):
            return False
        hi = [ZZ(c) for c in reversed(self.poly)]
        cyc = [ZZ(c % self.r) for c in reversed(cyclotomic_poly(self.N))]
        if not gf_irreducible_p(hi, self.r, ZZ):
            return False
        return not any(gf_rem(cyc, hi, self.r, ZZ))


@lru_cache(maxsize=None)
def primes_above(r: int, N: int) -> tuple[ResidueFieldTarget, ...]:
    """One target per distinct monic irreducible factor of Phi_N mod r, in lexicographic order."""
    if r == 2 or not is_prime(r):
        raise ValueError(f"r={r} must be an odd prime")
    cyc = [ZZ(c % r) for c in reversed(cyclotomic_poly(N))]
    _, factors = gf_factor(cyc, r, ZZ)
    polys = sorted({tuple(int(c) for c in reversed(f)) for f, _ in factors})
    return tuple(ResidueFieldTarget.build(r, N, p) for p in polys)


def reduce(x: CycElement, R: ResidueFieldTarget) -> np.ndarray:
    if not x.is_integral:
        raise ValueError("only integral elements can be reduced modulo a prime")
    if R.N % x.N:
        raise ValueError(f"element of order {x.N} does not live in Q(zeta_{R.N})")
    x = x.lift(R.N)
    coeffs = np.array([c % R.r for c in x.num], dtype=np.int64)
    return coeffs @ R.zpow[: len(coeffs)] % R.r


# character-attached quantities

def _signed_histogram(N: int, exps: np.ndarray, weights: np.ndarray) -> list[int]:
    hist = [0] * N
    mask = exps >= 0
    for k, w in zip(exps[mask].tolist(), weights[mask].tolist()):
        hist[k] += w
    return hist


def m_chi(chi: DirichletCharacter) -> CycElement:
    """sum_{1 <= a < q} a chi(a)."""
    a = np.arange(chi.modulus, dtype=np.int64)
    return CycElement.from_histogram(chi.order, _signed_histogram(chi.order, chi.exps, a))


def m_chi_descending(chi: DirichletCharacter) -> CycElement:
    """Same sum accumulated term by term from a = q-1 down to 1."""
    total = CycElement.zero(chi.order)
    for a in range(chi.modulus - 1, 0, -1):
        k = chi(a)
        if k is not None:
            total = total + CycElement.zeta(chi.order, k).scale(a)
    return total


def _require_odd_primitive(chi: DirichletCharacter) -> None:
    if chi.modulus <= 1 or not chi.is_odd or not chi.is_primitive:
        raise PreconditionError("needs an odd primitive character of modulus > 1")


def L0_exact(chi: DirichletCharacter) -> CycElement:
    """L(0, chi) = -m_chi / q for odd primitive chi."""
    _require_odd_primitive(chi)
    return -m_chi(chi) / chi.modulus


def L0_product_integral(chi: DirichletCharacter, d: int) -> CycElement:
    """L(0, chi chi_d), summed over a mod q d, checked to be an algebraic integer."""
    _require_odd_primitive(chi)
    q = chi.modulus
    if math.gcd(q, d) != 1:
        raise PreconditionError(f"gcd(q={q}, d={d}) > 1")
    chi_d = kronecker_chi_d(d)
    a = np.arange(1, q * d + 1, dtype=np.int64)
    signs = np.where(chi_d.exps[a % d] == 0, 1, -1)
    signs = np.where(chi_d.exps[a % d] < 0, 0, signs)
    exps = np.where(signs == 0, -1, chi.exps[a % q])
    total = CycElement.from_histogram(chi.order, _signed_histogram(chi.order, exps, a * signs))
    value = -total / (q * d)
    if not value.is_integral:
        raise PreconditionError(f"L(0, chi chi_{d}) is not integral: {value}")
    return value


def jacobi_sum(chi: DirichletCharacter) -> CycElement:
    """sum over a + b = 1 mod q of chi(a) chi(b)."""
    q = chi.modulus
    a = np.arange(q, dtype=np.int64)
    ea = chi.exps
    eb = chi.exps[(1 - a) % q]
    exps = np.where((ea >= 0) & (eb >= 0), (ea + eb) % chi.order, -1)
    return CycElement.from_histogram(chi.order, _signed_histogram(chi.order, exps, np.ones(q, dtype=np.int64)))


def gauss_sum_numeric(chi: DirichletCharacter) -> complex:
    q, N = chi.modulus, chi.order
    a = np.arange(q)
    mask = chi.exps >= 0
    vals = np.exp(2j * np.pi * chi.exps[mask] / N) * np.exp(2j * np.pi * a[mask] / q)
    return complex(vals.sum())


def legendre_symbol_table(q: int) -> np.ndarray:
    """jacobi(x, q) for 0 <= x < q."""
    return np.array([jacobi(x, q) for x in range(q)], dtype=np.int64)


def residue_degree(r: int, N: int) -> int:
    return multiplicative_order(r % N, N) if N > 1 else 1
