"""Dirichlet characters of odd modulus.

A character mod q is stored as an exponent vector over a fixed basis of
(Z/q)^*: one generator per prime power, namely the smallest primitive root
mod p^k lifted by CRT to be 1 on the other components.  If generator g_i
has order e_i and exponent t_i, then chi(g_i) = zeta_N^(t_i * N / e_i) where
N is the exact order of chi and zeta_N = exp(2 pi i / N).

Every character carries a value table ``exps`` of length q: ``exps[x]`` is
the exponent k with chi(x) = zeta_N^k, or -1 when gcd(x, q) > 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from rdverify.arith import factorize, is_squarefree, lcm


@dataclass(frozen=True)
class UnitGroupBasis:
    modulus: int
    generators: tuple[tuple[int, int], ...]  # (g_i mod q, order e_i)
    prime_powers: tuple[tuple[int, int], ...]  # (p, p^k) per generator
    log_table: np.ndarray = field(repr=False, compare=False)  # shape (len(generators), q), -1 off units

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.generators)

    def log(self, x: int) -> tuple[int, ...] | None:
        x %= self.modulus
        logs = tuple(int(v) for v in self.log_table[:, x])
        if any(v < 0 for v in logs):
            return None
        return logs


def _smallest_primitive_root(p: int, pk: int) -> int:
    phi = pk // p * (p - 1)
    qs = [ell for ell, _ in factorize(phi).factors]
    for g in range(2, pk):
        if g % p == 0:
            continue
        if all(pow(g, phi // ell, pk) != 1 for ell in qs):
            return g
    raise AssertionError(f"no primitive root mod {pk}")


@lru_cache(maxsize=None)
def unit_group_basis(q: int) -> UnitGroupBasis:
    if q < 1:
        raise ValueError(f"modulus must be positive, got {q}")
    if q % 2 == 0:
        raise ValueError(f"even modulus {q} is not supported")
    gens = []
    powers = []
    logs = []
    for p, k in factorize(q).factors if q > 1 else ():
        pk = p**k
        e = pk // p * (p - 1)
        g = _smallest_primitive_root(p, pk)
        rest = q // pk
        # lift: G = g mod p^k, G = 1 mod rest
        G = (g * rest * pow(rest, -1, pk) + pk * pow(pk, -1, rest)) % q if rest > 1 else g
        local = np.full(pk, -1, dtype=np.int64)
        x = 1
        for i in range(e):
            local[x] = i
            x = x * g % pk
        gens.append((G, e))
        powers.append((p, pk))
        logs.append(local[np.arange(q) % pk])
    table = np.array(logs, dtype=np.int64).reshape(len(gens), q)
    table.setflags(write=False)
    return UnitGroupBasis(q, tuple(gens), tuple(powers), table)


@dataclass(frozen=True, eq=False)
class DirichletCharacter:
    modulus: int
    exponents: tuple[int, ...]
    order: int
    exps: np.ndarray = field(repr=False)

    @classmethod
    def from_exponents(cls, q: int, exponents) -> DirichletCharacter:
        basis = unit_group_basis(q)
        exponents = tuple(int(t) for t in exponents)
        if len(exponents) != len(basis.generators):
            raise ValueError(f"need {len(basis.generators)} exponents mod {q}, got {len(exponents)}")
        for t, e in zip(exponents, basis.orders):
            if not 0 <= t < e:
                raise ValueError(f"exponent {t} out of range for generator order {e}")
        N = lcm(*(e // math.gcd(t, e) for t, e in zip(exponents, basis.orders)))
        exps = np.zeros(q, dtype=np.int64)
        for t, e, row in zip(exponents, basis.orders, basis.log_table):
            exps = exps + row * (t * N // e)
        units = (basis.log_table >= 0).all(axis=0) if len(exponents) else np.ones(q, dtype=bool)
        exps = np.where(units, exps % N, -1)
        exps.setflags(write=False)
        return cls(q, exponents, N, exps)

    @classmethod
    def principal(cls, q: int) -> DirichletCharacter:
        return cls.from_exponents(q, [0] * len(unit_group_basis(q).generators))

    @property
    def basis(self) -> UnitGroupBasis:
        return unit_group_basis(self.modulus)

    def __call__(self, x: int) -> int | None:
        """Exponent k with chi(x) = zeta_N^k, or None if chi(x) = 0."""
        k = int(self.exps[x % self.modulus])
        return None if k < 0 else k

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DirichletCharacter)
            and self.modulus == other.modulus
            and self.exponents == other.exponents
        )

    def __hash__(self) -> int:
        return hash((self.modulus, self.exponents))

    def __mul__(self, other: DirichletCharacter) -> DirichletCharacter:
        return multiply(self, other)

    @property
    def parity(self) -> int:
        """chi(-1) as +1 or -1."""
        return -1 if sum(self.exponents) % 2 else 1

    @property
    def is_odd(self) -> bool:
        return self.parity == -1

    @property
    def is_principal(self) -> bool:
        return self.order == 1

    @property
    def is_complex(self) -> bool:
        return self.order > 2

    def conductor(self) -> int:
        f = 1
        for (p, pk), t, e in zip(self.basis.prime_powers, self.exponents, self.basis.orders):
            o = e // math.gcd(t, e)
            if o == 1:
                continue
            s = 0
            while o % p == 0:
                o //= p
                s += 1
            f *= p ** (s + 1)
        return f

    @property
    def is_primitive(self) -> bool:
        return self.conductor() == self.modulus

    def conj(self) -> DirichletCharacter:
        return self.power(-1)

    def power(self, k: int) -> DirichletCharacter:
        return DirichletCharacter.from_exponents(
            self.modulus, [(t * k) % e for t, e in zip(self.exponents, self.basis.orders)]
        )

    def component(self, i: int) -> DirichletCharacter:
        """Restriction to the i-th prime-power factor of the modulus."""
        _, pk = self.basis.prime_powers[i]
        return DirichletCharacter.from_exponents(pk, [self.exponents[i]])

    def exps_at_order(self, M: int) -> np.ndarray:
        """Value table with exponents expressed in zeta_M (N must divide M)."""
        if M % self.order:
            raise ValueError(f"order {self.order} does not divide {M}")
        return np.where(self.exps >= 0, self.exps * (M // self.order), -1)

    def to_dict(self) -> dict:
        return {
            "modulus": str(self.modulus),
            "generators": [
                {"generator": str(g), "order": str(e), "exponent": str(t)}
                for (g, e), t in zip(self.basis.generators, self.exponents)
            ],
            "order": str(self.order),
        }

    @classmethod
    def from_dict(cls, data: dict) -> DirichletCharacter:
        q = int(data["modulus"])
        basis = unit_group_basis(q)
        gens = data["generators"]
        declared = tuple((int(g["generator"]), int(g["order"])) for g in gens)
        if declared != basis.generators:
            raise ValueError(f"generators {declared} do not match the canonical basis mod {q}")
        chi = cls.from_exponents(q, [int(g["exponent"]) for g in gens])
        if chi.order != int(data["order"]):
            raise ValueError(f"declared order {data['order']} but character has order {chi.order}")
        return chi


def enumerate_characters(q: int, odd: bool | None = None, primitive: bool | None = None,
                         complex: bool | None = None) -> list[DirichletCharacter]:
    """Characters mod q in lexicographic exponent order, filtered by the given flags."""
    basis = unit_group_basis(q)
    out = []
    for ts in itertools.product(*(range(e) for e in basis.orders)):
        if odd is not None and (sum(ts) % 2 == 1) != odd:
            continue
        chi = DirichletCharacter.from_exponents(q, ts)
        if primitive is not None and chi.is_primitive != primitive:
            continue
        if complex is not None and chi.is_complex != complex:
            continue
        out.append(chi)
    return out


def conductor_bruteforce(chi: DirichletCharacter) -> int:
    """Smallest f | q such that chi is constant on units congruent mod f."""
    q = chi.modulus
    units = np.flatnonzero(chi.exps >= 0)
    for f in sorted(d for d in range(1, q + 1) if q % d == 0):
        ok = True
        seen: dict[int, int] = {}
        for x in units:
            key = int(x) % f
            v = int(chi.exps[x])
            if seen.setdefault(key, v) != v:
                ok = False
                break
        if ok:
            return f
    return q


def kronecker_chi_d(d: int) -> DirichletCharacter:
    """The real primitive character (./d) for squarefree d = 1 mod 4."""
    if d <= 0 or d % 4 != 1 or not is_squarefree(d):
        raise ValueError(f"d={d} must be positive, squarefree and 1 mod 4")
    basis = unit_group_basis(d)
    return DirichletCharacter.from_exponents(d, [e // 2 for e in basis.orders])


def multiply(chi1: DirichletCharacter, chi2: DirichletCharacter) -> DirichletCharacter:
    """Pointwise product, as a character mod lcm of the two moduli."""
    L = lcm(chi1.modulus, chi2.modulus)
    M = lcm(chi1.order, chi2.order)
    basis = unit_group_basis(L)
    ts = []
    for g, e in basis.generators:
        k = (chi1(g) * (M // chi1.order) + chi2(g) * (M // chi2.order)) % M
        assert (k * e) % M == 0
        ts.append(k * e // M)
    return DirichletCharacter.from_exponents(L, ts)


def decompose_plus_minus(chi: DirichletCharacter) -> tuple[DirichletCharacter, DirichletCharacter]:
    """Split a primitive chi of order > 2 as chi_plus * chi_minus.

    chi_minus is the product of the quadratic prime components (a primitive
    character of order <= 2), chi_plus the rest; their conductors are
    coprime and chi_plus^2 is primitive.
    """
    if chi.order <= 2:
        raise ValueError("decomposition needs a character of order > 2")
    if not chi.is_primitive:
        raise ValueError("decomposition needs a primitive character")
    plus_idx, minus_idx = [], []
    for i, (t, e) in enumerate(zip(chi.exponents, chi.basis.orders)):
        (minus_idx if e // math.gcd(t, e) == 2 else plus_idx).append(i)
    pp = chi.basis.prime_powers
    q_plus = math.prod(pp[i][1] for i in plus_idx)
    q_minus = math.prod(pp[i][1] for i in minus_idx)
    chi_plus = DirichletCharacter.from_exponents(q_plus, [chi.exponents[i] for i in plus_idx])
    chi_minus = DirichletCharacter.from_exponents(q_minus, [chi.exponents[i] for i in minus_idx])
    sq = chi_plus.power(2)
    if not (sq.is_primitive and chi_minus.is_primitive and chi_minus.order <= 2):
        raise RuntimeError(f"plus/minus decomposition failed for {chi}")
    return chi_plus, chi_minus
