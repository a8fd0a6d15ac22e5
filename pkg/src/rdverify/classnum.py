"""Class numbers of real quadratic fields Q(sqrt d), d = 1 mod 4 squarefree.

h^+ is the number of rho-cycles of reduced indefinite forms of
discriminant d; h = h^+ when the fundamental unit has norm -1 and h^+/2
otherwise.  The analytic class number formula gives an independent check.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from rdverify.arith import factorize, is_prime, is_squarefree, jacobi
from rdverify.errors import PreconditionError
from rdverify.zetaforms import QuadForm, cf_expand, cf_states


def _check_d(d: int, squarefree: bool = True) -> None:
    s = math.isqrt(d) if d > 0 else 0
    if d <= 1 or d % 4 != 1 or s * s == d:
        raise ValueError(f"d={d} must be a non-square positive integer = 1 mod 4")
    if squarefree and not is_squarefree(d):
        raise ValueError(f"d={d} is not squarefree")


def is_reduced(f: QuadForm, d: int) -> bool:
    s = math.isqrt(d)
    B, A2 = f.B, 2 * abs(f.A)
    if not 0 < B <= s:
        return False
    # sqrt d - B < 2|A| < sqrt d + B
    return A2 + B > s and (A2 <= B or A2 - B <= s)


def reduced_forms(d: int) -> list[QuadForm]:
    """All reduced forms (A, B, C) of discriminant d, sorted by (B, A)."""
    _check_d(d, squarefree=False)
    s = math.isqrt(d)
    out = []
    for B in range(1 if d % 2 else 2, s + 1, 2):
        N = (d - B * B) // 4
        lo = (s - B) // 2 + 1  # smallest |A| with 2|A| + B > sqrt d
        hi = (s + B) // 2  # largest |A| with 2|A| < sqrt d + B
        if hi < lo:
            continue
        cand = np.arange(lo, hi + 1, dtype=np.int64)
        for A in cand[N % cand == 0].tolist():
            C = N // A
            out.append(QuadForm(A, B, -C))
            out.append(QuadForm(-A, B, C))
    out.sort(key=lambda f: (f.B, f.A))
    return out


def rho(f: QuadForm, d: int) -> QuadForm:
    """One reduction step: (A, B, C) -> (C, B', (B'^2 - d) / 4C)."""
    s = math.isqrt(d)
    m = 2 * abs(f.C)
    B2 = s - ((s + f.B) % m)
    return QuadForm(f.C, B2, (B2 * B2 - d) // (4 * f.C))


def form_cycles(d: int) -> list[list[QuadForm]]:
    forms = reduced_forms(d)
    index = {f: i for i, f in enumerate(forms)}
    seen = [False] * len(forms)
    cycles = []
    for i, f in enumerate(forms):
        if seen[i]:
            continue
        cycle = []
        g = f
        while True:
            j = index.get(g)
            if j is None:
                raise AssertionError(f"rho left the reduced set at {g} for d={d}")
            if seen[j]:
                break
            seen[j] = True
            cycle.append(g)
            g = rho(g, d)
        if g != f:
            raise AssertionError(f"rho orbit of {f} is not a cycle for d={d}")
        cycles.append(cycle)
    return cycles


@dataclass(frozen=True)
class FundamentalUnit:
    """epsilon = x + y sqrt(d) > 1 with x, y rational (half-integers allowed)."""

    d: int
    x: Fraction
    y: Fraction
    period: int
    log: float

    @property
    def norm(self) -> int:
        return int(self.x * self.x - self.d * self.y * self.y)


def fundamental_unit(d: int) -> FundamentalUnit:
    """Product of the complete quotients over one period of (1 + sqrt d) / 2."""
    _check_d(d, squarefree=False)
    period = cf_expand(1, 2, d).length
    sd = math.sqrt(d)
    x, y = Fraction(1), Fraction(0)
    log = 0.0
    states = cf_states(1, 2, d)
    next(states)
    for _ in range(period):
        P, Q, _ = next(states)  # (1 + sqrt d) / 2 needs no rescaling, so D = d here
        xi_x, xi_y = Fraction(P, Q), Fraction(1, Q)
        x, y = x * xi_x + y * xi_y * d, x * xi_y + y * xi_x
        log += math.log((P + sd) / Q)
    return FundamentalUnit(d, x, y, period, log)


def unit_log(d: int) -> float:
    """log of the fundamental unit, without building its exact coordinates."""
    _check_d(d, squarefree=False)
    period = cf_expand(1, 2, d).length
    sd = math.sqrt(d)
    states = cf_states(1, 2, d)
    next(states)
    log = 0.0
    for _ in range(period):
        P, Q, _ = next(states)
        log += math.log((P + sd) / Q)
    return log


def unit_norm(d: int) -> int:
    return -1 if cf_expand(1, 2, d).length % 2 else 1


@dataclass(frozen=True)
class FormClassData:
    d: int
    reduced_forms: tuple[QuadForm, ...]
    cycles: tuple[tuple[QuadForm, ...], ...]
    unit_norm: int

    @property
    def h_plus(self) -> int:
        return len(self.cycles)

    @property
    def h(self) -> int:
        return self.h_plus if self.unit_norm == -1 else self.h_plus // 2


def form_class_data(d: int) -> FormClassData:
    _check_d(d)
    cycles = form_cycles(d)
    forms = tuple(f for c in cycles for f in c)
    data = FormClassData(d, forms, tuple(tuple(c) for c in cycles), unit_norm(d))
    if data.unit_norm == 1 and data.h_plus % 2:
        raise AssertionError(f"odd narrow class number with unit norm +1 for d={d}")
    return data


def class_number(d: int) -> int:
    return form_class_data(d).h


def _legendre_table(p: int) -> np.ndarray:
    """(x / p) for 0 <= x < p, by marking the squares."""
    t = -np.ones(p, dtype=np.int64)
    t[0] = 0
    x = np.arange(1, (p + 1) // 2, dtype=np.int64)
    t[x * x % p] = 1
    return t


def kronecker_values(d: int, a: np.ndarray) -> np.ndarray:
    """chi_d(a) = (a / d) for squarefree d = 1 mod 4, as a product of Legendre tables."""
    out = np.ones(a.shape, dtype=np.int64)
    for p in factorize(d).primes:
        out *= _legendre_table(p)[a % p]
    return out


def class_number_analytic(d: int, precision: int = 15) -> float:
    """sqrt(d) L(1, chi_d) / (2 log eps) with L(1, chi_d) from the finite log-sine sum."""
    _check_d(d)
    log_eps = unit_log(d)
    # for d = 1 mod 4 the Kronecker character (d / .) is the Jacobi symbol (. / d)
    a = np.arange(1, (d + 1) // 2, dtype=np.int64)
    signs = kronecker_values(d, a)
    if precision > 15:
        import mpmath

        with mpmath.workdps(precision):
            sd = mpmath.sqrt(d)
            states = cf_states(1, 2, d)
            next(states)
            log_eps = mpmath.fsum(mpmath.log((P + sd) / Q) for P, Q, _ in
                                  (next(states) for _ in range(cf_expand(1, 2, d).length)))
            total = mpmath.mpf(0)
            for x, sgn in zip(a.tolist(), signs.tolist()):
                if sgn:
                    total += sgn * mpmath.log(mpmath.sin(mpmath.pi * x / d))
            return float(-total / log_eps)
    # chi_d is even: the sum over a < d is twice the sum over a < d/2
    total = 2.0 * float(np.dot(signs.astype(np.float64), np.log(np.sin(np.pi * a / d))))
    return -total / (2.0 * log_eps)


@dataclass(frozen=True)
class FamilyMember:
    a: int
    n: int
    d: int
    squarefree: bool
    h: int | None


def enumerate_family(max_d: int) -> list[FamilyMember]:
    """All odd a, n >= 1 with (a n)^2 + 4a <= max_d, ordered by (d, a)."""
    if max_d < 13:
        raise ValueError("max_d must be at least 13")
    out = []
    a = 1
    while a * a + 4 * a <= max_d:
        n = 1
        while (a * n) ** 2 + 4 * a <= max_d:
            d = (a * n) ** 2 + 4 * a
            sf = is_squarefree(d)
            out.append(FamilyMember(a, n, d, sf, class_number(d) if sf else None))
            n += 2
        a += 2
    out.sort(key=lambda m: (m.d, m.a))
    return out


def family_csv(rows: list[FamilyMember]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "n", "d", "squarefree", "h"])
    for m in rows:
        w.writerow([m.a, m.n, m.d, int(m.squarefree), "" if m.h is None else m.h])
    return buf.getvalue()


@dataclass(frozen=True)
class DirectCheckReport:
    a: int
    n_max: int
    rows: tuple[FamilyMember, ...]

    @property
    def hits(self) -> list[FamilyMember]:
        return [m for m in self.rows if m.h == 1]


def direct_check(a: int, n_max: int) -> DirectCheckReport:
    if a <= 0 or a % 2 == 0:
        raise ValueError(f"a={a} must be odd and positive")
    rows = []
    for n in range(1, n_max + 1, 2):
        d = (a * n) ** 2 + 4 * a
        sf = is_squarefree(d)
        rows.append(FamilyMember(a, n, d, sf, class_number(d) if sf else None))
    return DirectCheckReport(a, n_max, tuple(rows))


def claim_factB_check(a: int, n: int, h: int | None = None) -> bool:
    """a and a n^2 + 4 prime, and (d/p) = -1 for every prime p != a with 2 < p < a n / 2."""
    d = (a * n) ** 2 + 4 * a
    if h is None:
        h = class_number(d)
    if h != 1:
        raise PreconditionError(f"h({d}) = {h}; the claim assumes h = 1")
    if not (is_prime(a) and is_prime(a * n * n + 4)):
        return False
    for p in range(3, (a * n + 1) // 2):
        if 2 * p < a * n and p != a and is_prime(p) and jacobi(d, p) != -1:
            return False
    return True


EXCEPTIONAL_A = (3, 5, 7, 13, 17, 19, 37, 43, 73, 127, 181, 353)


def direct_n_max(a: int, boundary: int = 1861) -> int:
    """First odd n with a n / 2 > boundary, so the direct range overlaps the sieve range."""
    n = 2 * boundary // a
    n -= 1 - n % 2
    return n + 2


@dataclass
class BaseCaseReport:
    an_max: int
    boundary: int
    checked: list[FamilyMember]
    analytic_mismatches: list[tuple[int, float, int]]

    @property
    def hits(self) -> list[FamilyMember]:
        """Every (a, n) with h = 1 found; this is the derived exception list."""
        seen = {}
        for m in self.checked:
            if m.h == 1:
                seen[(m.a, m.n)] = m
        return sorted(seen.values(), key=lambda m: (m.d, m.a))

    @property
    def max_hit_d(self) -> int:
        return max((m.d for m in self.hits), default=0)

    @property
    def ok(self) -> bool:
        return self.max_hit_d == 1253 and not self.analytic_mismatches


def base_cases(an_max: int = 2 * 353, boundary: int = 1861, exceptional=EXCEPTIONAL_A,
               analytic: bool = True) -> BaseCaseReport:
    """All a n <= an_max, then each exceptional a directly up to the sieve boundary."""
    rows: dict[tuple[int, int], FamilyMember] = {}

    def visit(a: int, n: int) -> None:
        if (a, n) in rows:
            return
        d = (a * n) ** 2 + 4 * a
        sf = is_squarefree(d)
        rows[(a, n)] = FamilyMember(a, n, d, sf, class_number(d) if sf else None)

    for a in range(1, an_max + 1, 2):
        for n in range(1, an_max // a + 1, 2):
            visit(a, n)
    for a in exceptional:
        for n in range(1, direct_n_max(a, boundary) + 1, 2):
            visit(a, n)
    mismatches = []
    if analytic:
        for m in rows.values():
            if m.h is not None:
                x = class_number_analytic(m.d)
                if abs(x - m.h) >= 0.1:
                    mismatches.append((m.d, x, m.h))
    checked = sorted(rows.values(), key=lambda m: (m.a, m.n))
    return BaseCaseReport(an_max, boundary, checked, mismatches)
