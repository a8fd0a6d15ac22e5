"""Residue sieve over pairs (a0, n0) mod P driven by arrow certificates.

A pair survives an arrow when (d/p) = -1 for every odd prime p | qr and the
arrow's congruence holds in the residue field F_{r^deg}.  Survivors are found
by a join over CRT coordinates: the pair (a mod p^k, n mod p^k) for each prime
power p^k || P is one coordinate, Legendre conditions filter single
coordinates, and an arrow is applied as soon as every prime of qr has been
joined.  Nothing enumerates P^2 pairs directly.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from rdverify import kernels
from rdverify.arith import factorize, jacobi
from rdverify.arrows import ArrowCertificate, check_certificate
from rdverify.cyclotomic import CycElement, legendre_symbol_table, reduce
from rdverify.errors import CertificateParseError
from rdverify.zetaforms import G_scaled, QuadForm, beta_parts, c_a

MODES = ("general", "r-divides-n", "q-divides-n")
PLAN_SCHEMA_VERSION = "1"
REPORT_SCHEMA_VERSION = "1"
DEFAULT_SURVIVOR_CAP = 1000
CHUNK_ROWS = 1 << 20

CERT_DIR = Path(__file__).parent / "data" / "certificates"
PLAN_DIR = Path(__file__).parent / "data" / "plans"


# Legendre filter

def legendre_test(a0: int, n0: int, p: int) -> bool:
    """((a0 n0)^2 + 4 a0 / p) == -1; a symbol of 0 counts as failure."""
    return jacobi(((a0 * n0) ** 2 + 4 * a0) % p, p) == -1


@lru_cache(maxsize=None)
def legendre_bitmap(p: int) -> np.ndarray:
    """Boolean table over (a mod p, n mod p) of pairs passing the Legendre test at p."""
    table = legendre_symbol_table(p)
    a = np.arange(p, dtype=np.int64)[:, None]
    n = np.arange(p, dtype=np.int64)[None, :]
    out = table[((a * n) ** 2 + 4 * a) % p] == -1
    out.setflags(write=False)
    return out


def odd_prime_factors(m: int) -> tuple[int, ...]:
    return tuple(p for p, _ in factorize(m).factors if p != 2) if m > 1 else ()


# Arrow constraints

@dataclass(eq=False)
class ArrowConstraint:
    """An arrow certificate with everything its congruence needs, reduced into F_{r^deg}."""

    certificate: ArrowCertificate
    mode: str
    chi_plus_at_minus1: int
    mu_minus: int
    q2gamma: np.ndarray
    jacobi_plus: np.ndarray
    prod_p_minus_one: np.ndarray
    prod_p2_minus_one: np.ndarray
    four_pm_matrix: np.ndarray = field(repr=False)  # x @ M = 4 Pm x
    kz: np.ndarray = field(repr=False)  # row k = zeta^k K with K the constant of the n-term
    jacobi_table: np.ndarray = field(repr=False)  # (x / q) for x mod q
    _gmemo: np.ndarray | None = field(default=None, repr=False)
    _gfilled: np.ndarray | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def q(self) -> int:
        return self.certificate.q

    @property
    def r(self) -> int:
        return self.certificate.r

    @property
    def chi(self):
        return self.certificate.character

    @property
    def target(self):
        return self.certificate.target

    @property
    def primes(self) -> tuple[int, ...]:
        return odd_prime_factors(self.q * self.r)

    @property
    def label(self) -> str:
        return f"{self.q}->{self.r} [{self.mode}]"

    @property
    def memo_size(self) -> int:
        return 0 if self._gfilled is None else int(self._gfilled.sum())

    def n_term_constant(self) -> np.ndarray:
        return self.kz[0]

    def g_residues(self, aq: np.ndarray, nq: np.ndarray) -> np.ndarray:
        """Reductions of q^2 G(f1, chi) for the keys (a mod q, n mod q), filled lazily."""
        q = self.q
        keys = np.asarray(aq, dtype=np.int64) % q * q + np.asarray(nq, dtype=np.int64) % q
        if self._gfilled is None:
            with self._lock:
                if self._gfilled is None:
                    self._gmemo = np.zeros((q * q, self.target.deg), dtype=np.int64)
                    self._gfilled = np.zeros(q * q, dtype=bool)
        missing = np.unique(keys[~self._gfilled[keys]])
        if missing.size:
            with self._lock:
                missing = missing[~self._gfilled[missing]]
                if missing.size:
                    hist = kernels.f1_histograms(self.chi.exps, q, self.chi.order, missing // q, missing % q)
                    self._gmemo[missing] = self.target.reduce_histogram(hist)
                    self._gfilled[missing] = True
        return self._gmemo[keys]

    def evaluate(self, a: np.ndarray, n: np.ndarray) -> np.ndarray:
        """Vectorized congruence test; a and n are integer arrays (any representatives)."""
        q, r, N = self.q, self.r, self.chi.order
        a = np.asarray(a, dtype=np.int64)
        n = np.asarray(n, dtype=np.int64)
        aq, nq = a % q, n % q
        d_q = ((aq * nq % q) ** 2 + 4 * aq) % q
        e_d = self.chi.exps[d_q]
        ok = e_d >= 0
        lhs = np.zeros((a.size, self.target.deg), dtype=np.int64)
        if self.mode != "q-divides-n":
            lhs += self.g_residues(aq, nq) @ self.four_pm_matrix % r
        if self.mode != "r-divides-n":
            e_a = self.chi.exps[aq]
            ed = np.where(ok, e_d, 0)
            t = (a % r)[:, None] * self.kz[ed] % r
            cbar = self.kz[(ed - e_a) % N] * (e_a >= 0)[:, None]
            scale = (n % r) * (self.jacobi_table[d_q] % r) % r
            lhs += (t + cbar) % r * scale[:, None] % r
        return ok & ~(lhs % r).any(axis=1)


def _residue(x: CycElement, R) -> np.ndarray:
    return reduce(x.lift(R.N), R)


def precompute_constraint(cert: ArrowCertificate, mode: str) -> ArrowConstraint:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    chi, R = cert.character, cert.target
    r, N = R.r, chi.order
    parts = beta_parts(chi)
    q2g = _residue(parts.gamma_scaled, R)
    jp = _residue(parts.jacobi_plus, R)
    pm = _residue(parts.prod_p_minus_one, R)
    pp = _residue(parts.prod_p2_minus_one, R)
    K = R.mul(R.mul(q2g, jp), pp) * (parts.mu_minus * parts.chi_plus_at_minus1) % r
    kz = R.zpow @ R.mul_matrix(K) % r
    four_pm = R.mul_matrix(4 * pm % r)
    jt = legendre_symbol_table(cert.q)
    return ArrowConstraint(cert, mode, parts.chi_plus_at_minus1, parts.mu_minus, q2g, jp, pm, pp,
                           four_pm, kz, jt)


# exact scalar path: build the whole left side in Z[zeta_N], then reduce

def _exact_terms(a0: int, n0: int, c: ArrowConstraint) -> tuple[CycElement, CycElement | None]:
    chi = c.chi
    N = chi.order
    parts = beta_parts(chi)
    g = G_scaled(QuadForm(a0, a0 * n0, -1), chi)
    first = (parts.prod_p_minus_one.lift(N) * g.lift(N)).scale(4)
    d = (a0 * n0) ** 2 + 4 * a0
    k = chi(d)
    if k is None:
        return first, None
    K = (parts.gamma_scaled.lift(N) * parts.jacobi_plus.lift(N) * parts.prod_p2_minus_one.lift(N)).scale(
        parts.mu_minus * parts.chi_plus_at_minus1
    )
    second = CycElement.zeta(N, k).scale(n0 * jacobi(d % chi.modulus, chi.modulus)) * c_a(a0, chi) * K
    return first, second


def congruence_general(a0: int, n0: int, c: ArrowConstraint) -> bool:
    first, second = _exact_terms(a0, n0, c)
    if second is None:  # chi(d) = 0; such pairs already fail the Legendre test
        return False
    return not _residue(first + second, c.target).any()


def congruence_r_div_n(a0: int, n0: int, c: ArrowConstraint) -> bool:
    if n0 % c.r:
        raise ValueError(f"r={c.r} does not divide n0={n0}")
    first, second = _exact_terms(a0, n0, c)
    if second is None:
        return False
    return not _residue(first, c.target).any()


def congruence_q_div_n(a0: int, n0: int, c: ArrowConstraint) -> bool:
    if n0 % c.q:
        raise ValueError(f"q={c.q} does not divide n0={n0}")
    _, second = _exact_terms(a0, n0, c)
    if second is None:
        return False
    return not _residue(second, c.target).any()


def congruence(a0: int, n0: int, c: ArrowConstraint) -> bool:
    fn = {"general": congruence_general, "r-divides-n": congruence_r_div_n,
          "q-divides-n": congruence_q_div_n}[c.mode]
    return fn(a0, n0, c)


# Plans

@dataclass
class PlanArrow:
    certificate: str
    mode: str


@dataclass
class PlanPhase:
    extension: int
    lift: str  # "all" for the first phase, "exceptional" afterwards
    arrows: list[PlanArrow]


@dataclass
class SievePlan:
    name: str
    modulus: int
    n_restriction: int
    a_exclusions: list[int]
    phases: list[PlanPhase]
    expectation: dict
    a_values: list[int] | None = None
    description: str = ""
    base_dir: Path | None = field(default=None, repr=False, compare=False)

    def phase_moduli(self) -> list[int]:
        out, m = [], self.modulus
        for ph in self.phases:
            m *= ph.extension
            out.append(m)
        return out

    def to_dict(self) -> dict:
        d = {
            "schema_version": PLAN_SCHEMA_VERSION,
            "kind": "sieve-plan",
            "name": self.name,
            "description": self.description,
            "modulus": str(self.modulus),
            "n_restriction": str(self.n_restriction),
            "a_exclusions": [str(a) for a in self.a_exclusions],
            "phases": [
                {
                    "extension": str(ph.extension),
                    "lift": ph.lift,
                    "arrows": [{"certificate": a.certificate, "mode": a.mode} for a in ph.arrows],
                }
                for ph in self.phases
            ],
            "expectation": {k: (str(v) if isinstance(v, int) and not isinstance(v, bool) else v)
                            for k, v in self.expectation.items()},
        }
        if self.a_values is not None:
            d["a_values"] = [str(a) for a in self.a_values]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> SievePlan:
        try:
            if data["schema_version"] != PLAN_SCHEMA_VERSION or data.get("kind") != "sieve-plan":
                raise CertificateParseError("unsupported plan schema")
            phases = [
                PlanPhase(int(ph["extension"]), ph["lift"],
                          [PlanArrow(str(a["certificate"]), a["mode"]) for a in ph["arrows"]])
                for ph in data["phases"]
            ]
            expectation = {}
            for k, v in data.get("expectation", {}).items():
                expectation[k] = v if isinstance(v, bool) else int(v)
            a_values = data.get("a_values")
            return cls(
                name=data.get("name", ""),
                modulus=int(data["modulus"]),
                n_restriction=int(data.get("n_restriction", "1")),
                a_exclusions=[int(a) for a in data.get("a_exclusions", [])],
                phases=phases,
                expectation=expectation,
                a_values=None if a_values is None else [int(a) for a in a_values],
                description=data.get("description", ""),
                base_dir=base_dir,
            )
        except CertificateParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CertificateParseError(f"malformed sieve plan: {exc!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> SievePlan:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CertificateParseError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def resolve_certificate(self, ref: str) -> Path:
        p = Path(ref)
        candidates = [p] if p.is_absolute() else [
            *(([self.base_dir / p]) if self.base_dir else []), CERT_DIR / p
        ]
        for c in candidates:
            if c.is_file():
                return c
        raise FileNotFoundError(f"certificate {ref} not found (looked in {[str(c) for c in candidates]})")

    def digest(self) -> str:
        h = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode())
        for ph in self.phases:
            for a in ph.arrows:
                h.update(self.resolve_certificate(a.certificate).read_bytes())
        return h.hexdigest()


def validate_plan(plan: SievePlan, constraints: list[list[ArrowConstraint]]) -> None:
    if plan.modulus < 1 or plan.modulus % 2 == 0:
        raise ValueError("plan modulus must be a positive odd integer")
    if plan.n_restriction < 1 or plan.modulus % plan.n_restriction:
        raise ValueError("n_restriction must divide the modulus")
    if not plan.phases:
        raise ValueError("a plan needs at least one phase")
    prev = None
    for i, (ph, cs) in enumerate(zip(plan.phases, constraints)):
        if i == 0 and (ph.lift != "all" or ph.extension != 1):
            raise ValueError("the first phase must have lift 'all' and extension 1")
        if i > 0 and ph.lift != "exceptional":
            raise ValueError("later phases must lift the exceptional survivors")
        if ph.extension < 1 or (prev is not None and math.gcd(ph.extension, prev) != 1):
            raise ValueError("a phase extension must be coprime to the previous modulus")
        m = plan.phase_moduli()[i]
        for c in cs:
            if m % (c.q * c.r):
                raise ValueError(f"arrow {c.label}: qr does not divide the phase modulus {m}")
            if c.mode == "r-divides-n" and plan.n_restriction % c.r:
                raise ValueError(f"arrow {c.label}: needs r | n but the plan does not restrict n mod r")
            if c.mode == "q-divides-n" and plan.n_restriction % c.q:
                raise ValueError(f"arrow {c.label}: needs q | n but the plan does not restrict n mod q")
        prev = m


def load_constraints(plan: SievePlan, verify: bool = True) -> list[list[ArrowConstraint]]:
    out = []
    cache: dict[tuple[str, str], ArrowConstraint] = {}
    for ph in plan.phases:
        cs = []
        for a in ph.arrows:
            key = (str(plan.resolve_certificate(a.certificate)), a.mode)
            if key not in cache:
                cert = ArrowCertificate.load(key[0])
                if verify and not check_certificate(cert):
                    raise ValueError(f"certificate {a.certificate} does not verify")
                cache[key] = precompute_constraint(cert, a.mode)
            cs.append(cache[key])
        out.append(cs)
    return out


# Reports

@dataclass
class PhaseCounts:
    modulus: int
    lift: str
    arrows: list[str]
    coordinate_order: list[int]
    tested: int = 0
    killed_by_legendre: int = 0
    killed_by_congruence: int = 0
    survivors: int = 0
    carried: int = 0  # survivors of the previous phase with n0 = 0, passed through untested

    def to_dict(self) -> dict:
        return {
            "modulus": str(self.modulus),
            "lift": self.lift,
            "arrows": self.arrows,
            "coordinate_order": [str(p) for p in self.coordinate_order],
            "tested": str(self.tested),
            "killed_by_legendre": str(self.killed_by_legendre),
            "killed_by_congruence": str(self.killed_by_congruence),
            "survivors": str(self.survivors),
            "carried": str(self.carried),
        }


@dataclass
class SieveReport:
    plan_name: str
    plan_digest: str
    modulus: int
    phases: list[PhaseCounts]
    survivors_by_n0: dict[int, int]
    survivors: list[tuple[int, int]]
    survivors_truncated: bool
    a_exclusions: list[int]
    expectation: dict
    expectation_met: bool | None
    backend: str
    wall_time: float = 0.0

    @property
    def total_survivors(self) -> int:
        return sum(self.survivors_by_n0.values())

    def content_dict(self) -> dict:
        """Everything except wall time; stable across re-runs."""
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "sieve-report",
            "plan": self.plan_name,
            "plan_digest": self.plan_digest,
            "modulus": str(self.modulus),
            "phases": [p.to_dict() for p in self.phases],
            "total_survivors": str(self.total_survivors),
            "survivors_by_n0": {str(k): str(v) for k, v in sorted(self.survivors_by_n0.items())},
            "survivors": [[str(a), str(n)] for a, n in self.survivors],
            "survivors_truncated": self.survivors_truncated,
            "a_exclusions": [str(a) for a in self.a_exclusions],
            "expectation": {k: (v if isinstance(v, bool) else str(v)) for k, v in self.expectation.items()},
            "expectation_met": self.expectation_met,
        }

    def content_digest(self) -> str:
        return hashlib.sha256(json.dumps(self.content_dict(), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.content_dict()
        d["content_digest"] = self.content_digest()
        d["backend"] = self.backend
        d["wall_time_s"] = round(self.wall_time, 3)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def check_expectation(expectation: dict, survivors_by_n0: dict[int, int]) -> bool | None:
    if not expectation:
        return None
    ok = True
    if "survivors_n_divisible_by" in expectation:
        m = expectation["survivors_n_divisible_by"]
        ok &= all(n0 % m == 0 for n0, c in survivors_by_n0.items() if c)
    if expectation.get("no_survivors"):
        ok &= not any(survivors_by_n0.values())
    return ok


# Join engine

@dataclass
class _Coord:
    p: int
    m: int  # p^k exactly dividing the phase modulus
    a_dom: np.ndarray
    n_dom: np.ndarray
    legendre: bool

    @property
    def size(self) -> int:
        return self.a_dom.size * self.n_dom.size

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.repeat(self.a_dom, self.n_dom.size)
        n = np.tile(self.n_dom, self.a_dom.size)
        if self.legendre:
            keep = legendre_bitmap(self.p)[a % self.p, n % self.p]
            a, n = a[keep], n[keep]
        return a, n


def _prime_power_part(p: int, M: int) -> int:
    m = 1
    while M % p == 0:
        M //= p
        m *= p
    return m


@lru_cache(maxsize=4096)
def _crt_basis_cached(moduli: tuple[int, ...], M: int) -> tuple[int, ...]:
    return tuple(_crt_basis(list(moduli), M))


def _crt_basis(moduli: list[int], M: int) -> list[int]:
    """Idempotents e_i = 1 mod m_i, 0 mod M/m_i."""
    out = []
    for m in moduli:
        rest = M // m
        out.append(rest * pow(rest, -1, m) % M)
    return out


def _crt_combine(cols: list[np.ndarray], moduli: list[int], M: int) -> np.ndarray:
    """Vectorized CRT; M must stay below 2^44 so products fit in int64."""
    x = np.zeros(cols[0].shape if cols else (), dtype=np.int64)
    for c, e, m in zip(cols, _crt_basis_cached(tuple(moduli), M), moduli):
        x = (x + (c % m) * e) % M
    return x


@dataclass
class _Partial:
    tested: int = 0
    legendre_pass: int = 0
    survivors: int = 0
    by_n0: dict[int, int] = field(default_factory=dict)
    sample: list[tuple[int, int]] = field(default_factory=list)
    seeds: list[np.ndarray] = field(default_factory=list)  # rows (a cols..., n cols...) with n0 != 0

    def merge(self, other: _Partial, cap: int) -> None:
        self.tested += other.tested
        self.legendre_pass += other.legendre_pass
        self.survivors += other.survivors
        for k, v in other.by_n0.items():
            self.by_n0[k] = self.by_n0.get(k, 0) + v
        room = cap - len(self.sample)
        if room > 0:
            self.sample.extend(other.sample[:room])
        self.seeds.extend(other.seeds)


class _PhaseRunner:
    def __init__(self, coords: list[_Coord], assigned: list[int], constraints: list[ArrowConstraint],
                 modulus: int, keep_seeds: bool, cap: int):
        self.coords = {c.p: c for c in coords}
        self.assigned0 = list(assigned)
        self.constraints = constraints
        self.modulus = modulus
        self.keep_seeds = keep_seeds
        self.cap = cap
        touched = set()
        for c in constraints:
            touched.update(c.primes)
        self.touched = touched
        # a coordinate with several n values must be joined so that n0 is determined
        need = [p for p in self.coords if p not in assigned and (p in touched or self.coords[p].n_dom.size > 1)]
        self.implicit = [p for p in self.coords if p not in assigned and p not in need]
        self.order = self._greedy_order(need)
        self.all_order = self.assigned0 + self.order
        done = set(self.assigned0)
        self.at_level: list[list[ArrowConstraint]] = []
        pending = list(constraints)
        ready = [c for c in pending if set(c.primes) <= done]
        self.at_start = ready
        pending = [c for c in pending if c not in ready]
        for p in self.order:
            done.add(p)
            ready = [c for c in pending if set(c.primes) <= done]
            self.at_level.append(ready)
            pending = [c for c in pending if c not in ready]
        assert not pending

    def _greedy_order(self, need: list[int]) -> list[int]:
        done = set(self.assigned0)
        est = 1.0
        order = []
        left = list(need)
        pending = [c for c in self.constraints if not set(c.primes) <= done]
        while left:
            best = None
            for p in sorted(left):
                after = done | {p}
                kill = 1.0
                for c in pending:
                    if set(c.primes) <= after:
                        kill /= c.r
                size = self.coords[p].size / (2.0 if self.coords[p].legendre else 1.0)
                score = est * size * kill
                if best is None or score < best[0]:
                    best = (score, p)
            est, p = best
            order.append(p)
            left.remove(p)
            done.add(p)
            pending = [c for c in pending if not set(c.primes) <= done]
        return order

    def _columns(self, A: np.ndarray, Nn: np.ndarray, primes_in: list[int], need: tuple[int, ...],
                 M: int) -> tuple[np.ndarray, np.ndarray]:
        cols = [primes_in.index(p) for p in need]
        mods = [_prime_power_part(p, M) for p in need]
        return (_crt_combine([A[:, j] for j in cols], mods, M),
                _crt_combine([Nn[:, j] for j in cols], mods, M))

    def _apply(self, cs: list[ArrowConstraint], A, Nn, primes_in):
        for c in cs:
            if not A.shape[0]:
                break
            M = c.q * c.r
            a, n = self._columns(A, Nn, primes_in, c.primes, M)
            keep = c.evaluate(a, n)
            A, Nn = A[keep], Nn[keep]
        return A, Nn

    def run(self, A: np.ndarray, Nn: np.ndarray) -> _Partial:
        """A, Nn hold the already assigned coordinates (columns follow assigned0)."""
        out = _Partial()
        rows0 = A.shape[0]
        implicit_size = math.prod(self.coords[p].size for p in self.implicit)
        new_full = math.prod(self.coords[p].size for p in self.order)
        out.tested = rows0 * new_full * implicit_size
        # Legendre on coordinates that were joined in an earlier phase
        keep = np.ones(rows0, dtype=bool)
        for j, p in enumerate(self.assigned0):
            if self.coords[p].legendre:
                keep &= legendre_bitmap(p)[A[:, j] % p, Nn[:, j] % p]
        A, Nn = A[keep], Nn[keep]
        new_leg = math.prod(self.coords[p].pairs()[0].size for p in self.order)
        out.legendre_pass = A.shape[0] * new_leg * implicit_size
        A, Nn = self._apply(self.at_start, A, Nn, self.assigned0)
        self._descend(0, A, Nn, out)
        return out

    def _descend(self, level: int, A, Nn, out: _Partial) -> None:
        if not A.shape[0]:
            return
        if level == len(self.order):
            self._emit(A, Nn, out)
            return
        p = self.order[level]
        pa, pn = self.coords[p].pairs()
        k = pa.size
        if not k:
            return
        step = max(1, CHUNK_ROWS // k)
        primes_in = self.all_order[: len(self.assigned0) + level + 1]
        for s in range(0, A.shape[0], step):
            a_blk, n_blk = A[s: s + step], Nn[s: s + step]
            A2 = np.hstack([np.repeat(a_blk, k, axis=0), np.tile(pa, a_blk.shape[0])[:, None]])
            N2 = np.hstack([np.repeat(n_blk, k, axis=0), np.tile(pn, n_blk.shape[0])[:, None]])
            A2, N2 = self._apply(self.at_level[level], A2, N2, primes_in)
            self._descend(level + 1, A2, N2, out)

    def _emit(self, A, Nn, out: _Partial) -> None:
        primes = self.all_order
        imp = [self.coords[p] for p in self.implicit]
        mult = math.prod(c.size for c in imp)
        mods = [self.coords[p].m for p in primes] + [c.m for c in imp]
        n_imp = [np.full(A.shape[0], int(c.n_dom[0]), dtype=np.int64) for c in imp]
        n0 = _crt_combine([Nn[:, j] for j in range(len(primes))] + n_imp, mods, self.modulus)
        out.survivors += A.shape[0] * mult
        vals, counts = np.unique(n0, return_counts=True)
        for v, c in zip(vals.tolist(), counts.tolist()):
            out.by_n0[v] = out.by_n0.get(v, 0) + c * mult
        if self.keep_seeds:
            exc = n0 != 0
            if exc.any():
                out.seeds.append(np.hstack([A[exc], Nn[exc]]))
        room = self.cap - len(out.sample)
        if room > 0:
            a_cols = [A[:, j] for j in range(len(primes))]
            basis = _crt_basis_cached(tuple(mods), self.modulus)
            for i in range(A.shape[0]):
                for combo in itertools.product(*(c.a_dom.tolist() for c in imp)):
                    parts = [int(col[i]) for col in a_cols] + list(combo)
                    a0 = sum(x * e for x, e in zip(parts, basis)) % self.modulus
                    out.sample.append((a0, int(n0[i])))
                    room -= 1
                    if room <= 0:
                        return


def _coords_for(modulus: int, plan_modulus: int, n_restriction: int, a_value: int | None,
                legendre_primes: set[int]) -> list[_Coord]:
    out = []
    for p, k in factorize(modulus).factors if modulus > 1 else ():
        m = p ** k
        a_dom = np.array([a_value % m], dtype=np.int64) if a_value is not None else np.arange(m, dtype=np.int64)
        g = math.gcd(n_restriction, m) if plan_modulus % p == 0 else 1
        n_dom = np.arange(0, m, g, dtype=np.int64)
        out.append(_Coord(p, m, a_dom, n_dom, p in legendre_primes))
    return out


def _run_blocks(runner: _PhaseRunner, A, Nn, threads: int, cap: int) -> _Partial:
    if threads > 1 and not runner.assigned0 and runner.order:
        # split on the first coordinate: seed with its unfiltered pairs so the counts stay exact
        first = runner.coords[runner.order[0]]
        runner = _PhaseRunner(list(runner.coords.values()), [first.p], runner.constraints, runner.modulus,
                              runner.keep_seeds, cap)
        A = np.repeat(first.a_dom, first.n_dom.size)[:, None]
        Nn = np.tile(first.n_dom, first.a_dom.size)[:, None]
    if threads <= 1 or A.shape[0] < 2:
        return runner.run(A, Nn)
    # contiguous blocks keep the sequential survivor order after merging
    blocks = np.array_split(np.arange(A.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: runner.run(A[idx], Nn[idx]), blocks))
    total = _Partial()
    for part in parts:
        total.merge(part, cap)
    return total


def run_sieve(plan: SievePlan, constraints: list[list[ArrowConstraint]] | None = None, threads: int = 1,
              survivor_cap: int = DEFAULT_SURVIVOR_CAP) -> SieveReport:
    """Run every phase of the plan and collect counts, survivors and the expectation verdict."""
    t0 = time.perf_counter()
    if constraints is None:
        constraints = load_constraints(plan)
    validate_plan(plan, constraints)
    moduli = plan.phase_moduli()
    phase_counts = [
        PhaseCounts(m, ph.lift, [c.label for c in cs], []) for m, ph, cs in zip(moduli, plan.phases, constraints)
    ]
    final_by_n0: dict[int, int] = {}
    sample: list[tuple[int, int]] = []
    truncated = False
    a_values = plan.a_values if plan.a_values is not None else [None]
    for a_value in a_values:
        seeds_a = seeds_n = None
        seed_primes: list[int] = []
        for i, (ph, cs, m) in enumerate(zip(plan.phases, constraints, moduli)):
            leg = {p for c in cs for p in c.primes}
            coords = _coords_for(m, plan.modulus, plan.n_restriction, a_value, leg)
            last = i == len(plan.phases) - 1
            if i == 0:
                A = np.zeros((1, 0), dtype=np.int64)
                Nn = np.zeros((1, 0), dtype=np.int64)
                assigned: list[int] = []
            else:
                A, Nn, assigned = seeds_a, seeds_n, seed_primes
            runner = _PhaseRunner(coords, assigned, cs, m, keep_seeds=not last, cap=survivor_cap)
            phase_counts[i].coordinate_order = runner.all_order
            part = _run_blocks(runner, A, Nn, threads, survivor_cap)
            k = len(runner.all_order)
            pc = phase_counts[i]
            pc.tested += part.tested
            pc.killed_by_legendre += part.tested - part.legendre_pass
            pc.killed_by_congruence += part.legendre_pass - part.survivors
            pc.survivors += part.survivors
            if last:
                for k, v in part.by_n0.items():
                    final_by_n0[k] = final_by_n0.get(k, 0) + v
                sample.extend(part.sample)
                truncated |= part.survivors > len(part.sample)
            else:
                carried = part.by_n0.get(0, 0)
                if carried:
                    final_by_n0[0] = final_by_n0.get(0, 0) + carried
                phase_counts[i + 1].carried += carried
                # n0 = 0 survivors are listed before any lifted ones
                zero = [s for s in part.sample if s[1] == 0]
                sample.extend(zero)
                truncated |= carried > len(zero)
                if part.seeds:
                    rows = np.vstack(part.seeds)
                else:
                    rows = np.zeros((0, 2 * k), dtype=np.int64)
                seeds_a, seeds_n = rows[:, :k], rows[:, k:]
                seed_primes = list(runner.all_order)
    if len(sample) > survivor_cap:
        sample = sample[:survivor_cap]
        truncated = True
    sample.sort(key=lambda s: (s[1], s[0]))
    final_by_n0 = {k: v for k, v in final_by_n0.items() if v}
    report = SieveReport(
        plan_name=plan.name,
        plan_digest=plan.digest(),
        modulus=moduli[-1],
        phases=phase_counts,
        survivors_by_n0=final_by_n0,
        survivors=sample,
        survivors_truncated=truncated,
        a_exclusions=list(plan.a_exclusions),
        expectation=dict(plan.expectation),
        expectation_met=check_expectation(plan.expectation, final_by_n0),
        backend=kernels.BACKEND,
    )
    report.wall_time = time.perf_counter() - t0
    return report


def run_sieve_naive(plan: SievePlan, constraints: list[list[ArrowConstraint]] | None = None,
                    exact: bool = True) -> dict[tuple[int, int], None]:
    """Pair-by-pair reference run; returns the final survivor set. Only for small plans."""
    if constraints is None:
        constraints = load_constraints(plan)
    validate_plan(plan, constraints)
    moduli = plan.phase_moduli()
    P = plan.modulus
    a_range = plan.a_values if plan.a_values is not None else range(P)
    n_range = range(0, P, plan.n_restriction)
    current = [(a, n) for a in a_range for n in n_range]
    final: dict[tuple[int, int], None] = {}
    prev = P
    for i, (cs, m) in enumerate(zip(constraints, moduli)):
        if i > 0:
            ext = m // prev
            carried = [(a, n) for a, n in current if n % prev == 0]
            for s in carried:
                final[s] = None
            exc = [(a, n) for a, n in current if n % prev]
            if plan.a_values is not None:
                current = [(a, n + prev * t) for a, n in exc for t in range(ext)]
            else:
                current = [(a + prev * s, n + prev * t) for a, n in exc for s in range(ext) for t in range(ext)]
        primes = sorted({p for c in cs for p in c.primes})
        nxt = []
        for a, n in current:
            if not all(legendre_test(a, n, p) for p in primes):
                continue
            if exact:
                ok = all(congruence(a % m if plan.a_values is None else a, n, c) for c in cs)
            else:
                ok = all(bool(c.evaluate(np.array([a]), np.array([n]))[0]) for c in cs)
            if ok:
                nxt.append((a, n))
        current = nxt
        prev = m
    for s in current:
        final[s] = None
    return final
