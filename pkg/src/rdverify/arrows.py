"""Arrows q -> r: an odd primitive complex character mod q whose m_chi lies in a prime above r.

Certificates are plain JSON documents that can be re-checked from scratch
without trusting the search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rdverify import __version__
from rdverify.arith import is_prime
from rdverify.characters import DirichletCharacter, enumerate_characters, unit_group_basis
from rdverify.cyclotomic import ResidueFieldTarget, m_chi_descending, primes_above, reduce
from rdverify.errors import CertificateParseError

SCHEMA_VERSION = "1"
KIND = "arrow"

# Arrows used by each step of the reduction, keyed by the step that needs them.
# "11,19 -> 61" from the a = 7 endgame is resolved separately (see resolve_comma_arrow).
PROOF_ARROWS: dict[str, tuple[tuple[int, int], ...]] = {
    "lemma-6.1": (
        (95, 13),
        (133, 13), (133, 37), (133, 73),
        (247, 3), (247, 7), (247, 73), (247, 127),
        (285, 37), (285, 73),
        (91, 37),
        (219, 17),
        (111, 19),
        (185, 13),
        (273, 19), (273, 37),
        (119, 5),
        (127, 5), (127, 13),
        (381, 37),
    ),
    "lemma-6.2": ((215, 7), (215, 19), (215, 37)),
    "lemma-6.3": ((181, 5), (181, 37), (247, 181), (285, 181)),
    "lemma-6.4": ((255, 353), (3315, 353)),
    "final-17": ((119, 3), (119, 5), (119, 13), (221, 5)),
    "endgame-exceptional": ((175, 1861), (175, 61), (61, 1861), (61, 41)),
    "endgame-a5": ((61, 1861), (61, 41), (41, 11)),
    "endgame-a7": ((61, 1861), (61, 41), (41, 11), (9, 11)),
}

COMMA_ARROW = ((11, 19), 61)


def all_proof_arrows() -> list[tuple[int, int]]:
    seen: dict[tuple[int, int], None] = {}
    for arrows in PROOF_ARROWS.values():
        for qr in arrows:
            seen.setdefault(qr, None)
    return list(seen)


def _validate(q: int, r: int) -> None:
    if q <= 1 or q % 2 == 0:
        raise ValueError(f"q={q} must be an odd integer > 1")
    if r == 2 or not is_prime(r):
        raise ValueError(f"r={r} must be an odd prime")
    if math.gcd(q, r) != 1:
        raise ValueError(f"gcd(q={q}, r={r}) > 1")


def m_chi_histogram(chi: DirichletCharacter) -> np.ndarray:
    """Coefficients of m_chi in the basis zeta^k, 0 <= k < N (not reduced by Phi_N)."""
    mask = chi.exps >= 0
    a = np.flatnonzero(mask)
    hist = np.bincount(chi.exps[mask], weights=a.astype(np.float64), minlength=chi.order)
    return np.rint(hist).astype(np.int64)


@dataclass(frozen=True)
class ArrowCertificate:
    q: int
    r: int
    character: DirichletCharacter
    target: ResidueFieldTarget
    m_residue: tuple[int, ...]
    toolkit_version: str = field(default=__version__)

    @property
    def filename(self) -> str:
        return f"arrow_{self.q}_{self.r}.json"

    def to_dict(self) -> dict:
        ch = self.character.to_dict()
        ch["odd"] = self.character.is_odd
        ch["primitive"] = self.character.is_primitive
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": KIND,
            "q": str(self.q),
            "r": str(self.r),
            "character": ch,
            "target": self.target.to_dict(),
            "m_residue": [str(c) for c in self.m_residue],
            "toolkit_version": self.toolkit_version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, directory: str | Path) -> Path:
        path = Path(directory) / self.filename
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, data) -> ArrowCertificate:
        try:
            if data["schema_version"] != SCHEMA_VERSION or data["kind"] != KIND:
                raise CertificateParseError("unsupported schema version or kind")
            q, r = _dec(data["q"]), _dec(data["r"])
            ch, tg = data["character"], data["target"]
            chi = _parse_character(ch)
            poly = [_dec(c) for c in tg["poly"]]
            rt, nt = _dec(tg["r"]), _dec(tg["N"])
            if rt <= 1 or nt <= 0 or not poly or poly[-1] != 1:
                raise CertificateParseError("target is not a monic polynomial over a prime field")
            # keep out-of-range coefficients visible to the checker instead of reducing them
            if any(not 0 <= c < rt for c in poly):
                target = ResidueFieldTarget(rt, nt, tuple(poly), np.zeros((0, 0), dtype=np.int64))
            else:
                target = ResidueFieldTarget.build(rt, nt, poly)
            residue = tuple(_dec(c) for c in data["m_residue"])
            version = str(data["toolkit_version"])
        except CertificateParseError:
            raise
        except (KeyError, TypeError, AttributeError) as exc:
            raise CertificateParseError(f"malformed arrow certificate: {exc!r}") from exc
        return cls(q, r, chi, target, residue, version)

    @classmethod
    def from_json(cls, text: str) -> ArrowCertificate:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CertificateParseError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise CertificateParseError("certificate must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> ArrowCertificate:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _dec(s) -> int:
    if not isinstance(s, str) or not s.lstrip("-").isdigit():
        raise CertificateParseError(f"expected a decimal string, got {s!r}")
    return int(s)


class _UncheckedCharacter:
    """Placeholder for a character whose declared basis does not match the canonical one."""

    def __init__(self, data: dict):
        self.data = data

    def to_dict(self) -> dict:
        return dict(self.data)


def _parse_character(ch: dict):
    q = _dec(ch["modulus"])
    gens = ch["generators"]
    if not isinstance(gens, list):
        raise CertificateParseError("generators must be a list")
    parsed = [(_dec(g["generator"]), _dec(g["order"]), _dec(g["exponent"])) for g in gens]
    order = _dec(ch["order"])
    if not isinstance(ch.get("odd"), bool) or not isinstance(ch.get("primitive"), bool):
        raise CertificateParseError("character flags odd/primitive must be booleans")
    if q <= 1 or q % 2 == 0:
        return _UncheckedCharacter(ch)
    basis = unit_group_basis(q)
    if tuple((g, e) for g, e, _ in parsed) != basis.generators:
        return _UncheckedCharacter(ch)
    chi = DirichletCharacter.from_exponents(q, [t for _, _, t in parsed])
    if chi.order != order:
        return _UncheckedCharacter(ch)
    return chi


def _search(q: int, r: int, first: bool) -> list[ArrowCertificate]:
    out = []
    for chi in enumerate_characters(q, odd=True, primitive=True, complex=True):
        hist = m_chi_histogram(chi)
        for target in primes_above(r, chi.order):
            residue = target.reduce_histogram(hist)
            if not residue.any():
                out.append(ArrowCertificate(q, r, chi, target, tuple(int(c) for c in residue)))
                if first:
                    return out
    return out


def find_arrows(q: int, r: int, mode: str = "first") -> list[ArrowCertificate]:
    """Certificates for q -> r; an empty list means no witness exists."""
    if mode not in ("first", "all"):
        raise ValueError(f"mode must be 'first' or 'all', not {mode!r}")
    _validate(q, r)
    return _search(q, r, mode == "first")


def check_certificate(cert) -> bool:
    """Re-verify a certificate from scratch; accepts an ArrowCertificate, dict or JSON text."""
    if isinstance(cert, str):
        cert = ArrowCertificate.from_json(cert)
    elif isinstance(cert, dict):
        cert = ArrowCertificate.from_dict(cert)
    elif not isinstance(cert, ArrowCertificate):
        raise CertificateParseError(f"cannot read a certificate from {type(cert).__name__}")

    q, r, chi, R = cert.q, cert.r, cert.character, cert.target
    if not isinstance(chi, DirichletCharacter):
        return False
    try:
        _validate(q, r)
    except ValueError:
        return False
    if chi.modulus != q or not chi.is_odd or not chi.is_primitive or chi.order <= 2:
        return False
    if R.r != r or R.N != chi.order or not R.is_valid():
        return False
    # independent summation order; residue must vanish and match the recorded one
    residue = reduce(m_chi_descending(chi), R)
    if residue.any():
        return False
    return tuple(int(c) for c in residue) == tuple(cert.m_residue)


@dataclass
class ArrowStatus:
    q: int
    r: int
    established: bool
    certificates: list[ArrowCertificate]
    error: str | None = None

    @property
    def label(self) -> str:
        return f"{self.q}->{self.r}"


@dataclass
class ArrowSetReport:
    entries: list[ArrowStatus]

    @property
    def failed(self) -> list[ArrowStatus]:
        return [e for e in self.entries if not e.established]

    @property
    def ok(self) -> bool:
        return not self.failed

    def raise_if_failed(self) -> None:
        if self.failed:
            names = ", ".join(e.label + (f" ({e.error})" if e.error else "") for e in self.failed)
            raise RuntimeError(f"arrows not established: {names}")

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            state = "ok" if e.established else "FAILED"
            lines.append(f"{e.label:>12}  {state}" + (f"  {e.error}" if e.error else ""))
        return "\n".join(lines)


def verify_arrow_set(pairs, mode: str = "first") -> ArrowSetReport:
    entries = []
    for q, r in pairs:
        try:
            certs = find_arrows(q, r, mode)
        except ValueError as exc:
            entries.append(ArrowStatus(q, r, False, [], str(exc)))
            continue
        good = bool(certs) and all(check_certificate(c) for c in certs)
        entries.append(ArrowStatus(q, r, good, certs, None if certs else "no witness found"))
    return ArrowSetReport(entries)


@dataclass
class CommaArrowResolution:
    """Outcome of reading 'q1,q2 -> r' first as q1*q2 -> r, then as two separate arrows."""

    moduli: tuple[int, ...]
    r: int
    product_status: ArrowStatus
    separate_status: list[ArrowStatus]

    @property
    def reading(self) -> str:
        if self.product_status.established:
            return "product"
        if self.separate_status and all(s.established for s in self.separate_status):
            return "separate"
        return "none"

    @property
    def arrows(self) -> list[tuple[int, int]]:
        if self.reading == "product":
            return [(self.product_status.q, self.r)]
        if self.reading == "separate":
            return [(s.q, s.r) for s in self.separate_status]
        return []


def resolve_comma_arrow(moduli=COMMA_ARROW[0], r: int = COMMA_ARROW[1]) -> CommaArrowResolution:
    product = verify_arrow_set([(math.prod(moduli), r)]).entries[0]
    # both readings are recorded; the product reading wins when it verifies
    separate = verify_arrow_set([(m, r) for m in moduli]).entries
    return CommaArrowResolution(tuple(moduli), r, product, separate)
