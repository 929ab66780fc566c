"""Symplectic (bitmask) algebra for weighted Pauli strings.

A Pauli string on n qubits is stored as a pair of integer masks: bit q of
``x`` is set when qubit q carries X or Y, bit q of ``z`` when it carries Z or
Y.  The (x, z) pair always denotes the Hermitian string, i.e. the letter Y at
qubit q is the canonical i*X_q*Z_q with the +i folded into the term
coefficient at construction time.  Bit 0 is spin orbital 0 and the least
significant bit of a basis-state index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError, ResourceError

DROP_TOL = 1e-12
DENSE_CAP = 12

_I_POW = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)

_SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliTerm:
    coeff: complex
    x: int
    z: int
    n: int

    def __post_init__(self):
        top = 1 << self.n
        if self.x >= top or self.z >= top or self.x < 0 or self.z < 0:
            raise DimensionError(f"mask beyond {self.n} qubits")

    def letter(self, q: int) -> str:
        xb, zb = (self.x >> q) & 1, (self.z >> q) & 1
        return ("I", "X", "Z", "Y")[xb + 2 * zb]

    def label(self) -> str:
        parts = [f"{self.letter(q)}{q}" for q in range(self.n) if (self.x | self.z) >> q & 1]
        return " ".join(parts) if parts else "I"

    def dagger(self) -> "PauliTerm":
        return PauliTerm(self.coeff.conjugate(), self.x, self.z, self.n)

    def __repr__(self):
        return f"PauliTerm({self.coeff}, {self.label()!r})"


def from_label(coeff: complex, label: str, n: int) -> PauliTerm:
    """Build a term from a label like "X0 Z3 Y5" (identity: "I")."""
    x = z = 0
    label = label.strip()
    if label and label != "I":
        for tok in label.split():
            letter, q = tok[0].upper(), int(tok[1:])
            if letter not in "XYZ":
                raise ParseError(f"bad Pauli letter {tok!r}")
            if q >= n:
                raise DimensionError(f"qubit {q} beyond {n}")
            if (x | z) >> q & 1:
                raise ParseError(f"qubit {q} repeated in label")
            if letter in "XY":
                x |= 1 << q
            if letter in "YZ":
                z |= 1 << q
    return PauliTerm(complex(coeff), x, z, n)


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Exact product a*b including the +/-1, +/-i phase."""
    if a.n != b.n:
        raise DimensionError(f"{a.n} vs {b.n} qubits")
    x, z = a.x ^ b.x, a.z ^ b.z
    # phase of (i^{x1.z1} X^x1 Z^z1)(i^{x2.z2} X^x2 Z^z2) relative to i^{x3.z3} X^x3 Z^z3
    power = ((a.x & a.z).bit_count() + (b.x & b.z).bit_count()
             - (x & z).bit_count() + 2 * (a.z & b.x).bit_count()) % 4
    return PauliTerm(a.coeff * b.coeff * _I_POW[power], x, z, a.n)


def anticommutes(a: PauliTerm, b: PauliTerm) -> bool:
    """True iff the underlying strings anticommute (symplectic overlap odd)."""
    if a.n != b.n:
        raise DimensionError(f"{a.n} vs {b.n} qubits")
    return ((a.x & b.z).bit_count() + (a.z & b.x).bit_count()) % 2 == 1


class PauliSum:
    """Weighted sum of Pauli strings; collected form has unique masks."""

    __slots__ = ("terms", "n")

    def __init__(self, terms, n: int):
        self.terms = list(terms)
        self.n = n
        for t in self.terms:
            if t.n != n:
                raise DimensionError("mixed qubit counts in sum")

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self):
        inner = " + ".join(f"({t.coeff:.6g})*{t.label()}" for t in self.terms[:6])
        more = "" if len(self.terms) <= 6 else f" + ... ({len(self.terms)} terms)"
        return f"PauliSum[{inner}{more}]"

    def dagger(self) -> "PauliSum":
        return PauliSum([t.dagger() for t in self.terms], self.n)

    def scaled(self, factor: complex) -> "PauliSum":
        return PauliSum([PauliTerm(t.coeff * factor, t.x, t.z, t.n) for t in self.terms], self.n)


def collect(s: PauliSum, drop_tol: float = DROP_TOL) -> PauliSum:
    """Merge duplicate masks, prune small terms, order lexicographically."""
    acc: dict[tuple[int, int], complex] = {}
    for t in s.terms:
        key = (t.x, t.z)
        acc[key] = acc.get(key, 0.0) + t.coeff
    out = [PauliTerm(c, x, z, s.n) for (x, z), c in acc.items() if abs(c) > drop_tol]
    out.sort(key=lambda t: (t.x, t.z))
    return PauliSum(out, s.n)


def multiply_sums(a: PauliSum, b: PauliSum, drop_tol: float = DROP_TOL) -> PauliSum:
    if a.n != b.n:
        raise DimensionError(f"{a.n} vs {b.n} qubits")
    prod = [multiply(ta, tb) for ta in a.terms for tb in b.terms]
    return collect(PauliSum(prod, a.n), drop_tol)


def _occ_mask(ref) -> int:
    return ref if isinstance(ref, int) else ref.occupation


def expectation_on_reference(s: PauliSum, ref) -> complex:
    """<ref|s|ref> for a computational-basis reference determinant.

    Only terms with empty x mask (Z strings) contribute; each gives
    coeff * (-1)^popcount(z & occupation).
    """
    occ = _occ_mask(ref)
    n = getattr(ref, "n_modes", None)
    if n is not None and n != s.n:
        raise DimensionError(f"{s.n}-qubit sum vs {n}-mode reference")
    val = 0.0 + 0.0j
    for t in s.terms:
        if t.x == 0:
            val += t.coeff * (1 - 2 * ((t.z & occ).bit_count() & 1))
    return val


def to_dense_matrix(s: PauliSum, cap: int = DENSE_CAP) -> np.ndarray:
    """2^n x 2^n matrix by Kronecker expansion; bit 0 = least significant."""
    if s.n > cap:
        raise ResourceError(f"{s.n} qubits exceeds dense cap {cap}")
    dim = 1 << s.n
    out = np.zeros((dim, dim), dtype=complex)
    for t in s.terms:
        m = np.array([[t.coeff]], dtype=complex)
        for q in range(s.n - 1, -1, -1):
            m = np.kron(m, _SIGMA[t.letter(q)])
        out += m
    return out


def apply_term_to_index(t: PauliTerm, b: int) -> tuple[int, complex]:
    """P|b> = phase |b ^ x> with phase = coeff * i^{|x&z|} * (-1)^{|z&b|}."""
    power = ((t.x & t.z).bit_count() + 2 * ((t.z & b).bit_count() & 1)) % 4
    return b ^ t.x, t.coeff * _I_POW[power]


def term_to_str(t: PauliTerm) -> str:
    return f"{t.coeff.real:.17g} {t.coeff.imag:.17g} {t.label()}"


def term_from_str(line: str, n: int, lineno: int | None = None) -> PauliTerm:
    parts = line.split(None, 2)
    if len(parts) < 3:
        raise ParseError(f"expected 're im label', got {line!r}", lineno)
    try:
        re_, im_ = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from exc
    return from_label(complex(re_, im_), parts[2], n)


def sum_to_lines(s: PauliSum) -> list[str]:
    return [term_to_str(t) for t in s.terms]


def sum_from_lines(lines, n: int) -> PauliSum:
    terms = [term_from_str(ln, n, i + 1) for i, ln in enumerate(lines) if ln.strip()]
    return PauliSum(terms, n)


def identity_sum(n: int, coeff: complex = 1.0) -> PauliSum:
    return PauliSum([PauliTerm(complex(coeff), 0, 0, n)], n)
