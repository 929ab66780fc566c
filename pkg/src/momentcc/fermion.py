"""Second-quantized operator algebra and fermion-to-qubit mappings.

Conventions used throughout the package:

* determinant |S> = a+_{p1} ... a+_{pk} |vac> with p1 < ... < pk, so the
  occupation bitmask of |S> equals the qubit bitstring of its Jordan-Wigner
  image (bit p set <=> mode p occupied);
* a_p |S> = (-1)^{#occupied below p} |S \\ p|, a+_p the reverse;
* normalized terms are normal ordered: all creations left of annihilations,
  strictly decreasing mode index inside each block.

Two qubit mappings are provided: the standard Jordan-Wigner transformation
(two strings per ladder operator) and the reference-guided mapping, which
emits exactly one Pauli string per pure excitation/de-excitation term with
correctness defined by statevector equality on the reference determinant.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation, DimensionError, ModelError
from .pauli import PauliSum, PauliTerm, collect, multiply

CREATE, ANNIHILATE = 1, 0

DROP_TOL = 1e-12


@dataclass(frozen=True)
class ReferenceDeterminant:
    occupation: int
    n_modes: int

    def __post_init__(self):
        if self.occupation >> self.n_modes:
            raise ModelError("occupation beyond mode count")

    @property
    def n_electrons(self) -> int:
        return self.occupation.bit_count()

    def occupied(self, p: int) -> bool:
        return bool(self.occupation >> p & 1)

    def occupied_modes(self) -> tuple[int, ...]:
        return tuple(p for p in range(self.n_modes) if self.occupied(p))

    def virtual_modes(self) -> tuple[int, ...]:
        return tuple(p for p in range(self.n_modes) if not self.occupied(p))

    def bitstring(self) -> str:
        """Bit-0-leftmost occupation string."""
        return "".join("1" if self.occupied(p) else "0" for p in range(self.n_modes))


@dataclass(frozen=True)
class FermionTerm:
    coeff: complex
    factors: tuple[tuple[int, int], ...]   # (mode, CREATE|ANNIHILATE)

    def __repr__(self):
        ops = " ".join(f"a{'+' if k else '-'}{m}" for m, k in self.factors)
        return f"FermionTerm({self.coeff:.6g}, {ops or '1'})"


class FermionOperator:
    """Sum of FermionTerms on a fixed number of modes."""

    __slots__ = ("n_modes", "terms")

    def __init__(self, n_modes: int, terms=()):
        self.n_modes = n_modes
        self.terms = list(terms)
        for t in self.terms:
            for m, _ in t.factors:
                if m >= n_modes:
                    raise DimensionError(f"mode {m} beyond {n_modes}")

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        if self.n_modes != other.n_modes:
            raise DimensionError("mode count mismatch")
        return FermionOperator(self.n_modes, self.terms + other.terms)

    def scaled(self, factor: complex) -> "FermionOperator":
        return FermionOperator(
            self.n_modes, [FermionTerm(t.coeff * factor, t.factors) for t in self.terms])

    def __repr__(self):
        return f"FermionOperator(n_modes={self.n_modes}, {len(self.terms)} terms)"


def multiply_ops(a: FermionOperator, b: FermionOperator) -> FermionOperator:
    """Raw (non-normal-ordered) operator product."""
    if a.n_modes != b.n_modes:
        raise DimensionError("mode count mismatch")
    terms = [FermionTerm(ta.coeff * tb.coeff, ta.factors + tb.factors)
             for ta in a.terms for tb in b.terms]
    return FermionOperator(a.n_modes, terms)


def adjoint(op: FermionOperator) -> FermionOperator:
    """Reverse factors, swap create/annihilate, conjugate coefficients."""
    terms = [FermionTerm(t.coeff.conjugate(),
                         tuple((m, 1 - k) for m, k in reversed(t.factors)))
             for t in op.terms]
    return FermionOperator(op.n_modes, terms)


def scalar_op(n_modes: int, value: complex) -> FermionOperator:
    return FermionOperator(n_modes, [FermionTerm(complex(value), ())])


def _normalize_term(coeff: complex, factors: tuple) -> list[FermionTerm]:
    """Wick-rewrite one product of ladder operators into normal order.

    Performs adjacent transpositions; a_p a+_p generates the contraction
    1 - a+_p a_p, so one input term may fan out into several.
    """
    out: list[FermionTerm] = []
    stack = [(coeff, list(factors))]
    while stack:
        c, fs = stack.pop()
        i = 0
        dead = False
        while i < len(fs) - 1:
            (m1, k1), (m2, k2) = fs[i], fs[i + 1]
            if k1 == ANNIHILATE and k2 == CREATE:
                if m1 == m2:
                    # a_p a+_p = 1 - a+_p a_p
                    stack.append((c, fs[:i] + fs[i + 2:]))
                    fs[i], fs[i + 1] = (m2, CREATE), (m1, ANNIHILATE)
                    c = -c
                else:
                    fs[i], fs[i + 1] = fs[i + 1], fs[i]
                    c = -c
                i = max(i - 1, 0)
            elif k1 == k2 and m1 == m2:
                dead = True   # repeated ladder operator annihilates the term
                break
            elif k1 == k2 and ((k1 == CREATE and m1 < m2) or (k1 == ANNIHILATE and m1 < m2)):
                # sort each block strictly decreasing
                fs[i], fs[i + 1] = fs[i + 1], fs[i]
                c = -c
                i = max(i - 1, 0)
            else:
                i += 1
        if not dead and c != 0.0:
            out.append(FermionTerm(c, tuple(fs)))
    return out


def normal_order(op: FermionOperator, drop_tol: float = DROP_TOL) -> FermionOperator:
    """Wick-equivalent operator with every term in canonical normal order."""
    acc: dict[tuple, complex] = {}
    for t in op.terms:
        for nt in _normalize_term(t.coeff, t.factors):
            acc[nt.factors] = acc.get(nt.factors, 0.0) + nt.coeff
    terms = [FermionTerm(c, fs) for fs, c in sorted(acc.items(), key=lambda kv: (len(kv[0]), kv[0]))
             if abs(c) > drop_tol]
    return FermionOperator(op.n_modes, terms)


def is_normal_ordered(t: FermionTerm) -> bool:
    kinds = [k for _, k in t.factors]
    if any(k2 > k1 for k1, k2 in zip(kinds, kinds[1:])):
        return False
    for (m1, k1), (m2, k2) in zip(t.factors, t.factors[1:]):
        if k1 == k2 and m1 <= m2:
            return False
    return True


def term_action_on_determinant(t: FermionTerm, occ: int) -> tuple[int | None, complex]:
    """Apply a product of ladder operators (right factor first) to |occ>."""
    amp = t.coeff
    for mode, kind in reversed(t.factors):
        bit = occ >> mode & 1
        if bit == kind:
            return None, 0.0
        if (occ & ((1 << mode) - 1)).bit_count() & 1:
            amp = -amp
        occ ^= 1 << mode
    return occ, amp


def reduce_on_reference(op: FermionOperator, ref: ReferenceDeterminant,
                        side: str = "ket", drop_tol: float = DROP_TOL) -> FermionOperator:
    """Simplify a normal-ordered operator against the reference determinant.

    side="ket": drop terms that annihilate |Phi> (create-on-occupied or
    annihilate-on-virtual), resolve number pairs a+_p a_p to their eigenvalue,
    and return pure excitation strings plus a scalar, with op|Phi> unchanged.
    side="bra" applies the mirrored rules so that <Phi|op is unchanged.
    """
    if side == "bra":
        return adjoint(reduce_on_reference(adjoint(op), ref, "ket", drop_tol))
    if side != "ket":
        raise ValueError(f"side must be 'ket' or 'bra', got {side!r}")
    occ = ref.occupation
    acc: dict[tuple, complex] = {}
    for t in op.terms:
        if not is_normal_ordered(t):
            raise ContractViolation(f"term not normal ordered: {t!r}")
        creates = frozenset(m for m, k in t.factors if k == CREATE)
        annis = frozenset(m for m, k in t.factors if k == ANNIHILATE)
        pairs = creates & annis
        pure_c = sorted(creates - pairs)
        pure_a = sorted(annis - pairs)
        # survival on the ket side
        if any(not occ >> m & 1 for m in annis):
            continue
        if any(occ >> m & 1 for m in pure_c):
            continue
        reduced = tuple([(m, CREATE) for m in reversed(pure_c)]
                        + [(m, ANNIHILATE) for m in reversed(pure_a)])
        # fix the coefficient by matching the action on |Phi>
        _, amp_full = term_action_on_determinant(t, occ)
        _, amp_red = term_action_on_determinant(FermionTerm(1.0, reduced), occ)
        if amp_full == 0.0:
            continue
        coeff = amp_full / amp_red
        acc[reduced] = acc.get(reduced, 0.0) + coeff
    terms = [FermionTerm(c, fs) for fs, c in sorted(acc.items(), key=lambda kv: (len(kv[0]), kv[0]))
             if abs(c) > drop_tol]
    return FermionOperator(op.n_modes, terms)


# ---------------------------------------------------------------------------
# Jordan-Wigner mappings
# ---------------------------------------------------------------------------

def _jw_ladder(mode: int, kind: int, n: int) -> PauliSum:
    """a+_p = Z_0..Z_{p-1} (X_p - iY_p)/2, a_p the +i branch."""
    zstr = (1 << mode) - 1
    sign = -1.0j if kind == CREATE else 1.0j
    return PauliSum([
        PauliTerm(0.5, 1 << mode, zstr, n),
        PauliTerm(0.5 * sign, 1 << mode, zstr | (1 << mode), n),
    ], n)


def standard_jw(op: FermionOperator, drop_tol: float = DROP_TOL) -> PauliSum:
    """Exact qubit image of a fermionic operator under Jordan-Wigner."""
    n = op.n_modes
    out: list[PauliTerm] = []
    for t in op.terms:
        partial = [PauliTerm(t.coeff, 0, 0, n)]
        for mode, kind in t.factors:
            ladder = _jw_ladder(mode, kind, n)
            partial = [multiply(p, q) for p in partial for q in ladder.terms]
        out.extend(partial)
    return collect(PauliSum(out, n), drop_tol)


#: per-factor single-string substitutions, valid acting on the reference:
#: annihilate-occupied i -> i * Z_{<i} Y_i   (Y branch)  or  Z_{<i} X_i (X branch)
#: create-virtual a      -> Z_{<a} X_a       (X branch)  or -i * Z_{<a} Y_a (Y branch)
DEFAULT_BRANCHES = {ANNIHILATE: "y", CREATE: "x"}
PAPER_BRANCHES = {ANNIHILATE: "x", CREATE: "x"}


def _sr_factor(mode: int, kind: int, branch: str, n: int) -> PauliTerm:
    zstr = (1 << mode) - 1
    if branch == "x":
        return PauliTerm(1.0, 1 << mode, zstr, n)
    coeff = 1.0j if kind == ANNIHILATE else -1.0j
    return PauliTerm(coeff, 1 << mode, zstr | (1 << mode), n)


def sr_jw(op: FermionOperator, ref: ReferenceDeterminant,
          branches: dict | None = None, drop_tol: float = DROP_TOL) -> PauliSum:
    """Reference-guided mapping: one Pauli string per fermionic term.

    Requires `op` reduced on the reference (pure excitation or de-excitation
    strings touching each mode once, plus scalars).  The emitted sum satisfies
    (sum)|Phi> = op|Phi> exactly: any residual phase from the per-factor
    substitution is repaired against the Slater-Condon sign of the term.
    """
    branches = branches or DEFAULT_BRANCHES
    n = op.n_modes
    out = []
    for t in op.terms:
        modes = [m for m, _ in t.factors]
        if len(set(modes)) != len(modes):
            raise ContractViolation(f"term touches a mode twice: {t!r}")
        if not t.factors:
            out.append(PauliTerm(t.coeff, 0, 0, n))
            continue
        prod = None
        for mode, kind in t.factors:
            occupied = ref.occupied(mode)
            if kind == ANNIHILATE and not occupied or kind == CREATE and occupied:
                raise ContractViolation(
                    f"factor a{'+' if kind else ''}_{mode} is not reference-pure in {t!r}")
            fac = _sr_factor(mode, kind, branches[kind], n)
            prod = fac if prod is None else multiply(prod, fac)
        target, amp = term_action_on_determinant(FermionTerm(t.coeff, t.factors), ref.occupation)
        if target is None:
            raise ContractViolation(f"term annihilates the reference: {t!r}")
        # action phase of the bare mask string on |Phi>
        power = ((prod.x & prod.z).bit_count() + 2 * ((prod.z & ref.occupation).bit_count() & 1)) % 4
        out.append(PauliTerm(amp / (1.0j ** power), prod.x, prod.z, n))
    return collect(PauliSum(out, n), drop_tol)
