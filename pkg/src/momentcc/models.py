"""Problem-instance construction: SIAM Hamiltonians, FCIDUMP ingestion,
mean-field spectra.

Spin orbitals are interleaved everywhere: spatial orbital p maps to modes
2p (alpha) and 2p+1 (beta).  Two-electron integrals are chemist (pq|rs).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ModelError, ParseError
from .fermion import (ANNIHILATE, CREATE, FermionOperator, FermionTerm,
                      ReferenceDeterminant, normal_order)

COEFF_TOL = 1e-14


@dataclass
class SiamParams:
    """Single impurity Anderson model: impurity level + Coulomb U,
    non-interacting bath, homogeneous hybridization V."""

    U: float
    V: float
    eps_c: float
    bath_levels: tuple
    n_bath: int = 0

    def __post_init__(self):
        self.bath_levels = tuple(self.bath_levels)
        if self.n_bath == 0:
            self.n_bath = len(self.bath_levels)
        if self.n_bath != len(self.bath_levels):
            raise ModelError("n_bath != len(bath_levels)")

    @classmethod
    def symmetric(cls, U: float, V: float = 1.0, bath_levels=(-1.0, 0.0, 1.0)):
        """Particle-hole symmetric model: eps_c = -U/2."""
        return cls(U=U, V=V, eps_c=-U / 2.0, bath_levels=bath_levels)

    @property
    def n_sites(self) -> int:
        return 1 + self.n_bath


def siam_spatial_integrals(p: SiamParams) -> tuple[np.ndarray, np.ndarray]:
    """Site-basis one-body matrix and chemist two-body tensor."""
    n = p.n_sites
    h = np.zeros((n, n))
    h[0, 0] = p.eps_c
    for b, eb in enumerate(p.bath_levels, start=1):
        h[b, b] = eb
        h[0, b] = h[b, 0] = p.V
    g = np.zeros((n, n, n, n))
    g[0, 0, 0, 0] = p.U
    return h, g


def siam_meanfield_orbitals(p: SiamParams, n_occ: int, max_iter: int = 200,
                            tol: float = 1e-12) -> np.ndarray:
    """Restricted mean-field orbitals; impurity level dressed by U<n>/2.

    For the symmetric model this converges to the impurity level shifted
    exactly to zero (half impurity occupation per spin).
    """
    h, _ = siam_spatial_integrals(p)
    n_imp = 1.0   # per-spin pair: start from half filling of the impurity
    C = None
    for _ in range(max_iter):
        f = h.copy()
        f[0, 0] = p.eps_c + p.U * n_imp / 2.0
        _, C = np.linalg.eigh(f)
        new = 2.0 * float(np.sum(C[0, :n_occ] ** 2))
        if abs(new - n_imp) < tol:
            break
        n_imp = 0.5 * n_imp + 0.5 * new
    return C


def rotate_integrals(h: np.ndarray, g: np.ndarray, C: np.ndarray):
    h2 = C.T @ h @ C
    g2 = np.einsum("pi,qj,rk,sl,pqrs->ijkl", C, C, C, C, g, optimize=True)
    return h2, g2


def integrals_to_operator(core: float, h: np.ndarray, g: np.ndarray,
                          coeff_tol: float = COEFF_TOL) -> FermionOperator:
    """Spin-orbital Hamiltonian from spatial integrals (chemist ordering).

    H = core + sum h_pq a+_{p s} a_{q s}
             + 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s' t} a_{q s}
    """
    n = h.shape[0]
    terms = []
    if abs(core) > 0.0:
        terms.append(FermionTerm(complex(core), ()))
    for p in range(n):
        for q in range(n):
            if abs(h[p, q]) <= coeff_tol:
                continue
            for s in (0, 1):
                terms.append(FermionTerm(complex(h[p, q]),
                                         ((2 * p + s, CREATE), (2 * q + s, ANNIHILATE))))
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    val = g[p, q, r, s]
                    if abs(val) <= coeff_tol:
                        continue
                    for sa in (0, 1):
                        for sb in (0, 1):
                            m1, m2 = 2 * p + sa, 2 * r + sb
                            m3, m4 = 2 * s + sb, 2 * q + sa
                            if m1 == m2 or m3 == m4:
                                continue
                            terms.append(FermionTerm(
                                0.5 * complex(val),
                                ((m1, CREATE), (m2, CREATE),
                                 (m3, ANNIHILATE), (m4, ANNIHILATE))))
    return FermionOperator(2 * n, terms)


def aufbau_reference(diag: np.ndarray, n_alpha: int, n_beta: int) -> ReferenceDeterminant:
    """Doubly/singly occupy the spatial orbitals with the lowest diagonal."""
    order = np.argsort(diag, kind="stable")
    occ = 0
    for p in order[:n_alpha]:
        occ |= 1 << (2 * int(p))
    for p in order[:n_beta]:
        occ |= 1 << (2 * int(p) + 1)
    return ReferenceDeterminant(occ, 2 * len(diag))


def build_siam(p: SiamParams, basis: str = "site"):
    """SIAM Hamiltonian and half-filled reference determinant.

    basis="site" keeps the physical site orbitals (impurity first); the
    reference doubly occupies the lowest site levels.  basis="meanfield"
    rotates to restricted mean-field orbitals first.  Exact spectra are
    basis independent; CC energies are not (the calibrated default for
    reproducing the tabulated CC columns is the site basis).
    """
    h, g = siam_spatial_integrals(p)
    n_electrons = p.n_sites          # half filling
    n_alpha = (n_electrons + 1) // 2
    n_beta = n_electrons - n_alpha
    if basis == "meanfield":
        C = siam_meanfield_orbitals(p, n_occ=n_alpha)
        h, g = rotate_integrals(h, g, C)
    elif basis != "site":
        raise ModelError(f"unknown basis {basis!r}")
    op = integrals_to_operator(0.0, h, g)
    ref = aufbau_reference(np.diag(h), n_alpha, n_beta)
    return op, ref


# ---------------------------------------------------------------------------
# FCIDUMP
# ---------------------------------------------------------------------------

@dataclass
class MolecularIntegrals:
    n_spatial: int
    n_electrons: int
    ms2: int
    core_energy: float
    one_body: np.ndarray
    two_body: np.ndarray          # chemist (pq|rs)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        h, g = self.one_body, self.two_body
        if not np.allclose(h, h.T, atol=1e-10):
            raise ModelError("one-body integrals not symmetric")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=1e-10):
                raise ModelError("two-body integrals break 8-fold symmetry")


_NAMELIST_RE = re.compile(r"&FCI(.*?)(?:/|&END)", re.IGNORECASE | re.DOTALL)


def parse_fcidump(text: str) -> MolecularIntegrals:
    """Parse the FCIDUMP namelist format (1-based indices, chemist order)."""
    m = _NAMELIST_RE.search(text)
    if not m:
        raise ParseError("missing &FCI ... / namelist header")
    header = m.group(1)
    keys: dict[str, str] = {}
    for pair in re.finditer(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=(?:,?\s*[A-Za-z0-9_]+\s*=)|$)",
                            header, re.DOTALL):
        keys[pair.group(1).upper()] = pair.group(2).strip().rstrip(",").strip()
    try:
        norb = int(keys["NORB"])
        nelec = int(keys["NELEC"])
    except KeyError as exc:
        raise ParseError(f"namelist missing {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"malformed namelist value: {exc}") from exc
    ms2 = int(keys.get("MS2", "0") or 0)
    extras = {k: v for k, v in keys.items() if k not in ("NORB", "NELEC", "MS2")}

    h = np.zeros((norb, norb))
    hset = np.zeros((norb, norb), dtype=bool)
    g = np.zeros((norb, norb, norb, norb))
    gset = np.zeros((norb, norb, norb, norb), dtype=bool)
    core = 0.0

    body = text[m.end():]
    offset = text[:m.end()].count("\n")
    for lineno, raw in enumerate(body.splitlines(), start=offset + 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.replace("D", "E").replace("d", "e").split()
        if len(parts) != 5:
            raise ParseError(f"expected 'value i j k l', got {raw!r}", lineno)
        try:
            val = float(parts[0])
            i, j, k, l = (int(v) for v in parts[1:])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        for idx in (i, j, k, l):
            if idx < 0 or idx > norb:
                raise ParseError(f"orbital index {idx} out of range 0..{norb}", lineno)
        if i == j == k == l == 0:
            core = val
        elif k == 0 and l == 0 and i > 0 and j > 0:
            for a, b in ((i - 1, j - 1), (j - 1, i - 1)):
                if hset[a, b] and abs(h[a, b] - val) > 1e-10:
                    raise ParseError(f"conflicting h({i},{j}) records", lineno)
                h[a, b] = val
                hset[a, b] = True
        elif j == 0 and k == 0 and l == 0:
            continue   # orbital-energy record, ignored
        elif min(i, j, k, l) > 0:
            a, b, c, d = i - 1, j - 1, k - 1, l - 1
            for p, q, r, s in _eightfold(a, b, c, d):
                if gset[p, q, r, s] and abs(g[p, q, r, s] - val) > 1e-10:
                    raise ParseError(f"conflicting ({i}{j}|{k}{l}) records", lineno)
                g[p, q, r, s] = val
                gset[p, q, r, s] = True
        else:
            raise ParseError(f"unclassifiable record {raw!r}", lineno)
    return MolecularIntegrals(norb, nelec, ms2, core, h, g, extras)


def _eightfold(p, q, r, s):
    return {(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
            (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)}


def serialize_fcidump(m: MolecularIntegrals) -> str:
    """Canonical FCIDUMP text (unique records only)."""
    lines = [f" &FCI NORB={m.n_spatial},NELEC={m.n_electrons},MS2={m.ms2},",
             f"  ORBSYM={'1,' * m.n_spatial}",
             "  ISYM=1,",
             " &END"]
    n = m.n_spatial
    for p in range(n):
        for q in range(p + 1):
            ij = p * (p + 1) // 2 + q
            for r in range(n):
                for s in range(r + 1):
                    if ij < r * (r + 1) // 2 + s:
                        continue
                    val = m.two_body[p, q, r, s]
                    if abs(val) > 1e-16:
                        lines.append(f" {val:.16g} {p + 1} {q + 1} {r + 1} {s + 1}")
    for p in range(n):
        for q in range(p + 1):
            val = m.one_body[p, q]
            if abs(val) > 1e-16:
                lines.append(f" {val:.16g} {p + 1} {q + 1} 0 0")
    lines.append(f" {m.core_energy:.16g} 0 0 0 0")
    return "\n".join(lines) + "\n"


def to_fermion_operator(m: MolecularIntegrals):
    """Spin-orbital Hamiltonian + aufbau reference from molecular integrals."""
    if m.n_electrons > 2 * m.n_spatial:
        raise ModelError("more electrons than spin orbitals")
    n_alpha = (m.n_electrons + m.ms2) // 2
    n_beta = m.n_electrons - n_alpha
    if n_alpha < 0 or n_beta < 0 or n_alpha - n_beta != m.ms2:
        raise ModelError(f"electron count {m.n_electrons} inconsistent with MS2={m.ms2}")
    op = integrals_to_operator(m.core_energy, m.one_body, m.two_body)
    ref = aufbau_reference(np.arange(m.n_spatial, dtype=float), n_alpha, n_beta)
    return op, ref


# ---------------------------------------------------------------------------
# Mean-field spectrum from an operator
# ---------------------------------------------------------------------------

@dataclass
class FockSpectrum:
    eps: np.ndarray

    def denominator(self, ii, aa) -> float:
        return float(sum(self.eps[i] for i in ii) - sum(self.eps[a] for a in aa))


def extract_tensors(op: FermionOperator):
    """Read back (constant, h1, antisymmetrized <pq||rs>) from an operator.

    The operator must be at most two-body and particle conserving; terms of
    higher rank raise.  In the canonical normal-ordered form
    a+_p a+_q a_r a_s (p>q, r>s) the coefficient equals -<pq||rs>.
    """
    n = op.n_modes
    const = 0.0 + 0.0j
    h1 = np.zeros((n, n), dtype=complex)
    v = np.zeros((n, n, n, n), dtype=complex)
    for t in normal_order(op).terms:
        k = len(t.factors)
        if k == 0:
            const += t.coeff
        elif k == 2:
            (p, k1), (q, k2) = t.factors
            if (k1, k2) != (CREATE, ANNIHILATE):
                raise ContractViolation("non particle-conserving one-body term")
            h1[p, q] += t.coeff
        elif k == 4:
            (p, k1), (q, k2), (r, k3), (s, k4) = t.factors
            if (k1, k2, k3, k4) != (CREATE, CREATE, ANNIHILATE, ANNIHILATE):
                raise ContractViolation("non particle-conserving two-body term")
            val = -t.coeff
            for (a, b), sgn1 in (((p, q), 1.0), ((q, p), -1.0)):
                for (c, d), sgn2 in (((r, s), 1.0), ((s, r), -1.0)):
                    v[a, b, c, d] += sgn1 * sgn2 * val
        else:
            raise ContractViolation(f"term of rank {k} not supported")
    if np.abs(h1.imag).max(initial=0.0) < 1e-13 and np.abs(v.imag).max(initial=0.0) < 1e-13:
        return complex(const), h1.real, v.real
    return complex(const), h1, v


def fock_matrix(op: FermionOperator, ref: ReferenceDeterminant) -> np.ndarray:
    """f_pq = h_pq + sum_{i occupied} <pi||qi>."""
    _, h1, v = extract_tensors(op)
    occ = ref.occupied_modes()
    f = h1.copy()
    for i in occ:
        f += v[:, i, :, i]
    return f


def fock_spectrum(op: FermionOperator, ref: ReferenceDeterminant) -> FockSpectrum:
    """Diagonal mean-field energies in the operator's orbital basis."""
    return FockSpectrum(np.diag(fock_matrix(op, ref)).copy())


def fock_operator(op: FermionOperator, ref: ReferenceDeterminant) -> FermionOperator:
    """One-body Fock operator sum f_pq a+_p a_q."""
    f = fock_matrix(op, ref)
    terms = [FermionTerm(complex(f[p, q]), ((p, CREATE), (q, ANNIHILATE)))
             for p in range(op.n_modes) for q in range(op.n_modes)
             if abs(f[p, q]) > COEFF_TOL]
    return FermionOperator(op.n_modes, terms)
