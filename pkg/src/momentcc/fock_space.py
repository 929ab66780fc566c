"""Exact linear algebra in particle-number/S_z-restricted determinant spaces.

Determinants are int64 occupation bitmasks (bit p = spin orbital p, even
modes alpha, odd modes beta under the interleaved ordering used by the model
builders).  Operator application is vectorized over the whole basis with
numpy bit arithmetic, so no matrix needs to be formed unless requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import (ContractViolation, ConvergenceError, DimensionError,
                     ModelError, ResourceError)
from .fermion import FermionOperator, ReferenceDeterminant
from .pauli import PauliSum

SECTOR_CAP = 2_000_000
DENSE_EIG_CAP = 5000


class SectorBasis:
    """Complete determinant basis with fixed (n_alpha, n_beta)."""

    __slots__ = ("n_modes", "n_alpha", "n_beta", "dets", "_index")

    def __init__(self, n_modes: int, n_alpha: int, n_beta: int, cap: int = SECTOR_CAP):
        if n_modes % 2:
            raise ModelError("interleaved spin ordering needs an even mode count")
        n_orb = n_modes // 2
        if not (0 <= n_alpha <= n_orb and 0 <= n_beta <= n_orb):
            raise ModelError("infeasible particle counts")
        from math import comb
        size = comb(n_orb, n_alpha) * comb(n_orb, n_beta)
        if size > cap:
            raise ResourceError(f"sector size {size} exceeds cap {cap}")
        alphas = [sum(1 << (2 * p) for p in c) for c in combinations(range(n_orb), n_alpha)]
        betas = [sum(1 << (2 * p + 1) for p in c) for c in combinations(range(n_orb), n_beta)]
        dets = np.sort(np.array([a | b for a in alphas for b in betas], dtype=np.int64))
        self.n_modes = n_modes
        self.n_alpha = n_alpha
        self.n_beta = n_beta
        self.dets = dets
        self._index = {int(d): i for i, d in enumerate(dets)}

    def __len__(self):
        return len(self.dets)

    def index_of(self, det: int) -> int:
        try:
            return self._index[int(det)]
        except KeyError:
            raise ContractViolation(f"determinant {det:b} outside sector") from None

    def contains(self, det: int) -> bool:
        return int(det) in self._index

    @classmethod
    def for_reference(cls, ref: ReferenceDeterminant, cap: int = SECTOR_CAP) -> "SectorBasis":
        occ = ref.occupation
        n_alpha = sum(1 for p in range(0, ref.n_modes, 2) if occ >> p & 1)
        n_beta = ref.n_electrons - n_alpha
        return cls(ref.n_modes, n_alpha, n_beta, cap)


@dataclass
class StateVector:
    basis: SectorBasis
    amps: np.ndarray

    def __post_init__(self):
        if len(self.amps) != len(self.basis):
            raise DimensionError("amplitude length != basis size")
        self.amps = np.asarray(self.amps, dtype=complex)

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def __add__(self, other):
        _check_same_basis(self, other)
        return StateVector(self.basis, self.amps + other.amps)

    def __sub__(self, other):
        _check_same_basis(self, other)
        return StateVector(self.basis, self.amps - other.amps)

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.basis, self.amps * factor)


def _check_same_basis(a: StateVector, b: StateVector):
    if a.basis is not b.basis and not np.array_equal(a.basis.dets, b.basis.dets):
        raise DimensionError("states live on different bases")


def basis_state(basis: SectorBasis, det) -> StateVector:
    occ = det if isinstance(det, int) else det.occupation
    amps = np.zeros(len(basis), dtype=complex)
    amps[basis.index_of(occ)] = 1.0
    return StateVector(basis, amps)


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    _check_same_basis(a, b)
    return complex(np.vdot(a.amps, b.amps))


def _parity_masks(dets: np.ndarray, mode: int) -> np.ndarray:
    below = np.int64((1 << mode) - 1)
    return 1 - 2 * (np.bitwise_count(dets & below).astype(np.int64) & 1)


def _apply_term_array(factors, dets: np.ndarray):
    """Vectorized ladder-string application: (target_dets, amplitudes)."""
    cur = dets.copy()
    amp = np.ones(len(dets))
    alive = np.ones(len(dets), dtype=bool)
    for mode, kind in reversed(factors):
        bit = (cur >> mode) & 1
        alive &= (bit != kind)
        amp = amp * _parity_masks(cur, mode)
        cur = np.where(alive, cur ^ np.int64(1 << mode), cur)
    return cur, np.where(alive, amp, 0.0)


def apply_fermion(op: FermionOperator, v: StateVector) -> StateVector:
    """Exact sparse application with Slater-Condon signs.

    Terms whose image leaves the sector with nonzero amplitude raise; the
    constructed Hamiltonians conserve particle number and S_z so this only
    fires on genuinely sector-breaking operators.
    """
    basis = v.basis
    dets = basis.dets
    out = np.zeros(len(basis), dtype=complex)
    nonzero = np.abs(v.amps) > 0.0
    for t in op.terms:
        if not t.factors:
            out += t.coeff * v.amps
            continue
        tgt, amp = _apply_term_array(t.factors, dets)
        live = nonzero & (amp != 0.0)
        if not live.any():
            continue
        pos = np.searchsorted(dets, tgt[live])
        ok = (pos < len(dets))
        pos_c = np.minimum(pos, len(dets) - 1)
        ok &= dets[pos_c] == tgt[live]
        if not ok.all():
            raise ContractViolation("operator image leaves the sector")
        np.add.at(out, pos_c, t.coeff * amp[live] * v.amps[live])
    return StateVector(basis, out)


def apply_pauli(s: PauliSum, v: StateVector) -> StateVector:
    """Apply a Pauli sum using mask arithmetic on determinant bitmasks."""
    basis = v.basis
    if s.n != basis.n_modes:
        raise DimensionError(f"{s.n}-qubit sum vs {basis.n_modes}-mode basis")
    dets = basis.dets
    out = np.zeros(len(basis), dtype=complex)
    nonzero = np.abs(v.amps) > 0.0
    for t in s.terms:
        phase0 = t.coeff * (1.0j ** ((t.x & t.z).bit_count() % 4))
        signs = 1 - 2 * (np.bitwise_count(dets & np.int64(t.z)).astype(np.int64) & 1)
        tgt = dets ^ np.int64(t.x)
        live = nonzero.copy()
        if not live.any():
            continue
        pos = np.searchsorted(dets, tgt[live])
        ok = pos < len(dets)
        pos_c = np.minimum(pos, len(dets) - 1)
        ok &= dets[pos_c] == tgt[live]
        if not ok.all():
            raise ContractViolation(f"Pauli term {t.label()} breaks the sector")
        np.add.at(out, pos_c, phase0 * signs[live] * v.amps[live])
    return StateVector(basis, out)


def apply_cluster_exponential(t, v: StateVector, sign: int = +1,
                              tol: float = 0.0, max_power: int = 64) -> StateVector:
    """exp(sign*T) v via the nilpotent series, terminating exactly."""
    top = t.to_fermion_operator() if hasattr(t, "to_fermion_operator") else t
    if sign < 0:
        top = top.scaled(-1.0)
    out = v.copy()
    term = v
    for k in range(1, max_power + 1):
        term = apply_fermion(top, term).scaled(1.0 / k)
        m = np.abs(term.amps).max() if len(term.amps) else 0.0
        if m <= tol:
            break
        out = out + term
    return out


def operator_matrix(op: FermionOperator, basis: SectorBasis) -> sp.csr_matrix:
    """Sparse sector matrix of a fermionic operator."""
    dets = basis.dets
    rows, cols, vals = [], [], []
    n = len(basis)
    for t in op.terms:
        if not t.factors:
            rows.append(np.arange(n)); cols.append(np.arange(n))
            vals.append(np.full(n, t.coeff, dtype=complex))
            continue
        tgt, amp = _apply_term_array(t.factors, dets)
        live = amp != 0.0
        if not live.any():
            continue
        pos = np.searchsorted(dets, tgt[live])
        ok = pos < n
        pos_c = np.minimum(pos, n - 1)
        ok &= dets[pos_c] == tgt[live]
        if not ok.all():
            raise ContractViolation("operator image leaves the sector")
        rows.append(pos_c); cols.append(np.arange(n)[live])
        vals.append(t.coeff * amp[live].astype(complex))
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return m.tocsr()


def _davidson_lowest(hmat: sp.csr_matrix, diag: np.ndarray, tol: float = 1e-10,
                     max_space: int = 40, max_iter: int = 400):
    """Restarted Davidson iteration with diagonal preconditioner."""
    n = hmat.shape[0]
    rng = np.random.default_rng(7)
    start = np.zeros(n)
    start[int(np.argmin(diag))] = 1.0
    space = [start]
    sigma = []
    theta, y = 0.0, None
    for _ in range(max_iter):
        while len(sigma) < len(space):
            sigma.append(hmat @ space[len(sigma)])
        v = np.array(space).T
        s = np.array(sigma).T
        hsub = v.T @ s
        w, u = np.linalg.eigh(hsub)
        theta, uvec = w[0], u[:, 0]
        y = v @ uvec
        res = s @ uvec - theta * y
        rnorm = np.linalg.norm(res)
        if rnorm < tol:
            return float(theta), y
        denom = diag - theta
        denom[np.abs(denom) < 1e-8] = 1e-8
        corr = res / denom
        for b in space:
            corr -= (b @ corr) * b
        nrm = np.linalg.norm(corr)
        if nrm < 1e-12:
            corr = rng.standard_normal(n)
            for b in space:
                corr -= (b @ corr) * b
            nrm = np.linalg.norm(corr)
        space.append(corr / nrm)
        if len(space) > max_space:
            space = [y / np.linalg.norm(y)]
            sigma = []
    raise ConvergenceError(f"Davidson stalled, residual {rnorm:.2e}")


def exact_ground_state(h: FermionOperator, basis: SectorBasis,
                       dense_cap: int = DENSE_EIG_CAP,
                       tol: float = 1e-10) -> tuple[float, StateVector]:
    """Lowest eigenpair: dense symmetric solve under the cap, Davidson above."""
    hmat = operator_matrix(h, basis)
    dev = hmat - hmat.getH()
    herm = np.abs(dev.data).max() if dev.nnz else 0.0
    if herm > 1e-9:
        raise ContractViolation(f"Hamiltonian not Hermitian (max dev {herm:.2e})")
    real = hmat.nnz == 0 or float(np.abs(hmat.data.imag).max()) <= 1e-14
    if len(basis) <= dense_cap:
        dense = hmat.toarray()
        arr = dense.real if real else dense
        w, vec = np.linalg.eigh(arr)
        return float(w[0]), StateVector(basis, vec[:, 0].astype(complex))
    work = hmat.real if real else hmat
    diag = work.diagonal().real
    energy, y = _davidson_lowest(work, diag, tol=tol)
    return energy, StateVector(basis, y.astype(complex))


def excitation_ranks(basis: SectorBasis, ref: ReferenceDeterminant) -> np.ndarray:
    return np.bitwise_count(np.int64(ref.occupation) & ~basis.dets).astype(np.int64)


def project(v: StateVector, ref: ReferenceDeterminant, manifold: str,
            max_rank: int | None = None) -> StateVector:
    """Mask components by excitation rank: P, QA(max_rank), or QR(max_rank)."""
    ranks = excitation_ranks(v.basis, ref)
    if manifold == "P":
        keep = ranks == 0
    elif manifold == "QA":
        if max_rank is None:
            raise ValueError("QA projector needs max_rank")
        keep = (ranks >= 1) & (ranks <= max_rank)
    elif manifold == "QR":
        if max_rank is None:
            raise ValueError("QR projector needs max_rank")
        keep = ranks > max_rank
    else:
        raise ValueError(f"unknown manifold {manifold!r}")
    return StateVector(v.basis, np.where(keep, v.amps, 0.0))


def export_state(path, v: StateVector):
    with open(path, "w") as fh:
        fh.write(f"n_modes {v.basis.n_modes}\n")
        for det, amp in zip(v.basis.dets, v.amps):
            bits = "".join("1" if det >> p & 1 else "0" for p in range(v.basis.n_modes))
            fh.write(f"{bits} {amp.real:.17g} {amp.imag:.17g}\n")


def import_state(path, basis: SectorBasis) -> StateVector:
    amps = np.zeros(len(basis), dtype=complex)
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0] == "n_modes":
                continue
            det = sum(1 << p for p, c in enumerate(parts[0]) if c == "1")
            amps[basis.index_of(det)] = complex(float(parts[1]), float(parts[2]))
    return StateVector(basis, amps)
