"""Projective coupled-cluster and Lambda solvers driven by exact Fock-space
application (no diagrammatic contractions).

Residuals are components of e^{-T} H e^{T} |Phi> read off the sector vector;
the quasi-Newton update divides by mean-field denominators with DIIS
acceleration.  References whose denominators are indefinite (e.g. the SIAM
site basis) fall back to a finite-difference Newton solve, which is cheap in
the small amplitude spaces this package targets.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterOperator, excitation_slots
from .errors import ContractViolation, ConvergenceError
from .fermion import (FermionOperator, FermionTerm, ReferenceDeterminant,
                      term_action_on_determinant)
from .fock_space import (SectorBasis, StateVector, apply_fermion, basis_state,
                         excitation_ranks, operator_matrix)
from .models import fock_operator, fock_spectrum

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_SHIFT = 0.1
SHIFT_THRESHOLD = 1e-6
NEWTON_CAP = 600


@dataclass
class CcSolution:
    t: ClusterOperator
    energy: float
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


@dataclass
class LambdaSolution:
    lam: ClusterOperator
    residual_norm: float
    iterations: int


class CcWorkspace:
    """Shared scaffolding: sector basis, slot indexing, Hamiltonian matrix."""

    def __init__(self, h: FermionOperator, ref: ReferenceDeterminant, max_rank: int):
        self.h = h
        self.ref = ref
        self.max_rank = max_rank
        self.basis = SectorBasis.for_reference(ref)
        self.slots = excitation_slots(ref, max_rank)
        self.phi = basis_state(self.basis, ref)
        self.iref = self.basis.index_of(ref.occupation)
        self.hmat = operator_matrix(h, self.basis)
        spec = fock_spectrum(h, ref)
        self.spectrum = spec
        self.denoms = np.array([spec.denominator(ii, aa) for ii, aa in self.slots])
        sgn = np.empty(len(self.slots))
        tgt = np.empty(len(self.slots), dtype=np.int64)
        for m, (ii, aa) in enumerate(self.slots):
            factors = tuple([(a, 1) for a in aa] + [(i, 0) for i in reversed(ii)])
            det, amp = term_action_on_determinant(FermionTerm(1.0, factors), ref.occupation)
            sgn[m] = amp.real
            tgt[m] = self.basis.index_of(det)
        self.sgn, self.tgt = sgn, tgt

    def cluster_from_vec(self, vec: np.ndarray) -> ClusterOperator:
        t = ClusterOperator(self.ref.n_modes, self.max_rank)
        for m, (ii, aa) in enumerate(self.slots):
            if vec[m] != 0.0:
                t.set(ii, aa, float(vec[m]))
        return t

    def vec_from_cluster(self, t: ClusterOperator) -> np.ndarray:
        vec = np.zeros(len(self.slots))
        lookup = {key: m for m, key in enumerate(self.slots)}
        for _, key, val in t.items():
            if key not in lookup:
                raise ContractViolation(f"amplitude {key} outside slot manifold")
            vec[lookup[key]] = val
        return vec

    def _exp_apply(self, top: FermionOperator, v: StateVector) -> StateVector:
        out = v.copy()
        term = v
        for k in range(1, self.ref.n_electrons + 1):
            term = apply_fermion(top, term).scaled(1.0 / k)
            if not np.abs(term.amps).any():
                break
            out = out + term
        return out

    def hbar_on_ref(self, vec: np.ndarray):
        """(e^{-T} H e^{T}|Phi>, H e^{T}|Phi>)."""
        top = self.cluster_from_vec(vec).to_fermion_operator()
        v = self._exp_apply(top, self.phi)
        w = StateVector(self.basis, self.hmat @ v.amps)
        u = self._exp_apply(top.scaled(-1.0), w)
        return u, w

    def residual_vec(self, vec: np.ndarray) -> np.ndarray:
        u, _ = self.hbar_on_ref(vec)
        return self.sgn * u.amps[self.tgt].real

    def energy_of(self, vec: np.ndarray) -> float:
        _, w = self.hbar_on_ref(vec)
        return float(w.amps[self.iref].real)


def _ci_seed(ws: CcWorkspace) -> np.ndarray:
    """Cluster-decomposed lowest CI root in the reference+excitations subspace.

    Targets the ground-state branch of the nonlinear amplitude equations,
    which matters for references with indefinite denominators (the plain
    MP-like zero start can drift to a different fixed point there).
    """
    idx = np.concatenate(([ws.iref], ws.tgt))
    sub = ws.hmat[np.ix_(idx, idx)].toarray()
    w, vecs = np.linalg.eigh((sub + sub.conj().T).real / 2.0)
    col = None
    for k in np.argsort(w):
        if abs(vecs[0, k]) > 0.1:
            col = vecs[:, k]
            break
    if col is None:
        return np.zeros(len(ws.slots))
    c = ws.sgn * (col[1:] / col[0])
    ranks = np.array([len(ii) for ii, _ in ws.slots])
    t = np.where(ranks == 1, c, 0.0)
    # subtract disconnected products: T2 = C2 - (T1^2/2)|Phi>, T3 = C3 - (T1 T2 + T1^3/6)|Phi>
    for rank in (2, 3):
        if rank > ws.max_rank or not (ranks == rank).any():
            break
        low = ws.cluster_from_vec(np.where(ranks < rank, t, 0.0)).to_fermion_operator()
        v = ws.phi.copy()
        term = ws.phi
        for k in range(1, rank + 1):
            term = apply_fermion(low, term).scaled(1.0 / k)
            v = v + term
        comp = ws.sgn * v.amps[ws.tgt].real
        t = np.where(ranks == rank, c - comp, t)
    return t


def cc_residuals(h: FermionOperator, t: ClusterOperator, ref: ReferenceDeterminant,
                 max_rank: int) -> dict:
    """Projections <Phi_mu| e^{-T} H e^{T} |Phi> over the rank<=max_rank manifold."""
    ws = CcWorkspace(h, ref, max_rank)
    r = ws.residual_vec(ws.vec_from_cluster(t))
    return {key: float(val) for key, val in zip(ws.slots, r)}


def _shifted(denoms: np.ndarray, shift: float, threshold: float) -> np.ndarray:
    small = np.abs(denoms) < threshold
    if small.any():
        log.info("level shift %.3g engaged on %d denominators", shift, int(small.sum()))
    return np.where(small, -shift, denoms)


class _Diis:
    def __init__(self, depth: int):
        self.ts = deque(maxlen=depth)
        self.errs = deque(maxlen=depth)

    def push_and_extrapolate(self, t: np.ndarray, err: np.ndarray) -> np.ndarray:
        self.ts.append(t.copy())
        self.errs.append(err.copy())
        k = len(self.ts)
        if k < 2:
            return t
        B = np.empty((k + 1, k + 1))
        B[:k, :k] = [[float(e1 @ e2) for e2 in self.errs] for e1 in self.errs]
        B[k, :], B[:, k], B[k, k] = -1.0, -1.0, 0.0
        rhs = np.zeros(k + 1)
        rhs[k] = -1.0
        try:
            c = np.linalg.solve(B, rhs)[:k]
        except np.linalg.LinAlgError:
            return t
        return np.sum([ci * ti for ci, ti in zip(c, self.ts)], axis=0)

    def reset(self):
        self.ts.clear()
        self.errs.clear()


def _newton_polish(ws: CcWorkspace, t: np.ndarray, tol: float, max_steps: int = 40,
                   fd_eps: float = 1e-7):
    """Finite-difference Newton iterations from the current amplitudes."""
    history = []
    for _ in range(max_steps):
        r = ws.residual_vec(t)
        rn = float(np.abs(r).max(initial=0.0))
        history.append(rn)
        if rn < tol:
            return t, rn, history
        jac = np.empty((len(t), len(t)))
        for nu in range(len(t)):
            dt = t.copy()
            dt[nu] += fd_eps
            jac[:, nu] = (ws.residual_vec(dt) - r) / fd_eps
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        # damped step if the full one does not reduce the residual
        for lam in (1.0, 0.5, 0.25, 0.1):
            cand = t - lam * step
            if np.abs(ws.residual_vec(cand)).max(initial=0.0) < rn or lam == 0.1:
                t = cand
                break
    r = ws.residual_vec(t)
    return t, float(np.abs(r).max(initial=0.0)), history


def solve_cc(h: FermionOperator, ref: ReferenceDeterminant, max_rank: int,
             tol: float = DEFAULT_TOL, max_iter: int = 300, diis_depth: int = 8,
             t0: ClusterOperator | None = None, damping: float = 1.0,
             level_shift: float = DEFAULT_SHIFT, shift_threshold: float = SHIFT_THRESHOLD,
             newton_cap: int = NEWTON_CAP, workspace: CcWorkspace | None = None) -> CcSolution:
    """Quasi-Newton + DIIS amplitude solve with Newton fallback.

    Raises ConvergenceError (with the residual-norm history) if neither phase
    reaches `tol`.
    """
    ws = workspace or CcWorkspace(h, ref, max_rank)
    denoms = _shifted(ws.denoms, level_shift, shift_threshold)
    t = _ci_seed(ws) if t0 is None else ws.vec_from_cluster(t0)
    diis = _Diis(diis_depth)
    history = []
    best_t, best_rn = t.copy(), np.inf
    iterations = 0
    for it in range(max_iter):
        iterations = it + 1
        r = ws.residual_vec(t)
        rn = float(np.abs(r).max(initial=0.0))
        history.append(rn)
        if rn < best_rn:
            best_rn, best_t = rn, t.copy()
        if rn < tol:
            return CcSolution(ws.cluster_from_vec(t), ws.energy_of(t), rn, iterations, history)
        stalled = it > 30 and rn > 0.5 * max(history[max(0, it - 20)], 1e-300)
        diverging = rn > 1e3 or not np.isfinite(rn)
        if (stalled or diverging) and len(ws.slots) <= newton_cap:
            t, rn, nhist = _newton_polish(ws, best_t, tol)
            history.extend(nhist)
            if rn < tol:
                return CcSolution(ws.cluster_from_vec(t), ws.energy_of(t), rn,
                                  iterations + len(nhist), history)
            raise ConvergenceError(f"CC solve stalled at |r|={rn:.3e}", history)
        if diverging:
            t = best_t.copy()
            diis.reset()
            continue
        t_step = t - damping * r / denoms
        t = diis.push_and_extrapolate(t_step, r)
    if len(ws.slots) <= newton_cap:
        t, rn, nhist = _newton_polish(ws, best_t, tol)
        history.extend(nhist)
        if rn < tol:
            return CcSolution(ws.cluster_from_vec(t), ws.energy_of(t), rn,
                              iterations + len(nhist), history)
    raise ConvergenceError(f"CC solve did not reach tol={tol:g}: |r|={history[-1]:.3e}",
                           history)


class LambdaWorkspace:
    """Left-equation machinery sharing a CcWorkspace."""

    def __init__(self, ws: CcWorkspace, t: ClusterOperator, energy: float,
                 lam_rank: int | None = None):
        self.ws = ws
        self.energy = energy
        rank = lam_rank or ws.max_rank
        self.slots = excitation_slots(ws.ref, rank)
        sgn = np.empty(len(self.slots))
        tgt = np.empty(len(self.slots), dtype=np.int64)
        for m, (ii, aa) in enumerate(self.slots):
            factors = tuple([(a, 1) for a in aa] + [(i, 0) for i in reversed(ii)])
            det, amp = term_action_on_determinant(FermionTerm(1.0, factors),
                                                  ws.ref.occupation)
            sgn[m] = amp.real
            tgt[m] = ws.basis.index_of(det)
        self.sgn, self.tgt = sgn, tgt
        self.denoms = np.array([ws.spectrum.denominator(ii, aa) for ii, aa in self.slots])
        self.t_dag = t.to_fermion_operator(dagger=True)
        self.hmat_dag = ws.hmat.getH().tocsr()

    def _hbar_dag(self, x: StateVector) -> StateVector:
        """(e^{-T} H e^{T})^dagger x = e^{T+} H e^{-T+} x."""
        y = self.ws._exp_apply(self.t_dag.scaled(-1.0), x)
        y = StateVector(self.ws.basis, self.hmat_dag @ y.amps)
        return self.ws._exp_apply(self.t_dag, y)

    def residual_vec(self, lam: np.ndarray) -> np.ndarray:
        """<Phi|(1+Lambda)(Hbar - E)E_mu|Phi> for each slot."""
        x = self.ws.phi.amps.copy()
        x[self.tgt] += lam * self.sgn
        xs = StateVector(self.ws.basis, x)
        y = self._hbar_dag(xs).amps - self.energy * x
        return self.sgn * y[self.tgt].real


def solve_lambda(h: FermionOperator, t: ClusterOperator, ref: ReferenceDeterminant,
                 max_rank: int, tol: float = DEFAULT_TOL, max_iter: int = 300,
                 diis_depth: int = 8, energy: float | None = None,
                 level_shift: float = DEFAULT_SHIFT, newton_cap: int = NEWTON_CAP,
                 workspace: CcWorkspace | None = None) -> LambdaSolution:
    """Solve the linear left (de-excitation) equations by Jacobi/DIIS with a
    direct dense solve as fallback (the equations are linear in Lambda)."""
    ws = workspace or CcWorkspace(h, ref, max_rank)
    if energy is None:
        energy = ws.energy_of(ws.vec_from_cluster(t))
    lws = LambdaWorkspace(ws, t, energy, lam_rank=max_rank)
    denoms = _shifted(lws.denoms, level_shift, SHIFT_THRESHOLD)
    lam = np.zeros(len(lws.slots))
    diis = _Diis(diis_depth)
    history = []
    for it in range(max_iter):
        r = lws.residual_vec(lam)
        rn = float(np.abs(r).max(initial=0.0))
        history.append(rn)
        if rn < tol:
            return LambdaSolution(_cluster_from(lws, lam), rn, it + 1)
        if (it > 25 and rn > 0.5 * max(history[max(0, it - 15)], 1e-300)) or rn > 1e3:
            break
        lam = diis.push_and_extrapolate(lam - r / denoms, r)
    if len(lws.slots) <= newton_cap:
        b = lws.residual_vec(np.zeros(len(lws.slots)))
        A = np.empty((len(b), len(b)))
        for nu in range(len(b)):
            e = np.zeros(len(b)); e[nu] = 1.0
            A[:, nu] = lws.residual_vec(e) - b
        lam = np.linalg.solve(A, -b)
        rn = float(np.abs(lws.residual_vec(lam)).max(initial=0.0))
        if rn < max(tol, 1e-8):
            return LambdaSolution(_cluster_from(lws, lam), rn, max_iter)
    raise ConvergenceError(f"Lambda solve stalled: |r|={history[-1]:.3e}", history)


def _cluster_from(lws: LambdaWorkspace, lam: np.ndarray) -> ClusterOperator:
    out = ClusterOperator(lws.ws.ref.n_modes, max(len(ii) for ii, _ in lws.slots))
    for m, (ii, aa) in enumerate(lws.slots):
        if lam[m] != 0.0:
            out.set(ii, aa, float(lam[m]))
    return out


# ---------------------------------------------------------------------------
# Perturbative triples quantities
# ---------------------------------------------------------------------------

def _vn_apply(h: FermionOperator, ref: ReferenceDeterminant, v: StateVector) -> StateVector:
    """(H - F) v; scalar pieces are irrelevant under the Q3 projection."""
    f_op = fock_operator(h, ref)
    return apply_fermion(h, v) - apply_fermion(f_op, v)


def triples_moment(h: FermionOperator, t2: ClusterOperator,
                   ref: ReferenceDeterminant) -> StateVector:
    """Q3 (V_N T2)_C |Phi>: triply excited components of V_N T2 |Phi>.

    The triples projection of V_N T2|Phi> is automatically connected
    (a disconnected product cannot land on a rank-3 determinant); asserted
    here by construction since V_N = H - F - const has no external scalars.
    """
    basis = SectorBasis.for_reference(ref)
    phi = basis_state(basis, ref)
    t2v = apply_fermion(t2.restricted((2,)).to_fermion_operator(), phi)
    w = _vn_apply(h, ref, t2v)
    ranks = excitation_ranks(basis, ref)
    return StateVector(basis, np.where(ranks == 3, w.amps, 0.0))


def perturbative_l3(h: FermionOperator, t2: ClusterOperator, ref: ReferenceDeterminant,
                    spectrum=None, level_shift: float = DEFAULT_SHIFT) -> ClusterOperator:
    """Rank-3 de-excitation amplitudes (R0^(3) (V_N T2)_C)^dagger.

    l3 components are the triples moments divided by the three-body
    mean-field denominator eps_i+eps_j+eps_k-eps_a-eps_b-eps_c.
    """
    if any(k != 2 for k in t2.ranks_present()):
        raise ContractViolation("perturbative_l3 takes a rank-2-only cluster operator")
    spec = spectrum or fock_spectrum(h, ref)
    m3 = triples_moment(h, t2, ref)
    basis = m3.basis
    out = ClusterOperator(ref.n_modes, 3)
    shifted = 0
    for ii, aa in excitation_slots(ref, 3):
        if len(ii) != 3:
            continue
        factors = tuple([(a, 1) for a in aa] + [(i, 0) for i in reversed(ii)])
        det, amp = term_action_on_determinant(FermionTerm(1.0, factors), ref.occupation)
        comp = amp.real * m3.amps[basis.index_of(det)].real
        if comp == 0.0:
            continue
        d = spec.denominator(ii, aa)
        if abs(d) < SHIFT_THRESHOLD:
            d = -level_shift
            shifted += 1
        out.set(ii, aa, comp / d)
    if shifted:
        log.warning("perturbative_l3: level shift applied to %d denominators", shifted)
    return out
