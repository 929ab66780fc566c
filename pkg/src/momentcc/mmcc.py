"""Assembly of partitioned bra/ket states, emulated Hadamard-test overlaps,
and the moment-corrected energy functionals.

The measured states are

    |Omega> = e^T |Phi>            (ket wave operator)
    |Gamma> = H e^T |Phi>
    <Theta| = <Phi| L e^{-T}       (Lambda-weighted bra) or a trial state

each compiled to a sum of Pauli strings via the reference-guided mapping and
compressed into unitary groups.  Every energy is a ratio of two overlaps,
<Theta|Gamma> / <Theta|Omega>, evaluated either exactly or with simulated
Bernoulli shot noise per group pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cluster import ClusterOperator, expand_exponential
from .errors import ContractViolation, DimensionError, ResourceError
from .fermion import (FermionOperator, FermionTerm, ReferenceDeterminant,
                      adjoint, normal_order, reduce_on_reference, sr_jw,
                      standard_jw, term_action_on_determinant)
from .fock_space import (SectorBasis, StateVector, apply_cluster_exponential,
                         apply_fermion, basis_state, excitation_ranks,
                         exact_ground_state, operator_matrix, overlap, project)
from .pauli import expectation_on_reference, multiply_sums
from .partition import partition

DENOM_FLOOR = 1e-8
UCC_DENSE_CAP = 4096


@dataclass
class AssembleConfig:
    """Knobs of the compilation pipeline.

    ket_scheme: "exact" applies the full nilpotent exponential expansion;
    "ccsd_ket" the fixed CCSD polynomial (identical through rank 3, the
    polynomial omits the T1^2 T2 / 2 quadruple piece).
    bra_body: "truncated" uses 1 - T1 - T2 + T1^2/2; "exact" the full
    nilpotent e^{-T}.
    """
    ket_scheme: str = "exact"
    bra_body: str = "truncated"
    branches: dict | None = None
    strategy: str = "dsatur"
    product_mode: str = "one_shot"
    drop_tol: float = 1e-12
    route: str = "vector"      # "vector" | "symbolic"


@dataclass
class PartitionedState:
    parts: tuple                      # PartitionedOperators, applied right to left
    ref: ReferenceDeterminant
    label: str

    @property
    def n_measurement_groups(self) -> int:
        out = 1
        for p in self.parts:
            out *= p.group_count
        return out

    def group_items(self):
        """Yield (index_tuple, weight, PauliSum) across the part product."""
        def rec(i, idx, weight, acc):
            if i == len(self.parts):
                yield tuple(idx), weight, acc
                return
            for g_i, g in enumerate(self.parts[i].groups):
                nxt = g.unitary_sum() if acc is None else multiply_sums(acc, g.unitary_sum())
                yield from rec(i + 1, idx + [g_i], weight * g.normalizer, nxt)
        yield from rec(0, [], 1.0, None)


@dataclass
class OverlapEstimate:
    value: complex
    shots_per_term: int
    std_error: float
    seed: int

    def __post_init__(self):
        if self.shots_per_term == 0 and self.std_error != 0.0:
            raise ValueError("exact estimates carry zero std_error")


@dataclass
class EnergyEstimate:
    value: float
    std_error: float
    imag_residue: float
    numerator: OverlapEstimate
    denominator: OverlapEstimate


# ---------------------------------------------------------------------------
# state vectors of the method expansions
# ---------------------------------------------------------------------------

def _apply_poly(pieces, v: StateVector) -> StateVector:
    """pieces: list of (coeff, [FermionOperator factors applied right-to-left])."""
    out = v.scaled(0.0)
    for coeff, ops in pieces:
        cur = v
        for op in reversed(ops):
            cur = apply_fermion(op, cur)
        out = out + cur.scaled(coeff)
    return out


def omega_vector(t: ClusterOperator, ref: ReferenceDeterminant,
                 basis: SectorBasis | None = None, scheme: str = "exact") -> StateVector:
    """Ket expansion applied to the reference."""
    basis = basis or SectorBasis.for_reference(ref)
    phi = basis_state(basis, ref)
    if scheme == "exact":
        return apply_cluster_exponential(t, phi)
    if scheme == "ccsd_ket":
        t1 = t.restricted((1,)).to_fermion_operator()
        t2 = t.restricted((2,)).to_fermion_operator()
        pieces = [(1.0, []), (1.0, [t1]), (1.0, [t2]), (0.5, [t1, t1]),
                  (1.0, [t1, t2]), (1 / 6, [t1, t1, t1]), (0.5, [t2, t2]),
                  (1 / 24, [t1, t1, t1, t1])]
        return _apply_poly(pieces, phi)
    raise ValueError(f"unknown ket scheme {scheme!r}")


def theta_vector(t: ClusterOperator, lam: ClusterOperator | None,
                 ref: ReferenceDeterminant, basis: SectorBasis | None = None,
                 body: str = "truncated") -> StateVector:
    """|Theta> = (L e^{-T})^dagger |Phi> with the chosen body expansion."""
    basis = basis or SectorBasis.for_reference(ref)
    phi = basis_state(basis, ref)
    x = phi.copy()
    if lam is not None:
        x = x + apply_fermion(lam.to_fermion_operator(dagger=False), phi)
    if body == "exact":
        return apply_cluster_exponential(t.to_fermion_operator(dagger=True), x, sign=-1)
    if body != "truncated":
        raise ValueError(f"unknown bra body {body!r}")
    t1d = t.restricted((1,)).to_fermion_operator(dagger=True)
    t2d = t.restricted((2,)).to_fermion_operator(dagger=True)
    pieces = [(1.0, []), (-1.0, [t1d]), (-1.0, [t2d]), (0.5, [t1d, t1d])]
    return _apply_poly(pieces, x)


def gamma_vector(h: FermionOperator, t: ClusterOperator, ref: ReferenceDeterminant,
                 basis: SectorBasis | None = None, scheme: str = "exact") -> StateVector:
    basis = basis or SectorBasis.for_reference(ref)
    return apply_fermion(h, omega_vector(t, ref, basis, scheme))


# ---------------------------------------------------------------------------
# compilation to partitioned states
# ---------------------------------------------------------------------------

def excitation_operator_from_state(v: StateVector, ref: ReferenceDeterminant,
                                   drop_tol: float = 1e-12) -> FermionOperator:
    """Pure-excitation operator W with W|Phi> = v (determinant expansion)."""
    basis = v.basis
    terms = []
    occ = ref.occupation
    for det, amp in zip(basis.dets, v.amps):
        if abs(amp) <= drop_tol:
            continue
        det = int(det)
        removed = tuple(p for p in range(ref.n_modes) if occ >> p & 1 and not det >> p & 1)
        added = tuple(p for p in range(ref.n_modes) if det >> p & 1 and not occ >> p & 1)
        factors = tuple([(a, 1) for a in added] + [(i, 0) for i in reversed(removed)])
        _, sign = term_action_on_determinant(FermionTerm(1.0, factors), occ)
        terms.append(FermionTerm(amp * sign, factors))
    return FermionOperator(ref.n_modes, terms)


def compile_state_vector(v: StateVector, ref: ReferenceDeterminant,
                         config: AssembleConfig, label: str) -> PartitionedState:
    """Reference-guided Pauli compilation + unitary partitioning of a state."""
    op = excitation_operator_from_state(v, ref, config.drop_tol)
    paulis = sr_jw(op, ref, branches=config.branches, drop_tol=config.drop_tol)
    part = partition(paulis, config.strategy, drop_tol=config.drop_tol)
    return PartitionedState((part,), ref, label)


def compile_operator_symbolic(op: FermionOperator, ref: ReferenceDeterminant,
                              config: AssembleConfig, label: str,
                              side: str = "ket") -> PartitionedState:
    """The documented symbolic pipeline: normal order, reduce, map, partition."""
    red = reduce_on_reference(normal_order(op, config.drop_tol), ref, side, config.drop_tol)
    if side == "bra":
        red = adjoint(red)
    paulis = sr_jw(red, ref, branches=config.branches, drop_tol=config.drop_tol)
    part = partition(paulis, config.strategy, drop_tol=config.drop_tol)
    return PartitionedState((part,), ref, label)


def assemble_state(kind: str, h: FermionOperator | None, t: ClusterOperator,
                   lam_or_trial, ref: ReferenceDeterminant,
                   config: AssembleConfig | None = None,
                   basis: SectorBasis | None = None) -> PartitionedState:
    """Build the partitioned |Omega>, |Gamma>, or |Theta> state.

    theta accepts a de-excitation ClusterOperator (Lambda-weighted bra) or a
    prebuilt trial StateVector.  gamma honours config.product_mode: one_shot
    partitions the Pauli terms of H e^T|Phi> jointly, factored keeps the
    Hamiltonian and wave-operator partitions separate.
    """
    config = config or AssembleConfig()
    basis = basis or SectorBasis.for_reference(ref)
    if kind == "omega":
        if config.route == "symbolic":
            op = expand_exponential(t, "ccsd_ket" if config.ket_scheme == "ccsd_ket"
                                    else "nilpotent_exact", ref=ref)
            return compile_operator_symbolic(op, ref, config, "omega")
        v = omega_vector(t, ref, basis, config.ket_scheme)
        return compile_state_vector(v, ref, config, "omega")
    if kind == "theta":
        if isinstance(lam_or_trial, StateVector):
            return compile_state_vector(lam_or_trial, ref, config, "theta")
        if config.route == "symbolic":
            op = expand_exponential(t, "ccsd_bra", lam=lam_or_trial)
            return compile_operator_symbolic(op, ref, config, "theta", side="bra")
        v = theta_vector(t, lam_or_trial, ref, basis, config.bra_body)
        return compile_state_vector(v, ref, config, "theta")
    if kind == "gamma":
        if h is None:
            raise ContractViolation("gamma needs the Hamiltonian")
        if config.product_mode == "factored":
            h_part = partition(standard_jw(h, config.drop_tol), config.strategy,
                               drop_tol=config.drop_tol)
            om = assemble_state("omega", None, t, None, ref, config, basis)
            return PartitionedState((h_part,) + om.parts, ref, "gamma")
        v = gamma_vector(h, t, ref, basis, config.ket_scheme)
        return compile_state_vector(v, ref, config, "gamma")
    raise ValueError(f"unknown state kind {kind!r}")


# ---------------------------------------------------------------------------
# overlap estimation
# ---------------------------------------------------------------------------

def _sample_expectation(v: float, shots: int, rng) -> tuple[float, float]:
    """Bernoulli draws at p=(1+v)/2 rescaled back to [-1, 1]."""
    p = min(1.0, max(0.0, 0.5 * (1.0 + v)))
    hits = rng.binomial(shots, p)
    est = 2.0 * hits / shots - 1.0
    var = max(0.0, (1.0 - est * est)) / shots
    return est, var


def estimate_overlap(a: PartitionedState, b: PartitionedState, shots: int = 0,
                     seed: int = 0, pair_cache: dict | None = None) -> OverlapEstimate:
    """<a|b> = sum over group pairs of u_m u_l <Phi| Um+ Ul |Phi>.

    shots=0 evaluates the expectations exactly; otherwise each real and
    imaginary part is replaced by the mean of `shots` Bernoulli draws with a
    per-pair RNG substream keyed on (seed, m, l), so results are independent
    of evaluation order.
    """
    if a.ref != b.ref:
        raise DimensionError("states built on different references")
    occ = a.ref.occupation
    value = 0.0 + 0.0j
    var = 0.0
    for am, aw, asum in a.group_items():
        a_dag = asum.dagger()
        for bl, bw, bsum in b.group_items():
            key = (am, bl)
            if pair_cache is not None and key in pair_cache:
                v = pair_cache[key]
            else:
                v = expectation_on_reference(multiply_sums(a_dag, bsum), occ)
                if pair_cache is not None:
                    pair_cache[key] = v
            w = aw * bw
            if shots == 0:
                value += w * v
                continue
            rng = np.random.default_rng([seed, len(am), *am, len(bl), *bl])
            re, vre = _sample_expectation(v.real, shots, rng)
            im, vim = _sample_expectation(v.imag, shots, rng)
            value += w * complex(re, im)
            var += w * w * (vre + vim)
    return OverlapEstimate(value, shots, float(np.sqrt(var)), seed)


def e_mmcc(theta: PartitionedState, gamma: PartitionedState, omega: PartitionedState,
           shots: int = 0, seed: int = 0, denom_floor: float = DENOM_FLOOR,
           caches: tuple | None = None) -> EnergyEstimate:
    """Asymmetric moment energy <Theta|Gamma> / <Theta|Omega>."""
    cg, co = caches if caches is not None else (None, None)
    num = estimate_overlap(theta, gamma, shots, seed, cg)
    den = estimate_overlap(theta, omega, shots, seed + 1 if shots else seed, co)
    if abs(den.value) < denom_floor:
        raise ContractViolation(f"overlap denominator {den.value:.3e} below floor")
    e = num.value / den.value
    rel = 0.0
    if shots:
        rel = np.hypot(num.std_error / abs(den.value),
                       abs(num.value) * den.std_error / abs(den.value) ** 2)
    return EnergyEstimate(float(e.real), float(rel), float(abs(e.imag)), num, den)


# ---------------------------------------------------------------------------
# functionals evaluated in the Fock engine (statevector route)
# ---------------------------------------------------------------------------

def e_lambda_functional(lam: ClusterOperator | None, h: FermionOperator,
                        t: ClusterOperator, ref: ReferenceDeterminant,
                        basis: SectorBasis | None = None) -> float:
    """Denominator-free functional <Phi| L e^{-T} H e^{T} |Phi>."""
    basis = basis or SectorBasis.for_reference(ref)
    phi = basis_state(basis, ref)
    v = apply_cluster_exponential(t, phi)
    v = apply_fermion(h, v)
    v = apply_cluster_exponential(t, v, sign=-1)
    x = phi.copy()
    if lam is not None:
        x = x + apply_fermion(lam.to_fermion_operator(dagger=False), phi)
    return float(overlap(x, v).real)


def e_ccsd_lambda3_indirect(e_ccsd: float, num_overlap: float, den_overlap: float,
                            denom_floor: float = DENOM_FLOOR) -> float:
    """(E_CCSD + <Phi|L3 e^-T H e^T|Phi>) / (1 + <Phi|L3 e^-T e^T|Phi>)."""
    if abs(1.0 + den_overlap) < denom_floor:
        raise ContractViolation("indirect denominator below floor")
    return (e_ccsd + num_overlap) / (1.0 + den_overlap)


def lambda3_overlap_components(h: FermionOperator, t: ClusterOperator,
                               lam3: ClusterOperator, ref: ReferenceDeterminant,
                               basis: SectorBasis | None = None,
                               config: AssembleConfig | None = None) -> tuple[float, float]:
    """The two indirect-measurement ingredients
    <Phi|L3 e^{-T}|H|e^T|Phi> and <Phi|L3 e^{-T}|.|e^T|Phi>
    with the method's bra/ket expansion conventions."""
    config = config or AssembleConfig()
    basis = basis or SectorBasis.for_reference(ref)
    th3 = theta_vector(t, lam3.restricted((3,)), ref, basis, config.bra_body)
    phi = basis_state(basis, ref)
    th3 = th3 - theta_vector(t, None, ref, basis, config.bra_body)  # Lambda3 part only
    om = omega_vector(t, ref, basis, config.ket_scheme)
    ga = apply_fermion(h, om)
    return float(overlap(th3, ga).real), float(overlap(th3, om).real)


def mmcc_full_correction(psi_t: StateVector, t: ClusterOperator, h: FermionOperator,
                         ref: ReferenceDeterminant, max_rank: int | None = None,
                         denom_floor: float = DENOM_FLOOR) -> float:
    """Q_R moment correction <Psi|e^T Q_R M|Phi> / <Psi|e^T|Phi>."""
    basis = psi_t.basis
    phi = basis_state(basis, ref)
    rank = max_rank if max_rank is not None else max(t.ranks_present(), default=0)
    m = apply_cluster_exponential(t, apply_fermion(h, apply_cluster_exponential(t, phi)),
                                  sign=-1)
    qr = project(m, ref, "QR", rank)
    num = overlap(psi_t, apply_cluster_exponential(t, qr))
    den = overlap(psi_t, apply_cluster_exponential(t, phi))
    if abs(den) < denom_floor:
        raise ContractViolation("trial overlap denominator below floor")
    return float((num / den).real)


# ---------------------------------------------------------------------------
# perturbative-triples corrections (Fock-engine route)
# ---------------------------------------------------------------------------

def triples_trial_state(t: ClusterOperator, m3: StateVector, ref: ReferenceDeterminant,
                        spectrum, kind: str = "ccsd_t_bracket",
                        h: FermionOperator | None = None) -> StateVector:
    """CCSD[T] / CCSD(T) trial states.

    [T]: (1 + T1 + T2 + R0^(3)(V_N T2)_C)|Phi>;  (T) adds R0^(3) V_N T1|Phi>.
    R0^(3) divides triples components by eps_i+eps_j+eps_k-eps_a-eps_b-eps_c.
    """
    basis = m3.basis
    phi = basis_state(basis, ref)
    v = phi + apply_fermion(t.restricted((1,)).to_fermion_operator(), phi) \
        + apply_fermion(t.restricted((2,)).to_fermion_operator(), phi)
    tri = m3.copy()
    if kind == "ccsd_t_paren":
        if h is None:
            raise ContractViolation("(T) trial needs the Hamiltonian")
        from .cc import _vn_apply
        t1v = apply_fermion(t.restricted((1,)).to_fermion_operator(), phi)
        w = _vn_apply(h, ref, t1v)
        ranks = excitation_ranks(basis, ref)
        tri = tri + StateVector(basis, np.where(ranks == 3, w.amps, 0.0))
    elif kind != "ccsd_t_bracket":
        raise ValueError(f"unknown trial kind {kind!r}")
    denom = _triples_denominators(basis, ref, spectrum)
    resolved = np.divide(tri.amps, denom, out=np.zeros_like(tri.amps), where=denom != 0.0)
    return v + StateVector(basis, resolved)


def _triples_denominators(basis: SectorBasis, ref: ReferenceDeterminant, spectrum):
    ranks = excitation_ranks(basis, ref)
    eps = spectrum.eps
    occ_mask = ref.occupation
    out = np.zeros(len(basis))
    for i, det in enumerate(basis.dets):
        if ranks[i] != 3:
            continue
        det = int(det)
        removed = [p for p in range(ref.n_modes) if occ_mask >> p & 1 and not det >> p & 1]
        added = [p for p in range(ref.n_modes) if det >> p & 1 and not occ_mask >> p & 1]
        out[i] = sum(eps[p] for p in removed) - sum(eps[p] for p in added)
    return out


def delta_t_corrections(trial: str, renormalized: bool, t: ClusterOperator,
                        m3: StateVector, ref: ReferenceDeterminant,
                        h: FermionOperator, spectrum,
                        denom_floor: float = DENOM_FLOOR) -> float:
    """Triples energy correction <Psi_trial|Q3 (V_N T2)_C|Phi> (optionally
    renormalized by the overlap with the CC ket state)."""
    psi = triples_trial_state(t, m3, ref, spectrum, trial, h)
    de = overlap(psi, m3).real
    if not renormalized:
        return float(de)
    basis = m3.basis
    phi = basis_state(basis, ref)
    den = overlap(psi, apply_cluster_exponential(t, phi)).real
    if abs(den) < denom_floor:
        raise ContractViolation("renormalization overlap below floor")
    return float(de / den)


# ---------------------------------------------------------------------------
# unitary (anti-Hermitian) variant
# ---------------------------------------------------------------------------

def _sigma_matrix(t_gen: ClusterOperator, basis: SectorBasis) -> np.ndarray:
    op = t_gen.to_fermion_operator()
    sig = operator_matrix(op, basis) - operator_matrix(adjoint(op), basis)
    return sig.toarray()


def _expm_on_ref(t_gen: ClusterOperator, basis: SectorBasis,
                 ref: ReferenceDeterminant, cap: int) -> np.ndarray:
    if len(basis) > cap:
        raise ResourceError(f"sector {len(basis)} above dense-exponential cap {cap}")
    u = scipy.linalg.expm(_sigma_matrix(t_gen, basis))
    return u[:, basis.index_of(ref.occupation)]


def ucc_energy(t_gen: ClusterOperator, h: FermionOperator, ref: ReferenceDeterminant,
               basis: SectorBasis | None = None, cap: int = UCC_DENSE_CAP) -> float:
    """<Phi| e^{-sigma} H e^{sigma} |Phi> with sigma = T - T+ (dense expm)."""
    basis = basis or SectorBasis.for_reference(ref)
    x = _expm_on_ref(t_gen, basis, ref, cap)
    hmat = operator_matrix(h, basis)
    val = np.vdot(x, hmat @ x)
    return float(val.real)


def ucc_mmcc_energy(t_gen_s: ClusterOperator, t_gen_a: ClusterOperator,
                    h: FermionOperator, ref: ReferenceDeterminant,
                    basis: SectorBasis | None = None, cap: int = UCC_DENSE_CAP,
                    denom_floor: float = DENOM_FLOOR) -> float:
    """<Phi|e^{-sig_S} H e^{sig_A}|Phi> / <Phi|e^{-sig_S} e^{sig_A}|Phi>."""
    basis = basis or SectorBasis.for_reference(ref)
    xs = _expm_on_ref(t_gen_s, basis, ref, cap)
    xa = _expm_on_ref(t_gen_a, basis, ref, cap)
    hmat = operator_matrix(h, basis)
    den = np.vdot(xs, xa)
    if abs(den) < denom_floor:
        raise ContractViolation("UCC overlap denominator below floor")
    return float((np.vdot(xs, hmat @ xa) / den).real)


def ucc_moment_decomposition(t_gen_s: ClusterOperator, t_gen_a: ClusterOperator,
                             h: FermionOperator, ref: ReferenceDeterminant,
                             basis: SectorBasis | None = None,
                             cap: int = UCC_DENSE_CAP) -> tuple[float, float]:
    """Both sides of the moment identity: the overlap-ratio energy and
    E_UCC + <Phi|e^{-sS} e^{sA} (Q_A + Q_R) M_UCC|Phi> / <Phi|e^{-sS} e^{sA}|Phi>."""
    basis = basis or SectorBasis.for_reference(ref)
    direct = ucc_mmcc_energy(t_gen_s, t_gen_a, h, ref, basis, cap)
    e_a = ucc_energy(t_gen_a, h, ref, basis, cap)
    hmat = operator_matrix(h, basis)
    ua = scipy.linalg.expm(_sigma_matrix(t_gen_a, basis))
    xs = _expm_on_ref(t_gen_s, basis, ref, cap)
    iphi = basis.index_of(ref.occupation)
    m_ucc = ua.conj().T @ (hmat @ ua[:, iphi])
    ranks = excitation_ranks(basis, ref)
    q_all = np.where(ranks >= 1, m_ucc, 0.0)
    num = np.vdot(xs, ua @ q_all)
    den = np.vdot(xs, ua[:, iphi])
    decomposed = e_a + float((num / den).real)
    return direct, decomposed


def ed_trial_generator(h: FermionOperator, ref: ReferenceDeterminant,
                       basis: SectorBasis | None = None, tol: float = 1e-11,
                       cap: int = UCC_DENSE_CAP) -> ClusterOperator:
    """Fit a full-rank cluster generator with e^{T - T+}|Phi> = ED ground state.

    The anti-Hermitian exponential of a rank-complete cluster operator can
    represent any state with nonzero reference overlap; the amplitudes are
    found by damped least squares starting from the plane-rotation seed.
    """
    from scipy.optimize import least_squares
    from .cluster import excitation_slots
    basis = basis or SectorBasis.for_reference(ref)
    if len(basis) > cap:
        raise ResourceError("sector too large for the dense trial fit")
    energy, psi = exact_ground_state(h, basis)
    amps = psi.amps.real.copy()
    iphi = basis.index_of(ref.occupation)
    if abs(amps[iphi]) < 1e-8:
        raise ContractViolation("ground state orthogonal to the reference")
    if amps[iphi] < 0:
        amps = -amps
    amps /= np.linalg.norm(amps)
    slots = excitation_slots(ref, ref.n_electrons)
    sgn = np.empty(len(slots)); tgt = np.empty(len(slots), dtype=np.int64)
    for m, (ii, aa) in enumerate(slots):
        factors = tuple([(a, 1) for a in aa] + [(i, 0) for i in reversed(ii)])
        det, amp = term_action_on_determinant(FermionTerm(1.0, factors), ref.occupation)
        sgn[m] = amp.real
        tgt[m] = basis.index_of(det)

    def build(vec):
        t = ClusterOperator(ref.n_modes, ref.n_electrons)
        for m, (ii, aa) in enumerate(slots):
            if vec[m] != 0.0:
                t.set(ii, aa, float(vec[m]))
        return t

    def residual(vec):
        x = scipy.linalg.expm(_sigma_matrix(build(vec), basis))[:, iphi]
        return (x.real - amps)

    # plane-rotation seed: exp(theta (|perp><Phi| - h.c.)) |Phi> = psi
    c0 = amps[iphi]
    theta = np.arccos(min(1.0, c0))
    perp = amps.copy(); perp[iphi] -= c0
    nrm = np.linalg.norm(perp)
    x0 = np.zeros(len(slots))
    if nrm > 1e-12:
        seed_vec = theta * perp / nrm
        x0 = sgn * seed_vec[tgt]
    sol = least_squares(residual, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if np.abs(sol.fun).max() > tol:
        raise ContractViolation(
            f"trial fit stalled at |r|={np.abs(sol.fun).max():.2e}")
    return build(sol.x)
