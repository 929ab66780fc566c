"""End-to-end method drivers shared by the CLI, the verification suite, and
the tests: SIAM grid solves, molecular PES methods, and the measurement-mode
dispatch (statevector / exact pipeline / shot sampling)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cc import CcWorkspace, perturbative_l3, solve_cc, solve_lambda, triples_moment
from .cluster import ClusterOperator
from .errors import ConvergenceError
from .fermion import FermionOperator, ReferenceDeterminant
from .fock_space import (SectorBasis, apply_fermion, basis_state,
                         exact_ground_state, overlap)
from .mmcc import (AssembleConfig, EnergyEstimate, assemble_state,
                   delta_t_corrections, e_ccsd_lambda3_indirect, e_mmcc,
                   gamma_vector, lambda3_overlap_components, omega_vector,
                   theta_vector)
from .models import (MolecularIntegrals, SiamParams, build_siam, fock_spectrum,
                     to_fermion_operator)

SIAM_DEFAULT_GRID = (0.0, 0.3, 0.6, 0.9, 1.2, 1.5)


@dataclass
class SiamPoint:
    """Converged solutions for one SIAM parameter point."""
    log10_uv: float
    params: SiamParams
    h: FermionOperator
    ref: ReferenceDeterminant
    basis: SectorBasis
    e_exact: float
    t2: ClusterOperator
    e_ccsd: float
    t3: ClusterOperator
    e_ccsdt: float
    lam_ccsd: ClusterOperator
    lam_ccsdt: ClusterOperator

    @property
    def lam3_full(self) -> ClusterOperator:
        """L1, L2 from Lambda-CCSD with the Lambda-CCSDT rank-3 block."""
        lam = ClusterOperator(self.ref.n_modes, 3)
        for _, key, v in self.lam_ccsd.items():
            lam.set(*key, v)
        for _, key, v in self.lam_ccsdt.restricted((3,)).items():
            lam.set(*key, v)
        return lam


def solve_siam_point(x: float, v_hyb: float = 1.0, bath=(-1.0, 0.0, 1.0),
                     basis_kind: str = "site", tol: float = 1e-9,
                     warm: SiamPoint | None = None) -> SiamPoint:
    """Solve ED + CCSD + CCSDT + both Lambda systems at log10(U/V) = x."""
    u = v_hyb * 10.0 ** x
    params = SiamParams.symmetric(u, v_hyb, bath)
    h, ref = build_siam(params, basis=basis_kind)
    basis = SectorBasis.for_reference(ref)
    e_exact, _ = exact_ground_state(h, basis)
    ws2 = CcWorkspace(h, ref, 2)
    ws3 = CcWorkspace(h, ref, 3)
    sol2 = solve_cc(h, ref, 2, tol=tol, t0=warm.t2 if warm else None, workspace=ws2)
    sol3 = solve_cc(h, ref, 3, tol=tol, t0=warm.t3 if warm else None, workspace=ws3)
    lam2 = solve_lambda(h, sol2.t, ref, 2, tol=tol, energy=sol2.energy, workspace=ws2)
    lam3 = solve_lambda(h, sol3.t, ref, 3, tol=tol, energy=sol3.energy, workspace=ws3)
    return SiamPoint(x, params, h, ref, basis, e_exact, sol2.t, sol2.energy,
                     sol3.t, sol3.energy, lam2.lam, lam3.lam)


def solve_siam_grid(grid=SIAM_DEFAULT_GRID, v_hyb: float = 1.0,
                    bath=(-1.0, 0.0, 1.0), basis_kind: str = "site",
                    tol: float = 1e-9) -> list[SiamPoint]:
    """Warm-started sweep over the log10(U/V) grid (continuation in U)."""
    points = []
    warm = None
    for x in sorted(grid):
        try:
            warm = solve_siam_point(x, v_hyb, bath, basis_kind, tol, warm)
        except ConvergenceError:
            # retry cold; scan continues per-point on failure
            warm = solve_siam_point(x, v_hyb, bath, basis_kind, tol, None)
        points.append(warm)
    order = {x: i for i, x in enumerate(sorted(grid))}
    return sorted(points, key=lambda pt: order[pt.log10_uv])


def siam_states(pt: SiamPoint, method: str, config: AssembleConfig | None = None):
    """Partitioned (theta, gamma, omega) for one SIAM energy functional."""
    config = config or AssembleConfig()
    if method == "ccsd":
        t, lam = pt.t2, pt.lam_ccsd
    elif method == "ccsd_lambda3":
        t, lam = pt.t2, pt.lam3_full
    elif method == "ccsdt":
        t, lam = pt.t3, pt.lam_ccsdt
        config = replace(config, bra_body="exact")
    else:
        raise ValueError(f"unknown SIAM pipeline method {method!r}")
    theta = assemble_state("theta", pt.h, t, lam, pt.ref, config, pt.basis)
    gamma = assemble_state("gamma", pt.h, t, None, pt.ref, config, pt.basis)
    om = assemble_state("omega", pt.h, t, None, pt.ref, config, pt.basis)
    return theta, gamma, om


def siam_statevector_energy(pt: SiamPoint, method: str,
                            config: AssembleConfig | None = None) -> float:
    """The same functional evaluated directly in the Fock engine."""
    config = config or AssembleConfig()
    if method == "ccsd":
        t, lam, body = pt.t2, pt.lam_ccsd, config.bra_body
    elif method == "ccsd_lambda3":
        t, lam, body = pt.t2, pt.lam3_full, config.bra_body
    elif method == "ccsdt":
        t, lam, body = pt.t3, pt.lam_ccsdt, "exact"
    else:
        raise ValueError(f"unknown SIAM pipeline method {method!r}")
    tv = theta_vector(t, lam, pt.ref, pt.basis, body)
    gv = gamma_vector(pt.h, t, pt.ref, pt.basis, config.ket_scheme)
    ov = omega_vector(t, pt.ref, pt.basis, config.ket_scheme)
    return float((overlap(tv, gv) / overlap(tv, ov)).real)


def siam_pipeline_energy(pt: SiamPoint, method: str, shots: int = 0, seed: int = 0,
                         config: AssembleConfig | None = None,
                         caches: tuple | None = None) -> EnergyEstimate:
    theta, gamma, om = siam_states(pt, method, config)
    return e_mmcc(theta, gamma, om, shots=shots, seed=seed, caches=caches)


def siam_lambda3_indirect(pt: SiamPoint, config: AssembleConfig | None = None):
    """(numerator, denominator, indirect energy) of the Lambda3 correction."""
    num, den = lambda3_overlap_components(pt.h, pt.t2, pt.lam3_full, pt.ref,
                                          pt.basis, config)
    return num, den, e_ccsd_lambda3_indirect(pt.e_ccsd, num, den)


# ---------------------------------------------------------------------------
# molecular PES methods
# ---------------------------------------------------------------------------

PES_METHODS = ("hf", "fci", "ccsd", "ccsd_l3", "ccsd_bt", "ccsd_pt",
               "rccsd_bt", "rccsd_pt")


@dataclass
class MoleculePoint:
    label: str
    h: FermionOperator
    ref: ReferenceDeterminant
    basis: SectorBasis
    energies: dict = field(default_factory=dict)
    t2: ClusterOperator | None = None


def molecule_energies(m: MolecularIntegrals, methods=PES_METHODS, label: str = "",
                      tol: float = 1e-9, fci_cap: int = 5000) -> MoleculePoint:
    """Evaluate the requested method set on one molecular Hamiltonian."""
    h, ref = to_fermion_operator(m)
    basis = SectorBasis.for_reference(ref)
    pt = MoleculePoint(label, h, ref, basis)
    out = pt.energies
    phi = basis_state(basis, ref)
    if "hf" in methods:
        out["hf"] = float(overlap(phi, apply_fermion(h, phi)).real)
    if "fci" in methods:
        out["fci"], _ = exact_ground_state(h, basis, dense_cap=fci_cap)
    need_cc = [m_ for m_ in methods if m_.startswith(("ccsd", "rccsd"))]
    if not need_cc:
        return pt
    sol2 = solve_cc(h, ref, 2, tol=tol)
    pt.t2 = sol2.t
    out["ccsd"] = sol2.energy
    spec = fock_spectrum(h, ref)
    if "ccsd_l3" in methods:
        l3 = perturbative_l3(h, sol2.t.restricted((2,)), ref, spec)
        num, den = lambda3_overlap_components(h, sol2.t, l3, ref, basis)
        out["ccsd_l3"] = e_ccsd_lambda3_indirect(sol2.energy, num, den)
    if any(m_.endswith(("_bt", "_pt")) for m_ in methods):
        m3 = triples_moment(h, sol2.t.restricted((2,)), ref)
        for name, trial, renorm in (("ccsd_bt", "ccsd_t_bracket", False),
                                    ("ccsd_pt", "ccsd_t_paren", False),
                                    ("rccsd_bt", "ccsd_t_bracket", True),
                                    ("rccsd_pt", "ccsd_t_paren", True)):
            if name in methods:
                de = delta_t_corrections(trial, renorm, sol2.t, m3, ref, h, spec)
                out[name] = sol2.energy + de
    return pt
