"""Rank-indexed cluster amplitudes and wave-operator expansions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractViolation, ModelError, ParseError
from .fermion import (ANNIHILATE, CREATE, FermionOperator, FermionTerm,
                      ReferenceDeterminant, multiply_ops, scalar_op)


@dataclass
class ClusterOperator:
    """Excitation amplitudes keyed by canonical (occupied, virtual) tuples.

    Tuples are strictly increasing; antisymmetry is implicit in storing only
    canonical tuples.  The fermionic image of one entry is
    a+_{a1}..a+_{ak} a_{ik}..a_{i1} (ascending creations, descending
    annihilations), matching the usual many-body convention.
    """

    n_modes: int
    max_rank: int
    amps: dict = field(default_factory=dict)   # rank -> {(ii, aa): float}

    def __post_init__(self):
        for k in self.amps:
            if not 1 <= k <= self.max_rank:
                raise ModelError(f"rank {k} outside 1..{self.max_rank}")

    def rank(self, k: int) -> dict:
        return self.amps.get(k, {})

    def set(self, ii: tuple, aa: tuple, value: float):
        k = len(ii)
        if len(aa) != k:
            raise ModelError("occupied/virtual tuple length mismatch")
        if list(ii) != sorted(ii) or list(aa) != sorted(aa):
            raise ModelError("index tuples must be strictly increasing")
        self.amps.setdefault(k, {})[(tuple(ii), tuple(aa))] = value

    def items(self):
        for k in sorted(self.amps):
            for key, val in self.amps[k].items():
                yield k, key, val

    def ranks_present(self) -> tuple[int, ...]:
        return tuple(k for k in sorted(self.amps) if self.amps[k])

    def restricted(self, ranks) -> "ClusterOperator":
        keep = {k: dict(v) for k, v in self.amps.items() if k in ranks}
        return ClusterOperator(self.n_modes, self.max_rank, keep)

    def scaled(self, factor: float) -> "ClusterOperator":
        out = {k: {key: factor * v for key, v in sub.items()} for k, sub in self.amps.items()}
        return ClusterOperator(self.n_modes, self.max_rank, out)

    def norm_inf(self) -> float:
        return max((abs(v) for _, _, v in self.items()), default=0.0)

    def n_amplitudes(self) -> int:
        return sum(len(v) for v in self.amps.values())

    def to_fermion_operator(self, dagger: bool = False, drop_tol: float = 0.0) -> FermionOperator:
        """Sum of amplitude-weighted excitation (or de-excitation) strings."""
        terms = []
        for _, (ii, aa), val in self.items():
            if abs(val) <= drop_tol:
                continue
            factors = tuple([(a, CREATE) for a in aa]
                            + [(i, ANNIHILATE) for i in reversed(ii)])
            if dagger:
                factors = tuple((m, 1 - kk) for m, kk in reversed(factors))
            terms.append(FermionTerm(val, factors))
        return FermionOperator(self.n_modes, terms)


def excitation_slots(ref: ReferenceDeterminant, max_rank: int,
                     spin_interleaved: bool = True) -> list[tuple[tuple, tuple]]:
    """Canonical (occupied, virtual) tuples up to max_rank.

    With spin_interleaved=True only particle-number-per-spin conserving
    excitations are kept (even modes = alpha, odd = beta), which is every
    amplitude that can be nonzero for the S_z-conserving Hamiltonians here.
    """
    from itertools import combinations
    occ, virt = ref.occupied_modes(), ref.virtual_modes()
    slots = []
    for k in range(1, max_rank + 1):
        for ii in combinations(occ, k):
            n_alpha_i = sum(1 for i in ii if i % 2 == 0)
            for aa in combinations(virt, k):
                if spin_interleaved and sum(1 for a in aa if a % 2 == 0) != n_alpha_i:
                    continue
                slots.append((ii, aa))
    return slots


def expand_exponential(t: ClusterOperator, scheme: str,
                       lam: ClusterOperator | None = None,
                       ref: ReferenceDeterminant | None = None,
                       max_power: int | None = None) -> FermionOperator:
    """Polynomial wave-operator expansions.

    ccsd_ket:  1 + T1 + T2 + T1^2/2 + T1 T2 + T1^3/6 + T2^2/2 + T1^4/24
    ccsd_bra:  (1 + L1 + L2 [+ L3]) (1 - T1 - T2 + T1^2/2)
    nilpotent_exact: sum_k T^k / k! until T^k |Phi> vanishes identically
                     (rank exceeds the electron count) or k = max_power.
    """
    n = t.n_modes
    one = scalar_op(n, 1.0)
    if scheme in ("ccsd_ket", "ccsd_bra"):
        if any(k > 2 for k in t.ranks_present()):
            raise ContractViolation(f"{scheme} needs max_rank <= 2 amplitudes")
        t1 = t.restricted((1,)).to_fermion_operator()
        t2 = t.restricted((2,)).to_fermion_operator()
        if scheme == "ccsd_ket":
            t1_2 = multiply_ops(t1, t1)
            t1_3 = multiply_ops(t1_2, t1)
            out = (one + t1 + t2 + t1_2.scaled(0.5) + multiply_ops(t1, t2)
                   + t1_3.scaled(1 / 6) + multiply_ops(t2, t2).scaled(0.5)
                   + multiply_ops(t1_3, t1).scaled(1 / 24))
            return out
        body = one + t1.scaled(-1.0) + t2.scaled(-1.0) + multiply_ops(t1, t1).scaled(0.5)
        pre = one
        if lam is not None:
            pre = pre + lam.to_fermion_operator(dagger=True)
        return multiply_ops(pre, body)
    if scheme == "nilpotent_exact":
        top = t.to_fermion_operator()
        ranks = t.ranks_present()
        if not ranks:
            return one
        if max_power is None:
            if ref is None:
                raise ContractViolation("nilpotent_exact needs ref or max_power")
            max_power = ref.n_electrons // min(ranks)
        out = one
        power = one
        for k in range(1, max_power + 1):
            power = multiply_ops(power, top).scaled(1.0 / k)
            if not power.terms:
                break
            out = out + power
        return out
    raise ValueError(f"unknown scheme {scheme!r}")


def write_amplitudes(path, t: ClusterOperator, ref: ReferenceDeterminant):
    """Text amplitude file: header then lines "rank i1..ik a1..ak value"."""
    with open(path, "w") as fh:
        fh.write(f"n_modes {t.n_modes}\n")
        fh.write(f"max_rank {t.max_rank}\n")
        fh.write(f"reference {ref.bitstring()}\n")
        for k, (ii, aa), val in t.items():
            idx = " ".join(str(i) for i in ii + aa)
            fh.write(f"{k} {idx} {val:.17g}\n")


def read_amplitudes(path) -> tuple[ClusterOperator, ReferenceDeterminant]:
    header: dict[str, str] = {}
    body: list[tuple[int, str]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key = line.split()[0]
            if key in ("n_modes", "max_rank", "reference"):
                header[key] = line.split()[1]
            else:
                body.append((lineno, line))
    try:
        n_modes = int(header["n_modes"])
        max_rank = int(header["max_rank"])
        bits = header["reference"]
    except KeyError as exc:
        raise ParseError(f"missing header field {exc}") from exc
    occ = sum(1 << p for p, c in enumerate(bits) if c == "1")
    ref = ReferenceDeterminant(occ, n_modes)
    t = ClusterOperator(n_modes, max_rank)
    for lineno, line in body:
        parts = line.split()
        try:
            k = int(parts[0])
            idx = [int(v) for v in parts[1:-1]]
            val = float(parts[-1])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad amplitude record {line!r}", lineno) from exc
        if len(idx) != 2 * k:
            raise ParseError(f"rank {k} record needs {2 * k} indices", lineno)
        ii, aa = tuple(idx[:k]), tuple(idx[k:])
        if any(not ref.occupied(i) for i in ii) or any(ref.occupied(a) for a in aa):
            raise ParseError("indices inconsistent with reference occupation", lineno)
        t.set(ii, aa, val)
    return t, ref


def cluster_rank(occ_ref: int, det: int) -> int:
    """Excitation rank of `det` relative to the reference occupation."""
    return (occ_ref & ~det).bit_count()
