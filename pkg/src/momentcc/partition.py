"""Compression of weighted Pauli sums into short sums of unitaries.

A set of weighted Pauli terms combines into a single unitary (after
normalization) when every pair satisfies the anticommutation-type condition
conj(p1)*p2*P1P2 + conj(p2)*p1*P2P1 = 0, i.e. anticommuting strings with a
real coefficient product or commuting strings with a purely imaginary one.
Grouping is a minimal-clique-cover problem on the compatibility graph,
approximated by greedy coloring of the complement graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .pauli import (PauliSum, PauliTerm, anticommutes, collect,
                    multiply_sums, to_dense_matrix)

GROUP_TOL = 1e-10
STRATEGIES = ("dsatur", "largest_first")


def groupable(a: PauliTerm, b: PauliTerm, tol: float = GROUP_TOL) -> bool:
    """Pairwise condition for membership in one normalized unitary."""
    c = a.coeff.conjugate() * b.coeff
    mag = abs(c)
    if mag == 0.0:
        return True
    if anticommutes(a, b):
        return abs(c.imag) <= tol * mag
    return abs(c.real) <= tol * mag


@dataclass
class UnitaryGroup:
    members: list          # PauliTerms with their original coefficients
    normalizer: float      # u_l = sqrt(sum |p_s|^2)

    def unitary_sum(self) -> PauliSum:
        """U_l = (1/u_l) sum p_s P_s (unitary when the group is valid)."""
        n = self.members[0].n
        inv = 1.0 / self.normalizer
        return PauliSum([PauliTerm(t.coeff * inv, t.x, t.z, t.n) for t in self.members], n)

    def member_sum(self) -> PauliSum:
        return PauliSum(list(self.members), self.members[0].n)

    def is_valid(self, tol: float = GROUP_TOL) -> bool:
        return all(groupable(a, b, tol)
                   for i, a in enumerate(self.members) for b in self.members[i + 1:])

    def unitarity_defect(self, cap: int = 12) -> float:
        """max |U+U - I| via dense embedding (small qubit counts only)."""
        u = to_dense_matrix(self.unitary_sum(), cap)
        dim = u.shape[0]
        return float(np.abs(u.conj().T @ u - np.eye(dim)).max())


@dataclass
class PartitionedOperator:
    groups: list
    source_term_count: int
    n_qubits: int
    strategy: str = "dsatur"

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @property
    def ratio(self) -> float:
        return self.group_count / self.source_term_count if self.source_term_count else 0.0

    def flatten(self) -> PauliSum:
        terms = [t for g in self.groups for t in g.members]
        return collect(PauliSum(terms, self.n_qubits))

    def weights(self) -> np.ndarray:
        return np.array([g.normalizer for g in self.groups])


def _mask_arrays(terms):
    xs = np.array([t.x for t in terms], dtype=np.int64)
    zs = np.array([t.z for t in terms], dtype=np.int64)
    cs = np.array([t.coeff for t in terms], dtype=complex)
    return xs, zs, cs


def build_compatibility_graph(s: PauliSum, tol: float = GROUP_TOL) -> np.ndarray:
    """Boolean adjacency matrix of the groupability relation (collected order)."""
    terms = s.terms
    m = len(terms)
    if m == 0:
        return np.zeros((0, 0), dtype=bool)
    if s.n > 62:
        adj = np.zeros((m, m), dtype=bool)
        for i in range(m):
            for j in range(i + 1, m):
                adj[i, j] = adj[j, i] = groupable(terms[i], terms[j], tol)
        return adj
    xs, zs, cs = _mask_arrays(terms)
    overlap = (np.bitwise_count(xs[:, None] & zs[None, :])
               + np.bitwise_count(zs[:, None] & xs[None, :]))
    anti = (overlap & 1).astype(bool)
    prod = cs.conjugate()[:, None] * cs[None, :]
    mag = np.abs(prod)
    real_ok = np.abs(prod.imag) <= tol * mag
    imag_ok = np.abs(prod.real) <= tol * mag
    adj = np.where(anti, real_ok, imag_ok)
    np.fill_diagonal(adj, False)
    return adj


def _color_order(terms) -> np.ndarray:
    """Descending |coefficient|, lexicographic mask tie-break."""
    keys = sorted(range(len(terms)),
                  key=lambda i: (-abs(terms[i].coeff), terms[i].x, terms[i].z))
    return np.array(keys, dtype=np.int64)


def clique_cover(adj: np.ndarray, strategy: str = "dsatur",
                 order: np.ndarray | None = None) -> list[list[int]]:
    """Cover the graph with cliques by coloring its complement greedily.

    Every returned class is a clique of `adj`; deterministic given strategy
    and node order.
    """
    m = adj.shape[0]
    if m == 0:
        return []
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    comp = ~adj
    np.fill_diagonal(comp, False)
    if order is None:
        order = np.arange(m, dtype=np.int64)
    rank = np.empty(m, dtype=np.int64)
    rank[order] = np.arange(m)
    colors = np.full(m, -1, dtype=np.int64)
    comp_deg = comp.sum(axis=1)

    if strategy == "largest_first":
        seq = sorted(range(m), key=lambda i: (-comp_deg[i], rank[i]))
        for node in seq:
            used = set(colors[comp[node]]) - {-1}
            c = 0
            while c in used:
                c += 1
            colors[node] = c
    else:  # dsatur
        sat: list[set] = [set() for _ in range(m)]
        uncolored = set(range(m))
        for _ in range(m):
            node = min(uncolored,
                       key=lambda i: (-len(sat[i]), -comp_deg[i], rank[i]))
            used = sat[node]
            c = 0
            while c in used:
                c += 1
            colors[node] = c
            uncolored.discard(node)
            for nb in np.nonzero(comp[node])[0]:
                if colors[nb] == -1:
                    sat[nb].add(c)
    ncolors = int(colors.max()) + 1
    return [list(np.nonzero(colors == c)[0]) for c in range(ncolors)]


def partition(s: PauliSum, strategy: str = "dsatur", tol: float = GROUP_TOL,
              drop_tol: float = 1e-12) -> PartitionedOperator:
    """Group a collected Pauli sum into normalized unitaries.

    Reconstruction is coefficient-exact: the multiset union of group members
    equals the input term multiset.
    """
    s = collect(s, drop_tol)
    terms = s.terms
    if not terms:
        return PartitionedOperator([], 0, s.n, strategy)
    adj = build_compatibility_graph(s, tol)
    order = _color_order(terms)
    cliques = clique_cover(adj, strategy, order)
    groups = []
    for nodes in cliques:
        members = [terms[i] for i in sorted(nodes)]
        u = float(np.sqrt(sum(abs(t.coeff) ** 2 for t in members)))
        groups.append(UnitaryGroup(members, u))
    groups.sort(key=lambda g: (g.members[0].x, g.members[0].z))
    return PartitionedOperator(groups, len(terms), s.n, strategy)


def partition_product(a: PauliSum, b: PauliSum, mode: str = "one_shot",
                      strategy: str = "dsatur", drop_tol: float = 1e-12):
    """Partition an operator product a*b.

    one_shot: multiply, collect, partition the product (single compact
    PartitionedOperator).  factored: partition each factor separately; the
    measurement cost is then the product of the two group counts.
    """
    if a.n != b.n:
        raise DimensionError("qubit count mismatch")
    if mode == "one_shot":
        return partition(multiply_sums(a, b, drop_tol), strategy, drop_tol=drop_tol)
    if mode == "factored":
        return partition(a, strategy, drop_tol=drop_tol), partition(b, strategy, drop_tol=drop_tol)
    raise ValueError(f"mode must be one_shot or factored, got {mode!r}")
