"""momentcc: moment-corrected coupled-cluster energies through compact
unitary representations of non-unitary wave operators.

Layout:
  pauli       symplectic Pauli-string algebra
  fermion     second quantization, normal ordering, JW and reference-guided maps
  cluster     cluster amplitudes and wave-operator expansions
  models      SIAM builder, FCIDUMP ingestion, mean-field spectra
  fock_space  sector bases, exact operator application, ED oracle
  cc          projective CC / Lambda solvers, perturbative triples
  partition   anticommuting-clique compression of Pauli sums
  mmcc        partitioned states, overlap estimation, energy functionals
  methods     end-to-end method drivers (SIAM scan, PES methods)
  cli         batch command-line front end
"""

__version__ = "0.1.0"
