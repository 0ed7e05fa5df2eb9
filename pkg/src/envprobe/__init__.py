"""Blind identification of a hidden environment's coupling Hamiltonian.

The package simulates a principal system S coupled to an inaccessible
environment E, steers S⊗E⊗A into a maximally entangled configuration using
only operations on S and ancillas A, and then reconstructs an equivalent
S–E Hamiltonian from the observed dynamics of ρ_SA(t).
"""

__version__ = "0.1.0"
