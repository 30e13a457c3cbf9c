"""Index theory, dual Morse oracles and bifurcation scans for Hamiltonian boundary value problems."""

__version__ = "0.1.0"
