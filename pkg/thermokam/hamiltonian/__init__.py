"""Hamiltonian families, critical structure and the Reeb graph."""
