"""Inverse design of hamiltonians from a prescribed averaged potential."""
