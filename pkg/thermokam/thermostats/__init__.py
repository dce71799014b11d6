"""Thermostated vector fields and their invariant densities."""
