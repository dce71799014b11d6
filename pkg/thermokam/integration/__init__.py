"""Adaptive Runge-Kutta integration with dense output and events."""
