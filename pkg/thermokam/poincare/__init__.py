"""Poincare sections, return maps and torus scans."""
