"""Numerical services: basis, geometry, mesh motion, physics, solver, verification and output."""
