"""Perturbations of the shift semigroup on the half-line."""
