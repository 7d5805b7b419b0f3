"""Matching solvers."""
