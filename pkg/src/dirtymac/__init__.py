"""Lattice strategies for Gaussian multiple-access channels with interference."""
