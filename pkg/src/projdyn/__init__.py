"""Numerical dynamics of holomorphic endomorphisms of projective space."""
