"""Exact and numerical tools for the three-parameter deformations g_n(eps) of
o(n)⋉h_n and their special coadjoint orbits."""

__version__ = "0.1.0"
