"""Hierarchical B-spline complexes of discrete differential forms.

Construction of tensor-product and hierarchical spline complexes, exactness
diagnostics based on Greville subgrid topology and exact ranks, and the
Maxwell / Stokes inf-sup stability tests.
"""
__version__ = "0.1.0"
