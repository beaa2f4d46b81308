"""Compound rank-k projections (CRP) for bilinear discriminant analysis."""
__version__ = "0.1.0"
