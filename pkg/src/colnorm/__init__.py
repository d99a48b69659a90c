"""Column-normalized spike matrices and exact sparse recovery checks."""

__version__ = "0.1.0"
