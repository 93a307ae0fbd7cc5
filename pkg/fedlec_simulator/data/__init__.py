""" This package provides the data side of the simulator: the in-memory Dataset with its IDX loader and synthetic
Gaussian-blob generator, the label-skew partitioners (quantity-based ``#cnum=k``, Dirichlet ``Dir(alpha)`` and IID)
and the per-shard label statistics used by the calibrated losses.
"""
