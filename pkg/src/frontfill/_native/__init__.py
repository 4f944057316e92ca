"""Compiled kernels backing the public API.

Everything here is nopython numba code operating on flat arrays and
namedtuples of arrays, so it can run with the GIL released.
"""
