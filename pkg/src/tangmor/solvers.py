"""Factorize-once, solve-many access to shifted sparse matrices.

The repeated kernel of the reduction loop is solving ``(sigma*I - A) X = RHS``
and ``(sigma*I - A)^T X = RHS`` for a handful of shifts ``sigma`` with block
right-hand sides.  A single LU factorization serves both the plain and the
transposed solves; factorizations are kept in a small LRU cache keyed by the
exact complex shift.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularShiftError

# Below this order a dense LU is cheaper and doubles as an oracle path.
DENSE_FALLBACK_ORDER = 500

# Relative pivot threshold: pivots below this fraction of the largest pivot
# are treated as a singular shift.
PIVOT_RTOL = 1e-14


@dataclass
class ShiftedFactorization:
    """LU factors of ``sigma*I - A`` (or of an arbitrary labeled matrix).

    The same factors serve transposed solves, so ``transpose_capable`` is
    always True for both the sparse and dense backends.
    """

    sigma: complex
    n: int
    transpose_capable: bool = True
    _handle: object = field(default=None, repr=False)
    _dense: bool = field(default=False, repr=False)


def _check_pivots(sigma, udiag):
    mags = np.abs(udiag)
    largest = mags.max() if mags.size else 0.0
    if largest == 0.0 or mags.min() < PIVOT_RTOL * largest:
        raise SingularShiftError(sigma, "pivot below relative threshold")


def factorize_matrix(mat, label=0j):
    """LU-factorize an arbitrary square matrix, guarding against singularity.

    ``label`` is stored as the factorization's shift for diagnostics; use
    :func:`factorize` for the common ``sigma*I - A`` case.
    """
    n = mat.shape[0]
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got {mat.shape}")
    if n <= DENSE_FALLBACK_ORDER:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        lu, piv = sla.lu_factor(dense.astype(complex), check_finite=False)
        _check_pivots(label, np.diag(lu))
        return ShiftedFactorization(sigma=label, n=n, _handle=(lu, piv), _dense=True)
    csc = sp.csc_matrix(mat, dtype=complex)
    try:
        handle = spla.splu(csc)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularShiftError(label, str(exc)) from exc
    _check_pivots(label, handle.U.diagonal())
    return ShiftedFactorization(sigma=label, n=n, _handle=handle, _dense=False)


def factorize(A, sigma):
    """Factorize ``sigma*I - A`` for a sparse (or small dense) square ``A``."""
    n = A.shape[0]
    eye = sp.identity(n, format="csc") if sp.issparse(A) else np.eye(n)
    return factorize_matrix(sigma * eye - A, label=sigma)


def solve(f, rhs):
    """Solve ``(sigma*I - A) X = rhs`` using the stored factors."""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {f.n}")
    if f._dense:
        return sla.lu_solve(f._handle, rhs, check_finite=False)
    return f._handle.solve(rhs)


def solve_transposed(f, rhs):
    """Solve ``(sigma*I - A)^T X = rhs`` on the same factors."""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {f.n}")
    if f._dense:
        return sla.lu_solve(f._handle, rhs, trans=1, check_finite=False)
    return f._handle.solve(rhs, trans="T")


class SolverCache:
    """LRU cache of shifted factorizations, keyed by the exact complex shift.

    Eviction only affects cost, never results.  Insertions and evictions are
    serialized behind a lock so concurrent evaluations can share one cache.
    """

    def __init__(self, capacity=8):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._entries = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, sigma):
        return complex(sigma) in self._entries

    def get(self, sigma, make):
        """Return the cached factorization for ``sigma``, creating it via ``make()``."""
        key = complex(sigma)
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]
        fresh = make()
        with self._lock:
            self._entries[key] = fresh
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
        return fresh
