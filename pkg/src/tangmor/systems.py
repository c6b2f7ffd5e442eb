"""State-space realizations and exact transfer-function evaluation.

`FirstOrderSystem` holds the sparse triple ``(A, B, C)`` of a MIMO LTI system
and provides the reference evaluations the rest of the toolkit is checked
against: the transfer function ``C (w*I - A)^{-1} B``, its moments at a shift,
and the Markov parameters ``C A^i B``.  Instances are immutable after
construction and safe to share across threads; the internal factorization
cache only trades time for memory.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import solvers
from .solvers import SolverCache

MAX_MOMENT_ORDER = 10


@dataclass
class FirstOrderSystem:
    """Sparse realization ``x' = A x + B u, y = C x``.

    Parameters
    ----------
    A : sparse or array_like, shape (n, n)
        State matrix; stored in CSC format.
    B : array_like, shape (n, p)
        Input map, stored dense (p << n).
    C : array_like, shape (p, n)
        Output map, stored dense.
    """

    A: sp.spmatrix
    B: np.ndarray
    C: np.ndarray
    _cache: SolverCache = field(default_factory=SolverCache, repr=False, compare=False)

    def __post_init__(self):
        if not sp.issparse(self.A):
            self.A = sp.csc_matrix(np.atleast_2d(np.asarray(self.A, dtype=float)))
        else:
            self.A = self.A.tocsc()
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n, m = self.A.shape
        if n != m:
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B rows and C columns must match the order of A")
        if self.B.shape[1] != self.C.shape[0]:
            raise ValueError("input count of B must equal output count of C")
        if self.p < 1:
            raise ValueError("at least one input/output is required")
        if n < self.p:
            raise ValueError("state dimension must be at least the IO count")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    def shifted_solve(self, sigma, rhs):
        """Solve ``(sigma*I - A) X = rhs`` with a cached factorization."""
        f = self._cache.get(sigma, lambda: solvers.factorize(self.A, sigma))
        return solvers.solve(f, rhs)

    def shifted_solve_transposed(self, sigma, rhs):
        """Solve ``(sigma*I - A)^T X = rhs`` on the same cached factors."""
        f = self._cache.get(sigma, lambda: solvers.factorize(self.A, sigma))
        return solvers.solve_transposed(f, rhs)

    def state_matvec(self, X):
        """Return ``A @ X``."""
        return self.A @ X

    def transfer_at(self, omega):
        return eval_transfer(self, omega)


@dataclass
class ReducedModel:
    """Dense projected triple ``(A_m, B_m, C_m)`` of a reduced-order model."""

    A_m: np.ndarray
    B_m: np.ndarray
    C_m: np.ndarray
    m: int
    s: int

    def __post_init__(self):
        self.A_m = np.atleast_2d(np.asarray(self.A_m))
        self.B_m = np.atleast_2d(np.asarray(self.B_m))
        self.C_m = np.atleast_2d(np.asarray(self.C_m))

    @property
    def order(self):
        return self.A_m.shape[0]

    @property
    def p(self):
        return self.B_m.shape[1]

    def transfer_at(self, omega):
        return eval_reduced_transfer(self, omega)


@dataclass
class TransferSample:
    """A single transfer-function evaluation: a complex p-by-p value at ``omega``."""

    omega: complex
    value: np.ndarray


def eval_transfer(sys, omega):
    """Evaluate ``C (omega*I - A)^{-1} B`` by one factored solve.

    Never forms an explicit inverse; raises :class:`SingularShiftError` when
    the shifted matrix is numerically singular at ``omega``.
    """
    X = sys.shifted_solve(complex(omega), sys.B)
    return np.asarray(sys.C, dtype=complex) @ X


def eval_reduced_transfer(rm, omega):
    """Evaluate ``C_m (omega*I - A_m)^{-1} B_m`` by a dense factored solve."""
    f = solvers.factorize_matrix(
        complex(omega) * np.eye(rm.order) - rm.A_m, label=complex(omega)
    )
    X = solvers.solve(f, rm.B_m)
    return np.asarray(rm.C_m, dtype=complex) @ X


def moment(sys, sigma, i):
    """The i-th moment ``C (sigma*I - A)^{-(i+1)} B`` via i+1 successive solves.

    Equals ``(-1)^i / i!`` times the i-th derivative of the transfer function
    at ``sigma``.
    """
    if i < 0:
        raise ValueError("moment order must be nonnegative")
    if i > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {i} exceeds policy maximum {MAX_MOMENT_ORDER}")
    X = np.asarray(sys.B, dtype=complex)
    for _ in range(i + 1):
        X = sys.shifted_solve(complex(sigma), X)
    return np.asarray(sys.C, dtype=complex) @ X


def moment_reduced(rm, sigma, i):
    """Dense counterpart of :func:`moment` for a reduced model."""
    if i < 0:
        raise ValueError("moment order must be nonnegative")
    if i > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {i} exceeds policy maximum {MAX_MOMENT_ORDER}")
    f = solvers.factorize_matrix(
        complex(sigma) * np.eye(rm.order) - rm.A_m, label=complex(sigma)
    )
    X = np.asarray(rm.B_m, dtype=complex)
    for _ in range(i + 1):
        X = solvers.solve(f, X)
    return np.asarray(rm.C_m, dtype=complex) @ X


def markov_parameter(sys, i):
    """The Markov parameter ``C A^i B`` via repeated sparse products."""
    if i < 0:
        raise ValueError("Markov parameter index must be nonnegative")
    X = np.asarray(sys.B, dtype=float)
    for _ in range(i):
        X = sys.state_matvec(X)
    return np.asarray(sys.C) @ X
