"""Second-order systems: normalization, linearization, structured reduction.

A mass-damping-stiffness system ``M q'' + D q' + K q = B u, y = C q`` is
normalized to ``M = I``, linearized to the first-order companion form

    [[0, I], [-K, -D]]

applied implicitly (a shifted solve at the doubled order reduces to a single
quadratic-pencil solve plus block back-substitution), reduced with the
adaptive tangential loop, and finally projected with block-diagonal split
bases so the reduced model is again second order.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import solvers
from .adaptive import run_abtl
from .errors import SingularMassError, SingularShiftError, StructureLossError
from .solvers import SolverCache
from .systems import ReducedModel

# Condition limit on the half-basis couplings of the structured projection.
COUPLING_CONDITION_LIMIT = 1e12


@dataclass
class SecondOrderSystem:
    """Sparse realization ``M q'' + D q' + K q = B u, y = C q``.

    ``M=None`` means an identity mass matrix.
    """

    D: sp.spmatrix
    K: sp.spmatrix
    B: np.ndarray
    C: np.ndarray
    M: sp.spmatrix = None
    _cache: SolverCache = field(default_factory=SolverCache, repr=False, compare=False)

    def __post_init__(self):
        self.D = sp.csc_matrix(self.D)
        self.K = sp.csc_matrix(self.K)
        if self.M is not None:
            self.M = sp.csc_matrix(self.M)
            if self.M.shape != self.K.shape:
                raise ValueError("M must match the shape of K")
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.K.shape[0]
        if self.K.shape[0] != self.K.shape[1] or self.D.shape != self.K.shape:
            raise ValueError("D and K must be square and of equal shape")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B rows and C columns must match the order of K")
        if self.B.shape[1] != self.C.shape[0]:
            raise ValueError("input count of B must equal output count of C")

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    def _pencil(self, omega):
        omega = complex(omega)
        pencil = omega * omega * (self.M if self.M is not None
                                  else sp.identity(self.n, format="csc"))
        return (pencil + omega * self.D + self.K).tocsc()

    def pencil_solve(self, omega, rhs):
        f = self._cache.get(
            omega, lambda: solvers.factorize_matrix(self._pencil(omega), label=omega)
        )
        return solvers.solve(f, rhs)

    def transfer_at(self, omega):
        return eval_second_order_transfer(self, omega)


@dataclass
class SecondOrderReducedModel:
    """Dense reduced realization ``q'' + D_m q' + K_m q = B_m u, y = C_m q``.

    ``linearized`` keeps the block-diagonal-projected first-order triple the
    model was read from, for verification against the companion form.
    """

    D_m: np.ndarray
    K_m: np.ndarray
    B_m: np.ndarray
    C_m: np.ndarray
    m: int
    s: int
    linearized: ReducedModel = None

    @property
    def order(self):
        return self.K_m.shape[0]

    @property
    def p(self):
        return self.B_m.shape[1]

    def transfer_at(self, omega):
        omega = complex(omega)
        pencil = omega * omega * np.eye(self.order) + omega * self.D_m + self.K_m
        f = solvers.factorize_matrix(pencil, label=omega)
        return np.asarray(self.C_m, dtype=complex) @ solvers.solve(f, self.B_m)


class LinearizedSystem:
    """Implicit first-order companion form of a normalized second-order system.

    Exposes the doubled-order interface the reduction loop needs (``B``,
    ``C``, shifted solves, state-matrix products) without ever forming the
    companion matrix: a shifted solve at order ``2n`` costs one factored
    quadratic-pencil solve at order ``n``.
    """

    def __init__(self, sos):
        if sos.M is not None:
            raise ValueError("linearize requires an identity mass matrix; "
                             "apply normalize_mass first")
        self._sos = sos
        self._K = sos.K
        self._D = sos.D
        n, p = sos.n, sos.p
        self.B = np.vstack([np.zeros((n, p)), sos.B])
        self.C = np.hstack([sos.C, np.zeros((p, n))])

    @property
    def inner(self):
        return self._sos

    @property
    def n(self):
        return 2 * self._sos.n

    @property
    def p(self):
        return self._sos.p

    def state_matvec(self, X):
        n = self._sos.n
        X = np.asarray(X)
        X1, X2 = X[:n], X[n:]
        return np.vstack([X2, -(self._K @ X1) - (self._D @ X2)])

    def shifted_solve(self, omega, rhs):
        """Solve ``(omega*I - A_companion) X = rhs`` via the quadratic pencil."""
        omega = complex(omega)
        n = self._sos.n
        rhs = np.asarray(rhs, dtype=complex)
        G1, G2 = rhs[:n], rhs[n:]
        X1 = self._sos.pencil_solve(omega, G2 + omega * G1 + self._D @ G1)
        X2 = omega * X1 - G1
        return np.vstack([X1, X2])

    def shifted_solve_transposed(self, omega, rhs):
        omega = complex(omega)
        n = self._sos.n
        rhs = np.asarray(rhs, dtype=complex)
        G1, G2 = rhs[:n], rhs[n:]
        f = self._sos._cache.get(
            omega,
            lambda: solvers.factorize_matrix(self._sos._pencil(omega), label=omega),
        )
        Y2 = solvers.solve_transposed(f, G1 + omega * G2)
        Y1 = omega * Y2 + self._D.T @ Y2 - G2
        return np.vstack([Y1, Y2])

    def transfer_at(self, omega):
        return self.C.astype(complex) @ self.shifted_solve(omega, self.B)


def normalize_mass(sos):
    """Fold a nonsingular mass matrix into the damping/stiffness/input maps.

    The inverse is never formed: the new coefficients are columns of factored
    solves against ``M``.
    """
    if sos.M is None:
        return sos
    try:
        f = solvers.factorize_matrix(sos.M, label=0.0)
    except SingularShiftError as exc:
        raise SingularMassError("mass matrix is numerically singular") from exc
    Dn = solvers.solve(f, sos.D.toarray()).real
    Kn = solvers.solve(f, sos.K.toarray()).real
    Bn = solvers.solve(f, sos.B).real
    return SecondOrderSystem(D=sp.csc_matrix(Dn), K=sp.csc_matrix(Kn),
                             B=Bn, C=sos.C, M=None)


def eval_second_order_transfer(sos, omega):
    """Evaluate ``C (omega^2 M + omega D + K)^{-1} B`` by one pencil solve."""
    X = sos.pencil_solve(omega, sos.B)
    return np.asarray(sos.C, dtype=complex) @ X


def linearize(sos):
    """Implicit companion-form realization of an ``M = I`` system."""
    return LinearizedSystem(sos)


def _biorthonormalize_pair(Vh, Wh, what):
    """Replace a half-basis pair by one with ``W_half^T V_half = I``.

    Column spaces are preserved: each half is QR-compressed and the
    orthonormal factors are coupled through the SVD of their overlap, the
    same scheme the recurrence applies to new block pairs.
    """
    Qv = np.linalg.qr(Vh)[0]
    Qw = np.linalg.qr(Wh)[0]
    U, svals, Vt = np.linalg.svd(Qw.T @ Qv)
    smax = svals.max() if svals.size else 0.0
    if smax == 0.0 or svals.min() < smax / COUPLING_CONDITION_LIMIT:
        raise StructureLossError(f"{what} half-bases are numerically rank deficient")
    d = np.sqrt(svals)
    return (Qv @ Vt.conj().T) / d, (Qw @ U.conj()) / d


def _require_well_conditioned(Mat, what):
    svals = np.linalg.svd(Mat, compute_uv=False)
    if svals[0] == 0.0 or svals[-1] < svals[0] / COUPLING_CONDITION_LIMIT:
        raise StructureLossError(f"{what} coupling is numerically singular")


def reduce_second_order(sos, s, m_max, tol=1e-8):
    """Structure-preserving reduction of a second-order system.

    Runs the adaptive tangential loop on the implicit linearization, splits
    the doubled-order bases into halves, makes each half pair biorthonormal,
    projects with the block-diagonal bases, and reads the reduced damping and
    stiffness off the projected blocks (the top-right coupling is absorbed by
    a similarity so the reduced model carries an identity mass matrix).

    Returns ``(SecondOrderReducedModel, ReductionState, history)``.
    """
    sosn = normalize_mass(sos)
    lin = linearize(sosn)
    _, state, history = run_abtl(lin, s, m_max, tol)

    n = sosn.n
    V1, V2 = state.V[:n], state.V[n:]
    W1, W2 = state.W[:n], state.W[n:]
    V1, W1 = _biorthonormalize_pair(V1, W1, "position")
    V2, W2 = _biorthonormalize_pair(V2, W2, "velocity")
    _require_well_conditioned(W2.T @ V1, "position-velocity")

    T12 = W1.T @ V2
    _require_well_conditioned(T12, "velocity-position")
    T21 = -(W2.T @ (sosn.K @ V1))
    T22 = -(W2.T @ (sosn.D @ V2))
    B2 = W2.T @ sosn.B.astype(complex)
    C1 = sosn.C.astype(complex) @ V1

    k = T12.shape[0]
    A_lin = np.block([[np.zeros((k, k), dtype=complex), T12], [T21, T22]])
    B_lin = np.vstack([np.zeros_like(B2), B2])
    C_lin = np.hstack([C1, np.zeros_like(C1)])
    linearized = ReducedModel(A_m=A_lin, B_m=B_lin, C_m=C_lin,
                              m=state.j, s=max(state.block_widths))

    K_m = -(T12 @ T21)
    D_m = -(T12 @ np.linalg.solve(T12.T, T22.T).T)
    B_m = T12 @ B2
    model = SecondOrderReducedModel(
        D_m=D_m, K_m=K_m, B_m=B_m, C_m=C1,
        m=state.j, s=max(state.block_widths), linearized=linearized,
    )
    return model, state, history
