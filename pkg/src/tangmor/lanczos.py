"""Two-sided block tangential Lanczos recurrence.

Grows a pair of biorthonormal bases ``V`` and ``W`` (``W^T V = I``) for the
block tangential Krylov subspaces

    span{(sigma_1*I - A)^{-1} B R_1, ..., (sigma_j*I - A)^{-1} B R_j}
    span{(mu_1*I - A)^{-T} C^T L_1, ..., (mu_j*I - A)^{-T} C^T L_j}

given interpolation shifts ``sigma_i, mu_i`` and tangential direction blocks
``R_i, L_i`` with orthonormal columns.  The recurrence coefficients are kept
as block columns so the block upper triangular coefficient matrices (and with
them the projected-model identities used by the adaptive shift selection) can
be reassembled exactly.

Each new block is orthogonalized in place against all previous blocks, with a
second accumulation pass for numerical safety, then the pair is coupled by an
SVD of the block overlap: ``W_new^T V_new = P Delta Q^T`` and both blocks are
scaled by ``Delta^{-1/2}``.  An overlap singular value below ``TOL_BREAKDOWN``
(relative to the largest) aborts with :class:`BreakdownError`; rank-deficient
blocks are deflated by dropping the dependent columns together with the
corresponding direction columns.
"""

import cmath
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import BreakdownError, DeflationWarning
from .systems import ReducedModel

TOL_BREAKDOWN = 1e-12
# Relative diagonal threshold for rank decisions in the block QR.
TOL_DEFLATION = 1e-12


@dataclass
class ReductionState:
    """Growing bases and recurrence records of the two-sided process.

    ``hcols[c]`` holds the coefficient blocks ``[H_{1,c}, ..., H_{c+1,c}]`` of
    the right recurrence for the block built at iteration ``c+1`` (``fcols``
    mirrors it on the left).  ``block_widths[i]`` is the column count of block
    ``i+1``; widths shrink only when a block deflates.
    """

    V: np.ndarray
    W: np.ndarray
    hcols: list = field(default_factory=list)
    fcols: list = field(default_factory=list)
    shifts_right: list = field(default_factory=list)
    shifts_left: list = field(default_factory=list)
    dirs_right: list = field(default_factory=list)
    dirs_left: list = field(default_factory=list)
    block_widths: list = field(default_factory=list)

    @property
    def j(self):
        """Completed iterations (number of block pairs)."""
        return len(self.block_widths)

    @property
    def order(self):
        return self.V.shape[1]

    def block_offsets(self):
        return np.concatenate(([0], np.cumsum(self.block_widths)))

    def biorthogonality_error(self):
        """Max-norm deviation of ``W^T V`` from the identity."""
        G = self.W.T @ self.V
        return float(np.abs(G - np.eye(G.shape[0])).max())


@dataclass
class HessenbergAssembly:
    """Square block upper triangular coefficient matrices and shift diagonals."""

    G: np.ndarray
    Q: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    block_widths: list


def _require_orthonormal_columns(R, name):
    R = np.atleast_2d(np.asarray(R))
    gram = R.conj().T @ R
    if not np.allclose(gram, np.eye(R.shape[1]), atol=1e-8):
        raise ValueError(f"{name} must have orthonormal columns")
    return R


def _solved_blocks(sys, sigma, mu, R, L):
    """The two new raw blocks, honoring the infinite-shift branch."""
    B = np.asarray(sys.B, dtype=complex)
    Ct = np.asarray(sys.C, dtype=complex).T
    if cmath.isinf(sigma):
        Vt = sys.state_matvec(B @ R)
    else:
        Vt = sys.shifted_solve(sigma, B @ R)
    if cmath.isinf(mu):
        Wt = sys.state_matvec(Ct @ L)
    else:
        Wt = sys.shifted_solve_transposed(mu, Ct @ L)
    return np.asarray(Vt, dtype=complex), np.asarray(Wt, dtype=complex)


def _rank_revealing_columns(X, ref_scale):
    """Pivoted QR rank decision against the raw block scale.

    ``ref_scale`` is the largest column norm of the block before
    orthogonalization, so columns annihilated by the sweep (pure roundoff
    remainders) are recognized as dependent.
    """
    _, Rfac, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rfac))
    if diag.size == 0 or ref_scale == 0.0:
        return []
    rank = int(np.sum(diag > TOL_DEFLATION * ref_scale))
    return list(piv[:rank])


def _couple_block_pair(Vt, Wt, Hlast, Flast, iteration):
    """QR each block, then enforce ``W_new^T V_new = I`` via the overlap SVD.

    Returns the coupled blocks together with the updated trailing
    coefficients, preserving ``V_new @ Hlast`` and ``W_new @ Flast`` exactly.
    """
    Qv, Rv = np.linalg.qr(Vt)
    Qw, Rw = np.linalg.qr(Wt)
    Hlast = Rv @ Hlast
    Flast = Rw @ Flast

    M = Qw.T @ Qv
    U, svals, Vh = np.linalg.svd(M)
    smax = svals.max() if svals.size else 0.0
    if smax == 0.0 or svals.min() < TOL_BREAKDOWN * smax:
        raise BreakdownError(iteration, float(svals.min() if svals.size else 0.0))
    d = np.sqrt(svals)
    Vblk = (Qv @ Vh.conj().T) / d
    Wblk = (Qw @ U.conj()) / d
    Hlast = d[:, None] * (Vh @ Hlast)
    Flast = d[:, None] * (U.T @ Flast)
    return Vblk, Wblk, Hlast, Flast


def _deflate(Vt, Wt, R, L, hnew, fnew, iteration, ref_v, ref_w):
    """Drop dependent columns of a rank-deficient block pair.

    The same columns are removed from the direction blocks and from the
    already-recorded orthogonalization coefficients so the recurrence keeps
    holding for the surviving columns.
    """
    width = Vt.shape[1]
    kept_v = _rank_revealing_columns(Vt, ref_v)
    kept_w = _rank_revealing_columns(Wt, ref_w)
    rank = min(len(kept_v), len(kept_w))
    if rank == 0:
        raise BreakdownError(iteration, 0.0, "new block pair has rank zero")
    if rank == width:
        return Vt, Wt, R, L, hnew, fnew
    warnings.warn(
        f"iteration {iteration}: block rank {rank} < width {width}, "
        "shrinking the new block",
        DeflationWarning,
        stacklevel=3,
    )
    kept_v = sorted(kept_v[:rank])
    kept_w = sorted(kept_w[:rank])
    Vt = Vt[:, kept_v]
    Wt = Wt[:, kept_w]
    R = R[:, kept_v]
    L = L[:, kept_w]
    hnew = [H[:, kept_v] for H in hnew]
    fnew = [F[:, kept_w] for F in fnew]
    return Vt, Wt, R, L, hnew, fnew


def init(sys, sigma1, mu1, R1, L1):
    """First block pair from ``(sigma_1*I - A)^{-1} B R_1`` and its left twin."""
    R1 = _require_orthonormal_columns(R1, "R1")
    L1 = _require_orthonormal_columns(L1, "L1")
    Vt, Wt = _solved_blocks(sys, sigma1, mu1, R1, L1)
    ref_v = float(np.linalg.norm(Vt, axis=0).max(initial=0.0))
    ref_w = float(np.linalg.norm(Wt, axis=0).max(initial=0.0))
    Vt, Wt, R1, L1, _, _ = _deflate(Vt, Wt, R1, L1, [], [], 1, ref_v, ref_w)
    width = Vt.shape[1]
    Vblk, Wblk, H10, F10 = _couple_block_pair(
        Vt, Wt, np.eye(width, dtype=complex), np.eye(width, dtype=complex), 1
    )
    return ReductionState(
        V=Vblk,
        W=Wblk,
        hcols=[[H10]],
        fcols=[[F10]],
        shifts_right=[complex(sigma1)],
        shifts_left=[complex(mu1)],
        dirs_right=[R1],
        dirs_left=[L1],
        block_widths=[Vblk.shape[1]],
    )


def extend(state, sys, sigma_next, mu_next, R_next, L_next):
    """One recurrence step: solve, two-sided orthogonalize, couple, append."""
    R_next = _require_orthonormal_columns(R_next, "R_next")
    L_next = _require_orthonormal_columns(L_next, "L_next")
    Vt, Wt = _solved_blocks(sys, sigma_next, mu_next, R_next, L_next)

    offsets = state.block_offsets()
    blocks = [
        (state.V[:, offsets[i]:offsets[i + 1]], state.W[:, offsets[i]:offsets[i + 1]])
        for i in range(state.j)
    ]
    hnew = []
    fnew = []
    for Vi, Wi in blocks:
        Hi = Wi.T @ Vt
        Vt = Vt - Vi @ Hi
        Fi = Vi.T @ Wt
        Wt = Wt - Wi @ Fi
        hnew.append(Hi)
        fnew.append(Fi)
    # second pass; corrections are accumulated so the recurrence stays exact
    for i, (Vi, Wi) in enumerate(blocks):
        dH = Wi.T @ Vt
        Vt = Vt - Vi @ dH
        hnew[i] += dH
        dF = Vi.T @ Wt
        Wt = Wt - Wi @ dF
        fnew[i] += dF

    iteration = state.j + 1
    Vt, Wt, R_next, L_next, hnew, fnew = _deflate(
        Vt, Wt, R_next, L_next, hnew, fnew, iteration
    )
    width = Vt.shape[1]
    Vblk, Wblk, Hlast, Flast = _couple_block_pair(
        Vt, Wt, np.eye(width, dtype=complex), np.eye(width, dtype=complex), iteration
    )
    hnew.append(Hlast)
    fnew.append(Flast)

    state.V = np.hstack([state.V, Vblk])
    state.W = np.hstack([state.W, Wblk])
    state.hcols.append(hnew)
    state.fcols.append(fnew)
    state.shifts_right.append(complex(sigma_next))
    state.shifts_left.append(complex(mu_next))
    state.dirs_right.append(R_next)
    state.dirs_left.append(L_next)
    state.block_widths.append(Vblk.shape[1])
    return state


def assemble(state):
    """Square block upper triangular coefficient matrices for ``state.j`` blocks.

    Block column ``c`` stacks the recorded ``H_{1,c}, ..., H_{c+1,c}`` (zeros
    below); ``D1``/``D2`` carry the right/left shifts repeated per block width.
    """
    if state.j < 1:
        raise ValueError("state holds no completed iterations")
    offsets = state.block_offsets()
    total = int(offsets[-1])
    G = np.zeros((total, total), dtype=complex)
    Q = np.zeros((total, total), dtype=complex)
    for c in range(state.j):
        cs = slice(offsets[c], offsets[c + 1])
        for i, Hic in enumerate(state.hcols[c]):
            G[offsets[i]:offsets[i + 1], cs] = Hic
        for i, Fic in enumerate(state.fcols[c]):
            Q[offsets[i]:offsets[i + 1], cs] = Fic
    d1 = np.concatenate(
        [np.full(w, s) for w, s in zip(state.block_widths, state.shifts_right)]
    )
    d2 = np.concatenate(
        [np.full(w, s) for w, s in zip(state.block_widths, state.shifts_left)]
    )
    for M, label in ((G, "right"), (Q, "left")):
        if np.all(np.isfinite(M)):
            cond = np.linalg.cond(M)
            if not np.isfinite(cond) or cond > 1e14:
                warnings.warn(
                    f"{label} coefficient matrix is nearly singular "
                    f"(condition estimate {cond:.2e})",
                    stacklevel=2,
                )
    return HessenbergAssembly(
        G=G, Q=Q, D1=np.diag(d1), D2=np.diag(d2),
        block_widths=list(state.block_widths),
    )


def project(state, sys):
    """Dense projected triple ``A_m = W^T A V, B_m = W^T B, C_m = C V``."""
    if state.j < 1:
        raise ValueError("state holds no completed iterations")
    A_m = state.W.T @ sys.state_matvec(state.V)
    B_m = state.W.T @ np.asarray(sys.B, dtype=complex)
    C_m = np.asarray(sys.C, dtype=complex) @ state.V
    return ReducedModel(
        A_m=A_m, B_m=B_m, C_m=C_m, m=state.j, s=max(state.block_widths)
    )
