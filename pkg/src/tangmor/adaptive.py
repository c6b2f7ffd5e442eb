"""Adaptive choice of interpolation shifts and tangential directions.

After each iteration the next right shift is the maximizer of the residual
norm ``||B - (w*I - A) V (w*I - A_m)^{-1} W^T B||_2`` over a search region
built from the mirrored eigenvalues of the current projected matrix, and the
next direction block collects the dominant right singular vectors of the
residual matrix there (the left side mirrors both).  The residual norms are
never formed at full order: with the recurrence records ``G``, the stacked
directions and a skinny QR of ``(I - V W^T) B``, the norm reduces to that of
a p-by-p matrix, so scanning a few hundred candidates costs next to nothing.

`run_abtl` wires the loop together: initialize, project, pick shifts and
directions, extend, until the iteration budget or the residual tolerance is
reached.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import lanczos
from .errors import DegenerateResidualError, SingularShiftError

# Minimum real part a search candidate may have after reflection.
MIN_REAL_PART = 1e-8

EDGE_POINTS = 20
SEGMENT_POINTS = 100
MAX_INTERIOR_POINTS = 200


@dataclass
class ShiftSearchRegion:
    """Convex hull of the mirrored eigenvalues with a finite candidate sample."""

    hull_vertices: np.ndarray
    candidates: np.ndarray


@dataclass
class IterationRecord:
    """Per-iteration log entry of the adaptive loop."""

    iteration: int
    sigma: complex
    mu: complex
    res_right: float
    res_left: float
    biorth_error: float
    wall_time_s: float


def _fix_column_signs(X):
    """Rotate each column so its first significant entry is positive real."""
    X = np.array(X)
    for col in range(X.shape[1]):
        column = X[:, col]
        mags = np.abs(column)
        if mags.max() == 0.0:
            continue
        lead = np.argmax(mags > 1e-12 * mags.max())
        pivot = column[lead]
        X[:, col] = column * (pivot.conjugate() / abs(pivot))
    return X


def _reflect_to_right_half_plane(points):
    re = np.where(points.real > 0, points.real, np.maximum(-points.real, MIN_REAL_PART))
    return re + 1j * points.imag


def _inside_hull(hull, xy, tol=1e-9):
    scale = 1.0 + np.abs(hull.points).max()
    vals = hull.equations[:, :2] @ xy.T + hull.equations[:, 2:3]
    return np.all(vals <= tol * scale, axis=0)


def ritz_region(A_m, existing_shifts=()):
    """Search region from the mirrored eigenvalues of the projected matrix.

    Eigenvalues of ``A_m`` are negated, reflected into the open right half
    plane, and their convex hull is sampled: vertices, points along each
    edge, and a coarse interior grid.  Degenerate hulls collapse to a segment
    sample or a single point.  Candidates that collide with already-used
    shifts are nudged off them so factorizations are never repeated verbatim.
    """
    lam = np.linalg.eigvals(np.asarray(A_m))
    points = _reflect_to_right_half_plane(-lam)

    xy = np.column_stack([points.real, points.imag])
    center = xy.mean(axis=0)
    spread = xy - center
    scale = np.abs(spread).max()

    if scale <= 1e-12 * (1.0 + np.abs(center).max()):
        vertices = np.array([complex(center[0], center[1])])
        candidates = vertices.copy()
    else:
        _, svals, vt = np.linalg.svd(spread, full_matrices=False)
        if svals.size < 2 or svals[1] <= 1e-10 * svals[0]:
            # collinear spectrum: sample the segment between the extremes
            t = spread @ vt[0]
            lo, hi = t.min(), t.max()
            ends = center + np.outer([lo, hi], vt[0])
            vertices = ends[:, 0] + 1j * ends[:, 1]
            frac = np.linspace(0.0, 1.0, SEGMENT_POINTS)
            candidates = vertices[0] + frac * (vertices[1] - vertices[0])
        else:
            try:
                hull = ConvexHull(xy)
            except QhullError:
                hull = None
            if hull is None:
                vertices = np.unique(points)
                candidates = vertices.copy()
            else:
                verts = xy[hull.vertices]
                vertices = verts[:, 0] + 1j * verts[:, 1]
                pieces = [vertices]
                closed = np.append(vertices, vertices[0])
                frac = np.linspace(0.0, 1.0, EDGE_POINTS + 2)[1:-1]
                for a, b in zip(closed[:-1], closed[1:]):
                    pieces.append(a + frac * (b - a))
                gx = np.linspace(xy[:, 0].min(), xy[:, 0].max(), 17)
                gy = np.linspace(xy[:, 1].min(), xy[:, 1].max(), 17)
                GX, GY = np.meshgrid(gx, gy)
                grid = np.column_stack([GX.ravel(), GY.ravel()])
                interior = grid[_inside_hull(hull, grid)]
                if len(interior) > MAX_INTERIOR_POINTS:
                    pick = np.linspace(0, len(interior) - 1, MAX_INTERIOR_POINTS)
                    interior = interior[np.unique(pick.astype(int))]
                pieces.append(interior[:, 0] + 1j * interior[:, 1])
                candidates = np.concatenate(pieces)

    candidates = _reflect_to_right_half_plane(candidates)
    if existing_shifts:
        used = np.asarray(list(existing_shifts), dtype=complex)
        for k, cand in enumerate(candidates):
            if np.any(np.abs(used - cand) <= 1e-12 * (1.0 + abs(cand))):
                candidates[k] = cand + MIN_REAL_PART * (1.0 + abs(cand))
    return ShiftSearchRegion(hull_vertices=np.asarray(vertices), candidates=candidates)


class ResidualEvaluator:
    """Reduced-size residual evaluation for one reduction state.

    Caches the skinny QR factors of the projected inputs/outputs, the stacked
    direction blocks folded with the inverse coefficient matrices, and the
    projected triple, so each residual norm costs one reduced solve plus a
    p-by-p SVD.
    """

    def __init__(self, state, sys, reduced=None, assembly=None):
        self.reduced = reduced if reduced is not None else lanczos.project(state, sys)
        asm = assembly if assembly is not None else lanczos.assemble(state)
        self.A_m = self.reduced.A_m
        self.B_m = self.reduced.B_m
        self.C_m = self.reduced.C_m
        self.p = sys.p

        V, W = state.V, state.W
        B = np.asarray(sys.B, dtype=complex)
        Ct = np.asarray(sys.C, dtype=complex).T
        PB = B - V @ (W.T @ B)
        PC = Ct - W @ (V.T @ Ct)
        self.L_right = np.linalg.qr(PB)[1]
        self.L_left = np.linalg.qr(PC)[1]

        Rstack = np.hstack(state.dirs_right).astype(complex)
        Lstack = np.hstack(state.dirs_left).astype(complex)
        self.RGinv = np.linalg.solve(asm.G.T, Rstack.T).T
        self.LQinv = np.linalg.solve(asm.Q.T, Lstack.T).T
        self.ritz_values = np.linalg.eigvals(self.A_m)

    def _reduced_solve(self, omega, rhs, transposed=False):
        omega = complex(omega)
        # a candidate sitting on a reduced eigenvalue is excluded, not ranked
        if np.min(np.abs(self.ritz_values - omega)) <= 1e-12 * (1.0 + abs(omega)):
            raise SingularShiftError(omega, "coincides with a reduced eigenvalue")
        shifted = complex(omega) * np.eye(self.A_m.shape[0]) - self.A_m
        try:
            if transposed:
                return np.linalg.solve(shifted.T, rhs)
            return np.linalg.solve(shifted, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularShiftError(omega, "reduced solve") from exc

    def residual_matrix_right(self, omega):
        """The p-by-p matrix whose spectral norm equals the right residual norm."""
        U_B = self._reduced_solve(omega, self.B_m)
        return self.L_right @ (np.eye(self.p) - self.RGinv @ U_B)

    def residual_matrix_left(self, omega):
        U_C = self._reduced_solve(omega, self.C_m.T, transposed=True)
        return self.L_left @ (np.eye(self.p) - self.LQinv @ U_C)


def residual_norm_right(ev, omega):
    """Spectral norm of the right residual at ``omega`` at reduced cost."""
    norm = float(np.linalg.norm(ev.residual_matrix_right(omega), 2))
    if not np.isfinite(norm):
        raise SingularShiftError(omega, "residual overflow")
    return norm


def residual_norm_left(ev, omega):
    """Spectral norm of the left residual at ``omega`` at reduced cost."""
    norm = float(np.linalg.norm(ev.residual_matrix_left(omega), 2))
    if not np.isfinite(norm):
        raise SingularShiftError(omega, "residual overflow")
    return norm


def _argmax_shift(ev, region, norm_fn):
    best = None
    for omega in region.candidates:
        try:
            value = norm_fn(ev, omega)
        except SingularShiftError:
            continue
        key = (value, omega.imag, omega.real)
        if best is None or key > best[0]:
            best = (key, complex(omega), value)
    if best is None:
        centroid = complex(np.mean(region.hull_vertices))
        fallback = centroid + MIN_REAL_PART * (1.0 + abs(centroid))
        return fallback, float("nan")
    return best[1], best[2]


def next_shift_right(ev, region):
    """Candidate maximizing the right residual norm (ties: larger imag, then real)."""
    return _argmax_shift(ev, region, residual_norm_right)[0]


def next_shift_left(ev, region):
    """Candidate maximizing the left residual norm (same tie-breaking)."""
    return _argmax_shift(ev, region, residual_norm_left)[0]


def _dominant_right_singular_block(M, s, scale):
    _, svals, Vh = np.linalg.svd(M)
    if svals[0] <= 1e-14 * max(scale, 1e-300):
        raise DegenerateResidualError(
            "residual matrix is numerically zero; expansion has converged"
        )
    return _fix_column_signs(Vh.conj().T[:, :s])


def next_direction_right(ev, sigma_next, s):
    """Top-``s`` right singular vectors of the right residual matrix at the shift."""
    if s > ev.p:
        raise ValueError("direction width cannot exceed the IO count")
    M = ev.residual_matrix_right(sigma_next)
    return _dominant_right_singular_block(M, s, float(np.abs(ev.L_right).max()))


def next_direction_left(ev, mu_next, s):
    """Mirror of :func:`next_direction_right` for the left residual."""
    if s > ev.p:
        raise ValueError("direction width cannot exceed the IO count")
    M = ev.residual_matrix_left(mu_next)
    return _dominant_right_singular_block(M, s, float(np.abs(ev.L_left).max()))


def initial_directions(sys, s):
    """Deterministic starting blocks from the singular vectors of ``C @ B``."""
    CB = np.asarray(sys.C) @ np.asarray(sys.B)
    if np.abs(CB).max() > 0.0:
        U, _, Vh = np.linalg.svd(CB)
        R1 = _fix_column_signs(Vh.conj().T[:, :s])
        L1 = _fix_column_signs(U[:, :s])
    else:
        R1 = np.eye(sys.p, dtype=float)[:, :s]
        L1 = R1.copy()
    return R1, L1


def run_abtl(sys, s, m_max, tol=1e-8, force_hermite=False):
    """Adaptive tangential reduction loop.

    Parameters
    ----------
    sys
        System exposing ``B``, ``C``, ``p``, shifted solves and a state-matrix
        product (first-order or linearized second-order).
    s : int
        Tangential block width, at most ``sys.p``.
    m_max : int
        Iteration budget; the reduced order is at most ``m_max * s``.
    tol : float
        Stop once both residual norms fall below ``tol`` times the spectral
        norm of ``B`` (right) and of ``C^T`` (left).
    force_hermite : bool
        Reuse the right shift and direction on the left (``mu = sigma``,
        ``L = R``), producing matched-point runs.

    Returns
    -------
    (ReducedModel, ReductionState, list of IterationRecord)
    """
    if s < 1 or s > sys.p:
        raise ValueError("block width s must satisfy 1 <= s <= p")
    if m_max < 1:
        raise ValueError("m_max must be at least 1")

    norm_b = float(np.linalg.norm(np.asarray(sys.B), 2))
    norm_ct = float(np.linalg.norm(np.asarray(sys.C).T, 2))
    R1, L1 = initial_directions(sys, s)
    if force_hermite:
        L1 = R1.copy()
    sigma, mu = 1.0 + 0.0j, 1.0 + 0.0j

    state = lanczos.init(sys, sigma, mu, R1, L1)
    history = []
    t_prev = time.perf_counter()
    for iteration in range(1, m_max + 1):
        ev = ResidualEvaluator(state, sys)
        used = state.shifts_right + state.shifts_left
        region = ritz_region(ev.A_m, existing_shifts=used)
        stop = False
        try:
            sigma_next, res_right = _argmax_shift(ev, region, residual_norm_right)
            if force_hermite:
                mu_next = sigma_next
                res_left = residual_norm_left(ev, mu_next)
            else:
                mu_next, res_left = _argmax_shift(ev, region, residual_norm_left)
            R_next = next_direction_right(ev, sigma_next, s)
            L_next = R_next if force_hermite else next_direction_left(ev, mu_next, s)
        except (DegenerateResidualError, SingularShiftError):
            res_right = res_left = 0.0
            stop = True

        now = time.perf_counter()
        history.append(IterationRecord(
            iteration=iteration,
            sigma=sigma,
            mu=mu,
            res_right=res_right,
            res_left=res_left,
            biorth_error=state.biorthogonality_error(),
            wall_time_s=now - t_prev,
        ))
        t_prev = now

        if stop or iteration == m_max:
            break
        if res_right <= tol * norm_b and res_left <= tol * norm_ct:
            break
        lanczos.extend(state, sys, sigma_next, mu_next, R_next, L_next)
        sigma, mu = sigma_next, mu_next

    return lanczos.project(state, sys), state, history
