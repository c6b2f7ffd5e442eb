"""Benchmark generation and exchange-format IO.

`generate_fdm` builds the convection-diffusion test family: a centered
five-point finite-difference discretization of

    Lu = lap(u) - f(x,y) u_x - g(x,y) u_y - h(x,y) u,
    f = log(x + 2y + 1),  g = exp(x + y),  h = x + y,

on the unit square with homogeneous Dirichlet boundary conditions, paired
with seeded uniform random input/output maps.  `load_matrix_market` ingests
external first- or second-order benchmarks, and `save_reduced`/`load_reduced`
round-trip reduced models losslessly (Matrix Market array files plus a JSON
sidecar with shifts, directions and the residual history).
"""

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .adaptive import IterationRecord
from .errors import MatrixMarketError
from .second_order import SecondOrderReducedModel, SecondOrderSystem
from .systems import FirstOrderSystem, ReducedModel

MM_PRECISION = 17
# Orders up to this bound get a dense spectral sanity check at generation.
STABILITY_CHECK_MAX_ORDER = 900


def _default_f(x, y):
    return np.log(x + 2.0 * y + 1.0)


def _default_g(x, y):
    return np.exp(x + y)


def _default_h(x, y):
    return x + y


@dataclass
class FdmSpec:
    """Parameters of the generated convection-diffusion system (n = n0**2)."""

    n0: int
    seed: int = 0
    p: int = 2
    description: str = ""
    f: callable = None
    g: callable = None
    h: callable = None

    def __post_init__(self):
        if self.n0 < 2:
            raise ValueError("n0 must be at least 2")
        if self.p < 1:
            raise ValueError("p must be at least 1")


@dataclass
class BenchmarkBundle:
    """A loaded benchmark system plus provenance metadata."""

    system: object
    name: str
    n: int
    p: int
    s_recommended: int = None
    metadata: dict = dataclasses.field(default_factory=dict)


def generate_fdm(spec):
    """Deterministic sparse convection-diffusion system on the unit square.

    Mesh width is ``1/(n0+1)``; inner grid points are ordered row-major (x
    varies fastest).  ``B`` and ``C`` entries are i.i.d. uniform on [0, 1]
    from a PCG64 stream seeded with ``spec.seed`` (B is drawn first).
    """
    n0 = spec.n0
    n = n0 * n0
    hm = 1.0 / (n0 + 1)
    f = spec.f if spec.f is not None else _default_f
    g = spec.g if spec.g is not None else _default_g
    h = spec.h if spec.h is not None else _default_h

    k = np.arange(n)
    ii = k % n0   # x index, fastest
    jj = k // n0  # y index
    x = (ii + 1) * hm
    y = (jj + 1) * hm

    inv_h2 = 1.0 / (hm * hm)
    inv_2h = 1.0 / (2.0 * hm)
    fv, gv, hv = f(x, y), g(x, y), h(x, y)

    rows = [k]
    cols = [k]
    vals = [-4.0 * inv_h2 - hv]
    east = ii < n0 - 1
    rows.append(k[east]); cols.append(k[east] + 1)
    vals.append(inv_h2 - fv[east] * inv_2h)
    west = ii > 0
    rows.append(k[west]); cols.append(k[west] - 1)
    vals.append(inv_h2 + fv[west] * inv_2h)
    north = jj < n0 - 1
    rows.append(k[north]); cols.append(k[north] + n0)
    vals.append(inv_h2 - gv[north] * inv_2h)
    south = jj > 0
    rows.append(k[south]); cols.append(k[south] - n0)
    vals.append(inv_h2 + gv[south] * inv_2h)

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()

    if n <= STABILITY_CHECK_MAX_ORDER:
        lead = np.max(np.linalg.eigvals(A.toarray()).real)
        if lead >= 0.0:
            warnings.warn(
                f"generated matrix has a nonnegative leading eigenvalue ({lead:.3e})",
                stacklevel=2,
            )

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    B = rng.random((n, spec.p))
    C = rng.random((spec.p, n))
    return FirstOrderSystem(A=A, B=B, C=C)


def _locate_parse_error(path):
    """Best-effort line number of the first malformed body line."""
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if lineno == 1 or not stripped or stripped.startswith("%"):
                    continue
                for token in stripped.split():
                    try:
                        float(token)
                    except ValueError:
                        return lineno
    except OSError:
        return None
    return None


def read_matrix(path):
    """One Matrix Market file (coordinate or array, real, general/symmetric)."""
    path = Path(path)
    try:
        with open(path) as fh:
            banner = fh.readline()
    except OSError as exc:
        raise MatrixMarketError(path, str(exc)) from exc
    parts = banner.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise MatrixMarketError(path, f"not a Matrix Market banner: {banner.strip()!r}",
                                line=1)
    fmt, fieldname, symmetry = parts[2], parts[3], parts[4]
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(path, f"unsupported format {fmt!r}", line=1)
    if fieldname not in ("real", "integer"):
        raise MatrixMarketError(
            path, f"unsupported field {fieldname!r}; only real matrices are accepted",
            line=1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(path, f"unsupported symmetry {symmetry!r}", line=1)
    try:
        mat = scipy.io.mmread(path)
    except Exception as exc:
        raise MatrixMarketError(path, f"parse failure: {exc}",
                                line=_locate_parse_error(path)) from exc
    return mat, {"symmetric": symmetry == "symmetric", "format": fmt}


def _as_dense(mat):
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat)


def _load_io_maps(n, b_path, c_path, p, seed):
    meta = {"random_b": b_path is None, "random_c": c_path is None}
    B = C = None
    if b_path is not None:
        B = _as_dense(read_matrix(b_path)[0])
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != n:
            raise MatrixMarketError(b_path, f"B has {B.shape[0]} rows, expected {n}")
    if c_path is not None:
        C = _as_dense(read_matrix(c_path)[0])
        if C.ndim == 1:
            C = C[None, :]
        if C.shape[1] != n and C.shape[0] == n:
            C = C.T  # stored transposed, a common benchmark convention
        if C.shape[1] != n:
            raise MatrixMarketError(c_path, f"C has {C.shape[1]} columns, expected {n}")
    if B is not None and C is not None and B.shape[1] != C.shape[0]:
        raise MatrixMarketError(b_path, "B and C disagree on the IO count")
    width = B.shape[1] if B is not None else (C.shape[0] if C is not None else p)
    if width is None:
        raise ValueError("p is required when both B and C are synthesized")
    rng = np.random.Generator(np.random.PCG64(seed))
    if B is None:
        B = rng.random((n, width))
    if C is None:
        C = rng.random((width, n))
    return B, C, meta


def load_matrix_market(a_path=None, mdk_paths=None, b_path=None, c_path=None,
                       p=None, seed=0, name=None, s_recommended=None):
    """Assemble a benchmark bundle from Matrix Market files.

    Exactly one of ``a_path`` (first order) or ``mdk_paths`` (a triple of
    paths for the mass, damping and stiffness matrices; the mass entry may be
    None for identity) must be given.  Missing ``B``/``C`` are replaced by
    seeded uniform random maps and flagged in the bundle metadata.
    """
    if (a_path is None) == (mdk_paths is None):
        raise ValueError("give either a_path or mdk_paths")

    meta = {}
    if a_path is not None:
        A, info = read_matrix(a_path)
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise MatrixMarketError(a_path, f"A must be square, got {A.shape}")
        meta["symmetric_pattern"] = info["symmetric"]
        n = A.shape[0]
        B, C, io_meta = _load_io_maps(n, b_path, c_path, p, seed)
        meta.update(io_meta)
        system = FirstOrderSystem(A=A, B=B, C=C)
    else:
        m_path, d_path, k_path = mdk_paths
        M = None
        if m_path is not None:
            M, m_info = read_matrix(m_path)
            M = sp.csc_matrix(M)
            meta["symmetric_mass"] = m_info["symmetric"]
        D, _ = read_matrix(d_path)
        K, k_info = read_matrix(k_path)
        D, K = sp.csc_matrix(D), sp.csc_matrix(K)
        if K.shape[0] != K.shape[1] or D.shape != K.shape:
            raise MatrixMarketError(k_path, "D and K must be square and equal-shaped")
        if M is not None and M.shape != K.shape:
            raise MatrixMarketError(m_path, "M must match the shape of K")
        meta["symmetric_stiffness"] = k_info["symmetric"]
        n = K.shape[0]
        B, C, io_meta = _load_io_maps(n, b_path, c_path, p, seed)
        meta.update(io_meta)
        system = SecondOrderSystem(M=M, D=D, K=K, B=B, C=C)

    return BenchmarkBundle(
        system=system,
        name=name or (Path(a_path).stem if a_path else Path(mdk_paths[2]).stem),
        n=n,
        p=system.p,
        s_recommended=s_recommended,
        metadata=meta,
    )


def write_matrix(path, mat):
    """Matrix Market writer at full double precision (17 significant digits)."""
    scipy.io.mmwrite(str(path), mat, precision=MM_PRECISION)


def _complex_to_json(arr):
    arr = np.asarray(arr, dtype=complex)
    return [[[v.real, v.imag] for v in row] for row in arr]


def _complex_from_json(data):
    return np.array([[complex(re, im) for re, im in row] for row in data])


def _history_to_json(history):
    return [
        {
            "iteration": rec.iteration,
            "sigma": [rec.sigma.real, rec.sigma.imag],
            "mu": [rec.mu.real, rec.mu.imag],
            "res_right": rec.res_right,
            "res_left": rec.res_left,
            "biorth_error": rec.biorth_error,
        }
        for rec in history
    ]


def save_reduced(rm, prefix, state=None, history=None, config=None):
    """Write a reduced model as Matrix Market array files plus a JSON sidecar.

    ``prefix`` is a path prefix: matrices land in ``<prefix>_<name>.mtx`` and
    the sidecar (shifts, directions, residual history, run configuration) in
    ``<prefix>.json``.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(rm, SecondOrderReducedModel):
        parts = {"D": rm.D_m, "K": rm.K_m, "B": rm.B_m, "C": rm.C_m}
        kind = "second-order"
    elif isinstance(rm, ReducedModel):
        parts = {"A": rm.A_m, "B": rm.B_m, "C": rm.C_m}
        kind = "first-order"
    else:
        raise TypeError(f"cannot save a {type(rm).__name__}")
    for label, mat in parts.items():
        write_matrix(f"{prefix}_{label}.mtx", np.asarray(mat))

    sidecar = {"kind": kind, "m": rm.m, "s": rm.s}
    if state is not None:
        sidecar["shifts_right"] = [[z.real, z.imag] for z in state.shifts_right]
        sidecar["shifts_left"] = [[z.real, z.imag] for z in state.shifts_left]
        sidecar["dirs_right"] = [_complex_to_json(d) for d in state.dirs_right]
        sidecar["dirs_left"] = [_complex_to_json(d) for d in state.dirs_left]
        sidecar["block_widths"] = list(state.block_widths)
    if history is not None:
        sidecar["history"] = _history_to_json(history)
    if config is not None:
        sidecar["config"] = config
    with open(f"{prefix}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def load_reduced(prefix):
    """Reload a saved reduced model; returns ``(model, sidecar_dict)``."""
    prefix = Path(prefix)
    with open(f"{prefix}.json") as fh:
        sidecar = json.load(fh)
    def _read(label):
        return np.asarray(scipy.io.mmread(f"{prefix}_{label}.mtx"))
    if sidecar["kind"] == "second-order":
        rm = SecondOrderReducedModel(
            D_m=_read("D"), K_m=_read("K"), B_m=_read("B"), C_m=_read("C"),
            m=sidecar["m"], s=sidecar["s"],
        )
    else:
        rm = ReducedModel(A_m=_read("A"), B_m=_read("B"), C_m=_read("C"),
                          m=sidecar["m"], s=sidecar["s"])
    return rm, sidecar


def history_from_sidecar(sidecar):
    """Rebuild iteration records from a sidecar dict (wall times are not stored)."""
    return [
        IterationRecord(
            iteration=rec["iteration"],
            sigma=complex(*rec["sigma"]),
            mu=complex(*rec["mu"]),
            res_right=rec["res_right"],
            res_left=rec["res_left"],
            biorth_error=rec["biorth_error"],
            wall_time_s=math.nan,
        )
        for rec in sidecar.get("history", [])
    ]
