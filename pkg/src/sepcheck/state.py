"""Bipartite density matrices on C^M (x) C^N and their basic operations.

Index convention (fixed, bit-exact): the product basis vector
|i>_A (x) |j>_B maps to row ``i * dim_b + j``, matching ``numpy.kron``.
Partial transposition and complex conjugation of Alice vectors are always
taken in this computational basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numlin import DEFAULT_TOL, Tolerances, as_cmatrix, frob, range_basis

__all__ = [
    "BipartiteState",
    "ProductVector",
    "Decomposition",
    "partial_transpose",
    "is_ppt",
    "block",
    "reduced_a",
    "reduced_b",
    "local_filter",
    "support_compress",
    "swap_parties",
    "reconstruction",
    "canonicalize",
    "state_to_json",
    "state_from_json",
    "save_state",
    "load_state",
]


class BipartiteState:
    """Hermitian PSD matrix on a two-party product space, with dimensions.

    Unnormalized states are first class: local filters break normalization
    and all rank/kernel logic ignores it.  ``rho`` is validated (finite,
    Hermitian, PSD within tolerance) and stored read-only; treat instances
    as immutable values.
    """

    __slots__ = ("dim_a", "dim_b", "rho", "normalized")

    def __init__(self, dim_a: int, dim_b: int, rho, normalized: bool = False,
                 tol: Tolerances = DEFAULT_TOL):
        dim_a = int(dim_a)
        dim_b = int(dim_b)
        if dim_a < 1 or dim_b < 1:
            raise ValueError("dimensions must be at least 1")
        mat = as_cmatrix(rho)
        mn = dim_a * dim_b
        if mat.shape != (mn, mn):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dim_a}x{dim_b}")
        scale = max(1.0, frob(mat))
        if frob(mat - mat.conj().T) > tol.residual_abs * scale:
            raise ValueError("density matrix is not Hermitian within tolerance")
        mat = 0.5 * (mat + mat.conj().T)
        tr = float(np.trace(mat).real)
        floor = tol.psd_abs * max(1.0, abs(tr))
        wmin = float(np.linalg.eigvalsh(mat)[0]) if mn > 0 else 0.0
        if wmin < -floor:
            raise ValueError(f"density matrix has eigenvalue {wmin:.3e} below -{floor:.3e}")
        if normalized and abs(tr - 1.0) > tol.residual_abs:
            raise ValueError(f"trace {tr!r} differs from 1 beyond tolerance")
        mat.setflags(write=False)
        self.dim_a = dim_a
        self.dim_b = dim_b
        self.rho = mat
        self.normalized = bool(normalized)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def __repr__(self):
        tag = "normalized" if self.normalized else "unnormalized"
        return f"BipartiteState({self.dim_a}x{self.dim_b}, trace={self.trace:.6g}, {tag})"


@dataclass(frozen=True)
class ProductVector:
    """A pair (e, f) of nonzero local vectors; carrier of decomposition terms."""

    e: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=complex).reshape(-1)
        f = np.asarray(self.f, dtype=complex).reshape(-1)
        if not np.any(e) or not np.any(f):
            raise ValueError("product vector components must be nonzero")
        e.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "f", f)

    def vec(self) -> np.ndarray:
        """The joint vector e (x) f in the computational product basis."""
        return np.kron(self.e, self.f)

    def projector(self) -> np.ndarray:
        v = self.vec()
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class Decomposition:
    """Weighted product projectors plus the reconstruction residual."""

    terms: tuple[tuple[float, ProductVector], ...]
    residual: float

    def __post_init__(self):
        terms = tuple((float(w), pv) for w, pv in self.terms)
        for w, _ in terms:
            if w <= 0.0:
                raise ValueError("decomposition weights must be positive")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "residual", float(self.residual))

    def __len__(self):
        return len(self.terms)


def reconstruction(terms, dim_a: int, dim_b: int) -> np.ndarray:
    """Sum of weighted product projectors as an MN x MN matrix."""
    mn = dim_a * dim_b
    out = np.zeros((mn, mn), dtype=complex)
    for w, pv in terms:
        v = pv.vec()
        out += w * np.outer(v, v.conj())
    return out


def _axes_view(s: BipartiteState) -> np.ndarray:
    return s.rho.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)


def partial_transpose(s: BipartiteState) -> np.ndarray:
    """Transpose on Alice's indices: block (i, j) of the output is block (j, i)."""
    r = _axes_view(s)
    mn = s.dim_a * s.dim_b
    return np.ascontiguousarray(r.transpose(2, 1, 0, 3)).reshape(mn, mn)


def is_ppt(s: BipartiteState, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff the partial transpose has no eigenvalue below the PSD floor."""
    pt = partial_transpose(s)
    floor = tol.psd_abs * max(1.0, abs(s.trace))
    return float(np.linalg.eigvalsh(pt)[0]) >= -floor


def block(s: BipartiteState, i: int, j: int) -> np.ndarray:
    """The N x N submatrix <i_A| rho |j_A>."""
    if not (0 <= i < s.dim_a and 0 <= j < s.dim_a):
        raise IndexError(f"Alice block index ({i}, {j}) out of range for M={s.dim_a}")
    n = s.dim_b
    return s.rho[i * n:(i + 1) * n, j * n:(j + 1) * n].copy()


def reduced_a(s: BipartiteState) -> np.ndarray:
    """Alice's reduced operator; entry (i, j) is the trace of block (i, j)."""
    return np.einsum("injn->ij", _axes_view(s))


def reduced_b(s: BipartiteState) -> np.ndarray:
    """Bob's reduced operator: the sum of the diagonal Alice blocks."""
    return np.einsum("imin->mn", _axes_view(s))


def local_filter(s: BipartiteState, side: str, v) -> BipartiteState:
    """Sandwich the state with V on one side: rho -> (V (x) I) rho (V (x) I)^dag.

    Unnormalized output.  With invertible V the operation is reversible and
    preserves the PPT property and both global ranks; non-invertible V acts
    as a projection-like map and loses reversibility.
    """
    mat = as_cmatrix(v)
    if side == "A":
        if mat.shape != (s.dim_a, s.dim_a):
            raise ValueError("filter dimension does not match Alice's space")
        w = np.kron(mat, np.eye(s.dim_b))
    elif side == "B":
        if mat.shape != (s.dim_b, s.dim_b):
            raise ValueError("filter dimension does not match Bob's space")
        w = np.kron(np.eye(s.dim_a), mat)
    else:
        raise ValueError("side must be 'A' or 'B'")
    return BipartiteState(s.dim_a, s.dim_b, w @ s.rho @ w.conj().T, normalized=False)


def support_compress(
    s: BipartiteState, tol: Tolerances = DEFAULT_TOL
) -> tuple[BipartiteState, tuple[np.ndarray, np.ndarray]]:
    """Restrict the state to the ranges of its reduced operators.

    Returns the compressed state, whose local ranks are full, together with
    the pair of local isometries (Va, Vb) undoing the compression:
    ``rho = (Va (x) Vb) rho_c (Va (x) Vb)^dag``.
    """
    va = range_basis(reduced_a(s), tol)
    vb = range_basis(reduced_b(s), tol)
    if va.shape[1] == s.dim_a:
        va = np.eye(s.dim_a, dtype=complex)
    if vb.shape[1] == s.dim_b:
        vb = np.eye(s.dim_b, dtype=complex)
    if va.shape[1] == s.dim_a and vb.shape[1] == s.dim_b:
        return s, (va, vb)
    w = np.kron(va, vb)
    rho_c = w.conj().T @ s.rho @ w
    out = BipartiteState(va.shape[1], vb.shape[1], rho_c, normalized=s.normalized, tol=tol)
    return out, (va, vb)


def swap_parties(s: BipartiteState) -> BipartiteState:
    """Exchange the roles of Alice and Bob."""
    r = _axes_view(s).transpose(1, 0, 3, 2)
    mn = s.dim_a * s.dim_b
    return BipartiteState(s.dim_b, s.dim_a, np.ascontiguousarray(r).reshape(mn, mn),
                          normalized=s.normalized)


def canonicalize(dec: Decomposition) -> Decomposition:
    """Deterministic presentation: weights descending, phases pinned.

    The global phase of each local vector is fixed so its largest-magnitude
    component is real positive; the vectors are normalized with the norms
    folded into the weight.
    """
    fixed = []
    for w, pv in dec.terms:
        e = pv.e / np.linalg.norm(pv.e)
        f = pv.f / np.linalg.norm(pv.f)
        weight = w * float(np.linalg.norm(pv.e) ** 2 * np.linalg.norm(pv.f) ** 2)
        for vec in (e, f):
            idx = int(np.argmax(np.abs(vec)))
            phase = vec[idx] / abs(vec[idx])
            vec *= phase.conjugate()
        fixed.append((weight, ProductVector(e, f)))
    fixed.sort(key=lambda t: -t[0])
    return Decomposition(tuple(fixed), dec.residual)


# ---------------------------------------------------------------------------
# JSON state document
# ---------------------------------------------------------------------------

def _matrix_to_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _pairs_to_matrix(rows) -> np.ndarray:
    return np.array([[complex(p[0], p[1]) for p in row] for row in rows], dtype=complex)


def state_to_json(s: BipartiteState) -> dict:
    return {
        "dim_a": s.dim_a,
        "dim_b": s.dim_b,
        "matrix": _matrix_to_pairs(s.rho),
    }


def state_from_json(doc: dict, tol: Tolerances = DEFAULT_TOL) -> BipartiteState:
    try:
        dim_a = int(doc["dim_a"])
        dim_b = int(doc["dim_b"])
        rows = doc["matrix"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state document: {exc}") from exc
    mn = dim_a * dim_b
    if len(rows) != mn or any(len(r) != mn for r in rows):
        raise ValueError(f"matrix layout does not match dims {dim_a}x{dim_b}")
    mat = _pairs_to_matrix(rows)
    tr = float(np.trace(mat).real)
    normalized = abs(tr - 1.0) <= tol.residual_abs
    return BipartiteState(dim_a, dim_b, mat, normalized=normalized, tol=tol)


def save_state(s: BipartiteState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_json(s), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_state(path, tol: Tolerances = DEFAULT_TOL) -> BipartiteState:
    with open(path, encoding="utf-8") as fh:
        return state_from_json(json.load(fh), tol)
