"""Canonical-form construction and the rank-N product decomposition.

A PPT state of rank N supported on M x N (M <= N) can be filtered into the
form Z^dag Z with Z = [C_1, ..., C_{M-1}, I], where the C_k are a commuting
family of normal matrices.  Joint eigenvectors of the family then yield an
exact N-term product decomposition; when no Alice direction with a full-rank
local block is found, one product projector is split off by a kernel-aligned
subtraction and the remainder is decomposed recursively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CanonicalMismatch,
    DecompositionFailed,
    DirectionNotFound,
    NoAlignment,
    NotPPT,
    RankDropViolation,
    RankTooLow,
)
from .numlin import (
    DEFAULT_TOL,
    Tolerances,
    frob,
    inv_sqrt_on_range,
    joint_diagonalize,
    kernel_basis,
    numerical_rank,
    pseudo_inverse,
)
from .reduce import probe_kernel_alignment, subtract_product
from .state import (
    BipartiteState,
    Decomposition,
    ProductVector,
    canonicalize,
    is_ppt,
    reconstruction,
    support_compress,
    swap_parties,
)

__all__ = [
    "CanonicalForm",
    "find_full_rank_direction",
    "to_canonical_form",
    "decompose_rank_n",
]


@dataclass(frozen=True)
class CanonicalForm:
    """Filtered block form of a rank-N PPT state.

    ``alice_basis`` is the unitary whose last column is the direction with a
    full-rank local block; ``filter`` is the Bob-side inverse square root
    applied symmetrically; ``blocks`` are the C_1 .. C_{M-1} read off the
    last Alice block row of the filtered state.
    """

    filter: np.ndarray
    alice_basis: np.ndarray
    blocks: tuple[np.ndarray, ...]


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _local_block(s: BipartiteState, a: np.ndarray) -> np.ndarray:
    """The N x N matrix <a| rho |a> for a vector a on Alice's side."""
    r = s.rho.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)
    return np.einsum("m,minj,n->ij", a.conj(), r, a)


def _block_rank(s: BipartiteState, e: np.ndarray, tol: Tolerances) -> int:
    """Rank of a local block anchored on the state's scale, not the block's.

    A direction nearly orthogonal to the Alice support produces a uniformly
    tiny block whose relative rank looks full; comparing against the state
    scale rejects it (and with it the numerically useless filter it implies).
    """
    sv = np.linalg.svd(e, compute_uv=False)
    scale = max(frob(s.rho), 1e-300)
    return int(np.count_nonzero(sv > tol.rank_rel * scale))


def find_full_rank_direction(
    s: BipartiteState,
    tol: Tolerances = DEFAULT_TOL,
    seed=0,
    budget: int = 64,
) -> np.ndarray:
    """Alice unit vector a with <a| rho |a> of full rank N.

    Full-rank directions are generic for valid inputs, so Haar samples
    almost surely succeed; a failure after the attempt budget signals the
    recursive structure handled by the caller.  Samples restricted to Alice
    sub-spans are interleaved to cover states whose good directions hide in
    a coordinate subspace.
    """
    rng = _as_rng(seed)
    m, n = s.dim_a, s.dim_b
    if m == 1:
        a = np.ones(1, dtype=complex)
        if _block_rank(s, _local_block(s, a), tol) == n:
            return a
        raise DirectionNotFound("the unique Alice direction has a deficient block")

    def _sample(k: int) -> np.ndarray:
        v = rng.normal(size=k) + 1j * rng.normal(size=k)
        return v / np.linalg.norm(v)

    attempts = 0
    while attempts < budget:
        a = _sample(m)
        attempts += 1
        if _block_rank(s, _local_block(s, a), tol) == n:
            return a
        # Every few Haar draws, try a vector supported on a random subset of
        # the computational Alice directions.
        if attempts % 4 == 0 and attempts < budget:
            size = int(rng.integers(1, m))
            support = rng.choice(m, size=size, replace=False)
            a = np.zeros(m, dtype=complex)
            a[support] = _sample(size)
            attempts += 1
            if _block_rank(s, _local_block(s, a), tol) == n:
                return a
    raise DirectionNotFound(f"no full-rank direction in {budget} attempts")


def _complete_basis(a: np.ndarray) -> np.ndarray:
    """Unitary with a (normalized) as its last column."""
    a = a / np.linalg.norm(a)
    comp = kernel_basis(a.conj().reshape(1, -1))
    return np.hstack([comp, a.reshape(-1, 1)])


def to_canonical_form(
    s: BipartiteState, a: np.ndarray, tol: Tolerances = DEFAULT_TOL
) -> CanonicalForm:
    """Rotate a to the last Alice slot, filter Bob, and read off the blocks.

    After the filter, block (i, j) of the state must equal C_i^dag C_j with
    C_{M-1} = I; the blocks must be normal and pairwise commuting (including
    the adjoint commutators).  Violations raise CanonicalMismatch, which
    signals that the input was not PPT / rank N as claimed.
    """
    m, n = s.dim_a, s.dim_b
    u = _complete_basis(np.asarray(a, dtype=complex).reshape(-1))
    if u.shape[0] != m:
        raise ValueError("direction dimension does not match Alice's space")

    rho1 = np.kron(u.conj().T, np.eye(n)) @ s.rho @ np.kron(u, np.eye(n))
    e_last = rho1[(m - 1) * n:, (m - 1) * n:]
    if _block_rank(s, e_last, tol) != n:
        raise ValueError("the chosen direction has a rank-deficient local block")
    w = inv_sqrt_on_range(e_last, tol)
    wk = np.kron(np.eye(m), w)
    rho2 = wk @ rho1 @ wk

    blocks = [rho2[(m - 1) * n:, j * n:(j + 1) * n].copy() for j in range(m - 1)]
    scale = max(1.0, frob(rho2))
    full = blocks + [np.eye(n)]
    for i in range(m):
        for j in range(i, m):
            dev = frob(rho2[i * n:(i + 1) * n, j * n:(j + 1) * n] - full[i].conj().T @ full[j])
            if dev > tol.residual_abs * scale * 10.0:
                raise CanonicalMismatch(f"block ({i}, {j}) deviates by {dev:.3e}")
    for i, ci in enumerate(blocks):
        norm_sq = max(1.0, frob(ci) ** 2)
        if frob(ci @ ci.conj().T - ci.conj().T @ ci) > tol.residual_abs * norm_sq * 10.0:
            raise CanonicalMismatch(f"block {i} is not normal")
        for j in range(i + 1, m - 1):
            cj = blocks[j]
            sc = max(1.0, frob(ci) * frob(cj))
            if frob(ci @ cj - cj @ ci) > tol.residual_abs * sc * 10.0:
                raise CanonicalMismatch(f"blocks {i}, {j} do not commute")
            if frob(ci @ cj.conj().T - cj.conj().T @ ci) > tol.residual_abs * sc * 10.0:
                raise CanonicalMismatch(f"blocks {i}, {j}^dag do not commute")
    return CanonicalForm(w, u, tuple(blocks))


def _terms_from_canonical(
    cf: CanonicalForm, n: int, tol: Tolerances
) -> list[tuple[float, ProductVector]]:
    """Assemble the N product terms from the joint eigenbasis of the blocks."""
    w_inv = pseudo_inverse(cf.filter, tol)  # filter is PD on the full space
    if cf.blocks:
        u_b, table = joint_diagonalize(list(cf.blocks), tol)
    else:
        u_b, table = np.eye(n, dtype=complex), np.zeros((n, 0), dtype=complex)
    terms = []
    for i in range(n):
        e_rot = np.concatenate([table[i, :].conj(), [1.0]])
        e = cf.alice_basis @ e_rot
        f = w_inv @ u_b[:, i]
        weight = float(np.linalg.norm(e) ** 2 * np.linalg.norm(f) ** 2)
        terms.append((weight, ProductVector(e / np.linalg.norm(e), f / np.linalg.norm(f))))
    return terms


def _probe_bases(m: int, rng: np.random.Generator, budget: int):
    """Candidate Alice bases: computational rotations first, then random."""
    eye = np.eye(m, dtype=complex)
    emitted = 0
    for last in range(m):
        if emitted >= budget:
            return
        order = [i for i in range(m) if i != last] + [last]
        yield eye[:, order]
        emitted += 1
    from .fixtures import haar_unitary

    while emitted < budget:
        yield haar_unitary(m, rng)
        emitted += 1


def decompose_rank_n(
    s: BipartiteState,
    tol: Tolerances = DEFAULT_TOL,
    seed=0,
    direction_budget: int = 64,
    probe_budget: int = 24,
) -> Decomposition:
    """Exact N-term product decomposition of a rank-N PPT state.

    Pipeline: compress to the supported space; check PPT and that the global
    rank equals the larger local dimension; find a full-rank Alice direction
    and decompose through the canonical form, or, failing that, split off a
    kernel-aligned product projector and recurse.  The result has exactly N
    terms, linearly independent Bob vectors, and reconstructs the input
    within ``residual_abs``.
    """
    rng = _as_rng(seed)
    sc, (va, vb) = support_compress(s, tol)

    if sc.dim_a > sc.dim_b:
        flipped = decompose_rank_n(swap_parties(sc), tol, rng, direction_budget, probe_budget)
        terms = [(w, ProductVector(pv.f, pv.e)) for w, pv in flipped.terms]
        large_side = [pv.e for _, pv in terms]
    else:
        terms = _decompose_supported(sc, tol, rng, direction_budget, probe_budget)
        large_side = [pv.f for _, pv in terms]

    # the local vectors on the larger (rank-carrying) side are independent
    if numerical_rank(np.array(large_side), tol) != len(terms):
        raise DecompositionFailed("decomposition vectors on the rank side are dependent")

    lifted = [(w, ProductVector(va @ pv.e, vb @ pv.f)) for w, pv in terms]
    residual = frob(s.rho - reconstruction(lifted, s.dim_a, s.dim_b))
    if residual > tol.residual_abs * max(1.0, frob(s.rho)):
        raise DecompositionFailed(f"reconstruction residual {residual:.3e} too large")
    return canonicalize(Decomposition(tuple(lifted), residual))


def _decompose_supported(
    sc: BipartiteState,
    tol: Tolerances,
    rng: np.random.Generator,
    direction_budget: int,
    probe_budget: int,
) -> list[tuple[float, ProductVector]]:
    m, n = sc.dim_a, sc.dim_b
    if not is_ppt(sc, tol):
        raise NotPPT("the state has a negative partial transpose")
    r = numerical_rank(sc.rho, tol)
    if r < n:
        raise RankTooLow(f"rank {r} below Bob rank {n}: distillable, hence entangled")
    if r > n:
        raise ValueError(f"rank {r} exceeds the supported Bob dimension {n}")

    if m == 1:
        w, v = np.linalg.eigh(sc.rho)
        terms = []
        for i in range(n):
            if w[i] <= tol.psd_abs * max(1.0, abs(sc.trace)):
                raise DecompositionFailed("rank-N state produced a negligible eigenvalue")
            terms.append((float(w[i]), ProductVector(np.ones(1, dtype=complex), v[:, i])))
        return terms

    try:
        a = find_full_rank_direction(sc, tol, rng, direction_budget)
    except DirectionNotFound:
        return _decompose_by_subtraction(sc, tol, rng, direction_budget, probe_budget)

    cf = to_canonical_form(sc, a, tol)
    return _terms_from_canonical(cf, n, tol)


def _decompose_by_subtraction(
    sc: BipartiteState,
    tol: Tolerances,
    rng: np.random.Generator,
    direction_budget: int,
    probe_budget: int,
) -> list[tuple[float, ProductVector]]:
    m = sc.dim_a
    for basis in _probe_bases(m, rng, probe_budget):
        try:
            alignment = probe_kernel_alignment(sc, basis, tol)
        except NoAlignment:
            continue
        if alignment.case != "image":
            # A kernel-case hit on a supported state means the compression
            # tolerance missed a direction; another basis may still work.
            continue
        try:
            remainder = subtract_product(sc, alignment.step, tol)
        except RankDropViolation:
            continue
        sub = decompose_rank_n(remainder, tol, rng, direction_budget, probe_budget)
        g = alignment.step.g
        weight = alignment.step.lam * float(np.linalg.norm(g) ** 2)
        a_last = alignment.step.alice_basis[:, -1]
        terms = list(sub.terms)
        terms.append((weight, ProductVector(a_last, g / np.linalg.norm(g))))
        return terms
    raise DecompositionFailed("no full-rank direction and no kernel alignment found")
