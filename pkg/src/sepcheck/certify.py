"""Separability verdicts: prechecks, subset certification, BSA, pipeline.

The pipeline first compresses to the supported space and rules out NPT and
rank-deficient (distillable) inputs.  Rank-N states are decomposed exactly;
states inside the rank-sum window go through the eligible-vector search and
a convex certificate is sought over subsets of the finite candidate set,
with the best-separable-approximation iteration as the numerical fallback.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from .errors import (
    DecompositionFailed,
    NonGeneric,
    NotPPT,
    PreconditionFailed,
    RankSumTooHigh,
    RankTooLow,
)
from .numlin import DEFAULT_TOL, Tolerances, frob, numerical_rank, pseudo_inverse, range_basis
from .state import (
    BipartiteState,
    Decomposition,
    ProductVector,
    canonicalize,
    partial_transpose,
    reconstruction,
    reduced_a,
    reduced_b,
    support_compress,
)
from .vectors import EligibleSet, enumerate_eligible

__all__ = [
    "Verdict",
    "BsaResult",
    "spectral_ball_check",
    "certify_by_subsets",
    "bsa_decompose",
    "kernel_witness_bound",
    "separability_check",
    "verdict_to_json",
]

SEPARABLE = "Separable"
ENTANGLED = "Entangled"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a separability check with its certificate or reason."""

    status: str
    reason: str | None = None
    certificate: Decomposition | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BsaResult:
    """Best-separable-approximation split rho = sum_i L_i P_i + (1-lambda) d_rho."""

    weights: np.ndarray
    lam: float
    delta_rho: np.ndarray
    converged: bool
    iterations: int
    lam_trace: tuple[float, ...]


def _diagnostics(s: BipartiteState, tol: Tolerances) -> dict:
    pt = partial_transpose(s)
    return {
        "dims": [s.dim_a, s.dim_b],
        "trace": s.trace,
        "rank": numerical_rank(s.rho, tol),
        "rank_ta": numerical_rank(pt, tol),
        "local_rank_a": numerical_rank(reduced_a(s), tol),
        "local_rank_b": numerical_rank(reduced_b(s), tol),
        "kernel_dim": s.dim_a * s.dim_b - numerical_rank(s.rho, tol),
        "kernel_dim_ta": s.dim_a * s.dim_b - numerical_rank(pt, tol),
    }


def spectral_ball_check(s: BipartiteState, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Sufficient condition: smallest eigenvalue at least 1 / (2 + MN).

    Applies to normalized full-rank states; a False answer carries no
    information about separability.
    """
    mn = s.dim_a * s.dim_b
    wmin = float(np.linalg.eigvalsh(s.rho)[0])
    return wmin >= 1.0 / (2.0 + mn) - tol.psd_abs


# ---------------------------------------------------------------------------
# Convex certificates over a finite candidate set
# ---------------------------------------------------------------------------

def _features(p: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix (upper triangle, split parts)."""
    n = p.shape[0]
    iu = np.triu_indices(n)
    upper = p[iu]
    return np.concatenate([upper.real, upper.imag])


def _weights_valid(weights: np.ndarray, tol: Tolerances) -> bool:
    return bool(np.all(weights >= -tol.residual_abs))


def _independent_reduction(
    feats: np.ndarray, weights: np.ndarray, tol: Tolerances
) -> np.ndarray:
    """Shrink a nonnegative combination onto linearly independent projectors.

    Any real null combination of the active projectors is used to push at
    least one weight to zero without changing the represented matrix, until
    the active set is independent.
    """
    weights = weights.copy()
    for _ in range(weights.size):
        active = np.where(weights > tol.residual_abs)[0]
        if active.size == 0:
            break
        sub = feats[:, active]
        if np.linalg.matrix_rank(sub, tol=1e-10) == active.size:
            break
        _, _, vh = np.linalg.svd(sub)
        null = vh[-1].real
        if np.max(np.abs(null)) <= 0:
            break
        if np.max(null) <= 0:
            null = -null
        positive = null > 1e-12
        steps = weights[active][positive] / null[positive]
        lam = float(np.min(steps))
        weights[active] = weights[active] - lam * null
        weights[np.abs(weights) <= tol.residual_abs] = 0.0
    return weights


def _certificate_from_weights(
    s: BipartiteState,
    projs: list[ProductVector],
    weights: np.ndarray,
    tol: Tolerances,
) -> Decomposition | None:
    terms = [
        (float(w), pv)
        for w, pv in zip(weights, projs)
        if w > tol.residual_abs
    ]
    if not terms:
        return None
    residual = frob(s.rho - reconstruction(terms, s.dim_a, s.dim_b))
    if residual > tol.residual_abs * max(1.0, frob(s.rho)):
        return None
    return canonicalize(Decomposition(tuple(terms), residual))


def certify_by_subsets(
    s: BipartiteState,
    es: EligibleSet,
    tol: Tolerances = DEFAULT_TOL,
    subset_budget: int = 100_000,
    bsa_max_iters: int = 400,
    threads: int = 1,
) -> Verdict:
    """Decide separability over an exhaustive finite set of eligible vectors.

    An empty exhaustive set certifies entanglement outright.  Otherwise the
    state is expressed over subsets of the candidate projectors: a greedy
    independent subset first, then a nonnegative least-squares solve over
    the full set, then bounded exhaustive subset enumeration.  Certificates
    are reduced to linearly independent projectors, which keeps their size
    within min(r^2, r_ta^2).  If no subset works the verdict falls through
    to the best-separable-approximation iteration.
    """
    diag = _diagnostics(s, tol)
    if len(es.vectors) == 0:
        if es.exhaustive:
            return Verdict(ENTANGLED, "NoEligibleVectors", None, diag)
        return Verdict(INCONCLUSIVE, "NonGeneric", None, diag)

    projs = list(es.vectors)
    scale = max(1.0, frob(s.rho))
    feats = np.column_stack([_features(pv.projector()) for pv in projs])
    target = _features(s.rho)

    def _attempt(indices) -> Decomposition | None:
        sub = feats[:, indices]
        sol, *_ = np.linalg.lstsq(sub, target, rcond=None)
        if not _weights_valid(sol, tol):
            return None
        weights = np.zeros(len(projs))
        weights[list(indices)] = np.clip(sol, 0.0, None)
        weights = _independent_reduction(feats, weights, tol)
        return _certificate_from_weights(s, projs, weights, tol)

    # Greedy: grow an independent subset by the largest residual reduction.
    chosen: list[int] = []
    residual_vec = target.copy()
    while len(chosen) < min(len(projs), feats.shape[0]):
        gains = feats.T @ residual_vec
        order = np.argsort(-np.abs(gains))
        picked = None
        for idx in order:
            if idx in chosen:
                continue
            trial = chosen + [int(idx)]
            if np.linalg.matrix_rank(feats[:, trial], tol=1e-10) < len(trial):
                continue
            picked = int(idx)
            break
        if picked is None:
            break
        chosen.append(picked)
        sol, *_ = np.linalg.lstsq(feats[:, chosen], target, rcond=None)
        residual_vec = target - feats[:, chosen] @ sol
        if np.linalg.norm(residual_vec) <= 0.5 * tol.residual_abs * scale:
            break
    if chosen:
        cert = _attempt(chosen)
        if cert is not None:
            return Verdict(SEPARABLE, None, cert, diag)

    # Nonnegative least squares over the whole candidate set.
    sol, rnorm = nnls(feats, target)
    if rnorm <= tol.residual_abs * scale:
        weights = _independent_reduction(feats, sol, tol)
        cert = _certificate_from_weights(s, projs, weights, tol)
        if cert is not None:
            return Verdict(SEPARABLE, None, cert, diag)

    # Bounded exhaustive enumeration over subset sizes, largest-first within
    # the Caratheodory window.
    l0 = max(diag["rank"], diag["rank_ta"])
    cap = min(len(projs), min(diag["rank"] ** 2, diag["rank_ta"] ** 2))
    budget = subset_budget
    sizes = range(max(1, l0), cap + 1)
    subsets = []
    for size in sizes:
        for combo in itertools.combinations(range(len(projs)), size):
            subsets.append(combo)
            budget -= 1
            if budget <= 0:
                break
        if budget <= 0:
            break
    if threads > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_attempt, subsets))
    else:
        results = map(_attempt, subsets)
    for cert in results:
        if cert is not None:
            return Verdict(SEPARABLE, None, cert, diag)

    # Numerical fallback: BSA over the candidate set.
    bsa = bsa_decompose(s, projs, tol, max_iters=bsa_max_iters)
    if bsa.lam >= 1.0 - tol.residual_abs:
        terms = [
            (float(w), pv) for w, pv in zip(bsa.weights, projs) if w > tol.residual_abs
        ]
        residual = frob(s.rho - reconstruction(terms, s.dim_a, s.dim_b))
        if residual <= tol.residual_abs * scale:
            cert = canonicalize(Decomposition(tuple(terms), residual))
            return Verdict(SEPARABLE, None, cert, diag)
    diag = dict(diag)
    diag["bsa_lambda"] = bsa.lam
    return Verdict(INCONCLUSIVE, "BudgetExhausted", None, diag)


# ---------------------------------------------------------------------------
# Best separable approximation
# ---------------------------------------------------------------------------

def _max_weight(x: np.ndarray, v: np.ndarray, tol: Tolerances) -> float:
    """Largest t with x - t |v><v| still PSD: 1 / <v| x^+ |v> on the range.

    Zero when v sticks out of the range of x (nothing can be subtracted).
    """
    basis = range_basis(x, tol)
    inside = basis @ (basis.conj().T @ v)
    if np.linalg.norm(v - inside) > 1e-7 * max(1.0, np.linalg.norm(v)):
        return 0.0
    quad = float(np.real(np.vdot(v, pseudo_inverse(x, tol) @ v)))
    if quad <= 0.0:
        return 0.0
    # tiny safety factor so accumulated float error cannot break positivity
    return (1.0 / quad) * (1.0 - 1e-12)


def bsa_decompose(
    s: BipartiteState,
    projectors: list[ProductVector],
    tol: Tolerances = DEFAULT_TOL,
    max_iters: int = 400,
) -> BsaResult:
    """Maximize the separable weight over a fixed set of product projectors.

    Cyclic single-index maximization sets each weight to the largest value
    keeping both the remainder and its partial transpose PSD; stalls are
    broken by pairwise sweeps that maximize two weights jointly along the
    feasibility frontier with a bounded one-dimensional search.  The trace
    of the total weight is non-decreasing by construction.
    """
    k = len(projectors)
    rho = s.rho
    rho_t = partial_transpose(s)
    if k == 0:
        return BsaResult(np.zeros(0), 0.0, rho.copy(), True, 0, (0.0,))

    vs = [pv.vec() for pv in projectors]
    vs = [v / np.linalg.norm(v) for v in vs]
    vts = [np.kron((pv.e / np.linalg.norm(pv.e)).conj(), pv.f / np.linalg.norm(pv.f))
           for pv in projectors]
    ps = [np.outer(v, v.conj()) for v in vs]
    pts = [np.outer(vt, vt.conj()) for vt in vts]

    weights = np.zeros(k)
    lam_trace = [0.0]

    def _rest(i: int | None = None, j: int | None = None):
        skip = {i, j}
        acc = rho.copy()
        acc_t = rho_t.copy()
        for idx in range(k):
            if idx in skip or weights[idx] == 0.0:
                continue
            acc -= weights[idx] * ps[idx]
            acc_t -= weights[idx] * pts[idx]
        return acc, acc_t

    def _single_max(i: int, x: np.ndarray, xt: np.ndarray) -> float:
        return max(0.0, min(_max_weight(x, vs[i], tol), _max_weight(xt, vts[i], tol)))

    iterations = 0
    converged = False
    for sweep in range(max_iters):
        iterations = sweep + 1
        before = float(np.sum(weights))
        for i in range(k):
            x, xt = _rest(i)
            weights[i] = _single_max(i, x, xt)
        after = float(np.sum(weights))
        improved = after - before
        if improved < tol.residual_abs:
            # pairwise pass: maximize w_i + w_j along the frontier
            for i in range(k):
                for j in range(i + 1, k):
                    x, xt = _rest(i, j)
                    t_max = _single_max(i, x, xt)

                    def _joint(t: float) -> float:
                        xi = x - t * ps[i]
                        xti = xt - t * pts[i]
                        return t + max(
                            0.0, min(_max_weight(xi, vs[j], tol), _max_weight(xti, vts[j], tol))
                        )

                    best_t, best_val = weights[i], weights[i] + weights[j]
                    for t0 in (0.0, t_max):
                        val = _joint(t0)
                        if val > best_val:
                            best_t, best_val = t0, val
                    if t_max > 0.0:
                        res = minimize_scalar(
                            lambda t: -_joint(t), bounds=(0.0, t_max), method="bounded",
                            options={"maxiter": 40, "xatol": 1e-10},
                        )
                        if -res.fun > best_val:
                            best_t, best_val = float(res.x), float(-res.fun)
                    if best_val > weights[i] + weights[j] + 1e-15:
                        weights[i] = best_t
                        xi = x - best_t * ps[i]
                        xti = xt - best_t * pts[i]
                        weights[j] = max(
                            0.0, min(_max_weight(xi, vs[j], tol), _max_weight(xti, vts[j], tol))
                        )
            after_pair = float(np.sum(weights))
            lam_trace.append(after_pair)
            if after_pair - before < tol.residual_abs:
                converged = True
                break
        else:
            lam_trace.append(after)

    lam = float(np.sum(weights))
    remainder = rho - sum(w * p for w, p in zip(weights, ps)) if k else rho
    if lam < 1.0 - tol.residual_abs:
        delta = remainder / (1.0 - lam)
    else:
        delta = np.zeros_like(rho)
    return BsaResult(weights.copy(), lam, delta, converged, iterations, tuple(lam_trace))


# ---------------------------------------------------------------------------
# Kernel witness
# ---------------------------------------------------------------------------

def kernel_witness_bound(
    s: BipartiteState, sigma: BipartiteState, tol: Tolerances = DEFAULT_TOL
) -> bool:
    """Rank bound from a PPT state sitting inside the kernel.

    With R(sigma) inside K(rho), the kernel of the partial transpose of rho
    contains the range of sigma's partial transpose, so
    r(rho^T_A) <= MN - r(sigma^T_A).  A False return signals a tolerance
    inconsistency, since the bound is a theorem.
    """
    if s.dim_a != sigma.dim_a or s.dim_b != sigma.dim_b:
        raise PreconditionFailed("witness dimensions do not match the state")
    from .state import is_ppt

    if not is_ppt(sigma, tol):
        raise PreconditionFailed("witness state is not PPT")
    r_sigma = range_basis(sigma.rho, tol)
    overlap = frob(s.rho @ r_sigma)
    if overlap > tol.residual_abs * max(1.0, frob(s.rho)):
        raise PreconditionFailed("the witness range is not inside the kernel")
    mn = s.dim_a * s.dim_b
    r_ta = numerical_rank(partial_transpose(s), tol)
    r_sigma_ta = numerical_rank(partial_transpose(sigma), tol)
    return r_ta <= mn - r_sigma_ta


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _lift_certificate(cert: Decomposition, va: np.ndarray, vb: np.ndarray,
                      s: BipartiteState, tol: Tolerances) -> Decomposition:
    lifted = [(w, ProductVector(va @ pv.e, vb @ pv.f)) for w, pv in cert.terms]
    residual = frob(s.rho - reconstruction(lifted, s.dim_a, s.dim_b))
    return canonicalize(Decomposition(tuple(lifted), residual))


def separability_check(
    s: BipartiteState,
    tol: Tolerances = DEFAULT_TOL,
    seed=0,
    direction_budget: int = 64,
    subset_budget: int = 100_000,
    bsa_max_iters: int = 400,
    threads: int = 1,
) -> Verdict:
    """Full decision pipeline for one state.

    Stages: support compression; NPT test (with witness eigenvector); global
    rank below a local rank means distillable; the spectral-ball sufficient
    condition; the exact rank-N decomposition; the eligible-vector search
    with subset certification when the rank-sum window applies; otherwise
    inconclusive.
    """
    from .canon import decompose_rank_n
    from .state import is_ppt

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sc, (va, vb) = support_compress(s, tol)
    diag = _diagnostics(sc, tol)
    diag["compressed_dims"] = [sc.dim_a, sc.dim_b]
    diag["dims"] = [s.dim_a, s.dim_b]

    pt = partial_transpose(sc)
    w, vecs = np.linalg.eigh(pt)
    floor = tol.psd_abs * max(1.0, abs(sc.trace))
    if float(w[0]) < -floor:
        witness = np.kron(va.conj(), vb) @ vecs[:, 0]
        diag["npt_eigenvalue"] = float(w[0])
        diag["npt_witness"] = [[float(z.real), float(z.imag)] for z in witness]
        return Verdict(ENTANGLED, "NPT", None, diag)

    m, n = sc.dim_a, sc.dim_b
    r = diag["rank"]
    if r < max(m, n):
        return Verdict(ENTANGLED, "RankBelowLocal", None, diag)

    if sc.normalized and r == m * n and spectral_ball_check(sc, tol):
        diag["method"] = "spectral_ball"
        return Verdict(SEPARABLE, "SpectralBall", None, diag)

    if r == max(m, n):
        try:
            cert = decompose_rank_n(sc, tol, rng, direction_budget)
        except (NotPPT, RankTooLow) as exc:
            return Verdict(ENTANGLED, type(exc).__name__, None, diag)
        except DecompositionFailed:
            return Verdict(INCONCLUSIVE, "BudgetExhausted", None, diag)
        diag["method"] = "rank_n_decomposition"
        return Verdict(SEPARABLE, None, _lift_certificate(cert, va, vb, s, tol), diag)

    rank_sum = r + diag["rank_ta"]
    if rank_sum <= 2 * m * n - m - n + 2:
        try:
            es = enumerate_eligible(sc, tol, rng)
        except (NonGeneric, RankSumTooHigh) as exc:
            diag["eligible_error"] = str(exc)
            return Verdict(INCONCLUSIVE, "NonGeneric", None, diag)
        diag["eligible_count"] = len(es.vectors)
        diag["eligible_exhaustive"] = es.exhaustive
        verdict = certify_by_subsets(sc, es, tol, subset_budget, bsa_max_iters, threads)
        if verdict.status == SEPARABLE and verdict.certificate is not None:
            cert = _lift_certificate(verdict.certificate, va, vb, s, tol)
            merged = dict(diag)
            merged.update(verdict.diagnostics)
            return Verdict(SEPARABLE, None, cert, merged)
        merged = dict(diag)
        merged.update(verdict.diagnostics)
        return Verdict(verdict.status, verdict.reason, None, merged)

    return Verdict(INCONCLUSIVE, "BudgetExhausted", None, diag)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _vector_pairs(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in v]


def verdict_to_json(v: Verdict) -> dict:
    cert = None
    if v.certificate is not None:
        cert = [
            {
                "weight": float(w),
                "e": _vector_pairs(pv.e),
                "f": _vector_pairs(pv.f),
            }
            for w, pv in v.certificate.terms
        ]
    return {
        "status": v.status,
        "reason": v.reason,
        "certificate": cert,
        "diagnostics": v.diagnostics,
    }
