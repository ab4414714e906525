import numpy as np
import pytest

from conftest import orthogonal_product_mixture
from sepcheck.certify import (
    BsaResult,
    bsa_decompose,
    certify_by_subsets,
    kernel_witness_bound,
    separability_check,
    spectral_ball_check,
    verdict_to_json,
)
from sepcheck.errors import PreconditionFailed
from sepcheck.fixtures import (
    GeneratorSpec,
    haar_vector,
    maximally_mixed,
    random_separable,
    tiles_upb_state,
    tiles_vectors,
    werner_family,
)
from sepcheck.numlin import numerical_rank
from sepcheck.state import (
    BipartiteState,
    ProductVector,
    partial_transpose,
    reconstruction,
)
from sepcheck.vectors import EligibleSet, enumerate_eligible


def bell_phi_plus():
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1.0 / np.sqrt(2.0)
    return BipartiteState(2, 2, np.outer(v, v.conj()), normalized=True)


class TestSpectralBall:
    def test_maximally_mixed_2x2(self):
        # lambda_min = 1/4 >= 1/6
        assert spectral_ball_check(maximally_mixed(2, 2))

    def test_pure_state_fails(self):
        assert not spectral_ball_check(bell_phi_plus())

    def test_werner_ball_radius_meets_ppt_boundary(self):
        # oracle sweep: for this family the smallest eigenvalue is (1-p)/4,
        # so the ball radius 1/6 is crossed exactly at the PPT boundary 1/3
        radius = 1.0 / 6.0
        p_star = None
        for p in np.linspace(0.0, 1.0, 2001):
            wmin = np.linalg.eigvalsh(werner_family(float(p)).rho)[0]
            if wmin >= radius:
                p_star = float(p)
        assert abs(p_star - 1.0 / 3.0) < 1e-3
        assert spectral_ball_check(werner_family(p_star - 1e-3))
        assert not spectral_ball_check(werner_family(p_star + 2e-3))

    def test_not_tight_for_separable_mixtures(self, rng):
        # a product-state admixture keeps the state separable at any p while
        # the smallest eigenvalue (1-p)/4 drops below the ball radius: the
        # sufficient condition is not necessary
        e = np.array([1.0, 0.0], dtype=complex)
        v = np.kron(e, e)
        for p in (0.5, 0.8):
            # separable by construction (product state plus white noise)
            rho = p * np.outer(v, v.conj()) + (1 - p) * np.eye(4) / 4.0
            s = BipartiteState(2, 2, rho, normalized=True)
            assert not spectral_ball_check(s)
            from sepcheck.state import is_ppt

            assert is_ppt(s)


class TestCertifyBySubsets:
    def test_two_term_exact_solve(self, rng):
        p1 = ProductVector(haar_vector(2, rng), haar_vector(3, rng))
        p2 = ProductVector(haar_vector(2, rng), haar_vector(3, rng))
        rho = 0.3 * p1.projector() + 0.7 * p2.projector()
        st = BipartiteState(2, 3, rho, normalized=True)
        es = EligibleSet((p1, p2), exhaustive=True, degree_bound=2)
        verdict = certify_by_subsets(st, es)
        assert verdict.status == "Separable"
        weights = sorted(w for w, _ in verdict.certificate.terms)
        assert np.allclose(weights, [0.3, 0.7], atol=1e-9)

    def test_dependent_triple_reduced_to_independent(self, rng):
        # three projectors with a linear dependence spanning the state: the
        # certificate must come out linearly independent
        e0 = haar_vector(2, rng)
        f0, f1 = haar_vector(2, rng), haar_vector(2, rng)
        mix = (f0 + f1) / np.linalg.norm(f0 + f1)
        p1 = ProductVector(e0, f0)
        p2 = ProductVector(e0, f1)
        p3 = ProductVector(e0, mix)
        rho = (p1.projector() + p2.projector() + p3.projector()) / 3.0
        st = BipartiteState(2, 2, rho)
        es = EligibleSet((p1, p2, p3), exhaustive=True, degree_bound=3)
        verdict = certify_by_subsets(st, es)
        assert verdict.status == "Separable"
        feats = np.column_stack([
            np.concatenate([pv.projector().ravel().real, pv.projector().ravel().imag])
            for _, pv in verdict.certificate.terms
        ])
        assert np.linalg.matrix_rank(feats, tol=1e-8) == len(verdict.certificate.terms)

    def test_empty_exhaustive_set_is_entangled(self):
        st = tiles_upb_state()
        es = EligibleSet((), exhaustive=True, degree_bound=0)
        verdict = certify_by_subsets(st, es)
        assert verdict.status == "Entangled"
        assert verdict.reason == "NoEligibleVectors"

    def test_threaded_subset_solves(self):
        st, dec = random_separable(GeneratorSpec(dims=(3, 3), term_count=5, seed=31))
        es = enumerate_eligible(st, seed=31)
        verdict = certify_by_subsets(st, es, threads=2)
        assert verdict.status == "Separable"


class TestBsa:
    def test_exact_decomposition_reaches_one(self):
        st, dec = random_separable(GeneratorSpec(dims=(3, 3), term_count=4, seed=1))
        res = bsa_decompose(st, [pv for _, pv in dec.terms])
        assert res.converged
        assert abs(res.lam - 1.0) <= 1e-6
        assert np.linalg.norm(res.delta_rho) <= 1e-6

    def test_monotone_lambda_trace(self):
        st, dec = random_separable(GeneratorSpec(dims=(3, 3), term_count=5, seed=2))
        res = bsa_decompose(st, [pv for _, pv in dec.terms])
        trace = res.lam_trace
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_mixture_with_tiles(self):
        tiles = tiles_upb_state()
        st, dec = random_separable(GeneratorSpec(dims=(3, 3), term_count=4, seed=3))
        for mu in (0.2, 0.5, 0.8):
            mixed = BipartiteState(3, 3, mu * st.rho + (1 - mu) * tiles.rho, normalized=True)
            res = bsa_decompose(mixed, [pv for _, pv in dec.terms])
            assert res.lam >= mu - 1e-4
            # the split is exact by construction
            recon = reconstruction(
                [(w, pv) for w, pv in zip(res.weights, [pv for _, pv in dec.terms]) if w > 0],
                3, 3)
            remainder = mixed.rho - recon
            assert np.linalg.eigvalsh(remainder)[0] >= -1e-8
            rem_state = BipartiteState(3, 3, remainder + 1e-13 * np.eye(9))
            assert np.linalg.eigvalsh(partial_transpose(rem_state))[0] >= -1e-8

    def test_empty_projector_list(self):
        st, _ = random_separable(GeneratorSpec(dims=(2, 2), term_count=2, seed=4))
        res = bsa_decompose(st, [])
        assert res.lam == 0.0
        assert np.allclose(res.delta_rho, st.rho)

    def test_tiles_alone_gets_nothing(self):
        # no product vector lies in the range of the tiles state, so no
        # weight can be subtracted against it
        tiles = tiles_upb_state()
        probes = [pv for _, pv in random_separable(
            GeneratorSpec(dims=(3, 3), term_count=3, seed=5))[1].terms]
        res = bsa_decompose(tiles, probes)
        assert res.lam <= 1e-9


class TestKernelWitness:
    def test_product_projector_witness(self, rng):
        # a single product projector inside the kernel bounds the transposed
        # rank by MN - 1
        st, _ = random_separable(GeneratorSpec(dims=(3, 3), term_count=3, seed=6))
        # build sigma as a product projector orthogonal to R(rho): use the
        # orthogonal-mixture helper on the planted terms
        terms = [pv for _, pv in random_separable(
            GeneratorSpec(dims=(3, 3), term_count=2, seed=7))[1].terms]
        rho = orthogonal_product_mixture(terms, (3, 3), seed=8)
        w, pv = 1.0, terms[0]
        sigma = BipartiteState(3, 3, pv.projector(), normalized=True)
        assert kernel_witness_bound(rho, sigma)
        assert numerical_rank(partial_transpose(rho)) <= 9 - 1

    def test_tiles_in_kernel(self):
        # the mixture of the five tiles vectors has the tiles state's range
        # as its kernel, giving the bound r(rho^T_A) <= 9 - 4 = 5
        tiles = tiles_upb_state()
        vecs = tiles_vectors()
        rho = BipartiteState(
            3, 3, sum(pv.projector() for pv in vecs) / 5.0, normalized=True)
        assert kernel_witness_bound(rho, tiles)
        assert numerical_rank(partial_transpose(rho)) <= 9 - 4

    def test_precondition_failure(self):
        st, _ = random_separable(GeneratorSpec(dims=(3, 3), term_count=9, seed=9))
        sigma = tiles_upb_state()
        with pytest.raises(PreconditionFailed):
            kernel_witness_bound(st, sigma)


class TestPipeline:
    def test_bell_state_npt_with_witness(self):
        verdict = separability_check(bell_phi_plus())
        assert verdict.status == "Entangled"
        assert verdict.reason == "NPT"
        w = verdict.diagnostics["npt_witness"]
        vec = np.array([complex(a, b) for a, b in w])
        pt = partial_transpose(bell_phi_plus())
        val = np.real(np.vdot(vec, pt @ vec))
        assert val < -1e-9

    def test_planted_rank_n_separable(self):
        for dims in [(2, 3), (3, 3), (3, 4)]:
            st, _ = random_separable(GeneratorSpec(dims=dims, term_count=dims[1], seed=10))
            verdict = separability_check(st, seed=10)
            assert verdict.status == "Separable"
            assert len(verdict.certificate.terms) == dims[1]
            assert verdict.certificate.residual <= 1e-8

    def test_tiles_pipeline(self):
        verdict = separability_check(tiles_upb_state(), seed=11)
        assert verdict.status == "Entangled"
        assert verdict.reason == "NoEligibleVectors"

    def test_spectral_ball_path(self):
        verdict = separability_check(maximally_mixed(2, 2))
        assert verdict.status == "Separable"
        assert verdict.reason == "SpectralBall"
        assert verdict.certificate is None

    def test_higher_rank_separable_through_subsets(self):
        st, _ = random_separable(GeneratorSpec(dims=(3, 3), term_count=5, seed=12))
        verdict = separability_check(st, seed=12)
        assert verdict.status == "Separable"
        assert verdict.certificate.residual <= 1e-8

    def test_certificate_respects_caratheodory_bound(self):
        for seed in (13, 14):
            st, _ = random_separable(GeneratorSpec(dims=(3, 3), term_count=5, seed=seed))
            verdict = separability_check(st, seed=seed)
            assert verdict.status == "Separable"
            r = verdict.diagnostics["rank"]
            rt = verdict.diagnostics["rank_ta"]
            assert len(verdict.certificate.terms) <= min(r * r, rt * rt)

    def test_rank_n_and_subsets_agree(self):
        # pipeline consistency: the rank-N path and the eligible-vector path
        # must agree on rank-N separable states
        st, _ = random_separable(GeneratorSpec(dims=(3, 3), term_count=3, seed=15))
        via_rank = separability_check(st, seed=15)
        es = enumerate_eligible(st, seed=15)
        via_subsets = certify_by_subsets(st, es)
        assert via_rank.status == via_subsets.status == "Separable"

    def test_rank_below_local_entangled(self):
        # an entangled pure state embedded in 2x2: rank 1 below local rank 2
        verdict = separability_check(bell_phi_plus())
        # NPT dominates for this state; construct a PPT variant is impossible,
        # so check the reason tag ordering instead: NPT is reported first
        assert verdict.reason == "NPT"

    def test_verdict_json_round_trip(self):
        st, _ = random_separable(GeneratorSpec(dims=(2, 3), term_count=3, seed=16))
        verdict = separability_check(st, seed=16)
        doc = verdict_to_json(verdict)
        assert doc["status"] == "Separable"
        assert doc["certificate"] is not None
        import json

        text = json.dumps(doc, sort_keys=True)
        assert json.loads(text)["status"] == "Separable"


class TestPipelineEdges:
    def test_rank_below_local_detected_under_loose_psd(self):
        # a near-product entangled pure state whose partial-transpose
        # negativity hides below a loosened PSD floor: the rank test still
        # convicts it (global rank one below local rank two)
        from sepcheck.numlin import Tolerances

        eps = 4e-5
        v = np.zeros(4, dtype=complex)
        v[0] = np.sqrt(1 - eps)
        v[3] = np.sqrt(eps)
        st = BipartiteState(2, 2, np.outer(v, v.conj()), normalized=True)
        verdict = separability_check(st, Tolerances(psd_abs=1e-2), seed=0)
        assert verdict.status == "Entangled"
        assert verdict.reason == "RankBelowLocal"

    def test_out_of_window_full_rank_is_inconclusive(self):
        e = np.array([1.0, 0.0], dtype=complex)
        v = np.kron(e, e)
        rho = 0.6 * np.outer(v, v.conj()) + 0.4 * np.eye(4) / 4.0
        st = BipartiteState(2, 2, rho, normalized=True)
        verdict = separability_check(st, seed=0)
        assert verdict.status == "Inconclusive"
        assert verdict.reason == "BudgetExhausted"

    def test_bsa_nonconvergence_flag(self):
        st, dec = random_separable(GeneratorSpec(dims=(3, 3), term_count=5, seed=41))
        res = bsa_decompose(st, [pv for _, pv in dec.terms], max_iters=1)
        assert isinstance(res, BsaResult)
        assert not res.converged
        assert res.iterations == 1
