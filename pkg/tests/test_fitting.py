import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falcontk.errors import DivergenceError, RankError, ShapeError
from falcontk.fitting import (
    FitConfig, channel_residuals, fit_dpconv, fit_iterative, fit_svd, normalize_factors,
    objective_gradient, reconstruct, residual,
)
from falcontk.gep import DpconvFactors, FalconFactors, gep_dpconv, gep_falcon, gep_rank_k
from falcontk.tensor import frobenius_norm, transpose_3_4, unfold_output_slice
from oracles import central_difference, norm_loop, singular_values_power


def rand_falcon(rng, D, M, N, k=1):
    return FalconFactors(
        tuple(rng.standard_normal((N, M)) for _ in range(k)),
        tuple(rng.standard_normal((D, D, N)) for _ in range(k)),
    )


def he_kernel(seed, D, M, N):
    return np.random.default_rng(seed).standard_normal((D, D, M, N)) * np.sqrt(2.0 / (D * D * M))


class TestSvdRoute:
    def test_exact_rank1(self, rng):
        K = gep_falcon(rand_falcon(rng, 3, 4, 5))
        assert residual(K, fit_svd(K, 1)) <= 1e-10 * frobenius_norm(K)

    def test_tail_energy_matches_power_iteration(self, rng):
        K = gep_rank_k(rand_falcon(rng, 3, 4, 5, k=2))
        expected = sum(singular_values_power(unfold_output_slice(K, n))[1] ** 2 for n in range(5))
        assert residual(K, fit_svd(K, 1)) ** 2 == pytest.approx(expected, rel=1e-8)

    def test_full_rank_recovery(self, rng):
        K = rng.standard_normal((3, 3, 4, 5))
        assert residual(K, fit_svd(K, 4)) <= 1e-8 * frobenius_norm(K)

    def test_rank_too_large(self, rng):
        with pytest.raises(RankError):
            fit_svd(rng.standard_normal((3, 3, 4, 5)), 5)
        with pytest.raises(RankError):
            fit_svd(rng.standard_normal((3, 3, 4, 5)), 0)

    def test_singular_values_against_oracle(self, rng):
        # the per-slice SVD the closed form relies on
        for _ in range(5):
            A = rng.standard_normal((9, 6))
            np.testing.assert_allclose(np.linalg.svd(A, compute_uv=False),
                                       singular_values_power(A), rtol=1e-9)

    @pytest.mark.parametrize("k0", [1, 2, 3])
    def test_exact_recovery(self, rng, k0):
        K = gep_rank_k(rand_falcon(rng, 3, 5, 4, k=k0))
        assert residual(K, fit_svd(K, k0)) <= 1e-8 * frobenius_norm(K)

    def test_monotone_in_rank(self, rng):
        for _ in range(5):
            K = rng.standard_normal((3, 3, 6, 4))
            res = [residual(K, fit_svd(K, k)) for k in range(1, 7)]
            assert all(b <= a for a, b in zip(res, res[1:]))

    def test_optimal_against_random_candidates(self, rng):
        K = rng.standard_normal((3, 3, 4, 3))
        for k in (1, 2):
            best = residual(K, fit_svd(K, k))
            for _ in range(100):
                assert best <= residual(K, rand_falcon(rng, 3, 4, 3, k))

    def test_output_is_canonical(self, rng):
        f = fit_svd(rng.standard_normal((3, 3, 4, 5)), 2)
        g = normalize_factors(f)
        for a, b in zip(f.pointwise + f.depthwise, g.pointwise + g.depthwise):
            assert np.array_equal(a, b)


class TestDpconvFit:
    def test_exact(self, rng):
        K = gep_dpconv(DpconvFactors(rng.standard_normal((3, 3, 4)), rng.standard_normal((4, 5))))
        assert residual(K, fit_dpconv(K)) <= 1e-10 * frobenius_norm(K)

    def test_all_ones(self):
        K = np.ones((3, 3, 2, 2))
        f = fit_dpconv(K)
        assert residual(K, f) <= 1e-14
        # balanced: ||D[:,:,m]|| = ||P[m]|| = sqrt(3 * sqrt(2)) with every entry equal
        np.testing.assert_allclose(f.depthwise, np.full((3, 3, 2), np.sqrt(np.sqrt(2) / 3)), rtol=1e-12)
        np.testing.assert_allclose(f.pointwise, np.full((2, 2), np.sqrt(3 / np.sqrt(2))), rtol=1e-12)

    def test_tail_energy(self, rng):
        K = rng.standard_normal((3, 3, 4, 5))
        tail = 0.0
        for m in range(4):
            sv = singular_values_power(K[:, :, m, :].reshape(9, 5))
            tail += sum(x * x for x in sv[1:])
        assert residual(K, fit_dpconv(K)) ** 2 == pytest.approx(tail, rel=1e-8)

    def test_orientation_duality(self, rng):
        for _ in range(5):
            K = rng.standard_normal((3, 3, 4, 6))
            d = fit_dpconv(K)
            f = fit_svd(transpose_3_4(K), 1)
            np.testing.assert_allclose(d.depthwise, f.depthwise[0], rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(d.pointwise, f.pointwise[0], rtol=1e-10, atol=1e-12)
            assert residual(K, d) == pytest.approx(residual(transpose_3_4(K), f), rel=1e-10)

    def test_rank_must_be_one(self, rng):
        with pytest.raises(RankError):
            fit_dpconv(rng.standard_normal((3, 3, 2, 2)), k=2)


class TestResidual:
    def test_exact(self, rng):
        f = rand_falcon(rng, 3, 4, 5, k=2)
        K = gep_rank_k(f)
        assert residual(K, f) <= 1e-12 * frobenius_norm(K)

    def test_zero_factors(self, rng):
        K = rng.standard_normal((3, 3, 2, 4))
        zero = FalconFactors.single(np.zeros((4, 2)), np.zeros((3, 3, 4)))
        assert residual(K, zero) == frobenius_norm(K)

    def test_materialized(self, rng):
        K = rng.standard_normal((3, 3, 4, 5))
        f = rand_falcon(rng, 3, 4, 5, k=2)
        diff = K - gep_rank_k(f)
        assert residual(K, f) == pytest.approx(norm_loop(diff), rel=1e-12)
        assert np.sqrt(np.sum(channel_residuals(K, f) ** 2)) == pytest.approx(residual(K, f), rel=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            residual(np.zeros((3, 3, 4, 5)), rand_falcon(rng, 3, 5, 4))


def _flat_objective(K, f):
    """Objective as a function of each factor array, for finite differences."""
    def make(kind, r):
        def fun(x):
            pw = list(f.pointwise)
            dw = list(f.depthwise)
            (pw if kind == "P" else dw)[r] = x
            return float(np.sum((gep_rank_k(FalconFactors(tuple(pw), tuple(dw))) - K) ** 2))
        return fun
    return make


class TestGradient:
    def test_zero_at_exact_fit(self, rng):
        f = rand_falcon(rng, 3, 3, 4, k=2)
        g = objective_gradient(gep_rank_k(f), f)
        assert all(np.all(x == 0.0) for x in g.pointwise + g.depthwise)

    def test_scalar_case(self):
        K = np.full((1, 1, 1, 1), 4.0)
        f = FalconFactors.single(np.ones((1, 1)), np.ones((1, 1, 1)))
        g = objective_gradient(K, f)
        assert g.depthwise[0][0, 0, 0] == -6.0 and g.pointwise[0][0, 0] == -6.0

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        K = rng.standard_normal((3, 3, 3, 4))
        f = rand_falcon(rng, 3, 3, 4, k=2)
        g = objective_gradient(K, f)
        make = _flat_objective(K, f)
        for r in range(2):
            np.testing.assert_allclose(g.pointwise[r], central_difference(make("P", r), f.pointwise[r]),
                                       rtol=1e-4, atol=1e-8)
            np.testing.assert_allclose(g.depthwise[r], central_difference(make("D", r), f.depthwise[r]),
                                       rtol=1e-4, atol=1e-8)

    def test_dpconv_finite_differences(self, rng):
        K = rng.standard_normal((3, 3, 3, 2))
        f = DpconvFactors(rng.standard_normal((3, 3, 3)), rng.standard_normal((3, 2)))
        g = objective_gradient(K, f)
        fd_D = central_difference(lambda x: float(np.sum((gep_dpconv(DpconvFactors(x, f.pointwise)) - K) ** 2)), f.depthwise)
        fd_P = central_difference(lambda x: float(np.sum((gep_dpconv(DpconvFactors(f.depthwise, x)) - K) ** 2)), f.pointwise)
        np.testing.assert_allclose(g.depthwise, fd_D, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(g.pointwise, fd_P, rtol=1e-4, atol=1e-8)


class TestNormalize:
    def test_idempotent(self, rng):
        f = normalize_factors(rand_falcon(rng, 3, 4, 5, k=2))
        g = normalize_factors(f)
        for a, b in zip(f.pointwise + f.depthwise, g.pointwise + g.depthwise):
            assert np.array_equal(a, b)

    def test_gauge(self, rng):
        f = rand_falcon(rng, 3, 4, 5)
        g = FalconFactors.single(f.pointwise[0] / 2, 2 * f.depthwise[0])
        a, b = normalize_factors(f), normalize_factors(g)
        np.testing.assert_allclose(a.pointwise[0], b.pointwise[0], rtol=1e-12)
        np.testing.assert_allclose(a.depthwise[0], b.depthwise[0], rtol=1e-12)

    def test_reconstruction_preserved_and_balanced(self, rng):
        f = rand_falcon(rng, 3, 4, 5, k=3)
        g = normalize_factors(f)
        K = gep_rank_k(f)
        assert frobenius_norm(gep_rank_k(g) - K) <= 1e-12 * frobenius_norm(K)
        for P, Dk in g.pairs():
            np.testing.assert_allclose(np.linalg.norm(Dk, axis=(0, 1)), np.linalg.norm(P, axis=1), rtol=1e-12)
            flat = Dk.reshape(9, 5)
            assert np.all(flat[np.argmax(np.abs(flat), axis=0), np.arange(5)] > 0)

    def test_zero_slice_untouched(self):
        P = np.array([[0.0, 0.0], [1.0, 2.0]])
        Dk = np.zeros((1, 1, 2))
        Dk[0, 0, 1] = -4.0
        g = normalize_factors(FalconFactors.single(P, Dk))
        assert np.all(g.pointwise[0][0] == 0) and g.depthwise[0][0, 0, 0] == 0
        assert g.depthwise[0][0, 0, 1] > 0

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_gauge_property(self, seed, c):
        rng = np.random.default_rng(seed)
        f = rand_falcon(rng, 3, 3, 4)
        g = FalconFactors.single(f.pointwise[0] / c, c * f.depthwise[0])
        a, b = normalize_factors(f), normalize_factors(g)
        np.testing.assert_allclose(a.depthwise[0], b.depthwise[0], rtol=1e-10, atol=1e-12)


class TestIterative:
    def test_warm_start_exact_kernel(self, rng):
        K = gep_falcon(rand_falcon(rng, 3, 4, 5))
        cfg = FitConfig(method="iterative", max_iters=200)
        assert residual(K, fit_iterative(K, cfg)) <= 1e-6 * frobenius_norm(K)

    @pytest.mark.parametrize("seed", range(4))
    def test_never_beats_closed_form(self, seed):
        K = he_kernel(seed, 3, 8, 8)
        for init in ("warm_svd", "random"):
            cfg = FitConfig(method="iterative", init=init, seed=seed, max_iters=300)
            it = residual(K, fit_iterative(K, cfg))
            assert it >= residual(K, fit_svd(K, 1)) - 1e-9 * frobenius_norm(K)

    def test_random_init_close_to_oracle(self):
        K = he_kernel(7, 3, 16, 16)
        cfg = FitConfig(method="iterative", init="random", seed=7, learning_rate=1e-3, max_iters=1000)
        oracle = residual(K, fit_svd(K, 1))
        assert residual(K, fit_iterative(K, cfg)) <= 1.05 * oracle

    def test_history_and_tolerance_stop(self, rng):
        K = gep_falcon(rand_falcon(rng, 3, 4, 5))
        hist = []
        fit_iterative(K, FitConfig(method="iterative", tolerance=1e-3, max_iters=1000), history=hist)
        assert 2 <= len(hist) < 1001

    def test_dpconv_orientation(self, rng):
        K = gep_dpconv(DpconvFactors(rng.standard_normal((3, 3, 4)), rng.standard_normal((4, 5))))
        f = fit_dpconv(K, method="iterative", cfg=FitConfig(max_iters=100))
        assert isinstance(f, DpconvFactors)
        assert residual(K, f) <= 1e-6 * frobenius_norm(K)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self, rng):
        K = rng.standard_normal((3, 3, 2, 2))
        K[0, 0, 0, 0] = np.inf
        with pytest.raises(DivergenceError) as info:
            fit_iterative(K, FitConfig(method="iterative", init="random"))
        assert info.value.iteration >= 0

    def test_deterministic(self):
        K = he_kernel(3, 3, 4, 4)
        cfg = FitConfig(method="iterative", init="random", seed=11, max_iters=50)
        a, b = fit_iterative(K, cfg), fit_iterative(K, cfg)
        assert np.array_equal(reconstruct(a), reconstruct(b))

    def test_config_validation(self):
        with pytest.raises(RankError):
            FitConfig(orientation="dpconv", rank=2)
        with pytest.raises(ValueError):
            FitConfig(method="newton")
        with pytest.raises(RankError):
            fit_iterative(np.ones((1, 1, 2, 2)), FitConfig(method="iterative", rank=2))
