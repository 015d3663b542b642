import numpy as np
import pytest

from mmvrec.complexmat import ComplexMatrix
from mmvrec.errors import ContractViolation
from mmvrec.metrics import (
    calibrate_threshold,
    coherence_metrics,
    error_rate,
    hard_threshold,
    mse,
)
from mmvrec.sampling import gaussian_pilots


class TestMse:
    def test_identical_batches(self):
        rng = np.random.default_rng(0)
        X = [rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))]
        assert mse(X, X) == 0.0

    def test_known_single_entry(self):
        Xt = [np.zeros((2, 2), dtype=complex)]
        Xh = [np.zeros((2, 2), dtype=complex)]
        Xh[0][0, 0] = 3.0 + 4.0j
        # |3+4i|^2 = 25; per-eval divides by N*T = 2, per-train by M*N*T = 4
        assert mse(Xt, Xh, "per-eval") == pytest.approx(12.5)
        assert mse(Xt, Xh, "per-train") == pytest.approx(6.25)

    def test_zero_estimator_matches_activity_level(self):
        # X rows are unit-variance CN on a fraction-p support, so the per-eval
        # MSE of the zero estimator concentrates near p*M
        rng = np.random.default_rng(1)
        N, M, T, p = 200, 8, 50, 0.1
        Xt = []
        for _ in range(T):
            alpha = (rng.random(N) < p).astype(float)
            X = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M)))
            Xt.append(X * alpha[:, None] / np.sqrt(2))
        Xh = [np.zeros((N, M), dtype=complex)] * T
        assert mse(Xt, Xh) == pytest.approx(p * M, rel=0.1)

    def test_accepts_complexmatrix_inputs(self):
        rng = np.random.default_rng(2)
        Xc = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        a = [ComplexMatrix.from_complex(Xc)]
        b = [Xc]
        assert mse(a, b) == 0.0

    def test_validation(self):
        X = [np.zeros((2, 2))]
        with pytest.raises(ContractViolation):
            mse(X, [])
        with pytest.raises(ContractViolation):
            mse(X, [np.zeros((3, 2))])
        with pytest.raises(ContractViolation):
            mse(X, X, "per-row")


class TestThresholdAndErrorRate:
    def test_tie_maps_to_active(self):
        assert hard_threshold(np.array([0.5, 0.49]), 0.5).tolist() == [1, 0]

    def test_nonfinite_gamma_rejected(self):
        with pytest.raises(ContractViolation):
            hard_threshold(np.array([1.0]), np.nan)

    def test_error_rate_trivials(self):
        a = np.array([1, 0, 1, 0])
        assert error_rate([a], [a]) == 0.0
        assert error_rate([a], [1 - a]) == 1.0
        assert error_rate([a, a], [a, 1 - a]) == 0.5

    def test_error_rate_rejects_soft_scores(self):
        with pytest.raises(ContractViolation):
            error_rate([np.array([1, 0])], [np.array([0.7, 0.0])])


class TestCalibration:
    def test_perfectly_separated_scores(self):
        alpha = np.array([1, 1, 0, 0])
        scores = np.array([0.9, 0.8, 0.1, 0.2])
        cal = calibrate_threshold([scores], [alpha])
        preds = hard_threshold(scores, cal.gamma_star)
        assert error_rate([alpha], [preds]) == 0.0

    def test_all_identical_scores(self):
        # the calibrator must still pick the better of all-on / all-off
        alpha = np.array([1, 1, 1, 0])
        scores = np.full(4, 0.5)
        cal = calibrate_threshold([scores], [alpha])
        pe = error_rate([alpha], [hard_threshold(scores, cal.gamma_star)])
        assert pe == 0.25  # all-active is the best achievable

    def test_beats_dense_grid(self):
        rng = np.random.default_rng(3)
        N, T = 10, 5
        alphas = [(rng.random(N) < 0.3).astype(int) for _ in range(T)]
        scores = [a + 0.6 * rng.standard_normal(N) for a in alphas]
        cal = calibrate_threshold(scores, alphas)
        pe_star = error_rate(alphas, [hard_threshold(s, cal.gamma_star) for s in scores])
        lo = min(s.min() for s in scores) - 0.5
        hi = max(s.max() for s in scores) + 0.5
        for gamma in np.linspace(lo, hi, 10**4):
            pe = error_rate(alphas, [hard_threshold(s, gamma) for s in scores])
            assert pe_star <= pe + 1e-15

    def test_empty_input_rejected(self):
        with pytest.raises(ContractViolation):
            calibrate_threshold([np.array([])], [np.array([])])


class TestCoherence:
    def test_orthonormal_columns(self):
        mu, mu_b, nu = coherence_metrics(
            ComplexMatrix(np.eye(4), np.zeros((4, 4))), group_size=2
        )
        assert mu == 0.0 and mu_b == 0.0 and nu == 0.0

    def test_duplicate_column_saturates(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        A = ComplexMatrix.from_complex(np.stack([a, a, a - a + 1], axis=1))
        mu, _, _ = coherence_metrics(A)
        assert mu == pytest.approx(1.0)

    def test_group_size_one_reduction(self):
        rng = np.random.default_rng(5)
        A = gaussian_pilots(8, 12, True, rng)
        mu, mu_b, nu = coherence_metrics(A, group_size=1)
        assert mu_b == mu and nu == 0.0

    def test_gaussian_matrix_plausible_range(self):
        rng = np.random.default_rng(6)
        A = gaussian_pilots(64, 128, True, rng)
        mu, _, _ = coherence_metrics(A)
        assert 0.2 < mu < 0.7

    def test_mean_reduce_below_max(self):
        rng = np.random.default_rng(7)
        A = gaussian_pilots(16, 32, True, rng)
        mu_max, mb_max, nu_max = coherence_metrics(A, group_size=4)
        mu_mean, mb_mean, nu_mean = coherence_metrics(A, group_size=4, reduce="mean")
        assert mu_mean <= mu_max and mb_mean <= mb_max and nu_mean <= nu_max

    def test_column_scaling_invariance(self):
        rng = np.random.default_rng(8)
        Ac = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
        scaled = Ac * rng.uniform(0.1, 10.0, 9)
        m1 = coherence_metrics(ComplexMatrix.from_complex(Ac), group_size=3)
        m2 = coherence_metrics(ComplexMatrix.from_complex(scaled), group_size=3)
        assert np.allclose(m1, m2, atol=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ContractViolation):
            coherence_metrics(ComplexMatrix(np.zeros((3, 2)), np.zeros((3, 2))))
        rng = np.random.default_rng(9)
        A = gaussian_pilots(4, 9, True, rng)
        with pytest.raises(ContractViolation):
            coherence_metrics(A, group_size=2)
