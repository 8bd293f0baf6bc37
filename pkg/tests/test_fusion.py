import numpy as np
import pytest

from trajrefine.fusion import (
    Estimate,
    SingularInnovationError,
    fuse,
    info_fuse,
    rls_gain,
    rls_update,
)
from trajrefine.gaussian import Cov2, cov_from_params

I2 = np.eye(2)


def random_estimate(rng):
    cov = cov_from_params(
        rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(-0.95, 0.95)
    )
    return Estimate(rng.uniform(-10.0, 10.0, size=2), cov)


class TestGain:
    def test_equal_covariances(self):
        k = rls_gain(Cov2.isotropic(1.0), Cov2.isotropic(1.0), I2)
        np.testing.assert_allclose(k, 0.5 * I2, atol=1e-14)

    def test_confident_prior_ignores_measurement(self):
        k = rls_gain(Cov2(0.0, 0.0, 0.0), Cov2.isotropic(1.0), I2)
        np.testing.assert_allclose(k, np.zeros((2, 2)), atol=1e-14)

    def test_componentwise_scalar_formula(self):
        k = rls_gain(Cov2(4.0, 0.0, 1.0), Cov2.isotropic(1.0), I2)
        np.testing.assert_allclose(k, np.diag([0.8, 0.5]), atol=1e-14)

    def test_singular_innovation_raises(self):
        with pytest.raises(SingularInnovationError):
            rls_gain(Cov2(0.0, 0.0, 0.0), Cov2(0.0, 0.0, 0.0), I2)

    def test_non_identity_h_matches_direct_formula(self):
        rng = np.random.default_rng(5)
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        for h in (swap, np.array([[1.0, 0.5], [0.0, 2.0]])):
            p = random_estimate(rng).cov
            r = random_estimate(rng).cov
            k = rls_gain(p, r, h)
            pm, rm = p.as_matrix(), r.as_matrix()
            expected = pm @ h.T @ np.linalg.inv(h @ pm @ h.T + rm)
            np.testing.assert_allclose(k, expected, atol=1e-12)

    def test_gain_eigenvalues_in_unit_interval(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            k = rls_gain(random_estimate(rng).cov, random_estimate(rng).cov, I2)
            eigs = np.linalg.eigvals(k)
            assert np.all(np.abs(eigs.imag) < 1e-9)
            assert np.all(eigs.real >= -1e-12)
            assert np.all(eigs.real <= 1.0 + 1e-12)


class TestUpdate:
    def test_symmetric_fusion_halves(self):
        prior = Estimate([0.0, 0.0], Cov2.isotropic(1.0))
        meas = Estimate([2.0, 0.0], Cov2.isotropic(1.0))
        post = rls_update(prior, meas, I2)
        np.testing.assert_allclose(post.mean, [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(post.cov.as_matrix(), 0.5 * I2, atol=1e-14)

    def test_zero_innovation_keeps_prior_mean(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            prior = random_estimate(rng)
            meas = Estimate(prior.mean, random_estimate(rng).cov)
            post = rls_update(prior, meas, I2)
            np.testing.assert_allclose(post.mean, prior.mean, atol=1e-12)

    def test_componentwise_kalman(self):
        prior = Estimate([1.0, 1.0], Cov2(4.0, 0.0, 1.0))
        meas = Estimate([5.0, 1.0], Cov2.isotropic(1.0))
        post = rls_update(prior, meas, I2)
        np.testing.assert_allclose(post.mean, [4.2, 1.0], atol=1e-14)
        np.testing.assert_allclose(post.cov.as_matrix(), np.diag([0.8, 0.5]), atol=1e-14)

    def test_non_identity_h_update(self):
        # axis-swap observation: the y measurement corrects the x state
        prior = Estimate([0.0, 0.0], Cov2.isotropic(1.0))
        meas = Estimate([3.0, -1.0], Cov2.isotropic(1.0))
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        post = rls_update(prior, meas, swap)
        np.testing.assert_allclose(post.mean, [-0.5, 1.5], atol=1e-14)


class TestFuse:
    def test_commutative(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            a, b = random_estimate(rng), random_estimate(rng)
            ab, ba = fuse(a, b), fuse(b, a)
            np.testing.assert_allclose(ab.mean, ba.mean, atol=1e-12)
            np.testing.assert_allclose(
                ab.cov.as_matrix(), ba.cov.as_matrix(), atol=1e-12
            )

    def test_huge_measurement_cov_returns_prior(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            prior, meas = random_estimate(rng), random_estimate(rng)
            inflated = Estimate(meas.mean, meas.cov.scaled(1e12))
            post = fuse(prior, inflated)
            np.testing.assert_allclose(post.mean, prior.mean, rtol=1e-6, atol=1e-6)
            np.testing.assert_allclose(
                post.cov.as_matrix(), prior.cov.as_matrix(), rtol=1e-6
            )

    def test_tiny_prior_cov_returns_prior(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            prior, meas = random_estimate(rng), random_estimate(rng)
            shrunk = Estimate(prior.mean, prior.cov.scaled(1e-12))
            post = fuse(shrunk, meas)
            np.testing.assert_allclose(post.mean, prior.mean, rtol=1e-6, atol=1e-6)

    def test_tiny_measurement_cov_returns_measurement_mean(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            prior, meas = random_estimate(rng), random_estimate(rng)
            sharp = Estimate(meas.mean, meas.cov.scaled(1e-12))
            post = fuse(prior, sharp)
            np.testing.assert_allclose(post.mean, meas.mean, rtol=1e-6, atol=1e-6)

    def test_covariance_dominance(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            prior, meas = random_estimate(rng), random_estimate(rng)
            post = fuse(prior, meas).cov.as_matrix()
            for other in (prior.cov.as_matrix(), meas.cov.as_matrix()):
                eigs = np.linalg.eigvalsh(other - post)
                assert eigs.min() >= -1e-12

    def test_isotropic_fusion_is_convex_combination(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            p, r = rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)
            prior = Estimate(rng.uniform(-5, 5, 2), Cov2.isotropic(p))
            meas = Estimate(rng.uniform(-5, 5, 2), Cov2.isotropic(r))
            post = fuse(prior, meas)
            w = p / (p + r)
            expected = (1.0 - w) * prior.mean + w * meas.mean
            np.testing.assert_allclose(post.mean, expected, atol=1e-12)


class TestInfoFuse:
    def test_equal_covariances(self):
        a = Estimate([0.0, 0.0], Cov2.isotropic(1.0))
        b = Estimate([2.0, 0.0], Cov2.isotropic(1.0))
        post = info_fuse(a, b)
        np.testing.assert_allclose(post.mean, [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(post.cov.as_matrix(), 0.5 * I2, atol=1e-14)

    def test_diagonal_case(self):
        a = Estimate([0.0, 0.0], Cov2(4.0, 0.0, 1.0))
        b = Estimate([0.0, 0.0], Cov2.isotropic(1.0))
        post = info_fuse(a, b)
        np.testing.assert_allclose(post.cov.as_matrix(), np.diag([0.8, 0.5]), atol=1e-14)

    def test_singular_input_rejected(self):
        a = Estimate([0.0, 0.0], Cov2(0.0, 0.0, 0.0))
        b = Estimate([0.0, 0.0], Cov2.isotropic(1.0))
        with pytest.raises(ValueError):
            info_fuse(a, b)

    def test_matches_gain_form(self):
        rng = np.random.default_rng(14)
        for _ in range(1000):
            a, b = random_estimate(rng), random_estimate(rng)
            gain_form = fuse(a, b)
            info_form = info_fuse(a, b)
            scale = max(1.0, np.abs(gain_form.mean).max())
            assert np.abs(gain_form.mean - info_form.mean).max() <= 1e-9 * scale
            gm, im = gain_form.cov.as_matrix(), info_form.cov.as_matrix()
            assert np.abs(gm - im).max() <= 1e-9 * max(1.0, np.abs(gm).max())


class TestEstimate:
    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError):
            Estimate([0.0, 0.0], Cov2(1.0, 2.0, 1.0))

    def test_rejects_nonfinite_mean(self):
        with pytest.raises(ValueError):
            Estimate([np.nan, 0.0], Cov2.isotropic(1.0))
