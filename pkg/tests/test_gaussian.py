"""Gaussian types, densities, sampling, and geometric intermediates."""

import json

import numpy as np
import pytest
from scipy.integrate import simpson

from conftest import random_diag_gaussian, random_full_gaussian, random_spd
from gjsd import (
    DiagonalGaussian,
    FullGaussian,
    SkewConvention,
    intermediate_diag,
    intermediate_full,
    log_pdf,
    sample,
)
from gjsd.errors import InputError, NumericalError
from gjsd.gaussian import (
    effective_skew,
    from_json_dict,
    load_json,
    save_json,
    to_json_dict,
)


def test_log_pdf_standard_normal_at_mode():
    g = DiagonalGaussian(mu=[0.0], log_var=[0.0])
    assert log_pdf(g, np.array([0.0])) == pytest.approx(-0.5 * np.log(2 * np.pi))


def test_log_pdf_isotropic_2d():
    g = FullGaussian(mu=[0.0, 0.0], sigma=np.eye(2))
    # quadratic form = 2 at (1, 1)
    assert log_pdf(g, np.array([1.0, 1.0])) == pytest.approx(-np.log(2 * np.pi) - 1.0)


def test_log_pdf_density_normalizes():
    g = DiagonalGaussian(mu=[-2.0], log_var=[0.0])
    xs = np.linspace(-10.0, 10.0, 4001)
    dens = np.exp(log_pdf(g, xs[:, None]))
    assert simpson(dens, x=xs) == pytest.approx(1.0, abs=1e-8)
    # the requested point evaluates through the same normalized density
    assert log_pdf(g, np.array([2.0])) == pytest.approx(
        -0.5 * np.log(2 * np.pi) - 8.0
    )


def test_log_pdf_batch_matches_single(rng):
    g = random_full_gaussian(rng, 3)
    xs = rng.standard_normal((5, 3))
    batch = log_pdf(g, xs)
    for i in range(5):
        assert batch[i] == pytest.approx(log_pdf(g, xs[i]), rel=1e-14)


def test_log_pdf_dimension_mismatch():
    g = DiagonalGaussian(mu=[0.0, 0.0], log_var=[0.0, 0.0])
    with pytest.raises(InputError):
        log_pdf(g, np.zeros(3))


def test_sample_mean_close():
    g = FullGaussian(mu=[0.0, 0.0], sigma=np.eye(2))
    xs = sample(g, 100_000, seed=7)
    assert np.all(np.abs(xs.mean(axis=0)) < 0.02)


def test_sample_variance_close():
    g = FullGaussian(mu=[1.0, -1.0], sigma=np.diag([4.0, 1.0]))
    xs = sample(g, 100_000, seed=11)
    v = xs.var(axis=0)
    assert abs(v[0] - 4.0) / 4.0 < 0.05
    assert abs(v[1] - 1.0) < 0.05


def test_sample_deterministic():
    g = DiagonalGaussian(mu=[0.5, -0.5], log_var=[0.1, -0.3])
    a = sample(g, 64, seed=3)
    b = sample(g, 64, seed=3)
    assert np.array_equal(a, b)


def test_sample_covariance_full(rng):
    g = random_full_gaussian(rng, 3)
    xs = sample(g, 200_000, seed=5)
    emp = np.cov(xs.T)
    assert np.max(np.abs(emp - g.sigma)) < 0.05


def test_full_gaussian_rejects_asymmetric():
    bad = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(InputError):
        FullGaussian(mu=[0.0, 0.0], sigma=bad)


def test_full_gaussian_rejects_non_pd():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NumericalError):
        FullGaussian(mu=[0.0, 0.0], sigma=bad)


def test_diagonal_gaussian_shape_checks():
    with pytest.raises(InputError):
        DiagonalGaussian(mu=[0.0, 1.0], log_var=[0.0])
    with pytest.raises(InputError):
        DiagonalGaussian(mu=[np.inf], log_var=[0.0])


def test_gaussians_immutable():
    g = DiagonalGaussian(mu=[0.0], log_var=[0.0])
    with pytest.raises(AttributeError):
        g.mu = np.array([1.0])
    with pytest.raises(ValueError):
        g.mu[0] = 1.0


def test_intermediate_full_identical_inputs(rng):
    g = random_full_gaussian(rng, 3)
    for alpha in (0.0, 0.25, 0.5, 1.0):
        mid = intermediate_full(g, g, alpha, SkewConvention.ORIGINAL)
        np.testing.assert_allclose(mid.mu, g.mu, atol=1e-12)
        np.testing.assert_allclose(mid.sigma, g.sigma, atol=1e-12)


def test_intermediate_full_endpoints_exact(rng):
    g1 = random_full_gaussian(rng, 2)
    g2 = random_full_gaussian(rng, 2)
    assert intermediate_full(g1, g2, 0.0, "original") is g1
    assert intermediate_full(g1, g2, 1.0, "original") is g2
    assert intermediate_full(g1, g2, 0.0, "primed") is g2
    assert intermediate_full(g1, g2, 1.0, "primed") is g1


def test_intermediate_full_hand_value():
    g1 = FullGaussian(mu=[0.0], sigma=[[2.0]])
    g2 = FullGaussian(mu=[0.0], sigma=[[1.0]])
    mid = intermediate_full(g1, g2, 0.5, "original")
    # 1 / (0.5/2 + 0.5/1) = 4/3
    assert mid.sigma[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-14)
    d = intermediate_diag(DiagonalGaussian([0.0], [np.log(2.0)]), 0.5, "original")
    assert np.exp(d.log_var[0]) == pytest.approx(mid.sigma[0, 0], rel=1e-12)


def test_intermediate_diag_standard_normal_fixed_point():
    g = DiagonalGaussian(mu=[0.0, 0.0], log_var=[0.0, 0.0])
    for alpha in (0.0, 0.3, 1.0):
        mid = intermediate_diag(g, alpha, "original")
        assert np.all(mid.mu == 0.0)
        assert np.all(mid.log_var == 0.0)


def test_intermediate_diag_hand_value():
    g = DiagonalGaussian(mu=[2.0], log_var=[np.log(4.0)])
    mid = intermediate_diag(g, 0.5, "original")
    assert np.exp(mid.log_var[0]) == pytest.approx(1.6, rel=1e-14)
    assert mid.mu[0] == pytest.approx(0.4, rel=1e-14)


def test_intermediate_diag_alpha_zero_bitwise():
    g = DiagonalGaussian(mu=[0.7, -1.2], log_var=[0.3, -0.9])
    mid = intermediate_diag(g, 0.0, "original")
    assert np.array_equal(mid.mu, g.mu)
    assert np.array_equal(mid.log_var, g.log_var)


def test_intermediate_diag_matches_full_embedding(rng):
    for _ in range(50):
        dim = int(rng.integers(1, 5))
        g = random_diag_gaussian(rng, dim)
        alpha = float(rng.uniform(0.0, 1.0))
        for conv in ("original", "primed"):
            d = intermediate_diag(g, alpha, conv)
            f = intermediate_full(
                g.to_full(),
                FullGaussian(np.zeros(dim), np.eye(dim)),
                alpha,
                conv,
            )
            assert np.max(np.abs(d.mu - f.mu)) < 1e-10
            assert np.max(np.abs(np.diag(d.var) - f.sigma)) < 1e-10


def test_convention_swap_identity(rng):
    g1 = random_full_gaussian(rng, 3)
    g2 = random_full_gaussian(rng, 3)
    # Definitional identity: both conventions run one formula at swapped skew.
    # Bitwise equality needs 1 - (1 - alpha) == alpha, true for dyadic alpha;
    # elsewhere the skews differ by one ulp and the outputs by ~1e-15.
    for alpha in (0.25, 0.5, 0.75, 0.125):
        a = intermediate_full(g1, g2, alpha, "original")
        b = intermediate_full(g1, g2, 1.0 - alpha, "primed")
        assert np.array_equal(a.mu, b.mu)
        assert np.array_equal(a.sigma, b.sigma)
    for alpha in (0.1, 0.4, 0.9):
        a = intermediate_full(g1, g2, alpha, "original")
        b = intermediate_full(g1, g2, 1.0 - alpha, "primed")
        np.testing.assert_allclose(a.mu, b.mu, rtol=1e-13, atol=1e-14)
        np.testing.assert_allclose(a.sigma, b.sigma, rtol=1e-13, atol=1e-14)


def test_intermediate_log_density_is_geometric_mean(rng):
    # log p_t(x) - [(1-t) log p(x) + t log q(x)] constant over points
    g1 = FullGaussian(mu=[0.4], sigma=[[1.3]])
    g2 = FullGaussian(mu=[-1.0], sigma=[[0.6]])
    for conv in ("original", "primed"):
        mid = intermediate_full(g1, g2, 0.3, conv)
        t = effective_skew(0.3, conv)
        xs = rng.uniform(-4.0, 4.0, size=(20, 1))
        gap = log_pdf(mid, xs) - ((1.0 - t) * log_pdf(g1, xs) + t * log_pdf(g2, xs))
        assert np.max(gap) - np.min(gap) < 1e-8


def test_effective_skew_validation():
    assert effective_skew(0.3, "original") == 0.3
    assert effective_skew(0.3, "primed") == pytest.approx(0.7)
    with pytest.raises(InputError):
        effective_skew(1.5, "original")
    with pytest.raises(InputError):
        effective_skew(0.5, "diagonal")


def test_json_roundtrip_diagonal(tmp_path):
    g = DiagonalGaussian(mu=[0.25, -1.5], log_var=[0.0, 0.7])
    path = tmp_path / "g.json"
    save_json(g, path)
    back = load_json(path)
    assert isinstance(back, DiagonalGaussian)
    assert np.array_equal(back.mu, g.mu)
    assert np.array_equal(back.log_var, g.log_var)


def test_json_roundtrip_full(tmp_path, rng):
    g = random_full_gaussian(rng, 3)
    path = tmp_path / "g.json"
    save_json(g, path)
    back = load_json(path)
    assert isinstance(back, FullGaussian)
    assert np.array_equal(back.mu, g.mu)
    assert np.array_equal(back.sigma, g.sigma)


def test_json_dict_requires_known_keys():
    with pytest.raises(InputError):
        from_json_dict({"mu": [0.0]})
    with pytest.raises(InputError):
        from_json_dict([1, 2, 3])
    d = to_json_dict(DiagonalGaussian([0.0], [0.0]))
    assert json.dumps(d)


def test_load_json_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_json(tmp_path / "absent.json")


def test_random_spd_helper_is_spd(rng):
    m = random_spd(rng, 4)
    assert np.allclose(m, m.T)
    assert np.linalg.eigvalsh(m).min() > 0.0
