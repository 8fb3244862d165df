"""Shared fixtures and random-input helpers for the test suite."""

import sys

import numpy as np
import pytest

from gjsd import DiagonalGaussian, FullGaussian


def random_spd(rng, dim, eig_lo=0.3, eig_hi=3.0):
    """Random SPD matrix with eigenvalues in [eig_lo, eig_hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(eig_lo, eig_hi, size=dim)
    return (q * eig) @ q.T


def random_full_gaussian(rng, dim, mean_scale=3.0):
    mu = rng.uniform(-mean_scale, mean_scale, size=dim)
    return FullGaussian(mu, random_spd(rng, dim))


def random_diag_gaussian(rng, dim, mean_scale=3.0, log_var_scale=1.5):
    mu = rng.uniform(-mean_scale, mean_scale, size=dim)
    log_var = rng.uniform(-log_var_scale, log_var_scale, size=dim)
    return DiagonalGaussian(mu, log_var)


@pytest.fixture
def rng():
    return np.random.default_rng(20_240_613)


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """Session-scoped desk digits dataset; (dir, train, test) tuple."""
    from gjsd.vae import build_digits_desk, load_split

    out = tmp_path_factory.mktemp("desk")
    build_digits_desk(out, seed=0)
    train_x, test_x = load_split(out)
    return out, train_x, test_x


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-gate lines after the run summary."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_LINES", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ring_dataset(tmp_path_factory):
    """Session-scoped 2-D ring dataset; (dir, train, test) tuple."""
    from gjsd.vae import make_ring, load_split, write_container

    out = tmp_path_factory.mktemp("ring")
    rows = make_ring(1024, seed=3)
    write_container(out / "train.gjsd", rows[:896])
    write_container(out / "test.gjsd", rows[896:])
    train_x, test_x = load_split(out)
    return out, train_x, test_x
