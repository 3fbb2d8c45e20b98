import math

import numpy as np
import pytest
import scipy.linalg

from reactime.birkhoff import (
    certified_qsd,
    contraction_audit,
    hilbert_metric,
    two_sided_constants,
    uncertified_qsd,
)
from reactime.errors import NoCertificate, ZeroMeasure
from reactime.measures import tv_norm
from reactime.toys import toy_kernel_a1


def random_positive_block(rng, n, low=0.2):
    block = rng.uniform(low, 1.0, (n, n))
    block /= block.sum(axis=1, keepdims=True)
    return block * rng.uniform(0.5, 0.95)


def eigen_qsd(block):
    values, vectors = scipy.linalg.eig(block.T)
    lead = np.argmax(values.real)
    vec = np.abs(vectors[:, lead].real)
    return vec / vec.sum(), float(values[lead].real)


# ----------------------------------------------------------------------
# projective metric
# ----------------------------------------------------------------------

def test_metric_simple_ratio():
    geom = hilbert_metric([1.0, 1.0], [2.0, 1.0])
    assert geom.c_lower == 1.0 and geom.c_upper == 2.0
    assert geom.theta == pytest.approx(math.log(2.0))


def test_metric_zero_iff_proportional():
    assert hilbert_metric([1.0, 2.0], [3.0, 6.0]).theta == 0.0
    assert hilbert_metric([1.0, 2.0], [3.0, 6.1]).theta > 0.0


def test_metric_disjoint_supports_infinite():
    assert hilbert_metric([1.0, 0.0], [0.0, 1.0]).theta == math.inf


def test_metric_rejects_zero_measure():
    with pytest.raises(ZeroMeasure):
        hilbert_metric([0.0, 0.0], [1.0, 1.0])


def test_metric_axioms_sampled(rng):
    for _ in range(200):
        n = rng.integers(2, 8)
        lam, nu, mu = rng.exponential(size=(3, n))
        t, u = rng.uniform(0.1, 10.0, 2)
        d1 = hilbert_metric(lam, nu).theta
        assert d1 == pytest.approx(hilbert_metric(nu, lam).theta, rel=1e-12)
        assert hilbert_metric(t * lam, u * nu).theta == pytest.approx(d1, rel=1e-12)
        assert d1 <= hilbert_metric(lam, mu).theta \
            + hilbert_metric(mu, nu).theta + 1e-12


def test_norm_comparison_lemma(rng):
    # ||lam - nu|| <= (exp(theta) - 1) ||lam|| for equal-mass vectors.
    for _ in range(200):
        n = rng.integers(2, 8)
        lam = rng.exponential(size=n)
        nu = rng.exponential(size=n)
        nu *= lam.sum() / nu.sum()
        theta = hilbert_metric(lam, nu).theta
        assert tv_norm(lam - nu) <= (math.exp(theta) - 1.0) * tv_norm(lam) + 1e-12


# ----------------------------------------------------------------------
# two-sided envelope
# ----------------------------------------------------------------------

def test_envelope_brute_force_inequalities(rng):
    for _ in range(50):
        block = random_positive_block(rng, int(rng.integers(2, 8)))
        cert = two_sided_constants(block)
        lower = np.outer(cert.s, cert.pi)
        assert np.all(block >= lower - 1e-12)
        assert np.all(block <= cert.ratio * lower + 1e-12)
        assert cert.ratio >= 1.0
        assert cert.delta_bound == pytest.approx(2.0 * math.log(cert.ratio))


def test_envelope_rank_one_is_exact():
    s = np.array([0.3, 0.5, 0.7])
    pi = np.array([0.2, 0.3, 0.5])
    cert = two_sided_constants(np.outer(s, pi))
    assert cert.ratio == pytest.approx(1.0, abs=1e-12)
    assert cert.delta_bound == pytest.approx(0.0, abs=1e-12)
    assert cert.rho == pytest.approx(0.0, abs=1e-12)


def test_envelope_refused_on_zero_entry():
    block = toy_kernel_a1(0.1, 0.5, 0.2).k_a
    assert block[0, 1] == 0.0
    with pytest.raises(NoCertificate):
        two_sided_constants(block)


# ----------------------------------------------------------------------
# certified iteration
# ----------------------------------------------------------------------

def test_certified_rank_one_converges_immediately():
    s = np.array([0.3, 0.5, 0.7])
    pi = np.array([0.2, 0.3, 0.5])
    result = certified_qsd(np.outer(s, pi), target_tv=1e-10)
    assert result.iterations == 1
    assert result.tv_error_bound <= 1e-12
    assert np.abs(result.measure.weights - pi).max() < 1e-14
    assert result.eigenvalue == pytest.approx(float(pi @ s))


def test_certified_matches_eigen_solver(rng):
    block = random_positive_block(rng, 10)
    result = certified_qsd(block, target_tv=1e-8)
    reference, eigenvalue = eigen_qsd(block)
    assert tv_norm(result.measure.weights - reference) < 1e-8
    assert result.eigenvalue == pytest.approx(eigenvalue, abs=1e-8)
    assert result.certified


def test_certified_bound_dominates_true_error(rng):
    # Replay the iteration and compare each bound with the true error.
    block = random_positive_block(rng, 8)
    lam0 = rng.uniform(0.1, 1.0, 8)
    result = certified_qsd(block, lam0=lam0, target_tv=1e-9)
    reference, _ = eigen_qsd(block)
    current = lam0 / lam0.sum()
    for n, bound in enumerate(result.bound_trace):
        if n:
            current = current @ block
            current /= current.sum()
        assert tv_norm(current - reference) <= bound + 1e-12


def test_uncertified_fallback_on_triangular_block():
    block = toy_kernel_a1(0.1, 0.5, 0.2).k_a
    result = uncertified_qsd(block)
    assert not result.certified
    assert math.isinf(result.tv_error_bound)
    assert np.abs(result.measure.weights - [1.0, 0.0]).max() < 1e-10
    assert result.eigenvalue == pytest.approx(0.9, abs=1e-10)


# ----------------------------------------------------------------------
# contraction audit
# ----------------------------------------------------------------------

def test_audit_rank_one_contracts_everything():
    s = np.array([0.3, 0.5, 0.7])
    pi = np.array([0.2, 0.3, 0.5])
    audit = contraction_audit(np.outer(s, pi), trials=200, seed=4)
    assert audit.max_ratio == pytest.approx(0.0, abs=1e-12)


def test_audit_positive_block_within_factor(rng):
    block = random_positive_block(rng, 6)
    audit = contraction_audit(block, trials=1000, seed=5)
    assert audit.n_pairs + audit.n_skipped == 1000
    assert audit.n_skipped > 0  # zeroed entries produce skipped pairs
    assert audit.max_ratio <= audit.contraction_factor + 1e-12


def test_audit_uncertified_uses_trivial_factor():
    block = toy_kernel_a1(0.1, 0.5, 0.2).k_a
    audit = contraction_audit(block, trials=300, seed=6)
    assert audit.contraction_factor == 1.0
    assert audit.max_ratio <= 1.0 + 1e-12
