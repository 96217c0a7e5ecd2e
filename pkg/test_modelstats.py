"""
Model statistics tests: discrimination error, absolute-deviation moments
and the Chebyshev model-violation test
Run with pytest, or directly: python test_modelstats.py
"""

import math
import sys

import numpy as np
import pytest
from scipy.stats import binom

from dataset_store import expected_dataset, simulate_dataset
from estimation import likelihood_profile
from modelstats import (
    absdev_moments,
    confidence_region_member,
    deviation_interval,
    discrimination_error,
    likelihood_threshold,
    model_violation,
    violation_for_counts,
)
from noise_model import GatesetModel
from protocols import standard_families
from ptm_core import DomainError
from script_runner import collect, run_tests

DEPTHS = [20, 40, 60, 80, 100, 120]
REFERENCE = GatesetModel.reference()


def enumerated_moments(n: int, p: float):
    k = np.arange(n + 1)
    weights = binom.pmf(k, n, p)
    deviations = np.abs(k / n - p)
    mu = float(np.sum(weights * deviations))
    second = float(np.sum(weights * deviations ** 2))
    return mu, second - mu ** 2


def test_discrimination_error():
    assert discrimination_error(1) == 0.5
    assert discrimination_error(19) == 0.05
    assert discrimination_error(999) == pytest.approx(0.001)
    with pytest.raises(DomainError):
        discrimination_error(0.5)


def test_likelihood_threshold():
    assert likelihood_threshold(0.05) == pytest.approx(math.log(19))
    assert likelihood_threshold(0.5) == 0.0
    with pytest.raises(DomainError):
        likelihood_threshold(0.0)
    with pytest.raises(DomainError):
        likelihood_threshold(0.7)


def test_absdev_small_cases():
    assert absdev_moments(1, 0.5) == pytest.approx((0.5, 0.0), abs=1e-8)
    mu, sigma = absdev_moments(2, 0.5)
    assert mu == pytest.approx(0.25, abs=1e-12)
    assert sigma == pytest.approx(0.25, abs=1e-12)
    assert absdev_moments(30, 0.0) == (0.0, 0.0)
    assert absdev_moments(30, 1.0) == (0.0, 0.0)


def test_absdev_matches_enumeration():
    # the mean-deviation exponent is n - floor(np); any other choice fails here for n >= 2
    for n in range(1, 13):
        for p in [i / 20 for i in range(21)]:
            mu, sigma = absdev_moments(n, p)
            mu_ref, variance_ref = enumerated_moments(n, p)
            assert mu == pytest.approx(mu_ref, abs=1e-12), (n, p)
            assert sigma ** 2 == pytest.approx(max(variance_ref, 0.0), abs=1e-12), (n, p)


def test_absdev_large_n_is_finite():
    mu, sigma = absdev_moments(10 ** 6, 0.3)
    # normal limit: E|Z| = sqrt(2/pi) * std
    std = math.sqrt(0.3 * 0.7 / 10 ** 6)
    assert mu == pytest.approx(math.sqrt(2 / math.pi) * std, rel=1e-3)
    assert sigma == pytest.approx(std * math.sqrt(1 - 2 / math.pi), rel=1e-2)
    with pytest.raises(DomainError):
        absdev_moments(0, 0.5)
    with pytest.raises(DomainError):
        absdev_moments(10, 1.5)


def test_violation_exact_frequency_is_not_zero_k():
    report = violation_for_counts([2], [1], [0.5])
    assert report.delta_hat == 0.0
    assert report.mu == pytest.approx(0.25)
    assert report.k_hat == pytest.approx(1.0)
    assert report.bound == 1.0
    assert not report.rejected
    all_heads = violation_for_counts([2], [2], [0.5])
    assert all_heads.k_hat == pytest.approx(1.0)
    assert all_heads.bound == 1.0


def test_violation_bound_arithmetic():
    # each n=2, p=0.5 circuit has mu = sigma = 0.25; all-zero outcomes give |f - p| = 0.5
    cancelled = violation_for_counts([2, 2], [2, 1], [0.5, 0.5])
    assert cancelled.delta_hat == pytest.approx(0.5)
    assert cancelled.sigma == pytest.approx(math.sqrt(2) * 0.25)
    assert cancelled.k_hat == pytest.approx(0.0, abs=1e-12)
    assert cancelled.bound == 1.0

    for circuits, k_hat in ((16, 4.0), (20, math.sqrt(20)), (25, 5.0)):
        report = violation_for_counts([2] * circuits, [2] * circuits, [0.5] * circuits)
        assert report.k_hat == pytest.approx(k_hat)
        assert report.bound == pytest.approx(1 / k_hat ** 2)
    assert not violation_for_counts([2] * 16, [2] * 16, [0.5] * 16).rejected
    assert violation_for_counts([2] * 25, [2] * 25, [0.5] * 25).rejected
    assert violation_for_counts([2] * 20, [2] * 20, [0.5] * 20).bound == pytest.approx(0.05)


def test_violation_degenerate_sigma():
    report = violation_for_counts([30], [10], [1.0])
    assert math.isinf(report.k_hat)
    assert report.bound == 0.0
    assert report.rejected
    consistent = violation_for_counts([30], [30], [1.0])
    assert consistent.k_hat == 0.0 and consistent.bound == 1.0
    with pytest.raises(DomainError):
        violation_for_counts([30, 30], [10], [0.5])


def test_violation_rejects_wrong_model():
    families = standard_families(DEPTHS, 3)
    shots = {'decoherence': 2000, 'rpe': 2000, 'readout': 2000, 'cz': 2000}
    dataset = simulate_dataset(REFERENCE, families, shots, seed=3)
    wrong = REFERENCE.with_parameters(p_z=0.2)
    report = model_violation(wrong, dataset)
    assert report.rejected
    assert report.n_circuits == len(families)
    assert not confidence_region_member(wrong, dataset, 0.05)
    assert confidence_region_member(REFERENCE, dataset, 0.05)
    with pytest.raises(DomainError):
        confidence_region_member(REFERENCE, dataset, 1.0)


def test_chebyshev_validity():
    rng = np.random.default_rng(99)
    n = np.full(200, 30)
    k_hats = []
    for _ in range(500):
        p = rng.uniform(0.02, 0.98, size=200)
        k = rng.binomial(n, p)
        k_hats.append(violation_for_counts(n, k, p).k_hat)
    k_hats = np.array(k_hats)
    for level in (2.0, 3.0, 4.47):
        assert np.mean(k_hats >= level) <= 1 / level ** 2, level


def test_generating_model_usually_in_region():
    families = standard_families(DEPTHS, 3)
    shots = {'decoherence': 30, 'rpe': 30, 'readout': 300, 'cz': 30}
    inside = sum(
        confidence_region_member(REFERENCE, simulate_dataset(REFERENCE, families, shots, seed), 0.05)
        for seed in range(20)
    )
    assert inside >= 19


def test_expected_counts_fit_too_well():
    # |f - p| summing far below its mean is as much a violation as summing above it
    dataset = expected_dataset(REFERENCE, standard_families(DEPTHS, 3), 300)
    report = model_violation(REFERENCE, dataset)
    assert report.delta_hat == pytest.approx(0.0, abs=1e-9)
    assert report.k_hat == pytest.approx(report.mu / report.sigma)


def test_deviation_interval():
    families = standard_families(DEPTHS, 3)
    shots = {'decoherence': 300, 'rpe': 300, 'readout': 300, 'cz': 300}
    dataset = simulate_dataset(REFERENCE, families, shots, seed=11)
    interval = deviation_interval(REFERENCE, dataset, 'p_z', np.linspace(0.0, 0.1, 51))
    assert interval is not None
    low, high = interval
    assert low <= 0.02 <= high
    assert high - low < 0.1
    assert deviation_interval(REFERENCE.with_parameters(p_z=0.2), dataset, 'p_z', [0.19, 0.2, 0.21]) is None
    with pytest.raises(DomainError):
        deviation_interval(REFERENCE, dataset, 'p_z', [0.02], eps=0.0)


def test_deviation_interval_contains_likelihood_interval():
    families = standard_families(DEPTHS, 3)
    shots = {'decoherence': 300, 'rpe': 300, 'readout': 300, 'cz': 300}
    dataset = simulate_dataset(REFERENCE, families, shots, seed=11)
    grid = np.linspace(0.0, 0.1, 51)
    interval = deviation_interval(REFERENCE, dataset, 'p_z', grid)
    assert interval is not None
    profile = likelihood_profile(REFERENCE, dataset, 'p_z', grid)
    assert interval[0] <= profile.lower <= profile.upper <= interval[1]


def main():
    return run_tests("MODEL STATISTICS TESTS", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
