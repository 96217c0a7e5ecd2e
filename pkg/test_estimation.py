"""
Estimation tests: decay fits, decoherence inversion, readout, CZ,
likelihood maximization, profiles and independent estimates
Run with pytest, or directly: python test_estimation.py
"""

import csv
import math
import os
import sys
import tempfile

import numpy as np
import pytest

import config
from estimation import (
    Dataset,
    Record,
    cz_extract,
    decoherence_extract,
    decoherence_params,
    default_profile_grid,
    expected_dataset,
    fit_decay_signal,
    fit_exponential,
    fit_maximum_likelihood,
    independent_estimates,
    likelihood_profile,
    log_likelihood,
    pauli_signal,
    pauli_signal_points,
    profile_standard_error,
    readout_extract,
    simulate_dataset,
)
from modelstats import likelihood_threshold
from noise_model import CzParameters, GatesetModel
from protocols import (
    CircuitKind,
    cz_decay_circuits,
    cz_phase_circuits,
    decoherence_circuits,
    format_circuit_id,
    readout_circuits,
    standard_families,
)
from ptm_core import DomainError, IdentifiabilityError, PhaseEstimationError
from script_runner import collect, run_tests

DEPTHS = [20, 40, 60, 80, 100, 120]
REFERENCE = GatesetModel.reference()


def noiseless_points(amplitude, rate, offset, depths=DEPTHS):
    return [(m, amplitude * rate ** m + offset) for m in depths]


def test_fit_recovers_noiseless_decay():
    fit = fit_exponential(noiseless_points(1.0, 0.9604, 0.0))
    assert fit.rate == pytest.approx(0.9604, abs=1e-9)
    assert fit.n_points == 6
    assert not fit.at_rate_bound


def test_fit_recovers_spam_shifted_decay():
    fit = fit_exponential(noiseless_points(0.9, 0.976044, 0.01))
    assert fit.rate == pytest.approx(0.976044, abs=1e-8)
    assert fit.amplitude == pytest.approx(0.9, abs=1e-7)
    assert fit.offset == pytest.approx(0.01, abs=1e-7)
    assert fit.evaluate([20])[0] == pytest.approx(0.9 * 0.976044 ** 20 + 0.01, abs=1e-9)


def test_fit_rejects_flat_and_short_data():
    with pytest.raises(IdentifiabilityError):
        fit_exponential([(m, 0.37) for m in DEPTHS])
    with pytest.raises(IdentifiabilityError):
        fit_decay_signal([(m, 0.37, 0.01) for m in DEPTHS])
    with pytest.raises(DomainError):
        fit_exponential(noiseless_points(1.0, 0.9, 0.0, depths=[2, 4, 6]))
    with pytest.raises(DomainError):
        fit_exponential(noiseless_points(1.0, 0.9, 0.0, depths=[0, 2, 4, 6]))


def test_flat_signal_at_one_means_no_decay():
    fit = fit_decay_signal([(m, 1.0, 0.001) for m in DEPTHS])
    assert fit.flat
    assert fit.rate == 1.0
    assert fit.rate_stderr == 0.0


def test_weighted_fit_reports_standard_errors():
    points = [(m, 0.9604 ** m, 0.002) for m in DEPTHS]
    fit = fit_exponential(points)
    assert fit.rate == pytest.approx(0.9604, abs=1e-9)
    assert 0 < fit.rate_stderr < 0.01
    assert fit.amplitude_stderr > 0 and fit.offset_stderr > 0


def test_thirty_shot_decay_is_identifiable():
    # per-point errors of 30-shot frequencies; the mean over six depths is what has to be resolved
    points = [(m, 0.87 * 0.9604 ** m, 0.127) for m in DEPTHS]
    fit = fit_decay_signal(points)
    assert not fit.flat
    assert fit.rate == pytest.approx(0.9604, abs=1e-6)
    with pytest.raises(IdentifiabilityError):
        fit_exponential([(m, 0.3 + 0.1 * 0.9604 ** m, 0.127) for m in DEPTHS])


def test_noisy_decay_fit_converges():
    scatter = [0.1, -0.12, 0.05, -0.03, 0.08, -0.06]
    points = [(m, 0.87 * 0.9604 ** m + d, 0.127) for m, d in zip(DEPTHS, scatter)]
    fit = fit_exponential(points)
    assert 0 < fit.rate <= 1
    assert np.isfinite(fit.rate_stderr)


def test_decoherence_extract_at_thirty_shots():
    result = decoherence_extract(expected_dataset(REFERENCE, decoherence_circuits(DEPTHS), 30))
    assert not result.fit_x.flat and not result.fit_z.flat
    assert result.estimate.p_z == pytest.approx(0.02, abs=1e-3)
    assert result.p_z_stderr > 0


def _signal_dataset(k_plus: int, k_minus: int, depth: int = 1, n: int = 10 ** 6) -> Dataset:
    return Dataset([
        Record(format_circuit_id(CircuitKind.DECOHERENCE_Z, depth, 1), n, k_plus),
        Record(format_circuit_id(CircuitKind.DECOHERENCE_Z, depth, -1), n, k_minus),
    ])


def test_pauli_signal_from_frequencies():
    dataset = _signal_dataset(988022, 11978)
    assert pauli_signal(dataset, 'Z', 1) == pytest.approx(0.976044, abs=1e-12)


def test_pauli_signal_points_skip_odd_depths():
    records = list(_signal_dataset(988022, 11978).records) + list(_signal_dataset(976000, 24000, depth=2).records)
    points = pauli_signal_points(Dataset(records), 'Z')
    assert [p[0] for p in points] == [2]
    assert points[0][1] == pytest.approx(0.952, abs=1e-12)
    assert points[0][2] > 0


def test_decoherence_params_reference_values():
    zero = decoherence_params(1.0, 1.0)
    assert (zero.p_z, zero.p_x) == (0.0, 0.0)

    estimate = decoherence_params(0.9604, 0.976044)
    assert estimate.p_z == pytest.approx(0.02, abs=1e-12)
    assert estimate.p_x == pytest.approx(1 - math.sqrt(0.976044 / 0.98), abs=1e-12)
    assert estimate.p_x == pytest.approx(0.00202041, abs=1e-8)
    assert not estimate.clamped

    boundary = decoherence_params(0.81, 0.9)
    assert boundary.p_z == pytest.approx(0.1, abs=1e-12)
    assert boundary.p_x == pytest.approx(0.0, abs=1e-9)


def test_decoherence_params_clamps_and_rejects():
    clamped = decoherence_params(0.9604, 0.99)
    assert clamped.clamped and clamped.p_x == 0.0
    with pytest.raises(DomainError):
        decoherence_params(0.0, 0.9)
    with pytest.raises(DomainError):
        decoherence_params(0.9, 1.2)


def test_decoherence_inversion_consistency():
    rng = np.random.default_rng(5)
    for p_x, p_z in rng.uniform(0, 0.05, size=(50, 2)):
        estimate = decoherence_params((1 - p_z) ** 2, (1 - p_x) * (1 - p_x - p_z))
        assert estimate.p_z == pytest.approx(p_z, abs=1e-12)
        assert abs(estimate.p_x - p_x) <= (p_x + p_z) ** 2


def test_decoherence_extract_spam_invariant():
    rates = []
    for r in (0.0, 0.05, 0.15):
        model = GatesetModel(p_x=0.002, p_z=0.02, r_01=r, r_10=r)
        result = decoherence_extract(expected_dataset(model, decoherence_circuits(DEPTHS), 1000))
        rates.append((result.fit_x.rate, result.fit_z.rate))
        assert result.estimate.p_z == pytest.approx(0.02, abs=1e-8)
        assert result.estimate.p_x == pytest.approx(0.00202041, abs=1e-7)
        assert result.p_z_stderr > 0
    for rate_x, rate_z in rates[1:]:
        assert rate_x == pytest.approx(rates[0][0], abs=1e-8)
        assert rate_z == pytest.approx(rates[0][1], abs=1e-8)


def test_readout_extract():
    ids = [format_circuit_id(kind, 0, 1) for kind in (CircuitKind.READOUT_ZERO, CircuitKind.READOUT_PI)]
    r_01, r_10 = readout_extract(Dataset([Record(ids[0], 276, 276 - 24), Record(ids[1], 300, 15)]))
    assert r_01 == pytest.approx(24 / 276)
    r_01, r_10 = readout_extract(Dataset([Record(ids[0], 300, 276), Record(ids[1], 300, 15)]))
    assert r_01 == pytest.approx(0.08)
    assert r_10 == pytest.approx(0.05)
    r_01, _ = readout_extract(Dataset([Record(ids[0], 300, 300), Record(ids[1], 300, 15)]))
    assert r_01 == 0.0


def test_log_likelihood_reference_values():
    half = format_circuit_id(CircuitKind.RPE_AMPLITUDE, 0, 1)
    assert log_likelihood(GatesetModel.ideal(), Dataset([Record(half, 2, 1)])) == pytest.approx(
        2 * math.log(0.5), abs=1e-9)
    assert log_likelihood(GatesetModel.ideal(), Dataset([Record(half, 2, 1)])) == pytest.approx(-1.386294, abs=1e-6)
    certain = format_circuit_id(CircuitKind.READOUT_ZERO, 0, 1)
    assert log_likelihood(GatesetModel.ideal(), Dataset([Record(certain, 1, 1)])) == pytest.approx(0.0, abs=1e-9)
    # impossible outcomes are clamped, not -inf
    assert math.isfinite(log_likelihood(GatesetModel.ideal(), Dataset([Record(certain, 1, 0)])))


def test_generating_model_is_more_likely():
    families = standard_families(DEPTHS, 3)
    dataset = simulate_dataset(REFERENCE, families, {'decoherence': 10 ** 4, 'rpe': 10 ** 4,
                                                     'readout': 10 ** 4, 'cz': 10 ** 4}, seed=17)
    perturbed = REFERENCE.with_parameters(epsilon=REFERENCE.epsilon + 0.05)
    assert log_likelihood(REFERENCE, dataset) > log_likelihood(perturbed, dataset)


def test_mle_stationary_at_truth():
    dataset = expected_dataset(REFERENCE, standard_families(DEPTHS[:4], 3), 1000)
    result = fit_maximum_likelihood(REFERENCE, dataset)
    assert result.log_likelihood >= result.initial_log_likelihood - 1e-9
    for name in result.parameters:
        assert result.model.get(name) == pytest.approx(REFERENCE.get(name), abs=2e-3), name


def test_mle_pulls_bad_start_back():
    dataset = expected_dataset(REFERENCE, standard_families(DEPTHS[:4], 3), 1000)
    start = REFERENCE.with_parameters(p_x=0.3)
    result = fit_maximum_likelihood(start, dataset)
    assert result.improved
    assert result.model.p_x < 0.05
    assert result.improvement > 0
    assert result.to_dict()['model']['p_x'] == result.model.p_x


def test_mle_restricted_parameters():
    dataset = expected_dataset(REFERENCE, decoherence_circuits(DEPTHS), 1000)
    start = REFERENCE.with_parameters(p_z=0.03)
    result = fit_maximum_likelihood(start, dataset, parameters=('p_x', 'p_z'))
    assert result.parameters == ('p_x', 'p_z')
    assert result.model.epsilon == start.epsilon
    assert result.model.p_z == pytest.approx(0.02, abs=1e-3)


def test_profile_contains_truth_on_expected_counts():
    dataset = expected_dataset(REFERENCE, standard_families(DEPTHS[:4], 3), 300)
    for parameter in ('p_z', 'epsilon', 'r_01'):
        stderr = profile_standard_error(REFERENCE, dataset, parameter)
        assert stderr > 0
        grid = default_profile_grid(REFERENCE, parameter, stderr)
        profile = likelihood_profile(REFERENCE, dataset, parameter, grid)
        assert profile.contains(REFERENCE.get(parameter))
        assert profile.argmax == pytest.approx(REFERENCE.get(parameter), abs=1e-12)
        assert profile.max_log_likelihood - profile.threshold == pytest.approx(math.log(19))
        assert profile.lower < REFERENCE.get(parameter) < profile.upper


def test_profile_grid_and_errors():
    grid = default_profile_grid(REFERENCE, 'p_x')
    assert REFERENCE.p_x in grid
    assert grid[0] >= config.PROBABILITY_BOUNDS[0]
    assert len(grid) in (config.PROFILE_GRID_POINTS, config.PROFILE_GRID_POINTS + 1)
    dataset = expected_dataset(REFERENCE, readout_circuits(), 300)
    with pytest.raises(DomainError):
        likelihood_profile(REFERENCE, dataset, 'r_01', [0.1, 0.2, 0.3])
    with pytest.raises(DomainError):
        likelihood_profile(REFERENCE, dataset, 'r_01', [0.1, 0.05, 0.2])


def test_profile_stops_at_invalid_neighbour():
    dataset = expected_dataset(REFERENCE, decoherence_circuits(DEPTHS), 30)
    grid = np.concatenate([[-0.002, -0.001], np.linspace(0.0, 0.05, 51)])
    profile = likelihood_profile(REFERENCE, dataset, 'p_x', grid)
    assert np.isneginf(profile.log_likelihoods[0]) and np.isneginf(profile.log_likelihoods[1])
    assert profile.lower == 0.0
    assert profile.contains(REFERENCE.p_x)


def test_profile_csv_export():
    dataset = expected_dataset(REFERENCE, readout_circuits(), 300)
    profile = likelihood_profile(REFERENCE, dataset, 'r_01', np.linspace(0.0, 0.2, 21))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'profile_r_01.csv')
        profile.write_csv(path)
        with open(path, newline='', encoding='utf-8') as f:
            rows = list(csv.reader(f))
    assert rows[0] == ['param_value', 'log_likelihood', 'above_threshold', 'in_interval']
    assert len(rows) == 22
    assert any(row[3] == '1' for row in rows[1:])
    assert rows[1][3] == '0'


def test_likelihood_threshold_ratio():
    assert math.exp(likelihood_threshold(0.05)) == pytest.approx(19.0)


CZ_MODEL = GatesetModel(cz=CzParameters(alpha=0.03, beta=-0.05, p_iz=0.004, p_zi=0.006, p_zz=0.002))


def _cz_dataset(model: GatesetModel, shots: int = 10 ** 5) -> Dataset:
    families = cz_phase_circuits(4) + cz_decay_circuits(config.CZ_DECAY_DEPTHS)
    return expected_dataset(model, families, shots)


def test_cz_extract_recovers_phases_and_sums():
    estimate = cz_extract(_cz_dataset(CZ_MODEL))
    assert estimate.alpha == pytest.approx(0.03, abs=1e-6)
    assert estimate.beta == pytest.approx(-0.05, abs=1e-6)
    assert estimate.alpha_uncertainty == pytest.approx(math.pi / 32)
    assert estimate.sum_iz_zi == pytest.approx(0.010, abs=5e-4)
    assert estimate.sum_zi_zz == pytest.approx(0.008, abs=1e-8)
    assert estimate.to_dict()['p_iz_plus_p_zi'] == estimate.sum_iz_zi


def test_cz_extract_ideal_gate():
    estimate = cz_extract(_cz_dataset(GatesetModel.ideal(with_cz=True)))
    assert estimate.alpha == pytest.approx(0.0, abs=1e-9)
    assert estimate.beta == pytest.approx(0.0, abs=1e-9)
    assert estimate.sum_iz_zi == 0.0
    assert estimate.sum_zi_zz == 0.0
    assert estimate.bell_fit.flat


def test_cz_extract_needs_records():
    with pytest.raises(PhaseEstimationError):
        cz_extract(expected_dataset(REFERENCE, readout_circuits(), 300))


def test_independent_estimates_full():
    model = REFERENCE.with_cz_defaults()
    families = standard_families(DEPTHS, 3, cz_enabled=True, cz_phase_max_exponent=4,
                                 cz_decay_depths=config.CZ_DECAY_DEPTHS)
    estimate = independent_estimates(expected_dataset(model, families, 10 ** 4))
    assert not estimate.missing
    fitted = estimate.model
    assert fitted.r_01 == pytest.approx(0.08, abs=1e-9)
    # the flip circuit also counts the imperfect X180, so r_10 reads high
    assert 0.05 < fitted.r_10 < 0.1
    assert fitted.p_z == pytest.approx(0.02, abs=1e-3)
    assert fitted.p_x == pytest.approx(0.002, abs=1e-3)
    assert fitted.epsilon == pytest.approx(0.06, abs=0.01)
    assert fitted.cz is not None
    assert fitted.cz.p_zi + fitted.cz.p_zz == pytest.approx(0.008, abs=5e-4)
    assert estimate.to_dict()['missing'] == {}


def test_independent_estimates_partial():
    estimate = independent_estimates(expected_dataset(REFERENCE, decoherence_circuits(DEPTHS), 30))
    assert set(estimate.missing) == {'readout', 'rpe'}
    assert estimate.decoherence is not None
    assert estimate.model.p_z == pytest.approx(0.02, abs=2e-4)
    assert estimate.model.epsilon == 0.0
    assert estimate.uncertainties['epsilon'] is None
    assert estimate.cz is None


def main():
    return run_tests("ESTIMATION TESTS", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
