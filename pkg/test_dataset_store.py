"""
Dataset and run configuration tests
Run with pytest, or directly: python test_dataset_store.py
"""

import json
import os
import sys
import tempfile

import pytest

import config
from dataset_store import (
    Dataset,
    Record,
    ResolvedDataset,
    RunConfig,
    expected_dataset,
    load_dataset,
    load_model,
    load_run_config,
    save_dataset,
    shots_for,
    simulate_dataset,
)
from noise_model import GatesetModel
from protocols import CircuitKind, build_family, decoherence_circuits, standard_families
from ptm_core import ConfigError, DatasetError
from script_runner import collect, run_tests

DEPTHS = [20, 40, 60, 80, 100, 120]
SHOTS = {'decoherence': 30, 'rpe': 30, 'readout': 300, 'cz': 10000}


def write_json(directory: str, name: str, data) -> str:
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f)
    return path


def test_record_validation():
    record = Record('DecoherenceZ/20/+1', 30, 12)
    assert record.frequency == pytest.approx(0.4)
    with pytest.raises(DatasetError):
        Record('DecoherenceZ/20/+1', 0, 0)
    with pytest.raises(DatasetError):
        Record('DecoherenceZ/20/+1', 30, 31)
    with pytest.raises(DatasetError):
        Record('CzDecayPlus/4/+1', 100, 50, (50, 20, 20, 5))
    with pytest.raises(DatasetError):
        Record('CzDecayPlus/4/+1', 100, 50, (50, 60, -10, 0))
    assert Record('CzDecayPlus/4/+1', 100, 50, [50, 20, 20, 10]).counts == (50, 20, 20, 10)


def test_record_dict_fields():
    assert Record('ReadoutZero/0/+1', 300, 276).to_dict() == {'id': 'ReadoutZero/0/+1', 'n': 300, 'k': 276}
    # integral floats are written as ints
    assert Record('ReadoutZero/0/+1', 300.0, 276.0).to_dict()['k'] == 276
    assert Record('ReadoutZero/0/+1', 300, 276.5).to_dict()['k'] == 276.5
    with pytest.raises(DatasetError):
        Record.from_dict({'id': 'ReadoutZero/0/+1', 'n': 300})


def test_dataset_lookup():
    dataset = Dataset([Record('ReadoutZero/0/+1', 300, 276), Record('DecoherenceX/20/+1', 30, 20)])
    assert len(dataset) == 2
    assert 'ReadoutZero/0/+1' in dataset
    assert dataset.get('DecoherenceX/20/+1').n_zeros == 20
    assert dataset.find('RpeAxis/0/+1') is None
    with pytest.raises(DatasetError):
        dataset.get('RpeAxis/0/+1')
    readout = dataset.subset([CircuitKind.READOUT_ZERO, CircuitKind.READOUT_PI])
    assert [r.circuit_id for r in readout.records] == ['ReadoutZero/0/+1']
    assert not dataset.has_two_qubit_records()
    with pytest.raises(DatasetError):
        Dataset([Record('ReadoutZero/0/+1', 300, 276), Record('ReadoutZero/0/+1', 300, 270)])


def test_save_and_load():
    model = GatesetModel.reference()
    dataset = simulate_dataset(model, standard_families(DEPTHS, 3), SHOTS, seed=5)
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'nested', config.DATASET_FILE)
        save_dataset(dataset, path)
        with open(path, 'r', encoding='utf-8') as f:
            first = json.loads(f.readline())
        assert first['provenance']['seed'] == 5
        restored = load_dataset(path)
    assert restored.records == dataset.records
    assert restored.provenance == dataset.provenance
    assert GatesetModel.from_dict(restored.provenance['model']) == model


def test_load_errors():
    with tempfile.TemporaryDirectory() as directory:
        with pytest.raises(DatasetError):
            load_dataset(os.path.join(directory, 'missing.jsonl'))
        path = os.path.join(directory, 'broken.jsonl')
        with open(path, 'w', encoding='utf-8') as f:
            f.write('{"id": "ReadoutZero/0/+1", "n": 300, "k": 276}\n{not json\n')
        with pytest.raises(DatasetError):
            load_dataset(path)


def test_simulation_is_deterministic():
    model = GatesetModel.reference(with_cz=True)
    families = standard_families(DEPTHS, 3, cz_enabled=True, cz_phase_max_exponent=4,
                                 cz_decay_depths=config.CZ_DECAY_DEPTHS)
    with tempfile.TemporaryDirectory() as directory:
        first = os.path.join(directory, 'first.jsonl')
        second = os.path.join(directory, 'second.jsonl')
        save_dataset(simulate_dataset(model, families, SHOTS, seed=config.MASTER_SEED), first)
        save_dataset(simulate_dataset(model, families, SHOTS, seed=config.MASTER_SEED), second)
        with open(first, 'rb') as a, open(second, 'rb') as b:
            assert a.read() == b.read()
    other = simulate_dataset(model, families, SHOTS, seed=config.MASTER_SEED + 1)
    reference = simulate_dataset(model, families, SHOTS, seed=config.MASTER_SEED)
    assert other.records != reference.records


def test_streams_independent_of_family_selection():
    model = GatesetModel.reference()
    families = standard_families(DEPTHS, 3)
    full = simulate_dataset(model, families, SHOTS, seed=42)
    partial = simulate_dataset(model, families[::3], SHOTS, seed=42)
    for record in partial.records:
        assert full.get(record.circuit_id) == record


def test_ideal_decoherence_counts_are_deterministic():
    dataset = simulate_dataset(GatesetModel.ideal(), decoherence_circuits(DEPTHS), SHOTS, seed=1)
    for record in dataset.records:
        assert record.n_zeros in (0, record.n_shots), record.circuit_id


def test_two_qubit_records_carry_counts():
    model = GatesetModel.reference(with_cz=True)
    family = build_family(CircuitKind.CZ_DECAY_PLUS, 8, 1)
    record = simulate_dataset(model, [family], SHOTS, seed=3).records[0]
    assert record.n_shots == 10000
    assert sum(record.counts) == 10000
    assert record.n_zeros == record.counts[0]
    assert Dataset([record]).has_two_qubit_records()
    expected = expected_dataset(model, [family], 1000).records[0]
    assert sum(expected.counts) == pytest.approx(1000)


def test_shots_per_class():
    assert shots_for(build_family(CircuitKind.DECOHERENCE_X, 20, 1), SHOTS) == 30
    assert shots_for(build_family(CircuitKind.READOUT_PI, 0, 1), SHOTS) == 300
    assert shots_for(build_family(CircuitKind.CZ_PHASE_A, 1, 1), SHOTS) == 10000


def test_resolved_dataset():
    model = GatesetModel.reference()
    families = standard_families(DEPTHS[:2], 1)
    dataset = expected_dataset(model, families, 100)
    resolved = ResolvedDataset(dataset)
    assert not resolved.needs_cz
    probs = resolved.success_probabilities(model)
    assert probs == pytest.approx(resolved.n_zeros / resolved.n_shots, abs=1e-12)


def test_default_run_config():
    run = load_run_config()
    assert run.decoherence_depths == config.DECOHERENCE_DEPTHS
    assert run.shots == {'decoherence': 30, 'rpe': 30, 'readout': 300, 'cz': 10000}
    assert run.model == GatesetModel.reference()
    assert len(run.families()) == 24 + 16 + 2


def test_run_config_file():
    with tempfile.TemporaryDirectory() as directory:
        path = write_json(directory, 'run.json', {
            'decoherence_depths': [2, 4, 6, 8],
            'shots': {'rpe': 100},
            'seed': 7,
            'cz': {'enabled': True, 'decay_depths': [2, 4, 6, 8]},
        })
        run = load_run_config(path)
    assert run.decoherence_depths == [2, 4, 6, 8]
    assert run.shots['rpe'] == 100 and run.shots['decoherence'] == 30
    assert run.seed == 7
    assert run.cz_enabled and run.model.cz is not None
    assert any(f.qubit_count == 2 for f in run.families())


def test_run_config_errors():
    bad_files = [
        {'depths': [20]},
        {'decoherence_depths': [21, 40]},
        {'shots': {'decoherence': 0}},
        {'shots': {'tomography': 10}},
        {'cz': {'enabled': True, 'decay_depths': [4, 8]}},
        {'cz': {'mode': 'fast'}},
        {'pstar': 0.5},
        {'seed': 'abc'},
    ]
    with tempfile.TemporaryDirectory() as directory:
        for i, data in enumerate(bad_files):
            path = write_json(directory, f'bad{i}.json', data)
            with pytest.raises(ConfigError):
                load_run_config(path)
        with pytest.raises(ConfigError):
            load_run_config(os.path.join(directory, 'absent.json'))
        with pytest.raises(ConfigError):
            load_run_config(write_json(directory, 'model.json', {'model': {'p_x': 0.9, 'p_z': 0.9}}))


def test_run_config_override():
    run = RunConfig().override(seed=3, shots=50, pstar=0.1)
    assert run.seed == 3
    assert set(run.shots.values()) == {50}
    with pytest.raises(ConfigError):
        RunConfig().override(shots=0)


def test_load_model_accepts_report_section():
    model = GatesetModel.reference()
    with tempfile.TemporaryDirectory() as directory:
        bare = write_json(directory, 'bare.json', model.to_dict())
        wrapped = write_json(directory, 'wrapped.json', {'model': model.to_dict(), 'log_likelihood': -10.0})
        assert load_model(bare) == model
        assert load_model(wrapped) == model
        with pytest.raises(ConfigError):
            load_model(os.path.join(directory, 'absent.json'))


def main():
    return run_tests("DATASET AND CONFIGURATION TESTS", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
