"""
Dataset And Run Configuration Storage
Count records, JSON-lines persistence, simulated and expected-count
datasets, and the JSON run configuration
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from noise_model import CircuitEvaluator, GatesetModel
from protocols import (
    CZ_DECAY_KINDS,
    CZ_PHASE_KINDS,
    DECOHERENCE_KINDS,
    READOUT_KINDS,
    RPE_KINDS,
    CircuitFamily,
    CircuitKind,
    family_from_id,
    standard_families,
)
from ptm_core import ConfigError, DatasetError, sample_counts, sample_shots

logger = logging.getLogger(__name__)

Count = Union[int, float]


@dataclass(frozen=True)
class Record:
    """
    Counts for one circuit

    n_zeros is the number of success outcomes (outcome 0 for one qubit).
    Expected-count datasets carry real-valued counts.
    """
    circuit_id: str
    n_shots: Count
    n_zeros: Count
    counts: Optional[Tuple[Count, ...]] = None

    def __post_init__(self):
        if self.n_shots < 1:
            raise DatasetError(f"{self.circuit_id}: n_shots must be at least 1, got {self.n_shots}")
        if not 0 <= self.n_zeros <= self.n_shots:
            raise DatasetError(f"{self.circuit_id}: n_zeros={self.n_zeros} outside [0, {self.n_shots}]")
        if self.counts is not None:
            object.__setattr__(self, 'counts', tuple(self.counts))
            if any(c < 0 for c in self.counts):
                raise DatasetError(f"{self.circuit_id}: negative outcome count")
            if abs(sum(self.counts) - self.n_shots) > 1e-6 * self.n_shots:
                raise DatasetError(f"{self.circuit_id}: outcome counts do not sum to n_shots")

    @property
    def frequency(self) -> float:
        return self.n_zeros / self.n_shots

    def to_dict(self) -> Dict:
        data = {'id': self.circuit_id, 'n': _plain(self.n_shots), 'k': _plain(self.n_zeros)}
        if self.counts is not None:
            data['counts'] = [_plain(c) for c in self.counts]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'Record':
        try:
            return cls(
                circuit_id=data['id'],
                n_shots=data['n'],
                n_zeros=data['k'],
                counts=tuple(data['counts']) if data.get('counts') is not None else None,
            )
        except KeyError as e:
            raise DatasetError(f"Record is missing field {e}") from e


def _plain(value: Count) -> Count:
    """Integral counts are written as ints so files stay byte-stable"""
    value = float(value)
    return int(value) if value.is_integer() else value


@dataclass
class Dataset:
    """Ordered count records plus optional provenance (seed, generating model)"""
    records: List[Record]
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for record in self.records:
            if record.circuit_id in seen:
                raise DatasetError(f"Duplicate record for {record.circuit_id}")
            seen.add(record.circuit_id)
        self._index = {r.circuit_id: r for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, circuit_id: str) -> bool:
        return circuit_id in self._index

    def get(self, circuit_id: str) -> Record:
        try:
            return self._index[circuit_id]
        except KeyError:
            raise DatasetError(f"Dataset has no record for {circuit_id}") from None

    def find(self, circuit_id: str) -> Optional[Record]:
        return self._index.get(circuit_id)

    def subset(self, kinds: Iterable[CircuitKind]) -> 'Dataset':
        prefixes = tuple(f"{CircuitKind(k).value}/" for k in kinds)
        return Dataset([r for r in self.records if r.circuit_id.startswith(prefixes)], dict(self.provenance))

    def has_two_qubit_records(self) -> bool:
        return any(r.circuit_id.startswith(tuple(f"{k.value}/" for k in CZ_PHASE_KINDS + CZ_DECAY_KINDS))
                   for r in self.records)

    def families(self) -> List[CircuitFamily]:
        """Family for every record; unknown ids raise UnknownCircuitError"""
        return [family_from_id(r.circuit_id) for r in self.records]


class ResolvedDataset:
    """
    Dataset records matched to their circuit families, as arrays

    Built once per dataset so repeated likelihood or violation evaluations
    only recompute model probabilities.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.families = dataset.families()
        self.n_shots = np.array([float(r.n_shots) for r in dataset.records])
        self.n_zeros = np.array([float(r.n_zeros) for r in dataset.records])
        self.one_qubit = [i for i, f in enumerate(self.families) if f.qubit_count == 1]
        self.two_qubit = [i for i, f in enumerate(self.families) if f.qubit_count == 2]
        self.logger = logging.getLogger(__name__)

    @property
    def needs_cz(self) -> bool:
        return bool(self.two_qubit)

    def success_probabilities(self, model: GatesetModel,
                              evaluator: Optional[CircuitEvaluator] = None) -> np.ndarray:
        evaluator = evaluator or CircuitEvaluator(model)
        probs = np.empty(len(self.families))
        for i, family in enumerate(self.families):
            outcome = evaluator.outcome_probabilities(family.circuit)
            probs[i] = sum(outcome[j] for j in family.success_outcomes)
        return probs

    def joint_probabilities(self, model: GatesetModel,
                            evaluator: Optional[CircuitEvaluator] = None) -> Dict[int, np.ndarray]:
        """Outcome distributions of the two-qubit records, keyed by record index"""
        evaluator = evaluator or CircuitEvaluator(model)
        return {i: evaluator.outcome_probabilities(self.families[i].circuit) for i in self.two_qubit}


def load_dataset(path: str) -> Dataset:
    """
    Read a JSON-lines dataset

    Args:
        path: file whose optional first line is {"provenance": {...}}

    Returns:
        Dataset in file order
    """
    if not os.path.exists(path):
        raise DatasetError(f"Dataset file not found: {path}")
    records = []
    provenance: Dict = {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                data = json.loads(line)
                if 'provenance' in data and not records:
                    provenance = data['provenance']
                    continue
                records.append(Record.from_dict(data))
    except json.JSONDecodeError as e:
        raise DatasetError(f"Malformed dataset line in {path}: {e}") from e
    logger.info(f"Loaded {len(records)} records from {path}")
    return Dataset(records, provenance)


def save_dataset(dataset: Dataset, path: str):
    """Write deterministically: sorted keys, record order preserved"""
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(path, 'w', encoding='utf-8') as f:
        if dataset.provenance:
            f.write(json.dumps({'provenance': dataset.provenance}, sort_keys=True) + '\n')
        for record in dataset.records:
            f.write(json.dumps(record.to_dict(), sort_keys=True) + '\n')
    logger.info(f"Saved {len(dataset)} records to {path}")


def shots_for(family: CircuitFamily, shots: Dict[str, int]) -> int:
    """Shot count of a family's class"""
    if family.kind in DECOHERENCE_KINDS:
        return shots['decoherence']
    if family.kind in RPE_KINDS:
        return shots['rpe']
    if family.kind in READOUT_KINDS:
        return shots['readout']
    return shots['cz']


def simulate_dataset(model: GatesetModel, families: Sequence[CircuitFamily],
                     shots: Dict[str, int], seed: int) -> Dataset:
    """
    Sample counts for every family from its own seeded stream

    Args:
        model: generating model
        families: circuits to simulate
        shots: shots per class ('decoherence', 'rpe', 'readout', 'cz')
        seed: master seed; each circuit draws from the stream named by its id

    Returns:
        Dataset with provenance {seed, model}
    """
    evaluator = CircuitEvaluator(model)
    records = []
    for family in families:
        n = shots_for(family, shots)
        probs = evaluator.outcome_probabilities(family.circuit)
        if family.qubit_count == 1:
            k = sample_shots(float(probs[0]), n, seed, family.id)
            records.append(Record(family.id, n, k))
        else:
            counts = sample_counts(probs, n, seed, family.id)
            k = sum(counts[j] for j in family.success_outcomes)
            records.append(Record(family.id, n, k, tuple(counts)))
        logger.debug(f"{family.id}: {records[-1].n_zeros}/{n}")
    logger.info(f"Simulated {len(records)} circuits (seed {seed})")
    return Dataset(records, {'seed': seed, 'model': model.to_dict()})


def expected_dataset(model: GatesetModel, families: Sequence[CircuitFamily],
                     shots: Union[int, Dict[str, int]]) -> Dataset:
    """Noise-free surrogate with real-valued counts n * p"""
    evaluator = CircuitEvaluator(model)
    records = []
    for family in families:
        n = shots if isinstance(shots, int) else shots_for(family, shots)
        probs = evaluator.outcome_probabilities(family.circuit)
        if family.qubit_count == 1:
            records.append(Record(family.id, n, n * float(probs[0])))
        else:
            counts = tuple(float(n * p) for p in probs)
            k = min(float(n), sum(counts[j] for j in family.success_outcomes))
            records.append(Record(family.id, n, k, counts))
    return Dataset(records, {'expected': True, 'model': model.to_dict()})


@dataclass
class RunConfig:
    """Settings of one characterization run"""
    model: GatesetModel = field(default_factory=GatesetModel.reference)
    decoherence_depths: List[int] = field(default_factory=lambda: list(config.DECOHERENCE_DEPTHS))
    rpe_max_exponent: int = config.RPE_MAX_EXPONENT
    shots: Dict[str, int] = field(default_factory=lambda: {
        'decoherence': config.SHOTS_DECOHERENCE,
        'rpe': config.SHOTS_RPE,
        'readout': config.SHOTS_READOUT,
        'cz': config.SHOTS_CZ,
    })
    seed: int = config.MASTER_SEED
    output_dir: str = config.OUTPUT_DIR
    cz_enabled: bool = config.CZ_ENABLED
    cz_phase_max_exponent: int = config.CZ_PHASE_MAX_EXPONENT
    cz_decay_depths: List[int] = field(default_factory=lambda: list(config.CZ_DECAY_DEPTHS))
    pstar: float = config.PSTAR

    def validate(self):
        if any(d <= 0 or d % 2 for d in self.decoherence_depths):
            raise ConfigError(f"decoherence_depths must be even positive integers: {self.decoherence_depths}")
        if self.rpe_max_exponent < 0:
            raise ConfigError("rpe_max_exponent must be nonnegative")
        if any(n < 1 for n in self.shots.values()):
            raise ConfigError(f"Shot counts must be at least 1: {self.shots}")
        if not 0 < self.pstar < 0.5:
            raise ConfigError(f"pstar must lie in (0, 0.5), got {self.pstar}")
        if self.cz_enabled:
            if self.cz_phase_max_exponent < 1:
                raise ConfigError("cz.phase_max_exponent must be at least 1")
            if len(set(self.cz_decay_depths)) < config.FIT_MIN_DEPTHS or min(self.cz_decay_depths) < 1:
                raise ConfigError(f"cz.decay_depths needs {config.FIT_MIN_DEPTHS} distinct positive depths")
            if self.model.cz is None:
                raise ConfigError("CZ characterization is enabled but the model has no cz parameters")

    def families(self) -> List[CircuitFamily]:
        return standard_families(
            self.decoherence_depths,
            self.rpe_max_exponent,
            cz_enabled=self.cz_enabled,
            cz_phase_max_exponent=self.cz_phase_max_exponent,
            cz_decay_depths=self.cz_decay_depths,
        )

    def override(self, seed: Optional[int] = None, shots: Optional[int] = None,
                 output_dir: Optional[str] = None, pstar: Optional[float] = None) -> 'RunConfig':
        """Apply command-line overrides; --shots applies to every circuit class"""
        if seed is not None:
            self.seed = seed
        if shots is not None:
            self.shots = {name: shots for name in self.shots}
        if output_dir is not None:
            self.output_dir = output_dir
        if pstar is not None:
            self.pstar = pstar
        self.validate()
        return self


_CONFIG_KEYS = {'model', 'decoherence_depths', 'rpe_max_exponent', 'shots', 'seed', 'output_dir', 'cz', 'pstar'}
_SHOT_KEYS = {'decoherence', 'rpe', 'readout', 'cz'}
_CZ_KEYS = {'enabled', 'phase_max_exponent', 'decay_depths'}


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Merge a JSON run configuration over the defaults

    Args:
        path: JSON file, or None for the defaults alone

    Returns:
        Validated RunConfig
    """
    run = RunConfig()
    if path is None:
        run.validate()
        return run
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (IOError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read run configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Run configuration must be a JSON object")

    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")

    cz_section = data.get('cz', {})
    if set(cz_section) - _CZ_KEYS:
        raise ConfigError(f"Unknown cz keys: {sorted(set(cz_section) - _CZ_KEYS)}")
    shots = data.get('shots', {})
    if set(shots) - _SHOT_KEYS:
        raise ConfigError(f"Unknown shots keys: {sorted(set(shots) - _SHOT_KEYS)}")

    try:
        if 'model' in data:
            run.model = GatesetModel.from_dict(data['model'])
        run.decoherence_depths = [int(m) for m in data.get('decoherence_depths', run.decoherence_depths)]
        run.rpe_max_exponent = int(data.get('rpe_max_exponent', run.rpe_max_exponent))
        run.shots.update({k: int(v) for k, v in shots.items()})
        run.seed = int(data.get('seed', run.seed))
        run.output_dir = str(data.get('output_dir', run.output_dir))
        run.pstar = float(data.get('pstar', run.pstar))
        run.cz_enabled = bool(cz_section.get('enabled', run.cz_enabled))
        run.cz_phase_max_exponent = int(cz_section.get('phase_max_exponent', run.cz_phase_max_exponent))
        run.cz_decay_depths = [int(d) for d in cz_section.get('decay_depths', run.cz_decay_depths)]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value in {path}: {e}") from e

    if run.cz_enabled and run.model.cz is None:
        run.model = run.model.with_cz_defaults()
    run.validate()
    logger.info(f"Loaded run configuration from {path}")
    return run


def load_model(path: str) -> GatesetModel:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (IOError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read model file {path}: {e}") from e
    # accept either a bare model or a report section wrapping one
    if 'model' in data and isinstance(data['model'], dict):
        data = data['model']
    return GatesetModel.from_dict(data)
