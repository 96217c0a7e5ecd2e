"""
Characterization Circuit Families
Builds the decoherence, RPE, readout and CZ circuit families with stable
ids of the form "<kind>/<index>/<sign>"
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from noise_model import (
    Circuit,
    CircuitEvaluator,
    GateLabel,
    cz,
    hadamard_labels,
    meas_x,
    meas_z,
    prep_x,
    prep_z,
    x180_labels,
    x90,
    zrot,
)
from ptm_core import InvalidDepthError, MalformedCircuitError, UnknownCircuitError

logger = logging.getLogger(__name__)


class CircuitKind(str, Enum):
    DECOHERENCE_X = 'DecoherenceX'
    DECOHERENCE_Z = 'DecoherenceZ'
    RPE_AMPLITUDE = 'RpeAmplitude'
    RPE_AXIS = 'RpeAxis'
    READOUT_ZERO = 'ReadoutZero'
    READOUT_PI = 'ReadoutPi'
    CZ_PHASE_A = 'CzPhaseA'
    CZ_PHASE_B = 'CzPhaseB'
    CZ_BETA = 'CzBeta'
    CZ_DECAY_BELL = 'CzDecayBell'
    CZ_DECAY_PLUS = 'CzDecayPlus'


DECOHERENCE_KINDS = (CircuitKind.DECOHERENCE_X, CircuitKind.DECOHERENCE_Z)
RPE_KINDS = (CircuitKind.RPE_AMPLITUDE, CircuitKind.RPE_AXIS)
READOUT_KINDS = (CircuitKind.READOUT_ZERO, CircuitKind.READOUT_PI)
CZ_PHASE_KINDS = (CircuitKind.CZ_PHASE_A, CircuitKind.CZ_PHASE_B, CircuitKind.CZ_BETA)
CZ_DECAY_KINDS = (CircuitKind.CZ_DECAY_BELL, CircuitKind.CZ_DECAY_PLUS)

# joint outcome indices (00, 01, 10, 11) counted as success
TARGET_ZERO_OUTCOMES = (0, 2)
BOTH_ZERO_OUTCOMES = (0,)


@dataclass(frozen=True)
class CircuitFamily:
    """
    One member of a circuit family

    index is the depth m for decoherence and CZ decay circuits and the
    exponent k for RPE and CZ phase circuits. sign is the eigenvalue sign
    for decoherence circuits, +1 cosine / -1 sine for RPE, and the A / B
    quadrature for CzBeta.
    """
    kind: CircuitKind
    index: int
    sign: int
    circuit: Circuit
    success_outcomes: Tuple[int, ...] = (0,)

    @property
    def id(self) -> str:
        return format_circuit_id(self.kind, self.index, self.sign)

    @property
    def qubit_count(self) -> int:
        return self.circuit.qubit_count

    def to_dict(self) -> Dict:
        return {
            'id': self.id,
            'kind': self.kind.value,
            'params': {'index': self.index, 'sign': self.sign},
            'gates': self.circuit.to_list(),
        }


def format_circuit_id(kind: CircuitKind, index: int, sign: int) -> str:
    return f"{CircuitKind(kind).value}/{index}/{sign:+d}"


def parse_circuit_id(circuit_id: str) -> Tuple[CircuitKind, int, int]:
    try:
        kind, index, sign = circuit_id.split('/')
        return CircuitKind(kind), int(index), int(sign)
    except ValueError as e:
        raise UnknownCircuitError(f"Malformed circuit id {circuit_id!r}") from e


def _repeat(gates: Sequence[GateLabel], times: int) -> List[GateLabel]:
    return list(gates) * times


# Builders, one per kind; each returns the gate list for (index, sign)

def _decoherence(basis: str, m: int, sign: int) -> Circuit:
    if m <= 0 or m % 2:
        raise InvalidDepthError(f"Decoherence depth must be even and positive, got {m}")
    prep, meas = (prep_x, meas_x) if basis == 'X' else (prep_z, meas_z)
    block = _repeat([x90()], m) + [zrot(math.pi)]
    return Circuit(tuple([prep(sign)] + block + block + [meas()]))


def _rpe_amplitude(k: int, sign: int) -> Circuit:
    length = 2 ** k
    # the sine quadrature adds one more X90, a quarter turn past the cosine one
    count = length if sign == 1 else length + 1
    return Circuit(tuple([prep_z()] + _repeat([x90()], count) + [meas_z()]))


def _rpe_axis(k: int, sign: int) -> Circuit:
    length = 2 ** k
    unit = [x90(), zrot(math.pi), x90(), zrot(math.pi)]
    return Circuit(tuple([prep_z()] + _repeat(unit, length) + [meas_z() if sign == 1 else meas_x()]))


def _readout(kind: CircuitKind) -> Circuit:
    middle = list(x180_labels()) if kind == CircuitKind.READOUT_PI else []
    return Circuit(tuple([prep_z()] + middle + [meas_z()]))


def _cz_phase(k: int, control_sign: int, shifted: bool) -> Circuit:
    """Target in |+>, 2^k CZs, back through H; `shifted` adds a quarter-turn on the target"""
    gates = [prep_z(control_sign, 0), prep_z(1, 1)]
    gates += hadamard_labels(1)
    if shifted:
        gates.append(zrot(math.pi / 2, 1))
    gates += [cz()] * (2 ** k)
    gates += hadamard_labels(1)
    gates += [meas_z(0), meas_z(1)]
    return Circuit(tuple(gates), qubit_count=2)


def _cz_decay_bell(depth: int) -> Circuit:
    prep = list(hadamard_labels(0)) + list(hadamard_labels(1)) + [cz()] + list(hadamard_labels(1))
    unprep = list(hadamard_labels(1)) + [cz()] + list(hadamard_labels(1)) + list(hadamard_labels(0))
    echo = list(x180_labels(0)) + list(x180_labels(1))
    gates = [prep_z(1, 0), prep_z(1, 1)] + prep + [cz()] * depth + echo + [cz()] * depth + unprep
    return Circuit(tuple(gates + [meas_z(0), meas_z(1)]), qubit_count=2)


def _cz_decay_plus(depth: int) -> Circuit:
    gates = [prep_z(1, 0), prep_z(1, 1)] + list(hadamard_labels(0))
    gates += [cz()] * depth + list(x180_labels(0)) + [cz()] * depth
    gates += list(hadamard_labels(0)) + [meas_z(0), meas_z(1)]
    return Circuit(tuple(gates), qubit_count=2)


@lru_cache(maxsize=None)
def build_family(kind: CircuitKind, index: int, sign: int) -> CircuitFamily:
    """
    Construct one family member from its (kind, index, sign) key

    Args:
        kind: circuit kind
        index: depth m or exponent k
        sign: +1 or -1

    Returns:
        CircuitFamily with a well-formed circuit
    """
    kind = CircuitKind(kind)
    if sign not in (1, -1):
        raise UnknownCircuitError(f"Sign must be +1 or -1, got {sign}")
    success = (0,)
    if kind in DECOHERENCE_KINDS:
        circuit = _decoherence('X' if kind == CircuitKind.DECOHERENCE_X else 'Z', index, sign)
    elif kind in RPE_KINDS:
        if index < 0:
            raise InvalidDepthError(f"RPE exponent must be nonnegative, got {index}")
        circuit = (_rpe_amplitude if kind == CircuitKind.RPE_AMPLITUDE else _rpe_axis)(index, sign)
    elif kind in READOUT_KINDS:
        if index != 0 or sign != 1:
            raise UnknownCircuitError(f"Readout circuits only exist as index 0, sign +1")
        circuit = _readout(kind)
    elif kind in CZ_PHASE_KINDS:
        if index < 1:
            raise InvalidDepthError(f"CZ phase exponent must be at least 1, got {index}")
        if kind == CircuitKind.CZ_BETA:
            circuit = _cz_phase(index, control_sign=-1, shifted=(sign == -1))
        else:
            if sign != 1:
                raise UnknownCircuitError(f"{kind.value} circuits only exist with sign +1")
            circuit = _cz_phase(index, control_sign=1, shifted=(kind == CircuitKind.CZ_PHASE_B))
        success = TARGET_ZERO_OUTCOMES
    else:
        if index < 1:
            raise InvalidDepthError(f"CZ decay depth must be positive, got {index}")
        if sign != 1:
            raise UnknownCircuitError(f"{kind.value} circuits only exist with sign +1")
        circuit = _cz_decay_bell(index) if kind == CircuitKind.CZ_DECAY_BELL else _cz_decay_plus(index)
        success = BOTH_ZERO_OUTCOMES
    return CircuitFamily(kind, index, sign, circuit, success)


def family_from_id(circuit_id: str) -> CircuitFamily:
    """Regenerate the family member named by a circuit id"""
    kind, index, sign = parse_circuit_id(circuit_id)
    try:
        return build_family(kind, index, sign)
    except (InvalidDepthError, MalformedCircuitError) as e:
        raise UnknownCircuitError(f"Circuit id {circuit_id!r} does not name a valid circuit: {e}") from e


def decoherence_circuits(ms: Iterable[int]) -> List[CircuitFamily]:
    """4 circuits per depth: basis X then Z, each depth, sign +1 then -1"""
    ms = list(ms)
    for m in ms:
        if not isinstance(m, (int, np.integer)) or m <= 0 or m % 2:
            raise InvalidDepthError(f"Decoherence depths must be even positive integers, got {m!r}")
    return [
        build_family(kind, int(m), sign)
        for kind in DECOHERENCE_KINDS
        for m in ms
        for sign in (1, -1)
    ]


def decoherence_circuits_any_parity(ms: Iterable[int]) -> List[CircuitFamily]:
    """
    Echo families that also accept odd depths

    For odd m the echo leaves a residual quarter turn, which exposes the
    first-order pulse-area sensitivity. Odd-depth members have no dataset
    id resolution and are evaluated directly.
    """
    families = []
    for kind in DECOHERENCE_KINDS:
        basis = 'X' if kind == CircuitKind.DECOHERENCE_X else 'Z'
        prep, meas = (prep_x, meas_x) if basis == 'X' else (prep_z, meas_z)
        for m in ms:
            if m <= 0:
                raise InvalidDepthError(f"Echo depth must be positive, got {m}")
            if m % 2 == 0:
                families.extend(build_family(kind, m, s) for s in (1, -1))
                continue
            block = _repeat([x90()], m) + [zrot(math.pi)]
            for sign in (1, -1):
                circuit = Circuit(tuple([prep(sign)] + block + block + [meas()]))
                families.append(CircuitFamily(kind, m, sign, circuit))
    return families


def rpe_circuits(max_depth_exponent: int) -> List[CircuitFamily]:
    """Cosine and sine circuits of both RPE families for depths 2^0 .. 2^K"""
    if max_depth_exponent < 0:
        raise InvalidDepthError(f"RPE exponent must be nonnegative, got {max_depth_exponent}")
    return [
        build_family(kind, k, sign)
        for k in range(max_depth_exponent + 1)
        for kind in RPE_KINDS
        for sign in (1, -1)
    ]


def readout_circuits() -> List[CircuitFamily]:
    return [build_family(kind, 0, 1) for kind in READOUT_KINDS]


def cz_phase_circuits(max_depth_exponent: int) -> List[CircuitFamily]:
    """A, B and both Beta quadratures for CZ depths 2^1 .. 2^K"""
    if max_depth_exponent < 1:
        raise InvalidDepthError(f"CZ phase exponent must be at least 1, got {max_depth_exponent}")
    families = []
    for k in range(1, max_depth_exponent + 1):
        families.append(build_family(CircuitKind.CZ_PHASE_A, k, 1))
        families.append(build_family(CircuitKind.CZ_PHASE_B, k, 1))
        families.append(build_family(CircuitKind.CZ_BETA, k, 1))
        families.append(build_family(CircuitKind.CZ_BETA, k, -1))
    return families


def cz_decay_circuits(depths: Iterable[int]) -> List[CircuitFamily]:
    depths = list(depths)
    for d in depths:
        if d <= 0:
            raise InvalidDepthError(f"CZ decay depths must be positive, got {d}")
    return [build_family(kind, int(d), 1) for kind in CZ_DECAY_KINDS for d in depths]


def standard_families(decoherence_depths: Sequence[int], rpe_max_exponent: int,
                      cz_enabled: bool = False, cz_phase_max_exponent: int = 0,
                      cz_decay_depths: Sequence[int] = ()) -> List[CircuitFamily]:
    """Every family a characterization run needs, in a fixed order"""
    families = decoherence_circuits(decoherence_depths)
    families += rpe_circuits(rpe_max_exponent)
    families += readout_circuits()
    if cz_enabled:
        families += cz_phase_circuits(cz_phase_max_exponent)
        families += cz_decay_circuits(cz_decay_depths)
    logger.debug(f"Generated {len(families)} circuits")
    return families


def success_probability(evaluator: CircuitEvaluator, family: CircuitFamily) -> float:
    """Probability of the family's success outcome (outcome 0 for one qubit)"""
    probs = evaluator.outcome_probabilities(family.circuit)
    return float(sum(probs[i] for i in family.success_outcomes))


def circuits_to_json(families: Sequence[CircuitFamily]) -> str:
    return json.dumps([f.to_dict() for f in families], indent=2)


def circuits_from_json(text: str) -> List[CircuitFamily]:
    """Families from a circuit list; gates are regenerated from the id and checked"""
    families = []
    for entry in json.loads(text):
        family = family_from_id(entry['id'])
        stored = [GateLabel.from_dict(g) for g in entry.get('gates', [])]
        if stored and tuple(stored) != family.circuit.gates:
            raise MalformedCircuitError(f"Stored gates for {entry['id']} do not match the family definition")
        families.append(family)
    return families
