"""
Gateset Noise Model
Parameterized single-qubit gateset (X90 with over-rotation, axis tilt and
decoherence, ideal Z rotations, asymmetric readout) and the optional CZ gate,
plus circuit labels and a caching circuit evaluator
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from ptm_core import (
    MalformedCircuitError,
    MissingParametersError,
    ModelValidationError,
    PauliTransferMatrix,
    PauliVector,
    Povm,
    anticommutes,
    clamp_probability,
    compose_sequence,
    pauli_labels,
    ptm_from_unitary,
    zero_state,
)

logger = logging.getLogger(__name__)


ONE_QUBIT_PARAMETERS = ('epsilon', 'theta', 'p_x', 'p_z', 'r_01', 'r_10')
CZ_PARAMETERS = ('alpha', 'beta', 'p_iz', 'p_zi', 'p_zz')
ANGLE_PARAMETERS = ('epsilon', 'theta', 'alpha', 'beta')


@dataclass(frozen=True)
class CzParameters:
    """CZ phase errors and Z-type stochastic Pauli error rates"""
    alpha: float = 0.0
    beta: float = 0.0
    p_iz: float = 0.0
    p_zi: float = 0.0
    p_zz: float = 0.0

    def __post_init__(self):
        for name in ('p_iz', 'p_zi', 'p_zz'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ModelValidationError(f"CZ error rate {name}={value} outside [0, 1]")
        if self.p_iz + self.p_zi + self.p_zz > 1.0:
            raise ModelValidationError("CZ error rates sum to more than 1")
        for name in ('alpha', 'beta'):
            if not math.isfinite(getattr(self, name)):
                raise ModelValidationError(f"CZ phase {name} is not finite")

    @classmethod
    def reference(cls) -> 'CzParameters':
        return cls(
            alpha=config.DEFAULT_CZ_ALPHA,
            beta=config.DEFAULT_CZ_BETA,
            p_iz=config.DEFAULT_CZ_P_IZ,
            p_zi=config.DEFAULT_CZ_P_ZI,
            p_zz=config.DEFAULT_CZ_P_ZZ,
        )


@dataclass(frozen=True)
class GatesetModel:
    """
    Complete error model of the gateset

    epsilon: X90 rotates by (1 + epsilon) * pi / 2
    theta: X90 axis is (cos theta, 0, sin theta)
    p_x, p_z: decoherence channel applied after the X90 rotation
    r_01, r_10: Pr(read 1 | state 0), Pr(read 0 | state 1)
    cz: optional CZ parameters
    """
    epsilon: float = 0.0
    theta: float = 0.0
    p_x: float = 0.0
    p_z: float = 0.0
    r_01: float = 0.0
    r_10: float = 0.0
    cz: Optional[CzParameters] = None

    def __post_init__(self):
        if not abs(self.epsilon) < 1.0:
            raise ModelValidationError(f"epsilon={self.epsilon} outside (-1, 1)")
        if not abs(self.theta) < math.pi / 2:
            raise ModelValidationError(f"theta={self.theta} outside (-pi/2, pi/2)")
        for name in ('p_x', 'p_z', 'r_01', 'r_10'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ModelValidationError(f"{name}={value} outside [0, 1]")
        if self.p_x + self.p_z > 1.0:
            raise ModelValidationError(f"p_x + p_z = {self.p_x + self.p_z} exceeds 1")
        if self.r_01 + self.r_10 > 1.0:
            raise ModelValidationError(f"r_01 + r_10 = {self.r_01 + self.r_10} exceeds 1")

    @classmethod
    def ideal(cls, with_cz: bool = False) -> 'GatesetModel':
        return cls(cz=CzParameters() if with_cz else None)

    @classmethod
    def reference(cls, with_cz: bool = False) -> 'GatesetModel':
        """Defaults of the reference simulated experiment"""
        return cls(
            epsilon=config.DEFAULT_EPSILON,
            theta=config.DEFAULT_THETA,
            p_x=config.DEFAULT_P_X,
            p_z=config.DEFAULT_P_Z,
            r_01=config.DEFAULT_R_01,
            r_10=config.DEFAULT_R_10,
            cz=CzParameters.reference() if with_cz else None,
        )

    def with_cz_defaults(self) -> 'GatesetModel':
        return replace(self, cz=CzParameters.reference())

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return ONE_QUBIT_PARAMETERS + (CZ_PARAMETERS if self.cz is not None else ())

    def get(self, name: str) -> float:
        if name in ONE_QUBIT_PARAMETERS:
            return getattr(self, name)
        if name in CZ_PARAMETERS:
            if self.cz is None:
                raise MissingParametersError(f"Model has no CZ parameters, cannot read {name}")
            return getattr(self.cz, name)
        raise KeyError(f"Unknown model parameter {name!r}")

    def with_parameters(self, **updates: float) -> 'GatesetModel':
        """Copy with some parameters replaced (validated again)"""
        one_qubit = {k: float(v) for k, v in updates.items() if k in ONE_QUBIT_PARAMETERS}
        two_qubit = {k: float(v) for k, v in updates.items() if k in CZ_PARAMETERS}
        unknown = set(updates) - set(one_qubit) - set(two_qubit)
        if unknown:
            raise KeyError(f"Unknown model parameter(s): {sorted(unknown)}")
        cz = self.cz
        if two_qubit:
            if cz is None:
                raise MissingParametersError("Model has no CZ parameters to update")
            cz = replace(cz, **two_qubit)
        return replace(self, cz=cz, **one_qubit)

    def to_dict(self) -> Dict:
        data = {name: getattr(self, name) for name in ONE_QUBIT_PARAMETERS}
        data['cz'] = asdict(self.cz) if self.cz is not None else None
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'GatesetModel':
        allowed = set(ONE_QUBIT_PARAMETERS) | {'cz'}
        unknown = set(data) - allowed
        if unknown:
            raise ModelValidationError(f"Unknown model keys: {sorted(unknown)}")
        cz_data = data.get('cz')
        if cz_data is not None:
            unknown_cz = set(cz_data) - set(CZ_PARAMETERS)
            if unknown_cz:
                raise ModelValidationError(f"Unknown CZ keys: {sorted(unknown_cz)}")
            cz = CzParameters(**{k: float(v) for k, v in cz_data.items()})
        else:
            cz = None
        values = {k: float(v) for k, v in data.items() if k in ONE_QUBIT_PARAMETERS}
        return cls(cz=cz, **values)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> 'GatesetModel':
        return cls.from_dict(json.loads(text))


# Gate labels

X90 = 'X90'
ZROT = 'Zrot'
CZ = 'CZ'
PREP_Z = 'PrepZ'
PREP_X = 'PrepX'
MEAS_Z = 'MeasZ'
MEAS_X = 'MeasX'

PREPARATIONS = (PREP_Z, PREP_X)
MEASUREMENTS = (MEAS_Z, MEAS_X)
GATE_NAMES = (X90, ZROT, CZ) + PREPARATIONS + MEASUREMENTS


@dataclass(frozen=True)
class GateLabel:
    name: str
    qubits: Tuple[int, ...] = (0,)
    angle: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise MalformedCircuitError(f"Unknown gate {self.name!r}")
        if self.sign not in (1, -1):
            raise MalformedCircuitError(f"Gate sign must be +1 or -1, got {self.sign}")
        expected = 2 if self.name == CZ else 1
        if len(self.qubits) != expected or len(set(self.qubits)) != expected:
            raise MalformedCircuitError(f"{self.name} needs {expected} distinct qubit(s), got {self.qubits}")

    def to_dict(self) -> Dict:
        data = {'gate': self.name, 'qubits': list(self.qubits)}
        if self.name == ZROT:
            data['angle'] = self.angle
        if self.name in PREPARATIONS:
            data['sign'] = self.sign
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'GateLabel':
        return cls(
            name=data['gate'],
            qubits=tuple(data.get('qubits', (0,))),
            angle=float(data.get('angle', 0.0)),
            sign=int(data.get('sign', 1)),
        )


def x90(qubit: int = 0) -> GateLabel:
    return GateLabel(X90, (qubit,))


def zrot(angle: float, qubit: int = 0) -> GateLabel:
    return GateLabel(ZROT, (qubit,), angle=float(angle))


def cz(control: int = 0, target: int = 1) -> GateLabel:
    return GateLabel(CZ, (control, target))


def prep_z(sign: int = 1, qubit: int = 0) -> GateLabel:
    return GateLabel(PREP_Z, (qubit,), sign=sign)


def prep_x(sign: int = 1, qubit: int = 0) -> GateLabel:
    return GateLabel(PREP_X, (qubit,), sign=sign)


def meas_z(qubit: int = 0) -> GateLabel:
    return GateLabel(MEAS_Z, (qubit,))


def meas_x(qubit: int = 0) -> GateLabel:
    return GateLabel(MEAS_X, (qubit,))


def hadamard_labels(qubit: int = 0) -> Tuple[GateLabel, ...]:
    """Hadamard (up to global phase) compiled as Zrot(pi/2) X90 Zrot(pi/2)"""
    return (zrot(math.pi / 2, qubit), x90(qubit), zrot(math.pi / 2, qubit))


def x180_labels(qubit: int = 0) -> Tuple[GateLabel, ...]:
    return (x90(qubit), x90(qubit))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate labels; first applied first"""
    gates: Tuple[GateLabel, ...]
    qubit_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'gates', tuple(self.gates))
        if self.qubit_count not in (1, 2):
            raise MalformedCircuitError(f"Unsupported qubit count {self.qubit_count}")
        for qubit in range(self.qubit_count):
            on_qubit = [g for g in self.gates if qubit in g.qubits]
            if not on_qubit or on_qubit[0].name not in PREPARATIONS:
                raise MalformedCircuitError(f"Qubit {qubit} must start with a preparation")
            if on_qubit[-1].name not in MEASUREMENTS:
                raise MalformedCircuitError(f"Qubit {qubit} must end with a measurement")
            if sum(1 for g in on_qubit if g.name in PREPARATIONS) != 1:
                raise MalformedCircuitError(f"Qubit {qubit} has more than one preparation")
            if sum(1 for g in on_qubit if g.name in MEASUREMENTS) != 1:
                raise MalformedCircuitError(f"Qubit {qubit} has more than one measurement")
        for gate in self.gates:
            if any(q < 0 or q >= self.qubit_count for q in gate.qubits):
                raise MalformedCircuitError(f"{gate.name} acts on {gate.qubits} in a {self.qubit_count}-qubit circuit")

    def to_list(self) -> List[Dict]:
        return [g.to_dict() for g in self.gates]


def _expand(gate: GateLabel) -> Tuple[GateLabel, ...]:
    """Rewrite preparations and measurements in terms of PrepZ(+1), MeasZ and gates"""
    q = gate.qubits[0]
    if gate.name == PREP_Z:
        return () if gate.sign == 1 else x180_labels(q)
    if gate.name == PREP_X:
        return (x90(q), zrot(gate.sign * math.pi / 2, q))
    if gate.name == MEAS_Z:
        return ()
    if gate.name == MEAS_X:
        return (zrot(math.pi / 2, q), x90(q))
    return (gate,)


@lru_cache(maxsize=4096)
def compile_circuit(circuit: Circuit) -> Tuple[Tuple[GateLabel, int], ...]:
    """
    Gates between the implicit |0...0> preparation and Z readout, run-length encoded

    Returns:
        Tuple of (gate, repeat count) in application order
    """
    runs: List[List] = []
    for gate in circuit.gates:
        for primitive in _expand(gate):
            if runs and runs[-1][0] == primitive:
                runs[-1][1] += 1
            else:
                runs.append([primitive, 1])
    return tuple((gate, count) for gate, count in runs)


# Channels

def rotation_unitary(angle: float, axis: Sequence[float]) -> np.ndarray:
    """exp(-i angle/2 n.sigma) for a unit axis n"""
    nx, ny, nz = axis
    generator = np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]], dtype=complex)
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * generator


def stochastic_pauli_ptm(probabilities: Dict[str, float], qubit_count: int = 1) -> PauliTransferMatrix:
    """
    Diagonal PTM of rho -> (1 - sum p) rho + sum_P p_P P rho P

    Args:
        probabilities: non-identity Pauli label -> probability
        qubit_count: 1 or 2

    Returns:
        PTM with R_QQ = 1 - 2 * (sum of p_P over P anticommuting with Q)
    """
    labels = pauli_labels(qubit_count)
    for label, p in probabilities.items():
        if label not in labels or label == 'I' * qubit_count:
            raise ModelValidationError(f"Invalid Pauli error label {label!r}")
        if p < 0:
            raise ModelValidationError(f"Negative Pauli error probability {label}={p}")
    if sum(probabilities.values()) > 1.0 + config.PROBABILITY_TOLERANCE:
        raise ModelValidationError("Pauli error probabilities sum to more than 1")
    diagonal = [
        1.0 - 2.0 * sum(p for label, p in probabilities.items() if anticommutes(label, q))
        for q in labels
    ]
    return PauliTransferMatrix(np.diag(diagonal), qubit_count)


def decoherence_ptm(p_x: float, p_z: float) -> PauliTransferMatrix:
    """diag(1, 1 - p_z, 1 - p_x - p_z, 1 - p_x)"""
    return stochastic_pauli_ptm({'X': p_x / 2, 'Z': p_z / 2})


def x90_unitary(model: GatesetModel) -> np.ndarray:
    axis = (math.cos(model.theta), 0.0, math.sin(model.theta))
    return rotation_unitary((1 + model.epsilon) * math.pi / 2, axis)


def x90_ptm(model: GatesetModel) -> PauliTransferMatrix:
    """Noisy X90: over-rotated, tilted rotation followed by decoherence"""
    return decoherence_ptm(model.p_x, model.p_z).compose(ptm_from_unitary(x90_unitary(model)))


def zrot_ptm(angle: float) -> PauliTransferMatrix:
    """Ideal rotation by `angle` about z"""
    return ptm_from_unitary(np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)]))


def cz_unitary(alpha: float, beta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * alpha), np.exp(1j * alpha), np.exp(1j * (math.pi + beta))])


def cz_ptm(model: GatesetModel) -> PauliTransferMatrix:
    """Phase-error CZ followed by the IZ/ZI/ZZ stochastic channel"""
    if model.cz is None:
        raise MissingParametersError("Model has no CZ parameters")
    p = model.cz
    noise = stochastic_pauli_ptm({'IZ': p.p_iz, 'ZI': p.p_zi, 'ZZ': p.p_zz}, qubit_count=2)
    return noise.compose(ptm_from_unitary(cz_unitary(p.alpha, p.beta)))


def readout_povm(model: GatesetModel) -> Povm:
    """Asymmetric readout; effect_zero = (1 - r_01)|0><0| + r_10 |1><1|"""
    zero = PauliVector(np.array([
        (1 - model.r_01 + model.r_10) / 2, 0.0, 0.0, (1 - model.r_01 - model.r_10) / 2,
    ]))
    one = PauliVector(np.array([1.0, 0.0, 0.0, 0.0]) - zero.coeffs)
    return Povm(zero, one)


def joint_effects(model: GatesetModel, qubit_count: int) -> np.ndarray:
    """Rows are effect coefficients for outcomes 0, 1 (or 00, 01, 10, 11)"""
    povm = readout_povm(model)
    single = [povm.effect_zero.coeffs, povm.effect_one.coeffs]
    if qubit_count == 1:
        return np.array(single)
    return np.array([np.kron(a, b) for a in single for b in single])


def echo_sequence_ptm(model: GatesetModel, m: int) -> PauliTransferMatrix:
    """X90^m, Z180, X90^m, Z180 composed in that order"""
    if m < 1:
        raise ValueError(f"Echo depth must be positive, got {m}")
    block = x90_ptm(model).power(m)
    z180 = zrot_ptm(math.pi)
    return compose_sequence([block, z180, block, z180])


def average_gate_fidelity(model: GatesetModel) -> float:
    """Average gate fidelity of the modelled X90 against the ideal X90"""
    ideal = x90_ptm(GatesetModel.ideal()).entries
    actual = x90_ptm(model).entries
    d = 2
    process_fidelity = np.trace(ideal.T @ actual) / d ** 2
    return float((d * process_fidelity + 1) / (d + 1))


def _embed(matrix: np.ndarray, qubit: int, qubit_count: int) -> np.ndarray:
    if qubit_count == 1:
        return matrix
    return np.kron(matrix, np.eye(4)) if qubit == 0 else np.kron(np.eye(4), matrix)


class CircuitEvaluator:
    """
    Exact outcome probabilities of circuits under one model

    Gate PTMs and their powers are cached; an evaluator is tied to a single
    model and is not shared between threads.
    """

    def __init__(self, model: GatesetModel):
        self.model = model
        self._x90 = x90_ptm(model).entries
        self._cz = cz_ptm(model).entries if model.cz is not None else None
        self._powers: Dict[Tuple[GateLabel, int, int], np.ndarray] = {}
        self._effects = {n: joint_effects(model, n) for n in (1, 2)}

    def _gate_matrix(self, gate: GateLabel, qubit_count: int) -> np.ndarray:
        if gate.name == X90:
            return _embed(self._x90, gate.qubits[0], qubit_count)
        if gate.name == ZROT:
            return _embed(zrot_ptm(gate.angle).entries, gate.qubits[0], qubit_count)
        if gate.name == CZ:
            if self._cz is None:
                raise MissingParametersError("Circuit uses CZ but the model has no CZ parameters")
            # the CZ PTM is symmetric under swapping control and target
            return self._cz
        raise MalformedCircuitError(f"{gate.name} cannot appear inside a compiled circuit")

    def _run_matrix(self, gate: GateLabel, count: int, qubit_count: int) -> np.ndarray:
        key = (gate, count, qubit_count)
        matrix = self._powers.get(key)
        if matrix is None:
            matrix = np.linalg.matrix_power(self._gate_matrix(gate, qubit_count), count)
            self._powers[key] = matrix
        return matrix

    def channel(self, circuit: Circuit) -> PauliTransferMatrix:
        """Full PTM between preparation and readout"""
        entries = np.eye(4 ** circuit.qubit_count)
        for gate, count in compile_circuit(circuit):
            entries = self._run_matrix(gate, count, circuit.qubit_count) @ entries
        return PauliTransferMatrix(entries, circuit.qubit_count)

    def outcome_probabilities(self, circuit: Circuit) -> np.ndarray:
        """Probabilities of all outcomes, ordered 0, 1 or 00, 01, 10, 11"""
        state = zero_state(circuit.qubit_count).coeffs
        for gate, count in compile_circuit(circuit):
            state = self._run_matrix(gate, count, circuit.qubit_count) @ state
        raw = self._effects[circuit.qubit_count] @ state
        return np.array([clamp_probability(p) for p in raw])

    def probability(self, circuit: Circuit):
        """Pr(outcome 0) for one qubit, the joint distribution for two"""
        probs = self.outcome_probabilities(circuit)
        return float(probs[0]) if circuit.qubit_count == 1 else probs


def circuit_probability(model: GatesetModel, circuit: Circuit):
    return CircuitEvaluator(model).probability(circuit)
