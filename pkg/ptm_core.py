"""
Pauli Transfer Matrix Core
Dense PTM representation of states, channels and measurements,
exact outcome probabilities and seeded shot sampling

Conventions (fixed once for the whole toolkit):
- Pauli operators are ordered I, X, Y, Z for one qubit and lexicographically
  for two qubits (II, IX, IY, IZ, XI, ..., ZZ). The first letter acts on
  qubit 0, which is the most significant factor of every Kronecker product.
- The channel basis is the normalized Pauli basis P_i/sqrt(d), so a channel
  has PTM entries R_ij = Tr(P_i L(P_j)) / d with no further factors.
- A state is stored by its Pauli components Tr(P_i rho); coefficient 0 is
  the trace (1 for a normalized state). An effect is stored in the dual
  convention Tr(P_i E) / d. The outcome probability Tr(E L(rho)) is then the
  plain dot product effect . (R @ state).
"""

import hashlib
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Dict, List, Sequence, Tuple

import numpy as np

import config

logger = logging.getLogger(__name__)


class CharacterizationError(Exception):
    """Base class for every error raised by the toolkit"""


class UnitarityError(CharacterizationError, ValueError):
    """Matrix handed to a unitary constructor is not unitary"""


class DimensionMismatchError(CharacterizationError, ValueError):
    """Operands act on different numbers of qubits"""


class InvalidProbabilityError(CharacterizationError, ValueError):
    """Probability outside [0, 1] beyond the clamp tolerance"""


class ModelValidationError(CharacterizationError, ValueError):
    """Model parameters outside their physical range"""


class MalformedCircuitError(CharacterizationError, ValueError):
    """Circuit does not have one preparation first and one measurement last per qubit"""


class MissingParametersError(CharacterizationError, ValueError):
    """Circuit needs a gate the model does not define"""


class InvalidDepthError(CharacterizationError, ValueError):
    """Depth or exponent outside what a circuit family allows"""


class UnknownCircuitError(CharacterizationError, KeyError):
    """Circuit id does not name any known family member"""


class DatasetError(CharacterizationError, ValueError):
    """Dataset records are inconsistent or a required record is missing"""


class IdentifiabilityError(CharacterizationError, ValueError):
    """Data too flat to identify a decay rate"""


class NonConvergenceError(CharacterizationError, RuntimeError):
    """Iterative fit stopped without meeting its tolerance"""


class DomainError(CharacterizationError, ValueError):
    """Argument outside the domain of a closed-form expression"""


class PhaseEstimationError(CharacterizationError, ValueError):
    """Phase estimation data missing or unusable"""


class ConfigError(CharacterizationError, ValueError):
    """Run configuration is invalid"""


class ReportValidationError(CharacterizationError, ValueError):
    """Report does not match its JSON schema"""


PAULI_MATRICES: Dict[str, np.ndarray] = {
    'I': np.array([[1, 0], [0, 1]], dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

SUPPORTED_QUBIT_COUNTS = (1, 2)


def _check_qubit_count(qubit_count: int):
    if qubit_count not in SUPPORTED_QUBIT_COUNTS:
        raise DimensionMismatchError(f"Unsupported qubit count {qubit_count}, expected 1 or 2")


@lru_cache(maxsize=None)
def pauli_labels(qubit_count: int) -> Tuple[str, ...]:
    """Pauli labels in basis order, e.g. ('I', 'X', 'Y', 'Z')"""
    _check_qubit_count(qubit_count)
    return tuple(''.join(p) for p in itertools.product('IXYZ', repeat=qubit_count))


def pauli_operator(label: str) -> np.ndarray:
    """Matrix of a Pauli string such as 'XZ'"""
    return reduce(np.kron, [PAULI_MATRICES[c] for c in label])


@lru_cache(maxsize=None)
def _pauli_stack(qubit_count: int) -> np.ndarray:
    stack = np.array([pauli_operator(label) for label in pauli_labels(qubit_count)])
    stack.setflags(write=False)
    return stack


def anticommutes(label_a: str, label_b: str) -> bool:
    """True when two Pauli strings anticommute (odd number of clashing sites)"""
    if len(label_a) != len(label_b):
        raise DimensionMismatchError(f"Pauli strings {label_a!r} and {label_b!r} differ in length")
    clashes = sum(1 for a, b in zip(label_a, label_b) if a != 'I' and b != 'I' and a != b)
    return clashes % 2 == 1


def _frozen(array: np.ndarray) -> np.ndarray:
    frozen = np.array(array, dtype=float, copy=True)
    frozen.setflags(write=False)
    return frozen


@dataclass(frozen=True, eq=False)
class PauliVector:
    """Pauli-basis coefficients of a state (trace convention) or effect (dual convention)"""
    coeffs: np.ndarray
    qubit_count: int = 1

    def __post_init__(self):
        _check_qubit_count(self.qubit_count)
        coeffs = _frozen(self.coeffs)
        if coeffs.shape != (4 ** self.qubit_count,):
            raise DimensionMismatchError(
                f"PauliVector for {self.qubit_count} qubit(s) needs {4 ** self.qubit_count} "
                f"coefficients, got shape {coeffs.shape}"
            )
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def dimension(self) -> int:
        return 2 ** self.qubit_count

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray) -> 'PauliVector':
        rho = np.asarray(rho, dtype=complex)
        qubit_count = int(round(np.log2(rho.shape[0])))
        coeffs = np.einsum('iab,ba->i', _pauli_stack(qubit_count), rho).real
        return cls(coeffs, qubit_count)

    @classmethod
    def from_effect_matrix(cls, effect: np.ndarray) -> 'PauliVector':
        effect = np.asarray(effect, dtype=complex)
        qubit_count = int(round(np.log2(effect.shape[0])))
        coeffs = np.einsum('iab,ba->i', _pauli_stack(qubit_count), effect).real / effect.shape[0]
        return cls(coeffs, qubit_count)

    def to_density_matrix(self) -> np.ndarray:
        return np.einsum('i,iab->ab', self.coeffs, _pauli_stack(self.qubit_count)) / self.dimension

    def to_effect_matrix(self) -> np.ndarray:
        return np.einsum('i,iab->ab', self.coeffs, _pauli_stack(self.qubit_count))

    def tensor(self, other: 'PauliVector') -> 'PauliVector':
        return PauliVector(np.kron(self.coeffs, other.coeffs), self.qubit_count + other.qubit_count)

    def is_valid_state(self, tolerance: float = 1e-9) -> bool:
        """Unit trace, purity bound and positive spectrum"""
        if abs(self.coeffs[0] - 1.0) > tolerance:
            return False
        if np.sum(self.coeffs ** 2) > self.dimension * self.coeffs[0] ** 2 + tolerance:
            return False
        return bool(np.all(np.linalg.eigvalsh(self.to_density_matrix()) >= -tolerance))

    def is_valid_effect(self, tolerance: float = 1e-9) -> bool:
        eigenvalues = np.linalg.eigvalsh(self.to_effect_matrix())
        return bool(np.all(eigenvalues >= -tolerance) and np.all(eigenvalues <= 1 + tolerance))


def zero_state(qubit_count: int = 1) -> PauliVector:
    """|0...0> as a PauliVector"""
    single = np.array([1.0, 0.0, 0.0, 1.0])
    return PauliVector(reduce(np.kron, [single] * qubit_count), qubit_count)


def identity_effect(qubit_count: int = 1) -> PauliVector:
    coeffs = np.zeros(4 ** qubit_count)
    coeffs[0] = 1.0
    return PauliVector(coeffs, qubit_count)


@dataclass(frozen=True, eq=False)
class PauliTransferMatrix:
    """Real d^2 x d^2 matrix of a channel in the normalized Pauli basis"""
    entries: np.ndarray
    qubit_count: int = 1

    def __post_init__(self):
        _check_qubit_count(self.qubit_count)
        entries = _frozen(self.entries)
        size = 4 ** self.qubit_count
        if entries.shape != (size, size):
            raise DimensionMismatchError(
                f"PTM for {self.qubit_count} qubit(s) must be {size}x{size}, got {entries.shape}"
            )
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def identity(cls, qubit_count: int = 1) -> 'PauliTransferMatrix':
        return cls(np.eye(4 ** qubit_count), qubit_count)

    def _check_same_size(self, other):
        if other.qubit_count != self.qubit_count:
            raise DimensionMismatchError(
                f"Cannot combine {self.qubit_count}-qubit and {other.qubit_count}-qubit operands"
            )

    def compose(self, other: 'PauliTransferMatrix') -> 'PauliTransferMatrix':
        """Channel that applies `other` first, then `self`"""
        self._check_same_size(other)
        return PauliTransferMatrix(self.entries @ other.entries, self.qubit_count)

    __matmul__ = compose

    def apply(self, vector: PauliVector) -> PauliVector:
        self._check_same_size(vector)
        return PauliVector(self.entries @ vector.coeffs, self.qubit_count)

    def power(self, exponent: int) -> 'PauliTransferMatrix':
        return PauliTransferMatrix(np.linalg.matrix_power(self.entries, exponent), self.qubit_count)

    def tensor(self, other: 'PauliTransferMatrix') -> 'PauliTransferMatrix':
        return PauliTransferMatrix(np.kron(self.entries, other.entries), self.qubit_count + other.qubit_count)

    def is_trace_preserving(self, tolerance: float = 0.0) -> bool:
        expected = np.zeros(self.entries.shape[1])
        expected[0] = 1.0
        return bool(np.max(np.abs(self.entries[0] - expected)) <= tolerance)

    def is_orthogonal(self, tolerance: float = 1e-10) -> bool:
        gram = self.entries @ self.entries.T
        return bool(np.max(np.abs(gram - np.eye(gram.shape[0]))) <= tolerance)


@dataclass(frozen=True, eq=False)
class Povm:
    """Two-outcome measurement; effects in the dual convention"""
    effect_zero: PauliVector
    effect_one: PauliVector

    def __post_init__(self):
        if self.effect_zero.qubit_count != self.effect_one.qubit_count:
            raise DimensionMismatchError("POVM effects act on different numbers of qubits")

    def is_valid(self, tolerance: float = 1e-9) -> bool:
        total = self.effect_zero.coeffs + self.effect_one.coeffs
        completeness = np.max(np.abs(total - identity_effect(self.effect_zero.qubit_count).coeffs))
        return bool(
            completeness <= tolerance
            and self.effect_zero.is_valid_effect(tolerance)
            and self.effect_one.is_valid_effect(tolerance)
        )


def ptm_from_unitary(u: np.ndarray) -> PauliTransferMatrix:
    """
    PTM of the unitary channel rho -> u rho u^dagger

    Args:
        u: 2x2 or 4x4 complex matrix

    Returns:
        PauliTransferMatrix with R_ij = Tr(P_i u P_j u^dagger) / d
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] not in (2, 4):
        raise DimensionMismatchError(f"Unitary must be 2x2 or 4x4, got shape {u.shape}")
    deviation = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if deviation > config.UNITARITY_TOLERANCE:
        raise UnitarityError(f"Matrix is not unitary (max |u u^dag - I| = {deviation:.3e})")

    dim = u.shape[0]
    qubit_count = 1 if dim == 2 else 2
    paulis = _pauli_stack(qubit_count)
    conjugated = u @ paulis @ u.conj().T
    entries = np.einsum('iab,jba->ij', paulis, conjugated).real / dim

    # trace preservation and unitality are exact for unitary channels
    entries[0, :] = 0.0
    entries[:, 0] = 0.0
    entries[0, 0] = 1.0
    entries[np.abs(entries) < 1e-14] = 0.0
    return PauliTransferMatrix(entries, qubit_count)


def compose_sequence(channels: Sequence[PauliTransferMatrix]) -> PauliTransferMatrix:
    """
    Compose channels given in application order

    Args:
        channels: nonempty list; channels[0] acts first

    Returns:
        R_n ... R_2 R_1 as a single PTM
    """
    if not channels:
        raise DomainError("compose_sequence needs at least one channel")
    qubit_count = channels[0].qubit_count
    for channel in channels[1:]:
        if channel.qubit_count != qubit_count:
            raise DimensionMismatchError("All channels in a sequence must act on the same qubits")
    entries = reduce(lambda acc, ch: ch.entries @ acc, channels[1:], channels[0].entries)
    return PauliTransferMatrix(entries, qubit_count)


def clamp_probability(value: float, tolerance: float = config.PROBABILITY_TOLERANCE) -> float:
    """Snap floating-point dust into [0, 1]; anything further out is a model bug"""
    if value < -tolerance or value > 1 + tolerance:
        raise InvalidProbabilityError(f"Probability {value!r} outside [0, 1] beyond tolerance {tolerance}")
    return min(1.0, max(0.0, float(value)))


def outcome_probability(channel: PauliTransferMatrix, prep: PauliVector, effect: PauliVector) -> float:
    """Tr(E L(rho)) for the given channel, preparation and effect"""
    if not (channel.qubit_count == prep.qubit_count == effect.qubit_count):
        raise DimensionMismatchError("Channel, preparation and effect act on different qubit counts")
    return clamp_probability(effect.coeffs @ (channel.entries @ prep.coeffs))


def stream_generator(seed: int, stream_id: str) -> np.random.Generator:
    """
    Independent generator for one named stream of a master seed

    The stream key is hashed, so a given (seed, stream_id) pair always yields
    the same draws no matter how many other streams were used before it.
    """
    digest = hashlib.sha256(f"{seed}:{stream_id}".encode('utf-8')).digest()
    stream_key = int.from_bytes(digest[:8], byteorder='big')
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key]))


def sample_shots(p: float, n: int, seed: int, stream_id: str) -> int:
    """
    Binomial number of zero outcomes

    Args:
        p: probability of outcome 0
        n: number of shots
        seed: master seed
        stream_id: stream key, normally the circuit id

    Returns:
        Count of zeros in n shots
    """
    if n < 1:
        raise ValueError(f"Shot count must be at least 1, got {n}")
    p = clamp_probability(p)
    return int(stream_generator(seed, stream_id).binomial(n, p))


def sample_counts(probabilities: Sequence[float], n: int, seed: int, stream_id: str) -> List[int]:
    """Multinomial outcome counts for a joint-outcome distribution"""
    if n < 1:
        raise ValueError(f"Shot count must be at least 1, got {n}")
    probs = np.array([clamp_probability(p) for p in probabilities])
    total = probs.sum()
    if abs(total - 1.0) > config.PROBABILITY_TOLERANCE * len(probs):
        raise InvalidProbabilityError(f"Outcome probabilities sum to {total!r}, not 1")
    probs = probs / total
    return [int(c) for c in stream_generator(seed, stream_id).multinomial(n, probs)]
