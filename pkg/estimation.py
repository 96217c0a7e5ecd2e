"""
Parameter Estimation
Turns count datasets into gateset parameters: echo-signal decay fits,
closed-form decoherence inversion, RPE angles, readout rates, likelihood
maximization and one-parameter likelihood profiles
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares, minimize

import config
import rpe
from dataset_store import (
    Dataset,
    Record,
    ResolvedDataset,
    expected_dataset,
    simulate_dataset,
)
from modelstats import likelihood_threshold
from noise_model import (
    ANGLE_PARAMETERS,
    CZ_PARAMETERS,
    ONE_QUBIT_PARAMETERS,
    CircuitEvaluator,
    CzParameters,
    GatesetModel,
)
from protocols import CircuitKind, format_circuit_id
from ptm_core import (
    CharacterizationError,
    DatasetError,
    DomainError,
    IdentifiabilityError,
    ModelValidationError,
    NonConvergenceError,
    PhaseEstimationError,
)

logger = logging.getLogger(__name__)

__all__ = [
    'Dataset', 'Record', 'expected_dataset', 'simulate_dataset',
    'FitResult', 'fit_exponential', 'fit_decay_signal', 'pauli_signal', 'pauli_signal_points',
    'DecoherenceEstimate', 'decoherence_params', 'decoherence_extract',
    'RpeResult', 'rpe_extract', 'readout_extract', 'CzEstimate', 'cz_extract',
    'LikelihoodFunction', 'log_likelihood', 'MleResult', 'fit_maximum_likelihood', 'maximize_likelihood',
    'LikelihoodProfile', 'likelihood_profile', 'profile_standard_error', 'default_profile_grid',
    'IndependentEstimate', 'independent_estimates', 'parameter_bounds',
]


# Exponential decay fit

@dataclass
class FitResult:
    """A * rate**m + offset with standard errors"""
    amplitude: float
    rate: float
    offset: float
    amplitude_stderr: float
    rate_stderr: float
    offset_stderr: float
    rss: float
    n_points: int
    at_rate_bound: bool = False
    flat: bool = False

    def evaluate(self, m) -> np.ndarray:
        return self.amplitude * np.power(self.rate, np.asarray(m, dtype=float)) + self.offset

    def to_dict(self) -> dict:
        return {
            'amplitude': self.amplitude,
            'rate': self.rate,
            'offset': self.offset,
            'amplitude_stderr': self.amplitude_stderr,
            'rate_stderr': self.rate_stderr,
            'offset_stderr': self.offset_stderr,
            'rss': self.rss,
            'n_points': self.n_points,
            'at_rate_bound': self.at_rate_bound,
            'flat': self.flat,
        }


def _unpack_points(points: Sequence[Tuple[float, ...]], sigmas: Optional[Sequence[float]]):
    m = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if sigmas is None and points and len(points[0]) > 2:
        sigmas = [p[2] for p in points]
    sigma = None if sigmas is None else np.asarray(sigmas, dtype=float)
    return m, y, sigma


def _signal_noise(sigma: Optional[np.ndarray], n_points: int) -> float:
    # standard error of the mean over all depths
    if sigma is None:
        return 0.0
    return float(np.mean(sigma)) / math.sqrt(n_points)


def fit_exponential(points: Sequence[Tuple[float, ...]], sigmas: Optional[Sequence[float]] = None) -> FitResult:
    """
    Weighted least-squares fit of S(m) = A * rate**m + b

    Args:
        points: (m, S) or (m, S, sigma) tuples
        sigmas: standard errors of S, overriding any third tuple entry

    Returns:
        FitResult with 0 < rate <= 1
    """
    m, y, sigma = _unpack_points(points, sigmas)
    if len(np.unique(m)) < config.FIT_MIN_DEPTHS:
        raise DomainError(f"Need at least {config.FIT_MIN_DEPTHS} distinct depths, got {len(np.unique(m))}")
    if np.any(m <= 0):
        raise DomainError("Depths must be positive")
    if sigma is not None and np.any(sigma <= 0):
        raise DomainError("Standard errors must be positive")

    span = float(y.max() - y.min())
    noise = _signal_noise(sigma, len(y))
    if span <= max(config.FIT_IDENTIFIABILITY_FACTOR * noise, 1e-12):
        raise IdentifiabilityError(
            f"Signal range {span:.3e} is within {config.FIT_IDENTIFIABILITY_FACTOR}x the "
            f"standard error of the mean signal {noise:.3e}; decay rate is not identifiable"
        )

    weights = np.ones_like(y) if sigma is None else sigma

    # log-linear start on detrended points
    b0 = min(0.0, float(y.min()) - 0.05 * span)
    slope, intercept = np.polyfit(m, np.log(y - b0), 1)
    rate0 = float(np.clip(math.exp(slope), 1e-6, 1 - 1e-9))
    x0 = np.array([math.exp(intercept), rate0, b0])

    def residuals(params):
        amplitude, rate, offset = params
        return (amplitude * rate ** m + offset - y) / weights

    def jacobian(params):
        amplitude, rate, _ = params
        return np.column_stack([
            rate ** m,
            amplitude * m * rate ** (m - 1),
            np.ones_like(m),
        ]) / weights[:, None]

    result = least_squares(
        residuals, x0, jac=jacobian,
        bounds=([-np.inf, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
        method='trf', x_scale='jac',
        xtol=config.FIT_TOLERANCE, ftol=config.FIT_TOLERANCE, gtol=config.FIT_TOLERANCE,
        max_nfev=config.FIT_MAX_ITERATIONS,
    )
    if result.status == 0:
        raise NonConvergenceError(f"Decay fit did not converge in {config.FIT_MAX_ITERATIONS} evaluations")
    if result.status < 0:
        raise NonConvergenceError(f"Decay fit failed: {result.message}")

    amplitude, rate, offset = result.x
    jac = result.jac
    covariance = np.linalg.pinv(jac.T @ jac)
    if sigma is None:
        dof = len(y) - 3
        covariance *= (2 * result.cost / dof) if dof > 0 else 0.0
    stderr = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    rss = float(np.sum((amplitude * rate ** m + offset - y) ** 2))

    fit = FitResult(
        amplitude=float(amplitude), rate=float(rate), offset=float(offset),
        amplitude_stderr=float(stderr[0]), rate_stderr=float(stderr[1]), offset_stderr=float(stderr[2]),
        rss=rss, n_points=len(y), at_rate_bound=bool(rate >= 1 - 1e-12),
    )
    logger.debug(f"Decay fit: A={fit.amplitude:.5f} rate={fit.rate:.6f}+/-{fit.rate_stderr:.2e} b={fit.offset:.5f}")
    return fit


def fit_decay_signal(points: Sequence[Tuple[float, ...]], sigmas: Optional[Sequence[float]] = None) -> FitResult:
    """
    fit_exponential, except that a signal sitting flat at 1 is read as no decay

    Flat signals anywhere else stay unidentifiable.
    """
    try:
        return fit_exponential(points, sigmas)
    except IdentifiabilityError:
        m, y, sigma = _unpack_points(points, sigmas)
        if y.min() < 1 - config.FIT_IDENTIFIABILITY_FACTOR * _signal_noise(sigma, len(y)) - 1e-9:
            raise
        logger.info("Signal flat at 1: no decay observed")
        return FitResult(
            amplitude=float(np.mean(y)), rate=1.0, offset=0.0,
            amplitude_stderr=0.0, rate_stderr=0.0, offset_stderr=0.0,
            rss=float(np.sum((y - np.mean(y)) ** 2)), n_points=len(y), at_rate_bound=True, flat=True,
        )


# Decoherence detection

_ECHO_KINDS = {'X': CircuitKind.DECOHERENCE_X, 'Z': CircuitKind.DECOHERENCE_Z}


def _survival(record: Record, sign: int) -> float:
    return record.frequency if sign == 1 else 1.0 - record.frequency


def pauli_signal(dataset: Dataset, basis: str, depth: int) -> float:
    """
    S_P(m) = Pr(P, +1, m) + Pr(P, -1, m) - 1 from empirical frequencies

    Args:
        dataset: dataset holding both sign records
        basis: 'X' or 'Z'
        depth: echo depth m

    Returns:
        Survival signal S
    """
    value, _ = _signal_with_error(dataset, basis, depth)
    return value


def _signal_with_error(dataset: Dataset, basis: str, depth: int) -> Tuple[float, float]:
    kind = _ECHO_KINDS[basis]
    plus = dataset.find(format_circuit_id(kind, depth, 1))
    minus = dataset.find(format_circuit_id(kind, depth, -1))
    if plus is None or minus is None:
        raise DatasetError(f"Missing sign record for {kind.value} depth {depth}")
    value = _survival(plus, 1) + _survival(minus, -1) - 1.0
    error = math.hypot(rpe.binomial_std(plus.frequency, plus.n_shots),
                       rpe.binomial_std(minus.frequency, minus.n_shots))
    return value, error


def echo_depths(dataset: Dataset, kind: CircuitKind) -> List[int]:
    prefix = f"{kind.value}/"
    depths = {int(r.circuit_id.split('/')[1]) for r in dataset.records if r.circuit_id.startswith(prefix)}
    return sorted(depths)


def pauli_signal_points(dataset: Dataset, basis: str) -> List[Tuple[int, float, float]]:
    """(m, S, sigma) for every even depth present with both signs"""
    points = []
    for depth in echo_depths(dataset, _ECHO_KINDS[basis]):
        if depth % 2:
            continue
        try:
            value, error = _signal_with_error(dataset, basis, depth)
        except DatasetError as e:
            logger.warning(str(e))
            continue
        points.append((depth, value, error))
    return points


@dataclass
class DecoherenceEstimate:
    p_z: float
    p_x: float
    clamped: bool = False


def decoherence_params(lambda_x: float, lambda_z: float) -> DecoherenceEstimate:
    """
    Invert the echo decay rates

    p_z = 1 - sqrt(lambda_X) and p_x = 1 - sqrt(lambda_Z / (1 - p_z)),
    with p_x clamped to 0 (and flagged) when the ratio exceeds 1.
    """
    for name, value in (('lambda_X', lambda_x), ('lambda_Z', lambda_z)):
        if not 0 < value <= 1:
            raise DomainError(f"{name}={value} outside (0, 1]")
    p_z = 1.0 - math.sqrt(lambda_x)
    ratio = lambda_z / (1.0 - p_z)
    if ratio > 1.0:
        logger.warning(f"lambda_Z/(1-p_z) = {ratio:.6f} exceeds 1; clamping p_x to 0")
        return DecoherenceEstimate(p_z, 0.0, clamped=True)
    return DecoherenceEstimate(p_z, 1.0 - math.sqrt(ratio))


@dataclass
class DecoherenceResult:
    fit_x: FitResult
    fit_z: FitResult
    estimate: DecoherenceEstimate
    p_z_stderr: float
    p_x_stderr: float

    def to_dict(self) -> dict:
        return {
            'fit_x': self.fit_x.to_dict(),
            'fit_z': self.fit_z.to_dict(),
            'p_z': self.estimate.p_z,
            'p_x': self.estimate.p_x,
            'p_x_clamped': self.estimate.clamped,
            'p_z_stderr': self.p_z_stderr,
            'p_x_stderr': self.p_x_stderr,
        }


def decoherence_extract(dataset: Dataset) -> DecoherenceResult:
    """Fit both echo signals and invert them to (p_z, p_x)"""
    fit_x = fit_decay_signal(pauli_signal_points(dataset, 'X'))
    fit_z = fit_decay_signal(pauli_signal_points(dataset, 'Z'))
    estimate = decoherence_params(fit_x.rate, fit_z.rate)

    lx, lz = fit_x.rate, fit_z.rate
    p_z_stderr = fit_x.rate_stderr / (2 * math.sqrt(lx))
    if estimate.clamped:
        p_x_stderr = 0.0
    else:
        root = math.sqrt(lz / math.sqrt(lx))
        d_lz = 1.0 / (2 * root * math.sqrt(lx))
        d_lx = lz / (4 * root * lx ** 1.5)
        p_x_stderr = math.hypot(d_lz * fit_z.rate_stderr, d_lx * fit_x.rate_stderr)
    logger.info(
        f"Decoherence: rate_X={lx:.6f} rate_Z={lz:.6f} -> p_z={estimate.p_z:.5f} p_x={estimate.p_x:.5f}"
    )
    return DecoherenceResult(fit_x, fit_z, estimate, p_z_stderr, p_x_stderr)


# Readout

def readout_extract(dataset: Dataset) -> Tuple[float, float]:
    """(r_01, r_10) from the prepare-measure and double-X90 circuits"""
    zero = dataset.find(format_circuit_id(CircuitKind.READOUT_ZERO, 0, 1))
    flipped = dataset.find(format_circuit_id(CircuitKind.READOUT_PI, 0, 1))
    if zero is None or flipped is None:
        raise DatasetError("Both readout circuits are required")
    return 1.0 - zero.frequency, flipped.frequency


def _expectation(record: Record, readout: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    """Readout-corrected <Z> and its standard error"""
    raw = 2 * record.frequency - 1
    error = 2 * rpe.binomial_std(record.frequency, record.n_shots)
    if readout is None:
        return raw, error
    r_01, r_10 = readout
    scale = 1.0 - r_01 - r_10
    if scale <= 0.05:
        return raw, error
    return float(np.clip((raw - (r_10 - r_01)) / scale, -1.0, 1.0)), error / scale


# Robust phase estimation

@dataclass
class RpeResult:
    epsilon: float
    theta: float
    epsilon_uncertainty: float
    theta_uncertainty: float
    amplitude: rpe.PhaseEstimate
    axis: rpe.PhaseEstimate

    @property
    def aborted(self) -> bool:
        return self.amplitude.aborted or self.axis.aborted

    def to_dict(self) -> dict:
        return {
            'epsilon': self.epsilon,
            'theta': self.theta,
            'epsilon_uncertainty': self.epsilon_uncertainty,
            'theta_uncertainty': self.theta_uncertainty,
            'amplitude': self.amplitude.to_dict(),
            'axis': self.axis.to_dict(),
        }


def _quadrature_series(dataset: Dataset, kind: CircuitKind, first_exponent: int,
                       readout: Optional[Tuple[float, float]]):
    """Expectations of the +1 / -1 records for consecutive exponents until one is missing"""
    depths, cos_values, sin_values, cos_errors, sin_errors = [], [], [], [], []
    k = first_exponent
    while True:
        cos_record = dataset.find(format_circuit_id(kind, k, 1))
        sin_record = dataset.find(format_circuit_id(kind, k, -1))
        if cos_record is None or sin_record is None:
            break
        c, ce = _expectation(cos_record, readout)
        s, se = _expectation(sin_record, readout)
        depths.append(2 ** k)
        cos_values.append(c)
        sin_values.append(s)
        cos_errors.append(ce)
        sin_errors.append(se)
        k += 1
    if not depths:
        raise PhaseEstimationError(f"No {kind.value} records starting at exponent {first_exponent}")
    return depths, cos_values, sin_values, cos_errors, sin_errors


def rpe_extract(dataset: Dataset, readout: Optional[Tuple[float, float]] = None) -> RpeResult:
    """
    Over-rotation and axis tilt of X90 by robust phase estimation

    Args:
        dataset: records of both RPE families for exponents 0..K
        readout: (r_01, r_10) used to correct expectations, if known

    Returns:
        RpeResult with epsilon = 2 phi / pi - 1 and the tilt from the echoed family
    """
    depths, cos_v, sin_v, cos_e, sin_e = _quadrature_series(dataset, CircuitKind.RPE_AMPLITUDE, 0, readout)
    amplitude = rpe.refine_phase(
        depths, rpe.amplitude_quadratures(cos_v, sin_v, cos_e, sin_e, depths), initial=math.pi / 2
    )
    phi = amplitude.angle
    epsilon = 2 * phi / math.pi - 1
    epsilon_uncertainty = 2 * amplitude.half_width / math.pi

    depths, z_v, x_v, z_e, x_e = _quadrature_series(dataset, CircuitKind.RPE_AXIS, 0, readout)
    axis = rpe.refine_phase(depths, rpe.axis_quadratures(z_v, x_v, z_e, x_e, depths, phi), initial=0.0)
    theta = rpe.tilt_from_composite_angle(axis.angle, phi)
    theta_uncertainty = max(
        abs(rpe.tilt_from_composite_angle(axis.angle + axis.half_width, phi) - theta),
        abs(rpe.tilt_from_composite_angle(axis.angle - axis.half_width, phi) - theta),
    )
    if amplitude.aborted or axis.aborted:
        logger.warning("RPE stopped early; uncertainties widened to the last consistent depth")
    logger.info(f"RPE: epsilon={epsilon:.5f}+/-{epsilon_uncertainty:.4f} theta={theta:.5f}+/-{theta_uncertainty:.4f}")
    return RpeResult(epsilon, theta, epsilon_uncertainty, theta_uncertainty, amplitude, axis)


# CZ characterization

@dataclass
class CzEstimate:
    alpha: Optional[float] = None
    beta: Optional[float] = None
    alpha_uncertainty: Optional[float] = None
    beta_uncertainty: Optional[float] = None
    sum_iz_zi: Optional[float] = None
    sum_zi_zz: Optional[float] = None
    sum_iz_zi_stderr: Optional[float] = None
    sum_zi_zz_stderr: Optional[float] = None
    bell_fit: Optional[FitResult] = None
    plus_fit: Optional[FitResult] = None

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha,
            'beta': self.beta,
            'alpha_uncertainty': self.alpha_uncertainty,
            'beta_uncertainty': self.beta_uncertainty,
            'p_iz_plus_p_zi': self.sum_iz_zi,
            'p_zi_plus_p_zz': self.sum_zi_zz,
            'p_iz_plus_p_zi_stderr': self.sum_iz_zi_stderr,
            'p_zi_plus_p_zz_stderr': self.sum_zi_zz_stderr,
            'bell_fit': self.bell_fit.to_dict() if self.bell_fit else None,
            'plus_fit': self.plus_fit.to_dict() if self.plus_fit else None,
        }


def _cz_phase(dataset: Dataset, kind_a: CircuitKind, kind_b: CircuitKind,
              readout: Optional[Tuple[float, float]]) -> Optional[rpe.PhaseEstimate]:
    depths, x_values, y_values, x_errors, y_errors = [], [], [], [], []
    k = 1
    while True:
        if kind_a == kind_b:
            record_a = dataset.find(format_circuit_id(kind_a, k, 1))
            record_b = dataset.find(format_circuit_id(kind_b, k, -1))
        else:
            record_a = dataset.find(format_circuit_id(kind_a, k, 1))
            record_b = dataset.find(format_circuit_id(kind_b, k, 1))
        if record_a is None or record_b is None:
            break
        x, xe = _expectation(record_a, readout)
        y, ye = _expectation(record_b, readout)
        depths.append(2 ** k)
        x_values.append(x)
        y_values.append(-y)
        x_errors.append(xe)
        y_errors.append(ye)
        k += 1
    if not depths:
        return None

    lookup = {d: i for i, d in enumerate(depths)}

    def source(depth: int, _estimate: float):
        i = lookup[depth]
        return x_values[i], y_values[i], x_errors[i], y_errors[i]

    return rpe.refine_phase(depths, source, initial=0.0)


def _cz_decay(dataset: Dataset, kind: CircuitKind) -> Optional[FitResult]:
    points = []
    for depth in echo_depths(dataset, kind):
        record = dataset.get(format_circuit_id(kind, depth, 1))
        points.append((2 * depth, record.frequency, rpe.binomial_std(record.frequency, record.n_shots)))
    if not points:
        return None
    return fit_decay_signal(points)


def cz_extract(dataset: Dataset, readout: Optional[Tuple[float, float]] = None) -> CzEstimate:
    """
    CZ phase errors and the two identifiable Z-error sums

    alpha comes from the control-|0> families, beta - alpha from the
    control-|1> families. The decay rates are per CZ, so each sum is
    (1 - rate) / 2.
    """
    estimate = CzEstimate()
    alpha = _cz_phase(dataset, CircuitKind.CZ_PHASE_A, CircuitKind.CZ_PHASE_B, readout)
    if alpha is not None:
        estimate.alpha = alpha.angle
        estimate.alpha_uncertainty = alpha.half_width
        difference = _cz_phase(dataset, CircuitKind.CZ_BETA, CircuitKind.CZ_BETA, readout)
        if difference is not None:
            estimate.beta = alpha.angle + difference.angle
            estimate.beta_uncertainty = alpha.half_width + difference.half_width

    estimate.bell_fit = _cz_decay(dataset, CircuitKind.CZ_DECAY_BELL)
    if estimate.bell_fit is not None:
        estimate.sum_iz_zi = (1 - estimate.bell_fit.rate) / 2
        estimate.sum_iz_zi_stderr = estimate.bell_fit.rate_stderr / 2
    estimate.plus_fit = _cz_decay(dataset, CircuitKind.CZ_DECAY_PLUS)
    if estimate.plus_fit is not None:
        estimate.sum_zi_zz = (1 - estimate.plus_fit.rate) / 2
        estimate.sum_zi_zz_stderr = estimate.plus_fit.rate_stderr / 2

    if alpha is None and estimate.bell_fit is None and estimate.plus_fit is None:
        raise PhaseEstimationError("Dataset holds no CZ characterization records")
    logger.info(
        f"CZ: alpha={estimate.alpha} beta={estimate.beta} "
        f"p_iz+p_zi={estimate.sum_iz_zi} p_zi+p_zz={estimate.sum_zi_zz}"
    )
    return estimate


# Likelihood

def parameter_bounds(name: str) -> Tuple[float, float]:
    return config.ANGLE_BOUNDS if name in ANGLE_PARAMETERS else config.PROBABILITY_BOUNDS


class LikelihoodFunction:
    """
    Log-likelihood of models against one dataset

    One-qubit records are binomial in the zero count; two-qubit records
    use the multinomial over joint outcomes when counts are present and
    the binomial success count otherwise.
    """

    def __init__(self, dataset: Dataset):
        self.resolved = ResolvedDataset(dataset)
        self.logger = logging.getLogger(__name__)
        self._joint_counts = {
            i: np.array(dataset.records[i].counts, dtype=float)
            for i in self.resolved.two_qubit
            if dataset.records[i].counts is not None
        }
        self.evaluations = 0

    @property
    def needs_cz(self) -> bool:
        return self.resolved.needs_cz

    def __call__(self, model: GatesetModel) -> float:
        self.evaluations += 1
        evaluator = CircuitEvaluator(model)
        lo, hi = config.LIKELIHOOD_CLAMP, 1 - config.LIKELIHOOD_CLAMP
        p = np.clip(self.resolved.success_probabilities(model, evaluator), lo, hi)
        n, k = self.resolved.n_shots, self.resolved.n_zeros
        terms = k * np.log(p) + (n - k) * np.log1p(-p)
        if self._joint_counts:
            joint = self.resolved.joint_probabilities(model, evaluator)
            for i, counts in self._joint_counts.items():
                terms[i] = float(np.sum(counts * np.log(np.clip(joint[i], lo, hi))))
        return float(np.sum(terms))


def log_likelihood(model: GatesetModel, dataset: Dataset) -> float:
    """Sum over records of k log p + (n - k) log(1 - p)"""
    return LikelihoodFunction(dataset)(model)


@dataclass
class MleResult:
    model: GatesetModel
    log_likelihood: float
    initial_log_likelihood: float
    parameters: Tuple[str, ...]
    boundary_hits: List[str] = field(default_factory=list)
    evaluations: int = 0
    improved: bool = True

    @property
    def improvement(self) -> float:
        return self.log_likelihood - self.initial_log_likelihood

    def to_dict(self) -> dict:
        return {
            'model': self.model.to_dict(),
            'log_likelihood': self.log_likelihood,
            'initial_log_likelihood': self.initial_log_likelihood,
            'improvement': self.improvement,
            'parameters': list(self.parameters),
            'boundary_hits': list(self.boundary_hits),
            'evaluations': self.evaluations,
            'improved': self.improved,
        }


def _initial_simplex(x0: np.ndarray, names: Sequence[str], bounds: Sequence[Tuple[float, float]]) -> np.ndarray:
    simplex = np.tile(x0, (len(x0) + 1, 1))
    for i, (name, (lo, hi)) in enumerate(zip(names, bounds)):
        floor = config.MLE_SIMPLEX_STEP_ANGLE if name in ANGLE_PARAMETERS else config.MLE_SIMPLEX_STEP_PROBABILITY
        step = max(config.MLE_SIMPLEX_STEP_FRACTION * abs(x0[i]), floor)
        if x0[i] + step > hi:
            step = -step
        simplex[i + 1, i] = x0[i] + step
    return simplex


def fit_maximum_likelihood(init: GatesetModel, dataset: Dataset,
                           parameters: Optional[Sequence[str]] = None,
                           likelihood: Optional[LikelihoodFunction] = None) -> MleResult:
    """
    Bounded Nelder-Mead search over the model parameters, restarted once

    Args:
        init: starting model (inside the parameter bounds)
        dataset: count records
        parameters: names to optimize; default is the six one-qubit
            parameters plus the CZ ones when the model and data have them
        likelihood: prebuilt LikelihoodFunction for the dataset

    Returns:
        MleResult; the initial model is returned unchanged when no point
        with a higher likelihood was found
    """
    likelihood = likelihood or LikelihoodFunction(dataset)
    if parameters is None:
        parameters = ONE_QUBIT_PARAMETERS
        if init.cz is not None and likelihood.needs_cz:
            parameters = parameters + CZ_PARAMETERS
    names = tuple(parameters)
    bounds = [parameter_bounds(name) for name in names]
    start = np.array([init.get(name) for name in names])
    x0 = np.array([np.clip(v, lo, hi) for v, (lo, hi) in zip(start, bounds)])
    if np.any(x0 != start):
        logger.warning("Initial model outside the search bounds; clipped")

    def objective(x: np.ndarray) -> float:
        try:
            model = init.with_parameters(**dict(zip(names, x)))
        except ModelValidationError:
            return 1e300
        return -likelihood(model)

    initial_ll = likelihood(init)
    best_x, best_f = x0, objective(x0)
    for attempt in range(2):
        result = minimize(
            objective, best_x, method='Nelder-Mead', bounds=bounds,
            options={
                'initial_simplex': _initial_simplex(best_x, names, bounds),
                'maxfev': config.MLE_MAX_EVALUATIONS,
                'xatol': config.MLE_TOLERANCE,
                'fatol': config.MLE_TOLERANCE,
                'adaptive': True,
            },
        )
        logger.debug(f"Nelder-Mead pass {attempt + 1}: -logL={result.fun:.6f} ({result.nfev} evaluations)")
        if result.fun < best_f:
            best_x, best_f = np.array(result.x), float(result.fun)

    if -best_f <= initial_ll:
        logger.info("Likelihood maximization found no improvement; keeping the initial model")
        return MleResult(init, initial_ll, initial_ll, names, evaluations=likelihood.evaluations, improved=False)

    model = init.with_parameters(**dict(zip(names, best_x)))
    hits = [
        name for name, value, (lo, hi) in zip(names, best_x, bounds)
        if abs(value - lo) < 1e-9 or abs(value - hi) < 1e-9
    ]
    for name in hits:
        logger.warning(f"MLE parameter {name} sits on its bound ({model.get(name):.4g})")
    logger.info(f"Likelihood maximization: log L {initial_ll:.4f} -> {-best_f:.4f} (+{-best_f - initial_ll:.4f})")
    return MleResult(model, -best_f, initial_ll, names, hits, likelihood.evaluations)


def maximize_likelihood(init: GatesetModel, dataset: Dataset) -> GatesetModel:
    return fit_maximum_likelihood(init, dataset).model


# Likelihood profiles

@dataclass
class LikelihoodProfile:
    """Log-likelihood along one parameter, all others fixed"""
    parameter: str
    grid: np.ndarray
    log_likelihoods: np.ndarray
    threshold: float
    max_log_likelihood: float
    lower: float
    upper: float
    pstar: float
    model_value: float

    @property
    def argmax(self) -> float:
        return float(self.grid[int(np.argmax(self.log_likelihoods))])

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            'parameter': self.parameter,
            'grid': [float(v) for v in self.grid],
            'log_likelihood': [float(v) if np.isfinite(v) else None for v in self.log_likelihoods],
            'threshold': self.threshold,
            'max_log_likelihood': self.max_log_likelihood,
            'lower': self.lower,
            'upper': self.upper,
            'pstar': self.pstar,
            'model_value': self.model_value,
            'argmax': self.argmax,
        }

    def write_csv(self, path: str):
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['param_value', 'log_likelihood', 'above_threshold', 'in_interval'])
            for value, ll in zip(self.grid, self.log_likelihoods):
                writer.writerow([
                    repr(float(value)),
                    repr(float(ll)) if np.isfinite(ll) else '',
                    int(bool(ll >= self.threshold)),
                    int(self.contains(float(value))),
                ])


def _crossing(x0: float, y0: float, x1: float, y1: float, level: float) -> float:
    # x0 is inside the interval; an invalid neighbour leaves the edge there
    if not np.isfinite(y0) or not np.isfinite(y1) or y1 == y0:
        return x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def likelihood_profile(model: GatesetModel, dataset: Dataset, parameter: str, grid: Sequence[float],
                       pstar: float = config.PSTAR,
                       likelihood: Optional[LikelihoodFunction] = None) -> LikelihoodProfile:
    """
    Slice of the log-likelihood through `model` along one parameter

    Args:
        model: center of the slice (normally the MLE)
        dataset: count records
        parameter: model parameter name
        grid: strictly increasing values covering the model's value
        pstar: discrimination error defining the threshold
        likelihood: prebuilt LikelihoodFunction for the dataset

    Returns:
        LikelihoodProfile whose interval is the connected region around
        the maximum with log L >= log L_max - log(1/p* - 1)
    """
    grid = np.asarray(grid, dtype=float)
    value = model.get(parameter)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("Profile grid must be strictly increasing with at least two points")
    if not grid[0] - 1e-12 <= value <= grid[-1] + 1e-12:
        raise DomainError(f"Grid [{grid[0]}, {grid[-1]}] excludes {parameter}={value}")

    likelihood = likelihood or LikelihoodFunction(dataset)
    values = np.empty(len(grid))
    for i, point in enumerate(grid):
        try:
            values[i] = likelihood(model.with_parameters(**{parameter: point}))
        except ModelValidationError:
            values[i] = -np.inf

    l_max = max(float(np.max(values)), likelihood(model))
    threshold = l_max - likelihood_threshold(pstar)

    peak = int(np.argmax(values))
    low = peak
    while low > 0 and values[low - 1] >= threshold:
        low -= 1
    high = peak
    while high < len(grid) - 1 and values[high + 1] >= threshold:
        high += 1
    lower = float(grid[0]) if low == 0 else _crossing(grid[low], values[low], grid[low - 1], values[low - 1], threshold)
    upper = float(grid[-1]) if high == len(grid) - 1 else _crossing(
        grid[high], values[high], grid[high + 1], values[high + 1], threshold)

    logger.info(f"Profile {parameter}: interval [{lower:.5g}, {upper:.5g}] (max at {grid[peak]:.5g})")
    return LikelihoodProfile(parameter, grid, values, threshold, l_max, float(lower), float(upper), pstar, value)


def profile_standard_error(model: GatesetModel, dataset: Dataset, parameter: str,
                           likelihood: Optional[LikelihoodFunction] = None) -> float:
    """Standard error from the finite-difference curvature of log L (nan if not concave)"""
    likelihood = likelihood or LikelihoodFunction(dataset)
    value = model.get(parameter)
    lo, hi = parameter_bounds(parameter)
    h = 1e-4

    def at(x: float) -> float:
        try:
            return likelihood(model.with_parameters(**{parameter: x}))
        except ModelValidationError:
            return math.nan

    if value - h < lo:
        curvature = (at(value + 2 * h) - 2 * at(value + h) + at(value)) / h ** 2
    elif value + h > hi:
        curvature = (at(value) - 2 * at(value - h) + at(value - 2 * h)) / h ** 2
    else:
        curvature = (at(value + h) - 2 * at(value) + at(value - h)) / h ** 2
    if not math.isfinite(curvature) or curvature >= 0:
        return math.nan
    return 1.0 / math.sqrt(-curvature)


def default_profile_grid(model: GatesetModel, parameter: str, stderr: float = math.nan) -> np.ndarray:
    """41 points over value +/- max(5 stderr, 0.01), clipped to bounds, always holding the value"""
    value = model.get(parameter)
    half_width = config.PROFILE_MIN_HALF_WIDTH
    if math.isfinite(stderr):
        half_width = max(config.PROFILE_STDERR_MULTIPLE * stderr, half_width)
    lo, hi = parameter_bounds(parameter)
    start, stop = max(lo, value - half_width), min(hi, value + half_width)
    grid = np.linspace(start, stop, config.PROFILE_GRID_POINTS)
    return np.union1d(grid, [value])


# Independent estimates

@dataclass
class IndependentEstimate:
    """Point model from the independent protocols, with uncertainties and gaps"""
    model: GatesetModel
    uncertainties: Dict[str, Optional[float]]
    decoherence: Optional[DecoherenceResult] = None
    rpe: Optional[RpeResult] = None
    readout: Optional[Tuple[float, float]] = None
    cz: Optional[CzEstimate] = None
    flags: List[str] = field(default_factory=list)
    missing: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'model': self.model.to_dict(),
            'uncertainties': dict(self.uncertainties),
            'decoherence': self.decoherence.to_dict() if self.decoherence else None,
            'rpe': self.rpe.to_dict() if self.rpe else None,
            'readout': {'r_01': self.readout[0], 'r_10': self.readout[1]} if self.readout else None,
            'cz': self.cz.to_dict() if self.cz else None,
            'flags': list(self.flags),
            'missing': dict(self.missing),
        }


def _run_stage(name: str, stage: Callable, missing: Dict[str, str]):
    try:
        return stage()
    except CharacterizationError as e:
        logger.error(f"{name} estimation failed: {e}", exc_info=True)
        missing[name] = str(e)
        return None


def independent_estimates(dataset: Dataset) -> IndependentEstimate:
    """
    Readout, RPE, decoherence (and CZ when present) estimates combined

    Stages that fail leave their parameters at the ideal value and are
    listed in `missing`; the other stages still run.
    """
    missing: Dict[str, str] = {}
    flags: List[str] = []
    values: Dict[str, float] = {}
    uncertainties: Dict[str, Optional[float]] = {name: None for name in ONE_QUBIT_PARAMETERS}

    readout = _run_stage('readout', lambda: readout_extract(dataset), missing)
    if readout is not None:
        values['r_01'], values['r_10'] = readout
        zero = dataset.get(format_circuit_id(CircuitKind.READOUT_ZERO, 0, 1))
        flipped = dataset.get(format_circuit_id(CircuitKind.READOUT_PI, 0, 1))
        uncertainties['r_01'] = rpe.binomial_std(zero.frequency, zero.n_shots)
        uncertainties['r_10'] = rpe.binomial_std(flipped.frequency, flipped.n_shots)

    rpe_result = _run_stage('rpe', lambda: rpe_extract(dataset, readout), missing)
    if rpe_result is not None:
        values['epsilon'], values['theta'] = rpe_result.epsilon, rpe_result.theta
        uncertainties['epsilon'] = rpe_result.epsilon_uncertainty
        uncertainties['theta'] = rpe_result.theta_uncertainty
        if rpe_result.aborted:
            flags.append('rpe_aborted')

    decoherence = _run_stage('decoherence', lambda: decoherence_extract(dataset), missing)
    if decoherence is not None:
        values['p_z'], values['p_x'] = decoherence.estimate.p_z, decoherence.estimate.p_x
        uncertainties['p_z'] = decoherence.p_z_stderr
        uncertainties['p_x'] = decoherence.p_x_stderr
        if decoherence.estimate.clamped:
            flags.append('p_x_clamped')

    cz_estimate = None
    cz_parameters = None
    if dataset.has_two_qubit_records():
        cz_estimate = _run_stage('cz', lambda: cz_extract(dataset, readout), missing)
        # ideal CZ keeps two-qubit records simulatable when the CZ stage fails
        cz_parameters = _cz_point_estimate(cz_estimate) if cz_estimate is not None else CzParameters()

    model = _valid_model(values, cz_parameters)
    logger.info(f"Independent estimates: {model.to_dict()}")
    return IndependentEstimate(model, uncertainties, decoherence, rpe_result, readout, cz_estimate, flags, missing)


def _cz_point_estimate(estimate: CzEstimate) -> CzParameters:
    """
    CZ parameters consistent with the two measured sums

    The individual rates are not identifiable; the shared p_zi takes half
    of the smaller sum.
    """
    sum_a = max(0.0, estimate.sum_iz_zi or 0.0)
    sum_b = max(0.0, estimate.sum_zi_zz or 0.0)
    p_zi = min(sum_a, sum_b) / 2
    return CzParameters(
        alpha=estimate.alpha or 0.0,
        beta=estimate.beta or 0.0,
        p_iz=min(0.5, sum_a - p_zi),
        p_zi=min(0.5, p_zi),
        p_zz=min(0.5, sum_b - p_zi),
    )


def _valid_model(values: Dict[str, float], cz: Optional[CzParameters]) -> GatesetModel:
    clipped = {}
    for name, value in values.items():
        if name == 'epsilon':
            clipped[name] = float(np.clip(value, -0.999, 0.999))
        elif name == 'theta':
            clipped[name] = float(np.clip(value, -1.5, 1.5))
        else:
            clipped[name] = float(np.clip(value, 0.0, 0.5))
    return GatesetModel(cz=cz, **clipped)
