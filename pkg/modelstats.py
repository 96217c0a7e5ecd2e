"""
Model Statistics
Likelihood-ratio discrimination error, absolute-deviation moments of
binomial frequencies, and the Chebyshev model-violation test
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

import config
from dataset_store import Dataset, ResolvedDataset
from noise_model import GatesetModel
from ptm_core import DomainError, ModelValidationError

logger = logging.getLogger(__name__)


def discrimination_error(l_ratio: float) -> float:
    """Probability of picking the wrong model from likelihood ratio L >= 1"""
    if not l_ratio >= 1:
        raise DomainError(f"Likelihood ratio must be at least 1 (swap the models), got {l_ratio}")
    return 1.0 / (1.0 + l_ratio)


def likelihood_threshold(pstar: float = config.PSTAR) -> float:
    """log(1/p* - 1): how far below the maximum log-likelihood an interval extends"""
    if not 0 < pstar <= 0.5:
        raise DomainError(f"p* must lie in (0, 0.5], got {pstar}")
    return math.log(1.0 / pstar - 1.0)


def _absdev_arrays(n: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(n < 1):
        raise DomainError("Shot counts must be at least 1")
    if np.any((p < 0) | (p > 1)) or np.any(~np.isfinite(p)):
        raise DomainError("Probabilities must lie in [0, 1]")

    mu = np.zeros_like(p)
    interior = (p > 0) & (p < 1)
    if np.any(interior):
        ni, pi = n[interior], p[interior]
        nu = np.minimum(np.floor(ni * pi), ni - 1)
        log_binom = gammaln(ni + 1) - gammaln(nu + 2) - gammaln(ni - nu)
        log_mu = (math.log(2) - np.log(ni) + (ni - nu) * np.log1p(-pi)
                  + (nu + 1) * np.log(pi) + np.log(nu + 1) + log_binom)
        mu[interior] = np.exp(log_mu)
    variance = np.maximum(0.0, p * (1 - p) / n - mu ** 2)
    return mu, np.sqrt(variance)


def absdev_moments(n: int, p: float) -> Tuple[float, float]:
    """
    Mean and standard deviation of |k/n - p| for k ~ Binomial(n, p)

    Uses the closed form E|k - np| = 2 (1-p)^(n-v) p^(v+1) (v+1) C(n, v+1)
    with v = floor(np), evaluated in log space.

    Args:
        n: number of shots
        p: outcome probability

    Returns:
        (mu, sigma)
    """
    mu, sigma = _absdev_arrays(np.array([n]), np.array([p]))
    return float(mu[0]), float(sigma[0])


@dataclass
class ViolationReport:
    """Summed absolute deviation and its Chebyshev bound"""
    delta_hat: float
    mu: float
    sigma: float
    k_hat: float
    bound: float
    rejected: bool
    n_circuits: int = 0

    def to_dict(self) -> dict:
        return {
            'delta_hat': self.delta_hat,
            'mu': self.mu,
            'sigma': self.sigma,
            'k_hat': self.k_hat,
            'bound': self.bound,
            'rejected': self.rejected,
            'n_circuits': self.n_circuits,
        }


def violation_for_counts(n: Sequence[float], k: Sequence[float], p: Sequence[float],
                         threshold: float = config.VIOLATION_THRESHOLD) -> ViolationReport:
    """
    Model-violation statistic from raw shot counts and model probabilities

    Args:
        n: shots per circuit
        k: observed zero (success) counts
        p: model probability of zero (success)
        threshold: reject when the bound falls below this

    Returns:
        ViolationReport
    """
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    if not (n.shape == k.shape == p.shape):
        raise DomainError("n, k and p must have the same length")

    delta_hat = float(np.sum(np.abs(k / n - p)))
    mu_i, sigma_i = _absdev_arrays(n, p)
    mu = float(np.sum(mu_i))
    sigma = float(math.sqrt(np.sum(sigma_i ** 2)))
    deviation = abs(delta_hat - mu)

    if sigma > 0:
        k_hat = deviation / sigma
    else:
        k_hat = 0.0 if deviation <= 1e-12 else math.inf
    # Chebyshev says nothing for k <= 1; rounding can land k just above it
    if k_hat <= 1.0 + 1e-12:
        bound = 1.0
    elif math.isinf(k_hat):
        bound = 0.0
    else:
        bound = min(1.0, 1.0 / k_hat ** 2)
    return ViolationReport(delta_hat, mu, sigma, k_hat, bound, bound < threshold, len(n))


def model_violation(model: GatesetModel, dataset: Dataset,
                    resolved: Optional[ResolvedDataset] = None) -> ViolationReport:
    """Violation statistic of a model against a dataset (success event per circuit)"""
    resolved = resolved or ResolvedDataset(dataset)
    p = resolved.success_probabilities(model)
    report = violation_for_counts(resolved.n_shots, resolved.n_zeros, p)
    verdict = "REJECTED" if report.rejected else "consistent"
    logger.info(
        f"Model violation: delta={report.delta_hat:.4f} mu={report.mu:.4f} sigma={report.sigma:.4f} "
        f"k={report.k_hat:.3f} bound={report.bound:.3f} ({verdict})"
    )
    return report


def confidence_region_member(model: GatesetModel, dataset: Dataset, eps: float,
                             resolved: Optional[ResolvedDataset] = None) -> bool:
    """True when the violation bound of the model exceeds eps"""
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return model_violation(model, dataset, resolved).bound > eps


def deviation_interval(model: GatesetModel, dataset: Dataset, parameter: str,
                       grid: Sequence[float], eps: float = config.VIOLATION_THRESHOLD
                       ) -> Optional[Tuple[float, float]]:
    """
    One-dimensional slice of the deviation confidence region

    Varies `parameter` over the grid with every other parameter fixed and
    returns the span of the connected run of members around the grid
    point nearest the model's value, or None if that point is not a member.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    grid = np.asarray(grid, dtype=float)
    resolved = ResolvedDataset(dataset)
    members = []
    for value in grid:
        try:
            candidate = model.with_parameters(**{parameter: value})
        except ModelValidationError:
            members.append(False)
            continue
        p = resolved.success_probabilities(candidate)
        report = violation_for_counts(resolved.n_shots, resolved.n_zeros, p)
        members.append(report.bound > eps)

    center = int(np.argmin(np.abs(grid - model.get(parameter))))
    if not members[center]:
        return None
    low = high = center
    while low > 0 and members[low - 1]:
        low -= 1
    while high < len(grid) - 1 and members[high + 1]:
        high += 1
    return float(grid[low]), float(grid[high])
