"""
Robust Phase Estimation
Depth-doubling phase refinement shared by the X90 amplitude/axis families
and the CZ phase families
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ptm_core import PhaseEstimationError

logger = logging.getLogger(__name__)

# (x, y, x_err, y_err) at one depth; may depend on the current phase estimate
Quadratures = Tuple[float, float, float, float]
QuadratureSource = Callable[[int, float], Quadratures]

REFINEMENT_PASSES = 3


@dataclass
class PhaseEstimate:
    """Outcome of one refinement run"""
    angle: float
    half_width: float
    last_depth: int
    aborted: bool = False
    history: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'angle': self.angle,
            'half_width': self.half_width,
            'last_depth': self.last_depth,
            'aborted': self.aborted,
            'history': list(self.history),
        }


def restrict_to_window(candidate: float, center: float, plus_or_minus: float) -> float:
    """Representative of candidate (mod 2*plus_or_minus) in [center - pm, center + pm)"""
    low = center - plus_or_minus
    return (candidate - low) % (2 * plus_or_minus) + low


def refine_phase(depths: Sequence[int], quadratures: QuadratureSource,
                 initial: float = 0.0, passes: int = REFINEMENT_PASSES) -> PhaseEstimate:
    """
    Estimate a per-gate angle from quadrature pairs at increasing depths

    At depth L the pair (x, y) estimates (cos L*phi, sin L*phi); the angle
    atan2(y, x)/L is known modulo 2*pi/L and is placed in the window of
    half width pi/L around the previous estimate. The source is queried
    `passes` times per depth so quadratures that depend on the estimate
    itself can settle.

    Args:
        depths: strictly increasing depths, each at least twice the previous
        quadratures: callback (depth, current estimate) -> (x, y, x_err, y_err)
        initial: center of the first window
        passes: refinement passes per depth

    Returns:
        PhaseEstimate; aborted when the signal radius drops below its own
        standard error, keeping the last consistent depth
    """
    if not depths:
        raise PhaseEstimationError("Phase refinement needs at least one depth")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise PhaseEstimationError(f"Depths must be strictly increasing, got {list(depths)}")

    estimate = float(initial)
    last_depth = 0
    history: List[dict] = []
    for depth in depths:
        plus_or_minus = math.pi / depth
        candidate = estimate
        for _ in range(passes):
            x, y, x_err, y_err = quadratures(depth, candidate)
            radius = math.hypot(x, y)
            radius_err = math.hypot(x_err, y_err)
            if radius < radius_err:
                break
            candidate = restrict_to_window(math.atan2(y, x) / depth, estimate, plus_or_minus)
        else:
            estimate = candidate
            last_depth = depth
            history.append({'depth': depth, 'radius': radius, 'angle': estimate})
            logger.debug(f"Depth {depth}: angle {estimate:.6f} (radius {radius:.3f})")
            continue

        logger.warning(
            f"Phase signal below noise floor at depth {depth} (radius {radius:.3f} < {radius_err:.3f}); "
            f"keeping estimate from depth {last_depth or 'none'}"
        )
        return PhaseEstimate(estimate, _half_width(last_depth), last_depth, aborted=True, history=history)

    return PhaseEstimate(estimate, _half_width(last_depth), last_depth, history=history)


def _half_width(last_depth: int) -> float:
    return math.pi if last_depth == 0 else math.pi / (2 * last_depth)


def binomial_std(frequency: float, n: float) -> float:
    """Standard error of a frequency, never exactly zero"""
    smoothed = (frequency * n + 0.5) / (n + 1)
    return math.sqrt(smoothed * (1 - smoothed) / n)


def amplitude_quadratures(cos_values: Sequence[float], sin_values: Sequence[float],
                          cos_errors: Sequence[float], sin_errors: Sequence[float],
                          depths: Sequence[int]) -> QuadratureSource:
    """
    Quadratures for the X90 rotation angle

    Values are readout-corrected <Z> expectations. The cosine circuit gives
    cos(L phi). The sine circuit applies one extra X90, so it gives
    cos((L+1) phi) = cos(L phi) cos(phi) - sin(L phi) sin(phi), which is
    solved for sin(L phi) with the current estimate of phi. Near
    sin(phi) = 0 the quarter-turn approximation -cos((L+1) phi) is used.
    """
    lookup = {depth: i for i, depth in enumerate(depths)}

    def source(depth: int, phi: float) -> Quadratures:
        i = lookup[depth]
        x, shifted = cos_values[i], sin_values[i]
        sin_phi = math.sin(phi)
        if abs(sin_phi) >= 0.5:
            y = (x * math.cos(phi) - shifted) / sin_phi
            y_err = math.hypot(cos_errors[i] * math.cos(phi), sin_errors[i]) / abs(sin_phi)
        else:
            y = -shifted
            y_err = sin_errors[i]
        return x, y, cos_errors[i], y_err

    return source


def axis_quadratures(z_values: Sequence[float], x_values: Sequence[float],
                     z_errors: Sequence[float], x_errors: Sequence[float],
                     depths: Sequence[int], rotation_angle: float) -> QuadratureSource:
    """
    Quadratures for the echoed composite rotation X90 Z180 X90 Z180

    The composite rotates by Phi about an axis close to (0, s, c), with
    c, s the cosine and sine of phi/2. From |0>, after L composites,
    <Z> = c^2 + s^2 cos(L Phi) and <X> = s sin(L Phi). The X readout goes
    through one X90, so the raw value is <X> sin(phi) + <Z> cos(phi) and is
    unmixed with the measured <Z>.
    """
    lookup = {depth: i for i, depth in enumerate(depths)}
    c = math.cos(rotation_angle / 2)
    s = math.sin(rotation_angle / 2)
    sin_phi = math.sin(rotation_angle)
    if abs(s) < 1e-6 or abs(sin_phi) < 1e-6:
        raise PhaseEstimationError(f"Rotation angle {rotation_angle:.4f} cannot expose the axis tilt")

    def source(depth: int, _estimate: float) -> Quadratures:
        i = lookup[depth]
        z = z_values[i]
        x_bloch = (x_values[i] - z * math.cos(rotation_angle)) / sin_phi
        x = (z - c ** 2) / s ** 2
        y = x_bloch / s
        x_err = z_errors[i] / s ** 2
        y_err = math.hypot(x_errors[i], z_errors[i] * math.cos(rotation_angle)) / abs(sin_phi * s)
        return x, y, x_err, y_err

    return source


def tilt_from_composite_angle(composite_angle: float, rotation_angle: float) -> float:
    """
    Axis tilt from the composite rotation angle

    With the X90 axis tilted by theta out of the equator, the echoed
    composite rotates by Phi with cos(Phi/2) = c^2 + s^2 cos(2 theta),
    so theta = sign(Phi) * arccos((cos(Phi/2) - c^2) / s^2) / 2.
    """
    c = math.cos(rotation_angle / 2)
    s = math.sin(rotation_angle / 2)
    wrapped = math.remainder(composite_angle, 2 * math.pi)
    ratio = float(np.clip((math.cos(wrapped / 2) - c ** 2) / s ** 2, -1.0, 1.0))
    return math.copysign(0.5 * math.acos(ratio), wrapped)
