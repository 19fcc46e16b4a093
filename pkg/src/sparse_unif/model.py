"""Problem parameters, probability vectors, detection thresholds, regimes.

Conventions used throughout the package:

* The domain is ``[d] = {1, ..., d}``; the null is the uniform distribution
  ``U([d])`` with every mass ``1/d``.
* Sparsity ``s`` counts coordinates where an alternative differs from
  uniform; when derived from the exponent ``alpha`` it is
  ``round(d**(1 - alpha))`` floored at 1.
* All logarithms are natural.  The regime comparators and the sparse
  threshold use ``ln d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, InfeasibleError

_SUM_TOL = 1e-12


class Density(Enum):
    DENSE = "dense"  # alpha <= 1/2
    SPARSE = "sparse"  # alpha > 1/2


class SampleSizeRegime(Enum):
    ABOVE_THRESHOLD = "above_threshold"
    BELOW_THRESHOLD = "below_threshold"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ProblemParams:
    """The tuple (n, d, s, epsilon) every computation lives in.

    ``alpha`` records the sparsity exponent when the instance was built from
    one; otherwise it is derived as ``1 - ln(s)/ln(d)``.
    """

    n: int
    d: int
    s: int
    epsilon: float = 0.0
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise DomainError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if not 1 <= self.s <= self.d:
            raise DomainError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def from_alpha(
        cls, n: int, d: int, alpha: float, epsilon: float = 0.0
    ) -> "ProblemParams":
        """Build with ``s = round(d**(1 - alpha))``, floored at 1."""
        if not 0.0 <= alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
        s = max(1, round(d ** (1.0 - alpha)))
        return cls(n=n, d=d, s=min(s, d), epsilon=epsilon, alpha=alpha)

    @property
    def sparsity_exponent(self) -> float:
        """alpha as given, else 1 - ln(s)/ln(d) (1.0 for d = 1)."""
        if self.alpha is not None:
            return self.alpha
        if self.d == 1:
            return 1.0
        return 1.0 - math.log(self.s) / math.log(self.d)

    @property
    def rate(self) -> float:
        """Null per-coordinate Poisson rate n/d."""
        return self.n / self.d


@dataclass(frozen=True)
class ProbabilityVector:
    """A point of the simplex over [d], with distance metadata to uniform."""

    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("probability vector must be non-empty and 1-D")
        if np.any(probs < 0):
            worst = float(probs.min())
            if worst < -_SUM_TOL:
                raise DomainError(f"negative probability entry: {worst}")
            probs = np.clip(probs, 0.0, None)
        total = float(probs.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise DomainError(f"probabilities sum to {total}, not 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return int(self.probs.size)

    def l1_to_uniform(self) -> float:
        return float(np.abs(self.probs - 1.0 / self.d).sum())

    def l0_to_uniform(self, tol: float = 1e-12) -> int:
        return int(np.count_nonzero(np.abs(self.probs - 1.0 / self.d) > tol))


def uniform_vector(d: int) -> ProbabilityVector:
    return ProbabilityVector(np.full(d, 1.0 / d))


@dataclass(frozen=True)
class RegimeConstants:
    """Caller-tunable constants hidden in the regime comparators."""

    dense: float = 1.0  # n vs dense * d**(1/2 + alpha)
    sparse_upper: float = 1.0  # n vs sparse_upper * d * ln(d)**3
    sparse_lower: float = 1.0  # n vs sparse_lower * d * ln(d)


@dataclass(frozen=True)
class Regime:
    density: Density
    sample_size: SampleSizeRegime


def epsilon_max(d: int, s: int) -> float:
    """Largest L1 distance from uniform attainable with exactly s changed
    coordinates: ``2(s - 1)/d``.

    Achieved by raising one coordinate to ``s/d`` and zeroing ``s - 1``
    others; ``d * epsilon_max / s -> 2`` as d grows with s/d fixed.
    """
    if s < 2:
        raise DomainError(
            f"no s-sparse perturbation exists for s < 2 (coordinates must "
            f"sum to 1), got s={s}"
        )
    if s > d:
        raise DomainError(f"need s <= d, got s={s}, d={d}")
    return 2.0 * (s - 1) / d


def threshold_eps1(params: ProblemParams) -> float:
    """Dense-regime critical signal strength ``sqrt(s / (n * sqrt(d)))``."""
    return math.sqrt(params.s / (params.n * math.sqrt(params.d)))


def threshold_eps2(params: ProblemParams) -> float:
    """Sparse-regime critical signal strength ``s * sqrt(2 ln(d) / (n d))``."""
    if params.d < 2:
        raise DomainError(f"sparse threshold needs d >= 2, got d={params.d}")
    return params.s * math.sqrt(2.0 * math.log(params.d) / (params.n * params.d))


def c_alpha(alpha: float) -> float:
    """Sparse detection-boundary constant.

    ``alpha - 1/2`` on (1/2, 3/4) and ``(1 - sqrt(1 - alpha))**2`` on
    [3/4, 1); the branches agree (= 1/4) at 3/4 and the function is strictly
    increasing on (1/2, 1).
    """
    if not 0.5 < alpha < 1.0:
        raise DomainError(f"c_alpha is defined on (1/2, 1), got {alpha}")
    if alpha < 0.75:
        return alpha - 0.5
    return (1.0 - math.sqrt(1.0 - alpha)) ** 2


def classify_regime(
    params: ProblemParams, constants: RegimeConstants = RegimeConstants()
) -> Regime:
    """Place (n, d, alpha) on the phase diagram.

    Dense (alpha <= 1/2): above/below the single comparator
    ``n >= c * d**(1/2 + alpha)``.  Sparse: above ``c * d * ln(d)**3``,
    below ``c * d * ln(d)``, indeterminate between the two cutoffs.
    """
    alpha = params.sparsity_exponent
    log_d = math.log(params.d) if params.d > 1 else 0.0
    if alpha <= 0.5:
        cutoff = constants.dense * params.d ** (0.5 + alpha)
        kind = (
            SampleSizeRegime.ABOVE_THRESHOLD
            if params.n >= cutoff
            else SampleSizeRegime.BELOW_THRESHOLD
        )
        return Regime(Density.DENSE, kind)
    upper = constants.sparse_upper * params.d * log_d**3
    lower = constants.sparse_lower * params.d * log_d
    if params.n >= upper:
        kind = SampleSizeRegime.ABOVE_THRESHOLD
    elif params.n <= lower:
        kind = SampleSizeRegime.BELOW_THRESHOLD
    else:
        kind = SampleSizeRegime.INDETERMINATE
    return Regime(Density.SPARSE, kind)


def make_block_alternative(params: ProblemParams) -> ProbabilityVector:
    """The two-block alternative: ``+eps/s`` on the first s/2 coordinates,
    ``-eps/s`` on the next s/2, uniform elsewhere.

    Exactly s coordinates differ from 1/d (for eps > 0) and the L1 distance
    to uniform is exactly eps.  Feasible iff ``eps/s <= 1/d``.
    """
    n, d, s, eps = params.n, params.d, params.s, params.epsilon
    if s % 2 != 0:
        raise DomainError(f"block alternative needs even s, got s={s}")
    per_coord = eps / s
    if per_coord > 1.0 / d + _SUM_TOL:
        raise InfeasibleError(
            f"eps/s = {per_coord:.6g} exceeds 1/d = {1.0 / d:.6g}; "
            f"the lowered coordinates would be negative"
        )
    probs = np.full(d, 1.0 / d)
    half = s // 2
    probs[:half] += per_coord
    probs[half:s] -= per_coord
    return ProbabilityVector(probs)


def l1_distance_to_uniform(p: ProbabilityVector) -> float:
    return p.l1_to_uniform()


def l0_distance_to_uniform(p: ProbabilityVector, tol: float = 1e-12) -> int:
    return p.l0_to_uniform(tol)


def even_sparsity(d: int, alpha: float) -> int:
    """Nearest even integer to ``d**(1 - alpha)``, floored at 2.

    The block alternative and the paired priors need even s; the harness
    uses this convention when scanning alpha grids.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    s = 2 * max(1, round(d ** (1.0 - alpha) / 2.0))
    return min(s, d if d % 2 == 0 else d - 1)
