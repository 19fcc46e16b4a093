"""Test statistics and decision rules.

Statistics
----------
* ``chi_sq_statistic``: the centered quadratic ``sum((Z_j - n/d)^2 - Z_j)``.
  Under Poissonized sampling its expectation is ``n^2 * ||p - U||_2^2`` (zero
  at the null), so ``T_n / n^2`` is an unbiased estimate of the squared L2
  distance to uniform.
* ``max_std_statistic``: the largest standardized absolute deviation
  ``max_j |Z_j - n/d| / sqrt(n/d)``.
* max count: ``max_j Z_j`` (paired with the standardized max in the
  analytic two-branch max test).
* ``ghc_statistic``: a generalized Higher Criticism statistic, the
  standardized count of coordinates with ``|D_j| >= t``, centered and scaled
  by exact Poisson null tail probabilities.

Decision rules come in two calibrations: the analytic cutoffs (cutoffs as
displayed in the statistics' defining inequalities) and Monte-Carlo
calibration by empirical null quantiles.  Rejection is ``value >= cutoff``
for the chi-square test and strictly ``value > cutoff`` for the max- and
exceedance-type tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .errors import ConfigError, DomainError
from .model import ProbabilityVector, ProblemParams, uniform_vector
from .numerics import abs_deviation_thresholds, abs_deviation_log_tail
from .sampling import Histogram, Scheme, SeedSpec, sample_histogram_matrix

CHI_SQ = "ChiSq"
MAX_STD = "MaxStd"
MAX_COUNT = "MaxCount"
GHC = "GHC"
COMBINED = "Combined"

#: CLI/config selector -> report name
STATISTIC_NAMES = {
    "chisq": CHI_SQ,
    "max_std": MAX_STD,
    "max_count": MAX_COUNT,
    "ghc": GHC,
    "combined": COMBINED,
}

DEFAULT_MAX_TEST_C = 1.2
DEFAULT_MAX_COUNT_FACTOR = 10.0


@dataclass(frozen=True)
class AnalyticCalibration:
    """Cutoffs fixed by the tests' defining formulas."""

    max_test_c: float = DEFAULT_MAX_TEST_C
    max_count_factor: float = DEFAULT_MAX_COUNT_FACTOR


@dataclass(frozen=True)
class MonteCarloCalibration:
    """Empirical null-quantile calibration.

    ``level`` is the total test level; a combined test splits it equally
    across its components.  ``b`` null replications are drawn from ``seed``
    under ``scheme``.
    """

    level: float
    b: int
    seed: SeedSpec
    scheme: Scheme = Scheme.POISSONIZED

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {self.level}")
        if self.b < 1:
            raise DomainError(f"need b >= 1, got {self.b}")


Calibration = AnalyticCalibration | MonteCarloCalibration


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test on one histogram.

    For combined tests ``value`` is the largest component margin
    ``value_i - cutoff_i`` and ``cutoff`` is 0, so only the sign of
    ``value`` is meaningful; ``components`` holds the per-test reports.
    """

    statistic_name: str
    value: float
    cutoff: float
    reject: bool
    calibration: Calibration
    per_t_values: Mapping[int, float] | None = None
    components: Mapping[str, "TestReport"] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "name": self.statistic_name,
            "value": self.value,
            "cutoff": self.cutoff,
            "reject": self.reject,
            "calibration": _calibration_json(self.calibration),
        }
        if self.per_t_values is not None:
            out["per_t"] = [
                {"t": int(t), "value": float(v)}
                for t, v in sorted(self.per_t_values.items())
            ]
        return out


def _calibration_json(calibration: Calibration) -> dict:
    if isinstance(calibration, MonteCarloCalibration):
        return {
            "kind": "monte_carlo",
            "level": calibration.level,
            "b": calibration.b,
        }
    return {"kind": "analytic"}


# ---------------------------------------------------------------------------
# chi-square type statistic
# ---------------------------------------------------------------------------


def chi_sq_statistic(z: Histogram, n: int, d: int) -> float:
    """``sum_j ((Z_j - n/d)^2 - Z_j)`` with the nominal n."""
    if z.d != d:
        raise DomainError(f"histogram has d={z.d}, expected {d}")
    return float(_kernels.chi_sq_batch(z.counts[None, :], n / d)[0])


def chi_sq_moments(p: ProbabilityVector, n: int) -> tuple[float, float]:
    """Mean and variance of the chi-square statistic under Poissonized
    sampling from ``p``.

    mean = n^2 * ||p - U||_2^2;
    var  = sum_j (2 n^2/d^2 + 2 n^2 D_j^2 + 4 n^3 D_j^2 / d - 4 n^3 D_j^3)
    with D_j = 1/d - p_j.
    """
    d = p.d
    delta = 1.0 / d - p.probs
    mean = n**2 * float((delta**2).sum())
    var = float(
        (
            2.0 * n**2 / d**2
            + 2.0 * n**2 * delta**2
            + 4.0 * n**3 * delta**2 / d
            - 4.0 * n**3 * delta**3
        ).sum()
    )
    return mean, var


def chi_sq_analytic_cutoff(params: ProblemParams) -> float:
    """``n^2 eps^2 / (4 s)``; requires eps > 0."""
    if params.epsilon <= 0:
        raise DomainError("analytic chi-square cutoff needs epsilon > 0")
    return params.n**2 * params.epsilon**2 / (4.0 * params.s)


def chi_sq_test_analytic(z: Histogram, params: ProblemParams) -> TestReport:
    """Reject iff the chi-square statistic reaches ``n^2 eps^2 / (4 s)``."""
    value = chi_sq_statistic(z, params.n, params.d)
    cutoff = chi_sq_analytic_cutoff(params)
    return TestReport(
        statistic_name=CHI_SQ,
        value=value,
        cutoff=cutoff,
        reject=value >= cutoff,
        calibration=AnalyticCalibration(),
    )


# ---------------------------------------------------------------------------
# max-type statistics
# ---------------------------------------------------------------------------


def max_std_statistic(z: Histogram, n: int, d: int) -> float:
    """``max_j |Z_j - n/d| / sqrt(n/d)``."""
    if z.d != d:
        raise DomainError(f"histogram has d={z.d}, expected {d}")
    if n <= 0:
        raise DomainError(f"need n > 0, got {n}")
    return float(_kernels.max_std_batch(z.counts[None, :], n / d)[0])


def max_count_statistic(z: Histogram) -> float:
    return float(_kernels.max_count_batch(z.counts[None, :])[0])


def max_std_analytic_cutoff(d: int, c: float) -> float:
    """``sqrt(2 c ln d)``; requires c > 1 (asymptotic level control) and
    d >= 2."""
    if c <= 1.0:
        raise DomainError(f"max-test constant must exceed 1, got {c}")
    if d < 2:
        raise DomainError(f"max test needs d >= 2, got d={d}")
    return math.sqrt(2.0 * c * math.log(d))


def max_tests_analytic(
    z: Histogram, params: ProblemParams, c: float = DEFAULT_MAX_TEST_C
) -> TestReport:
    """Two-branch max test: reject iff the standardized max exceeds
    ``sqrt(2 c ln d)`` or the raw max count exceeds ``10 n / d``.

    The returned report is a combination report (see ``TestReport``); its
    ``components`` show which branch fired.
    """
    calibration = AnalyticCalibration(max_test_c=c)
    m_value = max_std_statistic(z, params.n, params.d)
    m_cutoff = max_std_analytic_cutoff(params.d, c)
    count_value = max_count_statistic(z)
    count_cutoff = DEFAULT_MAX_COUNT_FACTOR * params.n / params.d
    components = {
        "max_std": TestReport(
            MAX_STD, m_value, m_cutoff, m_value > m_cutoff, calibration
        ),
        "max_count": TestReport(
            MAX_COUNT,
            count_value,
            count_cutoff,
            count_value > count_cutoff,
            calibration,
        ),
    }
    return _combine(components, calibration)


def _combine(
    components: Mapping[str, TestReport],
    calibration: Calibration,
    per_t_values: Mapping[int, float] | None = None,
) -> TestReport:
    margin = max(r.value - r.cutoff for r in components.values())
    return TestReport(
        statistic_name=COMBINED,
        value=margin,
        cutoff=0.0,
        reject=any(r.reject for r in components.values()),
        calibration=calibration,
        per_t_values=per_t_values,
        components=dict(components),
    )


# ---------------------------------------------------------------------------
# generalized Higher Criticism over exact Poisson tails
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NullTailTable:
    """Exact null tail probabilities of ``|D_1| >= t`` at rate ``lam``.

    For each threshold the integer count boundaries ``(k_lo, k_up)`` are
    stored alongside ``p0 = P(|Poisson(lam) - lam| / sqrt(lam) >= t)`` so
    that exceedance counting and centering use identical events.
    """

    lam: float
    ts: np.ndarray = field(repr=False)
    k_lo: np.ndarray = field(repr=False)
    k_up: np.ndarray = field(repr=False)
    log_p0: np.ndarray = field(repr=False)

    @property
    def p0(self) -> np.ndarray:
        return np.exp(self.log_p0)

    def index_of(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.ts, t, rtol=0.0, atol=1e-12))[0]
        if hits.size == 0:
            raise DomainError(f"threshold t={t} not present in the tail table")
        return int(hits[0])


def build_null_tail_table(lam: float, ts) -> NullTailTable:
    ts = np.asarray(ts, dtype=np.float64)
    if ts.size == 0:
        raise ConfigError("empty threshold grid")
    if np.any(ts < 0):
        raise DomainError("thresholds must be >= 0")
    k_lo = np.empty(ts.size, dtype=np.int64)
    k_up = np.empty(ts.size, dtype=np.int64)
    log_p0 = np.empty(ts.size, dtype=np.float64)
    for i, t in enumerate(ts):
        k_lo[i], k_up[i] = abs_deviation_thresholds(float(t), lam)
        log_p0[i] = abs_deviation_log_tail(float(t), lam)
    return NullTailTable(lam=lam, ts=ts, k_lo=k_lo, k_up=k_up, log_p0=log_p0)


def ghc_grid(d: int) -> np.ndarray:
    """Integer thresholds t with ``0 < t < sqrt(10 ln d)`` (open above)."""
    if d < 3:
        raise DomainError(f"exceedance grid needs d >= 3, got d={d}")
    upper = math.sqrt(10.0 * math.log(d))
    t_max = int(math.ceil(upper - 1e-9)) - 1
    if t_max < 1:
        raise ConfigError(f"empty exceedance grid at d={d}")
    return np.arange(1, t_max + 1, dtype=np.float64)


def grid_tail_table(params: ProblemParams) -> NullTailTable:
    return build_null_tail_table(params.rate, ghc_grid(params.d))


def _ghc_moments(d: int, table: NullTailTable) -> tuple[np.ndarray, np.ndarray]:
    p0 = table.p0
    if np.any(p0 <= 0.0) or np.any(p0 >= 1.0):
        bad = table.ts[(p0 <= 0.0) | (p0 >= 1.0)]
        raise DomainError(
            f"degenerate null tail probability at thresholds {bad.tolist()}"
        )
    mean = d * p0
    denom = np.sqrt(d * p0 * (1.0 - p0))
    return mean, denom


def ghc_values(counts: np.ndarray, d: int, table: NullTailTable) -> np.ndarray:
    """``(R, T)`` matrix of GHC(t) over the table's thresholds."""
    mean, denom = _ghc_moments(d, table)
    exceed = _kernels.exceedance_batch(counts, table.k_lo, table.k_up)
    return (exceed - mean) / denom


def ghc_statistic(
    z: Histogram, n: int, d: int, t: float, table: NullTailTable
) -> float:
    """Standardized exceedance count at one threshold:
    ``(sum_j 1{|D_j| >= t} - d p0) / sqrt(d p0 (1 - p0))``."""
    if z.d != d:
        raise DomainError(f"histogram has d={z.d}, expected {d}")
    if not np.isclose(table.lam, n / d, rtol=1e-12, atol=0.0):
        raise DomainError(
            f"tail table built at rate {table.lam}, but n/d = {n / d}"
        )
    i = table.index_of(t)
    sub = NullTailTable(
        lam=table.lam,
        ts=table.ts[i : i + 1],
        k_lo=table.k_lo[i : i + 1],
        k_up=table.k_up[i : i + 1],
        log_p0=table.log_p0[i : i + 1],
    )
    return float(ghc_values(z.counts[None, :], d, sub)[0, 0])


def ghc_grid_statistic_batch(
    counts: np.ndarray,
    d: int,
    table: NullTailTable,
    one_sided: bool = False,
) -> np.ndarray:
    """Per-replication ``max_t |GHC(t)|`` (or ``max_t GHC(t)`` one-sided)."""
    vals = ghc_values(counts, d, table)
    if one_sided:
        return vals.max(axis=1)
    return np.abs(vals).max(axis=1)


def ghc_grid_test(
    z: Histogram,
    params: ProblemParams,
    one_sided: bool = False,
    table: NullTailTable | None = None,
) -> TestReport:
    """Reject iff ``max_t |GHC(t)| > ln d`` over the integer threshold grid.

    ``one_sided=True`` uses ``max_t GHC(t)`` instead: with zero exceedances
    at a threshold, GHC(t) collapses to ``-sqrt(d p0 / (1 - p0))``, which can
    dominate the two-sided maximum at small t.  The two-sided rule is the
    default.
    """
    if z.d != params.d:
        raise DomainError(f"histogram has d={z.d}, expected {params.d}")
    if table is None:
        table = grid_tail_table(params)
    vals = ghc_values(z.counts[None, :], params.d, table)[0]
    per_t = {int(t): float(v) for t, v in zip(table.ts, vals)}
    value = float(vals.max()) if one_sided else float(np.abs(vals).max())
    cutoff = math.log(params.d)
    return TestReport(
        statistic_name=GHC,
        value=value,
        cutoff=cutoff,
        reject=value > cutoff,
        calibration=AnalyticCalibration(),
        per_t_values=per_t,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo calibration
# ---------------------------------------------------------------------------


def order_statistic_index(level: float, b: int) -> int:
    """1-based index of the conservative empirical quantile:
    ``ceil((1 - level) (b + 1))``."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    k = math.ceil((1.0 - level) * (b + 1))
    if k > b:
        raise DomainError(
            f"b={b} null replications cannot calibrate level {level}; "
            f"need b >= {math.ceil((1.0 - level) * (b + 1))}"
        )
    return k


def empirical_cutoff(values: np.ndarray, level: float) -> float:
    k = order_statistic_index(level, values.size)
    return float(np.partition(values, k - 1)[k - 1])


def batch_statistic(
    name: str,
    params: ProblemParams,
    table: NullTailTable | None = None,
    one_sided: bool = False,
) -> Callable[[np.ndarray], np.ndarray]:
    """Batched evaluator for one statistic selector (lowercase name)."""
    lam = params.rate
    if name == "chisq":
        return lambda m: _kernels.chi_sq_batch(m, lam)
    if name == "max_std":
        return lambda m: _kernels.max_std_batch(m, lam)
    if name == "max_count":
        return lambda m: _kernels.max_count_batch(m)
    if name == "ghc":
        tab = table if table is not None else grid_tail_table(params)
        return lambda m: ghc_grid_statistic_batch(m, params.d, tab, one_sided)
    raise ConfigError(f"unknown statistic selector {name!r}")


def calibrate_null(
    statistic: Callable[[np.ndarray], np.ndarray],
    params: ProblemParams,
    level: float,
    b: int,
    seed: SeedSpec,
    scheme: Scheme = Scheme.POISSONIZED,
) -> float:
    """Empirical null cutoff: the ``ceil((1-level)(b+1))``-th order statistic
    of the statistic over ``b`` null draws.

    Deterministic given ``seed``; the draw-block layout of ``sampling`` makes
    the result independent of how replications would be split over workers.
    """
    order_statistic_index(level, b)  # validate before sampling
    null = uniform_vector(params.d)
    matrix = sample_histogram_matrix(null, params.n, scheme, b, seed)
    values = np.asarray(statistic(matrix), dtype=np.float64)
    if values.shape != (b,):
        raise ConfigError(
            f"statistic returned shape {values.shape}, expected ({b},)"
        )
    return empirical_cutoff(values, level)


def calibrate_many(
    statistics: Mapping[str, Callable[[np.ndarray], np.ndarray]],
    params: ProblemParams,
    level: float,
    b: int,
    seed: SeedSpec,
    scheme: Scheme = Scheme.POISSONIZED,
) -> dict[str, float]:
    """Calibrate several statistics on one shared set of null draws."""
    order_statistic_index(level, b)
    null = uniform_vector(params.d)
    matrix = sample_histogram_matrix(null, params.n, scheme, b, seed)
    return {
        name: empirical_cutoff(np.asarray(fn(matrix), dtype=np.float64), level)
        for name, fn in statistics.items()
    }


COMBINED_COMPONENTS = ("max_std", "max_count", "ghc")


def combined_test(
    z: Histogram,
    params: ProblemParams,
    mode: Calibration,
    table: NullTailTable | None = None,
) -> TestReport:
    """Union (Bonferroni) of the two max-type tests and the GHC grid test.

    Analytic mode uses each component's displayed cutoff.  Monte-Carlo mode
    calibrates every component at ``level / 3`` by empirical null quantiles
    (equal error split) on a shared set of ``b`` null draws.
    """
    if table is None:
        table = grid_tail_table(params)
    if isinstance(mode, AnalyticCalibration):
        max_report = max_tests_analytic(z, params, mode.max_test_c)
        ghc_report = ghc_grid_test(z, params, table=table)
        components = dict(max_report.components)
        components["ghc"] = ghc_report
        return _combine(components, mode, per_t_values=ghc_report.per_t_values)

    stats = {
        name: batch_statistic(name, params, table=table)
        for name in COMBINED_COMPONENTS
    }
    cutoffs = calibrate_many(
        stats, params, mode.level / 3.0, mode.b, mode.seed, mode.scheme
    )
    row = z.counts[None, :]
    sub_calibration = MonteCarloCalibration(
        level=mode.level / 3.0, b=mode.b, seed=mode.seed, scheme=mode.scheme
    )
    components = {}
    per_t = None
    for name in COMBINED_COMPONENTS:
        value = float(np.asarray(stats[name](row))[0])
        cutoff = cutoffs[name]
        components[name] = TestReport(
            STATISTIC_NAMES[name],
            value,
            cutoff,
            value > cutoff,
            sub_calibration,
        )
    per_t_vals = ghc_values(row, params.d, table)[0]
    per_t = {int(t): float(v) for t, v in zip(table.ts, per_t_vals)}
    return _combine(components, mode, per_t_values=per_t)
