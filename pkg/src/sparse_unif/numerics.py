"""Exact, numerically stable special-function kernel.

All probabilities are carried as natural logs (``LogProb``: a plain float
``ln p`` with ``-inf`` encoding ``p = 0`` exactly); exponentiation happens
only at API exit.  Rationale: the tail events fed into the exceedance
statistics can be as small as ``d**-5`` at the largest thresholds, far below
where linear-space arithmetic keeps relative accuracy.

Poisson tails are summed term-by-term from the small side of the
distribution, so they are exact up to float rounding rather than relying on
asymptotic approximations.  Log-gamma comes from the C library ``lgamma``
(>= 13 significant digits everywhere we evaluate it).
"""

from __future__ import annotations

import math

from .errors import DomainError

LogProb = float
"""Natural log of a probability; ``-inf`` encodes 0, ``0.0`` encodes 1."""

_NEG_INF = float("-inf")

# Stop tail summation once new terms fall this far (in log space) below the
# running sum: e^-45 ~ 3e-20 is below double resolution of the sum.
_TERM_CUTOFF = 45.0

# Snap a real threshold to an adjacent integer when it is this close in
# relative terms; keeps boundary counts (e.g. lam + t*sqrt(lam) landing on an
# integer) inside the non-strict ">= t" event despite float noise.
_SNAP_RTOL = 1e-9


def _check_poisson_args(k: int, lam: float) -> None:
    if lam <= 0 or not math.isfinite(lam):
        raise DomainError(f"poisson rate must be positive and finite, got {lam}")
    if k != int(k):
        raise DomainError(f"poisson count must be an integer, got {k}")


def poisson_log_pmf(k: int, lam: float) -> LogProb:
    """ln P(Poisson(lam) = k), via log-gamma."""
    _check_poisson_args(k, lam)
    if k < 0:
        return _NEG_INF
    k = int(k)
    return -lam + k * math.log(lam) - math.lgamma(k + 1)


def _log_sum_below(k: int, lam: float) -> float:
    """ln sum_{j=0..k} pmf(j) summed downward from j=k; requires k < lam."""
    peak = poisson_log_pmf(k, lam)
    # terms t_j = pmf(j); t_{j-1}/t_j = j/lam < 1 for j <= k < lam
    total = 1.0
    ratio = 1.0
    j = k
    while j > 0:
        ratio *= j / lam
        if ratio < math.exp(-_TERM_CUTOFF) * total:
            break
        total += ratio
        j -= 1
    return peak + math.log(total)


def _log_sum_above(k: int, lam: float) -> float:
    """ln sum_{j=k..inf} pmf(j) summed upward from j=k; requires k > lam."""
    peak = poisson_log_pmf(k, lam)
    # t_{j+1}/t_j = lam/(j+1) < 1 for j >= k > lam
    total = 1.0
    ratio = 1.0
    j = k
    while True:
        ratio *= lam / (j + 1)
        if ratio < math.exp(-_TERM_CUTOFF) * total:
            break
        total += ratio
        j += 1
    return peak + math.log(total)


def poisson_log_cdf(k: int, lam: float) -> LogProb:
    """ln P(Poisson(lam) <= k); ``k < 0`` is the empty sum (-inf)."""
    _check_poisson_args(k, lam)
    if k < 0:
        return _NEG_INF
    k = int(k)
    if k < lam:
        return min(_log_sum_below(k, lam), 0.0)
    # P(Z <= k) = 1 - P(Z >= k+1) with k+1 > lam, so the complement is < 1/2
    return _log1mexp(_log_sum_above(k + 1, lam))


def poisson_log_sf(k: int, lam: float) -> LogProb:
    """ln P(Poisson(lam) >= k)."""
    _check_poisson_args(k, lam)
    if k <= 0:
        return 0.0
    k = int(k)
    if k > lam:
        return min(_log_sum_above(k, lam), 0.0)
    return _log1mexp(_log_sum_below(k - 1, lam))


def _log1mexp(log_p: float) -> float:
    """ln(1 - e^log_p) for log_p <= 0."""
    if log_p == _NEG_INF:
        return 0.0
    if log_p > 0.0:
        raise DomainError(f"log-probability above 0: {log_p}")
    if log_p > -math.log(2.0):
        return math.log(-math.expm1(log_p))
    return math.log1p(-math.exp(log_p))


def _snap(x: float) -> float:
    """Round x to the nearest integer when within float noise of one."""
    nearest = round(x)
    if abs(x - nearest) <= _SNAP_RTOL * max(1.0, abs(x)):
        return float(nearest)
    return x


def abs_deviation_thresholds(t: float, lam: float) -> tuple[int, int]:
    """Integer count boundaries of the event |Z - lam|/sqrt(lam) >= t.

    Returns ``(k_lo, k_up)`` such that the event is
    ``{Z <= k_lo} union {Z >= k_up}`` with both inequalities non-strict;
    ``k_lo < 0`` means the lower branch is empty.  Boundary counts landing
    exactly on ``lam +- t*sqrt(lam)`` are included in the event.
    """
    if t < 0:
        raise DomainError(f"deviation threshold must be >= 0, got {t}")
    if lam <= 0:
        raise DomainError(f"poisson rate must be positive, got {lam}")
    shift = t * math.sqrt(lam)
    k_up = int(math.ceil(_snap(lam + shift)))
    k_lo = int(math.floor(_snap(lam - shift)))
    return k_lo, k_up


def abs_deviation_log_tail(t: float, lam: float) -> LogProb:
    """ln P(|Z - lam|/sqrt(lam) >= t) for Z ~ Poisson(lam), computed exactly.

    The two branches ``P(Z >= ceil(lam + t*sqrt(lam)))`` and
    ``P(Z <= floor(lam - t*sqrt(lam)))`` are summed; the whole space (prob 1)
    is returned when the branches meet.
    """
    k_lo, k_up = abs_deviation_thresholds(t, lam)
    if k_lo >= k_up - 1:
        # branches cover every integer: the event is the whole space
        return 0.0
    upper = poisson_log_sf(k_up, lam)
    lower = poisson_log_cdf(k_lo, lam) if k_lo >= 0 else _NEG_INF
    return log_add_exp(upper, lower)


_LOG_HALF = math.log(0.5)
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# erfc underflows near z ~ 26.6 (x ~ 37.6); switch to the asymptotic series
# well before that.
_NORMAL_TAIL_SWITCH = 30.0


def normal_log_upper_tail(x: float) -> LogProb:
    """ln of the standard normal upper tail P(N(0,1) >= x).

    Relative error of the implied probability is ~1e-15 for |x| <= 30 (via
    erfc) and below 1e-13 beyond (asymptotic series), comfortably within the
    1e-12 contract on |x| <= 40.
    """
    if x != x:
        raise DomainError("normal tail of NaN")
    if x < -_NORMAL_TAIL_SWITCH:
        return _log1mexp(normal_log_upper_tail(-x))
    if x <= _NORMAL_TAIL_SWITCH:
        return _LOG_HALF + math.log(math.erfc(x / _SQRT2))
    # Phi_bar(x) = phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
    inv_x2 = 1.0 / (x * x)
    series = 1.0
    term = 1.0
    j = 1
    while True:
        term *= -(2 * j - 1) * inv_x2
        if abs(term) < 1e-17:
            break
        series += term
        j += 1
    return -0.5 * x * x - math.log(x) - _LOG_SQRT_2PI + math.log(series)


def log_binom(n: int, k: int) -> float:
    """ln C(n, k); -inf outside 0 <= k <= n."""
    if k < 0 or k > n:
        return _NEG_INF
    return (
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    )


def hypergeom_support(pop: int, succ: int, draws: int) -> tuple[int, int]:
    """Inclusive support bounds of Hypergeometric(pop, succ, draws)."""
    return max(0, draws + succ - pop), min(succ, draws)


def hypergeom_log_pmf(k: int, pop: int, succ: int, draws: int) -> LogProb:
    """ln P(K = k) for K ~ Hypergeometric(pop, succ, draws).

    ``k`` outside the support returns -inf; inconsistent parameters raise.
    """
    if pop < 0 or succ < 0 or draws < 0:
        raise DomainError("hypergeometric parameters must be nonnegative")
    if succ > pop or draws > pop:
        raise DomainError(
            f"hypergeometric needs succ <= pop and draws <= pop, "
            f"got pop={pop}, succ={succ}, draws={draws}"
        )
    lo, hi = hypergeom_support(pop, succ, draws)
    if k < lo or k > hi:
        return _NEG_INF
    return (
        log_binom(succ, k)
        + log_binom(pop - succ, draws - k)
        - log_binom(pop, draws)
    )


def log_add_exp(a: float, b: float) -> float:
    """ln(e^a + e^b), safe at -inf."""
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def logsumexp(values) -> float:
    """ln sum e^v over an iterable of logs; -inf for an empty sum."""
    total = _NEG_INF
    for v in values:
        total = log_add_exp(total, v)
    return total


def log_cosh(x: float) -> float:
    """ln cosh(x), overflow-free for any x."""
    ax = abs(x)
    if ax < 350.0:
        return math.log(math.cosh(ax))
    return ax - math.log(2.0) + math.log1p(math.exp(-2.0 * ax))
