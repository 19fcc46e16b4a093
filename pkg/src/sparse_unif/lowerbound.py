"""Least-favorable priors, likelihood-ratio second moments, risk bounds.

The minimax risk of any test is bounded below through the integrated
likelihood ratio ``L_pi`` of a prior ``pi`` over alternatives:

    risk >= 1 - (1/2) * sqrt(E_H0[L_pi^2] - 1).

Three prior constructions are implemented, all supported on probability
vectors at exact L1 distance (or exact expected distance) from uniform:

* paired dense prior: s/2 of the d/2 consecutive coordinate pairs get a
  random sign ``+-eps/s`` perturbation.  Its second moment has the exact
  closed form ``E[cosh(2 n d eps^2 / s^2) ** K]`` with K hypergeometric.
* sparse two-sided prior: s/2 raised coordinates in the first half of the
  domain, s/2 lowered in the second half, amplitude tied to the sparse
  detection boundary.
* impossibility prior: a Bernoulli-thinned spread of raised/lowered
  coordinates in the first half, balanced in the second half on a
  high-probability "good" event (a degenerate two-coordinate correction
  otherwise).

Monte-Carlo cross-checks evaluate ``L_pi`` exactly by enumerating the
prior's atoms in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, product
from typing import Iterator

import numpy as np

from .errors import ConfigError, DomainError, InfeasibleError, SparseUnifError
from .model import (
    ProbabilityVector,
    ProblemParams,
    c_alpha,
    threshold_eps2,
    uniform_vector,
)
from .numerics import (
    hypergeom_log_pmf,
    hypergeom_support,
    log_add_exp,
    log_cosh,
    logsumexp,
    normal_log_upper_tail,
)
from .sampling import Scheme, SeedSpec, sample_histogram_matrix

MAX_ENUMERATED_ATOMS = 2**16

_LOG_MAX = math.log(np.finfo(np.float64).max)  # ~709.78


class PriorKind(Enum):
    PAIRED_DENSE = "paired_dense"
    SPARSE_TWOSIDED = "sparse_twosided"
    IMPOSSIBILITY = "impossibility"


@dataclass(frozen=True)
class PriorSpec:
    """A prior selection with its construction parameters validated."""

    kind: PriorKind
    params: ProblemParams
    delta: float | None = None
    gamma_d: float | None = None
    r_n: float | None = None

    def __post_init__(self) -> None:
        p = self.params
        if self.kind is PriorKind.PAIRED_DENSE:
            if p.d % 2 or p.s % 2:
                raise DomainError("paired prior needs d and s even")
            _check_paired_feasible(p)
        elif self.kind is PriorKind.SPARSE_TWOSIDED:
            if p.s % 2:
                raise DomainError("two-sided sparse prior needs s even")
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise DomainError(f"need delta in (0, 1), got {self.delta}")
        elif self.kind is PriorKind.IMPOSSIBILITY:
            if p.s < 2:
                raise DomainError("impossibility prior needs s >= 2")
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise DomainError(f"need delta in (0, 1), got {self.delta}")
            gamma_hi = gamma_d_upper(p)
            gamma = self.gamma_d if self.gamma_d is not None else default_gamma_d(p)
            if not 1.0 < gamma < gamma_hi:
                raise DomainError(
                    f"gamma_d must lie strictly in (1, sqrt(s)/ln(d)) = "
                    f"(1, {gamma_hi:.6g}), got {gamma}"
                )
            r_hi = r_n_upper(p)
            r_n = self.r_n if self.r_n is not None else default_r_n(p)
            if not 0.0 < r_n < r_hi:
                raise DomainError(
                    f"r_n must lie strictly in (0, min(1/d, 1/sqrt(nd))) = "
                    f"(0, {r_hi:.6g}), got {r_n}"
                )


@dataclass(frozen=True)
class SecondMomentReport:
    """``E_H0[L_pi^2]`` (or an estimate) and the risk bound it implies."""

    value: float
    is_exact: bool
    risk_lower_bound: float
    se: float | None = None
    binomial_upper_bound: float | None = None
    log_value: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.risk_lower_bound <= 1.0:
            raise SparseUnifError(
                f"risk bound outside [0, 1]: {self.risk_lower_bound}"
            )

    def to_json_dict(self) -> dict:
        out = {
            "value": self.value,
            "exact": self.is_exact,
            "risk_lower_bound": self.risk_lower_bound,
        }
        if self.se is not None:
            out["se"] = self.se
        return out


def risk_lower_bound_from_second_moment(second_moment: float) -> float:
    """``max(0, 1 - sqrt(second_moment - 1) / 2)``.

    A second moment below 1 violates Cauchy-Schwarz and signals an upstream
    bug, so it raises rather than clamping.
    """
    if second_moment < 1.0 - 1e-12:
        raise DomainError(
            f"E[L^2] = {second_moment} < 1 is impossible (Cauchy-Schwarz)"
        )
    excess = max(0.0, second_moment - 1.0)
    return max(0.0, 1.0 - 0.5 * math.sqrt(excess))


# ---------------------------------------------------------------------------
# paired dense prior
# ---------------------------------------------------------------------------


def _check_paired_feasible(params: ProblemParams) -> None:
    if params.epsilon / params.s > 1.0 / params.d + 1e-15:
        raise InfeasibleError(
            f"paired prior needs eps/s <= 1/d; got eps/s = "
            f"{params.epsilon / params.s:.6g} > 1/d = {1.0 / params.d:.6g}"
        )


def sample_paired_dense_prior(
    params: ProblemParams, seed: SeedSpec
) -> ProbabilityVector:
    """One draw: choose s/2 of the d/2 consecutive pairs, put ``+-eps/s``
    with a random sign inside each.  Exactly s coordinates move and the L1
    distance to uniform is exactly eps."""
    d, s, eps = params.d, params.s, params.epsilon
    if d % 2 or s % 2:
        raise DomainError("paired prior needs d and s even")
    _check_paired_feasible(params)
    rng = seed.generator()
    pairs = rng.choice(d // 2, size=s // 2, replace=False)
    signs = rng.integers(0, 2, size=s // 2) * 2 - 1
    probs = np.full(d, 1.0 / d)
    probs[2 * pairs] += signs * eps / s
    probs[2 * pairs + 1] -= signs * eps / s
    return ProbabilityVector(probs)


def paired_second_moment_exact(params: ProblemParams) -> SecondMomentReport:
    """Exact ``E_H0[L^2] = E[cosh(2 n d eps^2 / s^2) ** K]`` with
    ``K ~ Hypergeometric(d/2, s/2, s/2)``, summed over the support in log
    space.

    Also computes the binomial-domination upper bound
    ``(1 - s/d + (s/d) cosh(.)) ** (s/2)`` for cross-checking.  The formula
    is evaluated for any eps; the prior construction itself only stays on
    the simplex for ``eps <= s/d``.
    """
    d, s, n, eps = params.d, params.s, params.n, params.epsilon
    if d % 2 or s % 2:
        raise DomainError("paired prior needs d and s even")
    c = 2.0 * n * d * eps**2 / s**2
    log_cosh_c = log_cosh(c)
    lo, hi = hypergeom_support(d // 2, s // 2, s // 2)
    log_value = logsumexp(
        hypergeom_log_pmf(k, d // 2, s // 2, s // 2) + k * log_cosh_c
        for k in range(lo, hi + 1)
    )
    log_bound = (s / 2.0) * log_add_exp(
        math.log1p(-s / d) if s < d else float("-inf"),
        math.log(s / d) + log_cosh_c,
    )
    value = math.exp(log_value) if log_value < _LOG_MAX else float("inf")
    bound = math.exp(log_bound) if log_bound < _LOG_MAX else float("inf")
    return SecondMomentReport(
        value=value,
        is_exact=True,
        risk_lower_bound=risk_lower_bound_from_second_moment(value),
        binomial_upper_bound=bound,
        log_value=log_value,
    )


# ---------------------------------------------------------------------------
# sparse two-sided prior
# ---------------------------------------------------------------------------


def sparse_twosided_eta(params: ProblemParams, delta: float) -> float:
    """Perturbation amplitude ``sqrt(2 C(alpha) (1 - delta) ln(d) / (n d))``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"need delta in (0, 1), got {delta}")
    alpha = params.sparsity_exponent
    return math.sqrt(
        2.0 * c_alpha(alpha) * (1.0 - delta) * math.log(params.d)
        / (params.n * params.d)
    )


def sample_sparse_twosided_prior(
    params: ProblemParams, delta: float, seed: SeedSpec
) -> ProbabilityVector:
    """One draw: raise s/2 coordinates in the first ``ceil(d/2)`` by eta,
    lower s/2 in the remaining half by eta."""
    d, s = params.d, params.s
    if s % 2:
        raise DomainError("two-sided sparse prior needs s even")
    eta = sparse_twosided_eta(params, delta)
    if eta > 1.0 / d + 1e-15:
        raise InfeasibleError(
            f"eta = {eta:.6g} exceeds 1/d = {1.0 / d:.6g}; the lowered "
            f"coordinates would be negative in this (n, d, alpha) regime"
        )
    first = -(-d // 2)  # ceil(d/2)
    if s // 2 > min(first, d - first):
        raise DomainError(f"s/2 = {s // 2} exceeds a half-domain size")
    rng = seed.generator()
    raised = rng.choice(first, size=s // 2, replace=False)
    lowered = first + rng.choice(d - first, size=s // 2, replace=False)
    probs = np.full(d, 1.0 / d)
    probs[raised] += eta
    probs[lowered] -= eta
    return ProbabilityVector(probs)


def sparse_twosided_second_moment_exact(
    params: ProblemParams, delta: float
) -> SecondMomentReport:
    """Exact ``E_H0[L^2]`` of the two-sided sparse prior.

    Raised and lowered halves contribute independent hypergeometric overlap
    counts, each coordinate overlap multiplying the second moment by
    ``e^(n d eta^2)``, so
    ``E[L^2] = E[e^(a K1)] * E[e^(a K2)]`` with ``a = n d eta^2``.
    """
    d, s = params.d, params.s
    if s % 2:
        raise DomainError("two-sided sparse prior needs s even")
    eta = sparse_twosided_eta(params, delta)
    a = params.n * d * eta**2
    first = -(-d // 2)
    log_value = 0.0
    for half in (first, d - first):
        lo, hi = hypergeom_support(half, s // 2, s // 2)
        log_value += logsumexp(
            hypergeom_log_pmf(k, half, s // 2, s // 2) + k * a
            for k in range(lo, hi + 1)
        )
    value = math.exp(log_value) if log_value < _LOG_MAX else float("inf")
    return SecondMomentReport(
        value=value,
        is_exact=True,
        risk_lower_bound=risk_lower_bound_from_second_moment(value),
        log_value=log_value,
    )


# ---------------------------------------------------------------------------
# impossibility prior
# ---------------------------------------------------------------------------


def gamma_d_upper(params: ProblemParams) -> float:
    """Upper end ``sqrt(s)/ln(d)`` of the admissible gamma_d range."""
    if params.d < 3:
        raise DomainError("impossibility prior needs d >= 3")
    return math.sqrt(params.s) / math.log(params.d)


def default_gamma_d(params: ProblemParams) -> float:
    """Geometric mean of the admissible endpoints (1, sqrt(s)/ln d)."""
    hi = gamma_d_upper(params)
    if hi <= 1.0:
        raise DomainError(
            f"admissible gamma_d interval (1, {hi:.6g}) is empty: "
            f"sqrt(s) must exceed ln(d)"
        )
    return math.sqrt(hi)


def r_n_upper(params: ProblemParams) -> float:
    return min(1.0 / params.d, 1.0 / math.sqrt(params.n * params.d))


def default_r_n(params: ProblemParams) -> float:
    return 0.5 * r_n_upper(params)


def _impossibility_pieces(params: ProblemParams, delta: float):
    s, d = params.s, params.d
    t = delta * s
    m = math.floor(t)  # |T|, the balancing-set size
    size_s = s - m
    raised = (1.0 + (1.0 - delta) ** 2 / delta) / d
    lowered = delta / d
    if raised > 1.0:
        raise InfeasibleError(
            f"raised coordinate {raised:.6g} exceeds 1; delta={delta} too "
            f"small for d={d}"
        )
    return t, m, size_s, raised, lowered


def good_event_bound(params: ProblemParams, delta: float, gamma_d: float) -> float:
    """Threshold ``gamma_d * s / (d sqrt(t))`` of the good event
    ``|Delta(eta)| <= threshold``."""
    t = delta * params.s
    return gamma_d * params.s / (params.d * math.sqrt(t))


def good_event_chebyshev_bound(
    params: ProblemParams, delta: float, gamma_d: float
) -> float:
    """Chebyshev bound on P(bad event): ``Var[Delta] / threshold^2``.

    ``Var[Delta] = |S| (1-delta)^3 / (delta d^2)`` exactly, so the bound is
    ``(1-delta)^3 (s - floor(delta s)) / (gamma_d^2 s)``.
    """
    _, m, size_s, _, _ = _impossibility_pieces(params, delta)
    return (1.0 - delta) ** 3 * size_s / (gamma_d**2 * params.s)


def sample_impossibility_prior(
    params: ProblemParams,
    delta: float,
    seed: SeedSpec,
    gamma_d: float | None = None,
    r_n: float | None = None,
) -> tuple[ProbabilityVector, bool]:
    """One draw of the impossibility prior; returns (vector, on_good_event).

    First half: a uniform subset S of size ``s - floor(delta s)`` gets, per
    coordinate, an independent Bernoulli(delta) choice between the raised
    value ``(1/d)(1 + (1-delta)^2/delta)`` and the lowered value
    ``delta/d``.  The first-half mass excess ``Delta(eta)`` is absorbed on
    the good event by spreading ``-Delta`` over a uniform ``floor(delta s)``
    subset of the second half.  On the bad event (or when the balancing set
    would be empty) the entire vector degenerates to uniform with a
    ``+-r_n`` perturbation on the first two second-half coordinates, which
    keeps the output summing to 1 on every draw.
    """
    spec = PriorSpec(
        PriorKind.IMPOSSIBILITY, params, delta=delta, gamma_d=gamma_d, r_n=r_n
    )
    gamma_d = spec.gamma_d if spec.gamma_d is not None else default_gamma_d(params)
    r_n = spec.r_n if spec.r_n is not None else default_r_n(params)
    d = params.d
    t, m, size_s, raised, lowered = _impossibility_pieces(params, delta)
    half = d // 2
    if size_s > half:
        raise DomainError(f"|S| = {size_s} exceeds first half size {half}")
    rng = seed.generator()
    subset = rng.choice(half, size=size_s, replace=False)
    eta = rng.random(size_s) < delta
    delta_mass = (1.0 - delta) / d * (eta / delta - 1.0).sum()
    threshold = good_event_bound(params, delta, gamma_d)
    good = m >= 1 and abs(delta_mass) <= threshold
    probs = np.full(d, 1.0 / d)
    if good:
        probs[subset[eta]] = raised
        probs[subset[~eta]] = lowered
        if delta_mass != 0.0:
            balance = half + rng.choice(d - half, size=m, replace=False)
            adjusted = 1.0 / d - delta_mass / m
            if adjusted < 0.0:
                raise InfeasibleError(
                    f"balancing coordinate {adjusted:.6g} negative; delta="
                    f"{delta} infeasible for (d={d}, s={params.s})"
                )
            probs[balance] = adjusted
    else:
        probs[half] += r_n
        probs[half + 1] -= r_n
    return ProbabilityVector(probs), good


def expected_l1_of_impossibility_prior(
    params: ProblemParams, delta: float
) -> float:
    """First-half expected L1 distance:
    ``(2 (1-delta) / d) (s - floor(delta s)) (1 - t/s)`` with ``t = delta s``.

    This is the exact expectation of the perturbed-subset contribution
    conditional on keeping the first-half construction; the good-event
    balancing adds a nonnegative ``|Delta(eta)|`` term on top, so the total
    draw-averaged L1 distance is at least this value.  Always at least
    ``2 (1-delta)^3 s / d``.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"need delta in (0, 1), got {delta}")
    s, d = params.s, params.d
    t = delta * s
    value = (2.0 * (1.0 - delta) / d) * (s - math.floor(t)) * (1.0 - t / s)
    floor_bound = 2.0 * (1.0 - delta) ** 3 * s / d
    if value < floor_bound - 1e-12:
        raise SparseUnifError(
            f"expected L1 {value} fell below its guaranteed floor {floor_bound}"
        )
    return value


# ---------------------------------------------------------------------------
# exact likelihood-ratio evaluation by atom enumeration
# ---------------------------------------------------------------------------


def _paired_atoms(params: ProblemParams) -> Iterator[tuple[float, np.ndarray]]:
    d, s, eps = params.d, params.s, params.epsilon
    n_pairs, k = d // 2, s // 2
    log_w = -(
        math.lgamma(n_pairs + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n_pairs - k + 1)
    ) - k * math.log(2.0)
    for pairs in combinations(range(n_pairs), k):
        for signs in product((1.0, -1.0), repeat=k):
            probs = np.full(d, 1.0 / d)
            for pair, sign in zip(pairs, signs):
                probs[2 * pair] += sign * eps / s
                probs[2 * pair + 1] -= sign * eps / s
            yield log_w, probs


def _sparse_twosided_atoms(
    params: ProblemParams, delta: float
) -> Iterator[tuple[float, np.ndarray]]:
    d, s = params.d, params.s
    eta = sparse_twosided_eta(params, delta)
    first = -(-d // 2)
    k = s // 2
    log_w = -(_log_choose(first, k) + _log_choose(d - first, k))
    for raised in combinations(range(first), k):
        for lowered in combinations(range(first, d), k):
            probs = np.full(d, 1.0 / d)
            probs[list(raised)] += eta
            probs[list(lowered)] -= eta
            yield log_w, probs


def _impossibility_atoms(
    params: ProblemParams, delta: float, gamma_d: float, r_n: float
) -> Iterator[tuple[float, np.ndarray]]:
    d, s = params.d, params.s
    t, m, size_s, raised, lowered = _impossibility_pieces(params, delta)
    half = d // 2
    threshold = good_event_bound(params, delta, gamma_d)
    log_w_subset = -_log_choose(half, size_s)
    log_delta, log_1m = math.log(delta), math.log1p(-delta)
    bad_probs = np.full(d, 1.0 / d)
    bad_probs[half] += r_n
    bad_probs[half + 1] -= r_n
    for subset in combinations(range(half), size_s):
        for eta in product((True, False), repeat=size_s):
            ones = sum(eta)
            log_w = log_w_subset + ones * log_delta + (size_s - ones) * log_1m
            delta_mass = (1.0 - delta) / d * (ones / delta - size_s)
            good = m >= 1 and abs(delta_mass) <= threshold
            base = np.full(d, 1.0 / d)
            if not good:
                yield log_w, bad_probs
                continue
            for j, up in zip(subset, eta):
                base[j] = raised if up else lowered
            if delta_mass == 0.0:
                yield log_w, base
                continue
            adjusted = 1.0 / d - delta_mass / m
            if adjusted < 0.0:
                raise InfeasibleError(
                    f"balancing coordinate {adjusted:.6g} negative at "
                    f"delta={delta}"
                )
            log_w_t = log_w - _log_choose(d - half, m)
            for balance in combinations(range(half, d), m):
                probs = base.copy()
                probs[list(balance)] = adjusted
                yield log_w_t, probs


def _log_choose(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def atom_count(spec: PriorSpec) -> int:
    p = spec.params
    if spec.kind is PriorKind.PAIRED_DENSE:
        return math.comb(p.d // 2, p.s // 2) * 2 ** (p.s // 2)
    if spec.kind is PriorKind.SPARSE_TWOSIDED:
        first = -(-p.d // 2)
        return math.comb(first, p.s // 2) * math.comb(p.d - first, p.s // 2)
    t = spec.delta * p.s
    m = math.floor(t)
    size_s = p.s - m
    half = p.d // 2
    per_eta = max(1, math.comb(p.d - half, m)) if m >= 1 else 1
    return math.comb(half, size_s) * 2**size_s * per_eta


def enumerate_atoms(spec: PriorSpec) -> tuple[np.ndarray, np.ndarray]:
    """All (log-weight, probability-vector) atoms of a prior.

    Weights are exact log prior probabilities (atoms reachable by several
    construction paths appear once per path; their weights still sum to 1).
    """
    count = atom_count(spec)
    if count > MAX_ENUMERATED_ATOMS:
        raise ConfigError(
            f"prior has {count} atoms > {MAX_ENUMERATED_ATOMS}; pass "
            f"inner_samples to estimate by sampling instead"
        )
    p = spec.params
    if spec.kind is PriorKind.PAIRED_DENSE:
        atoms = _paired_atoms(p)
    elif spec.kind is PriorKind.SPARSE_TWOSIDED:
        atoms = _sparse_twosided_atoms(p, spec.delta)
    else:
        gamma = spec.gamma_d if spec.gamma_d is not None else default_gamma_d(p)
        r_n = spec.r_n if spec.r_n is not None else default_r_n(p)
        atoms = _impossibility_atoms(p, spec.delta, gamma, r_n)
    log_w, vectors = zip(*atoms)
    return np.asarray(log_w, dtype=np.float64), np.vstack(vectors)


def log_likelihood_ratios(
    counts: np.ndarray, log_weights: np.ndarray, atom_probs: np.ndarray
) -> np.ndarray:
    """``ln L_pi`` for each count row, by exact mixture over atoms.

    Per atom the log ratio is ``sum_j Z_j ln(d p_j)`` (vectors on the
    simplex make the exponential-tilt term vanish).  ``p_j = 0`` with
    ``Z_j = 0`` contributes factor 1; with ``Z_j > 0`` the atom contributes
    likelihood 0.
    """
    d = atom_probs.shape[1]
    with np.errstate(divide="ignore"):
        log_dp = np.log(d * atom_probs)
    zero_mask = np.isneginf(log_dp)
    safe = np.where(zero_mask, 0.0, log_dp)
    counts = np.asarray(counts, dtype=np.float64)
    scores = counts @ safe.T + log_weights
    if zero_mask.any():
        hits = counts @ zero_mask.T.astype(np.float64)
        scores = np.where(hits > 0, -np.inf, scores)
    peak = scores.max(axis=1)
    out = np.full(counts.shape[0], -np.inf)
    finite = np.isfinite(peak)
    if finite.any():
        shifted = np.exp(scores[finite] - peak[finite, None])
        out[finite] = peak[finite] + np.log(shifted.sum(axis=1))
    return out


_NS_INNER_PRIOR = 1  # SeedSpec namespace for inner prior draws


def second_moment_mc(
    spec: PriorSpec,
    b: int,
    seed: SeedSpec,
    inner_samples: int | None = None,
    chunk: int = 4096,
) -> SecondMomentReport:
    """Monte-Carlo ``E_H0[L_pi^2]``: mean of ``L_pi^2`` over ``b`` null
    Poissonized histograms, with ``L_pi`` computed by exact atom enumeration.

    When the atom count exceeds ``MAX_ENUMERATED_ATOMS``, ``inner_samples``
    prior draws (shared across replications) replace the exact enumeration;
    that estimator is biased upward by O(Var[likelihood]/inner_samples) and
    is flagged through ``is_exact=False`` like the exact-enumeration MC.
    """
    if b < 1:
        raise DomainError(f"need b >= 1, got {b}")
    p = spec.params
    try:
        log_w, atoms = enumerate_atoms(spec)
    except ConfigError:
        if inner_samples is None:
            raise
        log_w, atoms = _sampled_atoms(spec, inner_samples, seed)
    null = uniform_vector(p.d)
    counts = sample_histogram_matrix(null, p.n, Scheme.POISSONIZED, b, seed)
    values = np.empty(b, dtype=np.float64)
    for start in range(0, b, chunk):
        rows = counts[start : start + chunk]
        log_l = log_likelihood_ratios(rows, log_w, atoms)
        values[start : start + chunk] = np.exp(2.0 * log_l)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(b)) if b > 1 else float("nan")
    return SecondMomentReport(
        value=mean,
        is_exact=False,
        risk_lower_bound=risk_lower_bound_from_second_moment(max(1.0, mean)),
        se=se,
    )


def _sampled_atoms(
    spec: PriorSpec, inner_samples: int, seed: SeedSpec
) -> tuple[np.ndarray, np.ndarray]:
    p = spec.params
    draw_seed = SeedSpec(seed.root_seed, seed.stream_id)
    vectors = []
    for i in range(inner_samples):
        sub = np.random.SeedSequence(
            draw_seed.root_seed,
            spawn_key=(draw_seed.stream_id, _NS_INNER_PRIOR, i),
        )
        rng_seed = SeedSpec(int(sub.generate_state(1)[0]), 0)
        if spec.kind is PriorKind.PAIRED_DENSE:
            vectors.append(sample_paired_dense_prior(p, rng_seed).probs)
        elif spec.kind is PriorKind.SPARSE_TWOSIDED:
            vectors.append(
                sample_sparse_twosided_prior(p, spec.delta, rng_seed).probs
            )
        else:
            vec, _ = sample_impossibility_prior(
                p, spec.delta, rng_seed, spec.gamma_d, spec.r_n
            )
            vectors.append(vec.probs)
    log_w = np.full(inner_samples, -math.log(inner_samples))
    return log_w, np.vstack(vectors)


def paired_second_moment_mc(
    params: ProblemParams,
    b: int,
    seed: SeedSpec,
    inner_samples: int | None = None,
) -> SecondMomentReport:
    """Monte-Carlo cross-check of ``paired_second_moment_exact``."""
    spec = PriorSpec(PriorKind.PAIRED_DENSE, params)
    return second_moment_mc(spec, b, seed, inner_samples=inner_samples)


# ---------------------------------------------------------------------------
# exceedance-threshold geometry and the variational identity
# ---------------------------------------------------------------------------


def f_r_threshold(params: ProblemParams) -> tuple[float, float, float]:
    """``(r, t_r, C*)`` with ``C* = eps / eps2``, ``r = min(1, 4 C*)`` and
    ``t_r = sqrt(2 r ln d)``."""
    c_star = params.epsilon / threshold_eps2(params)
    r = min(1.0, 4.0 * c_star)
    t_r = math.sqrt(2.0 * r * math.log(params.d))
    return r, t_r, c_star


def normal_upper_tail(x: float) -> float:
    return math.exp(normal_log_upper_tail(x))


def f_r(y: float, r: float, d: int) -> float:
    """``F_r(y) = Phi_bar(t_r - y) + Phi_bar(t_r + y)`` with
    ``t_r = sqrt(2 r ln d)``: the chance a unit-variance coordinate shifted
    by y lands beyond the two-sided threshold t_r."""
    if d < 2:
        raise DomainError(f"need d >= 2, got d={d}")
    t_r = math.sqrt(2.0 * r * math.log(d))
    return normal_upper_tail(t_r - y) + normal_upper_tail(t_r + y)


def _normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def check_variational_identity(
    params: ProblemParams,
    c_star: float,
    grid_size: int = 2000,
    tol: float = 1e-6,
) -> bool:
    """Verify numerically that the constrained minimum of
    ``sum_j F_r(y_j)`` subject to ``sum_j y_j >= s sqrt(2 C* ln d)`` and
    ``0 <= y_j <= sqrt(2 ln d)`` equals ``s F_r(sqrt(2 C* ln d))``.

    Via the Lagrangian ``G(y) = F_r(y) - lambda_hat y`` with
    ``lambda_hat = phi(t_r - y_hat) - phi(t_r + y_hat)`` at
    ``y_hat = sqrt(2 C* ln d)``: if ``inf_y G(y) = G(y_hat)`` over
    ``(0, sqrt(2 ln d)]`` then the separable constrained problem is
    minimized by the symmetric point ``y_j = y_hat``.  The infimum is
    checked on a grid (plus ``y_hat`` itself) to relative tolerance
    ``tol``.
    """
    if grid_size < 1000:
        raise DomainError(f"need grid_size >= 1000, got {grid_size}")
    if not 0.0 < c_star <= 1.0:
        raise DomainError(
            f"need 0 < C* <= 1 (otherwise the constraint is infeasible), "
            f"got {c_star}"
        )
    d = params.d
    log_d = math.log(d)
    r = min(1.0, 4.0 * c_star)
    t_r = math.sqrt(2.0 * r * log_d)
    y_hat = math.sqrt(2.0 * c_star * log_d)
    y_max = math.sqrt(2.0 * log_d)
    lam_hat = _normal_pdf(t_r - y_hat) - _normal_pdf(t_r + y_hat)

    def lagrangian(y: float) -> float:
        return f_r(y, r, d) - lam_hat * y

    target = lagrangian(y_hat)
    best = target
    for i in range(1, grid_size + 1):
        y = y_max * i / grid_size
        g = lagrangian(y)
        if g < best:
            best = g
    return target - best <= tol * max(1.0, abs(target))
