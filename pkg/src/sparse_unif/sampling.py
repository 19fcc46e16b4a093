"""Histogram sampling with deterministic, stream-splittable randomness.

Randomness contract: every draw is a pure function of a ``SeedSpec``.  The
generator is counter-based (Philox) keyed through ``numpy.random.SeedSequence``
so that distinct ``(root_seed, stream_id)`` pairs give statistically
independent streams and the same pair always reproduces the same sequence.
Batch generation is carved into fixed 64-replication blocks, each owning a
derived stream, so a batch is bitwise identical no matter how many workers
split the blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .errors import DomainError
from .model import ProbabilityVector

BLOCK_SIZE = 64
"""Replications per derived stream in batch generation.  Fixed: changing it
changes which stream produces which replication and hence all batch output."""


class Scheme(Enum):
    MULTINOMIAL = "multinomial"
    POISSONIZED = "poissonized"


@dataclass(frozen=True)
class SeedSpec:
    """Root of a family of independent random streams.

    ``stream_id`` is a nonnegative integer (or, for internally derived
    sub-streams, a tuple of them).  Distinct ``(root_seed, stream_id)``
    pairs give statistically independent streams; the same pair always
    reproduces the identical sequence.
    """

    root_seed: int
    stream_id: int | tuple[int, ...] = 0

    def __post_init__(self) -> None:
        path = self._stream_path()
        if any(part < 0 for part in path):
            raise DomainError(f"stream_id must be >= 0, got {self.stream_id}")

    def _stream_path(self) -> tuple[int, ...]:
        if isinstance(self.stream_id, tuple):
            return self.stream_id
        return (self.stream_id,)

    def generator(self, *subpath: int) -> np.random.Generator:
        """Philox generator for this stream (or a derived sub-stream)."""
        seq = np.random.SeedSequence(
            self.root_seed, spawn_key=(*self._stream_path(), *subpath)
        )
        return np.random.Generator(np.random.Philox(seed=seq))

    def child(self, *path: int) -> "SeedSpec":
        """An independent stream addressed below this one."""
        return SeedSpec(self.root_seed, self._stream_path() + path)


@dataclass(frozen=True)
class Histogram:
    """Observed counts over [d] from one draw."""

    counts: np.ndarray
    n: int
    scheme: Scheme

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise DomainError("histogram counts must be non-empty and 1-D")
        if np.any(counts < 0):
            raise DomainError("histogram counts must be nonnegative")
        if self.scheme is Scheme.MULTINOMIAL and int(counts.sum()) != self.n:
            raise DomainError(
                f"multinomial histogram must have total n={self.n}, "
                f"got {int(counts.sum())}"
            )
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def d(self) -> int:
        return int(self.counts.size)


def _draw_matrix(
    rng: np.random.Generator,
    p: np.ndarray,
    n: int,
    scheme: Scheme,
    rows: int,
) -> np.ndarray:
    if scheme is Scheme.MULTINOMIAL:
        return rng.multinomial(n, p, size=rows).astype(np.int64)
    return rng.poisson(lam=n * p, size=(rows, p.size)).astype(np.int64)


def sample_multinomial(p: ProbabilityVector, n: int, seed: SeedSpec) -> Histogram:
    """One Multinomial(n; p) histogram (sequential conditional binomials)."""
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    counts = _draw_matrix(seed.generator(), p.probs, n, Scheme.MULTINOMIAL, 1)[0]
    return Histogram(counts=counts, n=n, scheme=Scheme.MULTINOMIAL)


def sample_poissonized(p: ProbabilityVector, n: int, seed: SeedSpec) -> Histogram:
    """One Poissonized histogram: d independent Poisson(n * p_j) counts.

    The product form has exactly the law of drawing N ~ Poisson(n) samples
    and binning them, but is O(d) and embarrassingly parallel.
    """
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    counts = _draw_matrix(seed.generator(), p.probs, n, Scheme.POISSONIZED, 1)[0]
    return Histogram(counts=counts, n=n, scheme=Scheme.POISSONIZED)


def sample_histogram(
    p: ProbabilityVector, n: int, scheme: Scheme, seed: SeedSpec
) -> Histogram:
    if scheme is Scheme.MULTINOMIAL:
        return sample_multinomial(p, n, seed)
    return sample_poissonized(p, n, seed)


def block_starts(reps: int) -> range:
    return range(0, reps, BLOCK_SIZE)


# Namespace component prefixed to batch-block spawn keys so other consumers
# of the same SeedSpec (e.g. inner prior sampling) can derive disjoint
# streams with a different prefix.
_NS_BLOCKS = 0


def sample_block(
    p: ProbabilityVector,
    n: int,
    scheme: Scheme,
    seed: SeedSpec,
    block_index: int,
    rows: int,
) -> np.ndarray:
    """The ``block_index``-th fixed block of a replication batch."""
    rng = seed.generator(_NS_BLOCKS, block_index)
    return _draw_matrix(rng, p.probs, n, scheme, rows)


def iter_histogram_blocks(
    p: ProbabilityVector,
    n: int,
    scheme: Scheme,
    reps: int,
    seed: SeedSpec,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start_row, block_matrix)`` pairs covering ``reps`` rows."""
    for block_index, start in enumerate(block_starts(reps)):
        rows = min(BLOCK_SIZE, reps - start)
        yield start, sample_block(p, n, scheme, seed, block_index, rows)


def sample_histogram_matrix(
    p: ProbabilityVector,
    n: int,
    scheme: Scheme,
    reps: int,
    seed: SeedSpec,
) -> np.ndarray:
    """``reps x d`` count matrix; row r is replication r, independent of how
    many workers would have produced it (fixed block-to-stream layout)."""
    if reps < 1:
        raise DomainError(f"need reps >= 1, got {reps}")
    out = np.empty((reps, p.d), dtype=np.int64)
    for start, block in iter_histogram_blocks(p, n, scheme, reps, seed):
        out[start : start + block.shape[0]] = block
    return out
