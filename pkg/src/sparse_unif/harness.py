"""Experiment orchestration: power phase diagrams and their file formats.

A phase diagram scans a grid of ``(alpha, beta)`` cells.  Per cell the
sparsity is the nearest even integer to ``d**(1-alpha)`` and the signal
strength is the regime's beta-parametrization:

* dense:  ``eps = d**beta / sqrt(n)``
* sparse: ``eps = s * sqrt(2 beta ln(d) / (n d))``

Cells whose two-block alternative would leave the simplex
(``eps/s > 1/d``) are marked infeasible and not simulated.  The selected
test is calibrated once per grid on null draws (the same cutoff serves all
cells); each cell then reports the empirical rejection rate over ``reps``
fresh draws from its alternative.

Determinism: the calibration stream and every cell stream are derived from
the grid seed by fixed indices, so two runs with the same spec produce
byte-identical output files at any worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, DomainError
from .model import (
    ProblemParams,
    c_alpha,
    even_sparsity,
    make_block_alternative,
)
from .sampling import Scheme, SeedSpec, sample_histogram_matrix
from .statistics import (
    COMBINED_COMPONENTS,
    NullTailTable,
    batch_statistic,
    calibrate_many,
    grid_tail_table,
)

_SEED_NS_CALIBRATION = 0
_SEED_NS_CELLS = 1

TEST_SELECTORS = ("chisq", "max_std", "max_count", "ghc", "combined")


@dataclass(frozen=True)
class NRule:
    """How the sample size follows the domain size."""

    kind: str  # "equals_d" | "power_of_d" | "fixed"
    exponent: float | None = None
    n: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("equals_d", "power_of_d", "fixed"):
            raise ConfigError(f"unknown n_rule kind {self.kind!r}")
        if self.kind == "power_of_d" and (
            self.exponent is None or self.exponent <= 0
        ):
            raise ConfigError("power_of_d rule needs a positive exponent")
        if self.kind == "fixed" and (self.n is None or self.n < 1):
            raise ConfigError("fixed rule needs n >= 1")

    def resolve(self, d: int) -> int:
        if self.kind == "equals_d":
            return d
        if self.kind == "power_of_d":
            return round(d**self.exponent)
        return int(self.n)

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.exponent is not None:
            out["exponent"] = self.exponent
        if self.n is not None:
            out["n"] = self.n
        return out


@dataclass(frozen=True)
class PhaseGridSpec:
    regime: str  # "dense" | "sparse"
    alpha_range: tuple[float, float]
    alpha_steps: int
    beta_range: tuple[float, float]
    beta_steps: int
    d: int
    n_rule: NRule
    reps: int
    level: float
    calibration_b: int
    scheme: Scheme
    test: str
    seed: SeedSpec

    def __post_init__(self) -> None:
        if self.regime not in ("dense", "sparse"):
            raise ConfigError(f"regime must be dense or sparse, got {self.regime!r}")
        if self.test not in TEST_SELECTORS:
            raise ConfigError(f"test must be one of {TEST_SELECTORS}, got {self.test!r}")
        for name, (lo, hi), steps in (
            ("alpha", self.alpha_range, self.alpha_steps),
            ("beta", self.beta_range, self.beta_steps),
        ):
            if steps < 1:
                raise ConfigError(f"{name}_steps must be >= 1, got {steps}")
            if hi < lo:
                raise ConfigError(f"{name}_range is empty: [{lo}, {hi}]")
        if self.regime == "sparse":
            lo, hi = self.alpha_range
            if not (0.5 < lo and hi < 1.0):
                raise ConfigError(
                    f"sparse regime needs alpha_range inside (0.5, 1), "
                    f"got {self.alpha_range}"
                )
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.calibration_b < 1:
            raise ConfigError(f"calibration_b must be >= 1, got {self.calibration_b}")

    @property
    def n(self) -> int:
        return self.n_rule.resolve(self.d)

    def alphas(self) -> np.ndarray:
        return _axis(self.alpha_range, self.alpha_steps)

    def betas(self) -> np.ndarray:
        return _axis(self.beta_range, self.beta_steps)


def _axis(rng: tuple[float, float], steps: int) -> np.ndarray:
    lo, hi = rng
    if steps == 1:
        return np.asarray([lo], dtype=np.float64)
    return np.linspace(lo, hi, steps)


@dataclass(frozen=True)
class PowerCell:
    alpha: float
    beta: float
    power: float  # NaN when infeasible
    se: float
    reps: int
    feasible: bool


@dataclass(frozen=True)
class PowerGrid:
    cells: tuple[PowerCell, ...]  # row-major: alpha outer, beta inner
    boundary_curve: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        for cell in self.cells:
            if cell.feasible and not 0.0 <= cell.power <= 1.0:
                raise ConfigError(f"cell power outside [0, 1]: {cell}")

    def to_json_dict(self) -> dict:
        return {
            "cells": [
                {
                    "alpha": c.alpha,
                    "beta": c.beta,
                    "power": c.power,
                    "se": c.se,
                    "reps": c.reps,
                    "feasible": c.feasible,
                }
                for c in self.cells
            ],
            "boundary_curve": [
                {"alpha": a, "beta": b} for a, b in self.boundary_curve
            ],
        }


def cell_signal(
    regime: str, d: int, n: int, alpha: float, beta: float
) -> tuple[int, float]:
    """``(s, eps)`` for one grid cell under the regime's parametrization."""
    s = even_sparsity(d, alpha)
    if regime == "dense":
        eps = d**beta / math.sqrt(n)
    else:
        eps = s * math.sqrt(2.0 * beta * math.log(d) / (n * d))
    return s, eps


def cell_feasible(d: int, s: int, eps: float) -> bool:
    return eps / s <= 1.0 / d + 1e-15


def boundary_curve(
    regime: str, alphas: Iterable[float]
) -> tuple[tuple[float, float], ...]:
    """Theoretical detection boundary: ``beta = 1/4 - alpha/2`` (dense),
    ``beta = C(alpha)`` (sparse)."""
    if regime == "dense":
        return tuple((float(a), 0.25 - float(a) / 2.0) for a in alphas)
    return tuple((float(a), c_alpha(float(a))) for a in alphas)


def _rejections(
    values: np.ndarray, cutoffs: dict[str, float], test: str
) -> np.ndarray:
    if test == "chisq":
        return values >= cutoffs["chisq"]
    return values > cutoffs[test]


def run_power_cell(
    p_alt,
    params: ProblemParams,
    test: str,
    cutoffs: dict[str, float],
    reps: int,
    seed: SeedSpec,
    scheme: Scheme,
    table: NullTailTable | None = None,
) -> tuple[float, float]:
    """Empirical rejection rate and its binomial SE over ``reps`` draws."""
    if reps < 1:
        raise DomainError(f"need reps >= 1, got {reps}")
    counts = sample_histogram_matrix(p_alt, params.n, scheme, reps, seed)
    if test == "combined":
        reject = np.zeros(reps, dtype=bool)
        for name in COMBINED_COMPONENTS:
            stat = batch_statistic(name, params, table=table)
            reject |= stat(counts) > cutoffs[name]
    else:
        stat = batch_statistic(test, params, table=table)
        reject = _rejections(np.asarray(stat(counts)), cutoffs, test)
    power = float(reject.mean())
    se = math.sqrt(power * (1.0 - power) / reps)
    return power, se


def _grid_cutoffs(spec: PhaseGridSpec, table: NullTailTable | None) -> dict:
    params = ProblemParams(n=spec.n, d=spec.d, s=min(2, spec.d))
    names = COMBINED_COMPONENTS if spec.test == "combined" else (spec.test,)
    level = spec.level / 3.0 if spec.test == "combined" else spec.level
    stats = {
        name: batch_statistic(name, params, table=table) for name in names
    }
    return calibrate_many(
        stats,
        params,
        level,
        spec.calibration_b,
        spec.seed.child(_SEED_NS_CALIBRATION),
        spec.scheme,
    )


def _cell_payloads(spec: PhaseGridSpec) -> list[tuple]:
    payloads = []
    alphas, betas = spec.alphas(), spec.betas()
    n = spec.n
    for i, alpha in enumerate(alphas):
        for j, beta in enumerate(betas):
            index = i * len(betas) + j
            s, eps = cell_signal(spec.regime, spec.d, n, float(alpha), float(beta))
            payloads.append((index, float(alpha), float(beta), s, eps))
    return payloads


def _run_cell_payload(args) -> tuple[int, PowerCell]:
    (payload, spec, cutoffs, table) = args
    index, alpha, beta, s, eps = payload
    if not cell_feasible(spec.d, s, eps):
        return index, PowerCell(alpha, beta, float("nan"), float("nan"), spec.reps, False)
    params = ProblemParams(n=spec.n, d=spec.d, s=s, epsilon=eps, alpha=alpha)
    p_alt = make_block_alternative(params)
    power, se = run_power_cell(
        p_alt,
        params,
        spec.test,
        cutoffs,
        spec.reps,
        spec.seed.child(_SEED_NS_CELLS, index),
        spec.scheme,
        table=table,
    )
    return index, PowerCell(alpha, beta, power, se, spec.reps, True)


def run_phase_diagram(spec: PhaseGridSpec, threads: int = 1) -> PowerGrid:
    """Calibrate once, then evaluate every feasible cell.

    ``threads`` fans cells out to worker processes; results are assembled by
    cell index, so output is identical at any thread count.
    """
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    needs_table = spec.test in ("ghc", "combined")
    table = (
        grid_tail_table(ProblemParams(n=spec.n, d=spec.d, s=min(2, spec.d)))
        if needs_table
        else None
    )
    cutoffs = _grid_cutoffs(spec, table)
    payloads = _cell_payloads(spec)
    tasks = [(payload, spec, cutoffs, table) for payload in payloads]
    results: list[PowerCell | None] = [None] * len(tasks)
    if threads == 1:
        for task in tasks:
            index, cell = _run_cell_payload(task)
            results[index] = cell
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, len(tasks) // (8 * threads))
            for index, cell in pool.map(_run_cell_payload, tasks, chunksize=chunk):
                results[index] = cell
    curve = boundary_curve(spec.regime, spec.alphas())
    return PowerGrid(cells=tuple(results), boundary_curve=curve)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

CSV_HEADER = "alpha,beta,power,se,reps,feasible"


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def grid_to_csv(grid: PowerGrid) -> str:
    lines = [CSV_HEADER]
    for c in grid.cells:
        lines.append(
            f"{_fmt(c.alpha)},{_fmt(c.beta)},{_fmt(c.power)},{_fmt(c.se)},"
            f"{c.reps},{'true' if c.feasible else 'false'}"
        )
    return "\n".join(lines) + "\n"


def boundary_to_csv(grid: PowerGrid) -> str:
    lines = ["alpha,beta"]
    for a, b in grid.boundary_curve:
        lines.append(f"{_fmt(a)},{_fmt(b)}")
    return "\n".join(lines) + "\n"


def boundary_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".boundary.csv"


def emit_grid(grid: PowerGrid, path: str, fmt: str = "csv") -> None:
    """Write the grid (CSV columns ``alpha,beta,power,se,reps,feasible`` or
    JSON mirroring PowerGrid) plus the boundary curve in a sibling
    ``.boundary.csv`` file."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    try:
        if fmt == "csv":
            payload = grid_to_csv(grid)
        else:
            payload = json.dumps(grid.to_json_dict(), indent=2) + "\n"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
        with open(boundary_path(path), "w", encoding="utf-8") as fh:
            fh.write(boundary_to_csv(grid))
    except OSError as err:
        raise ConfigError(f"cannot write grid to {path}: {err}") from err


def grid_from_json_dict(data: dict) -> PowerGrid:
    cells = tuple(
        PowerCell(
            alpha=float(c["alpha"]),
            beta=float(c["beta"]),
            power=float(c["power"]),
            se=float(c["se"]),
            reps=int(c["reps"]),
            feasible=bool(c["feasible"]),
        )
        for c in data["cells"]
    )
    curve = tuple(
        (float(p["alpha"]), float(p["beta"])) for p in data["boundary_curve"]
    )
    return PowerGrid(cells=cells, boundary_curve=curve)


_CONFIG_KEYS = {
    "regime",
    "alpha_range",
    "alpha_steps",
    "beta_range",
    "beta_steps",
    "d",
    "n_rule",
    "reps",
    "level",
    "calibration_b",
    "scheme",
    "test",
    "seed",
}


def spec_from_dict(data: dict) -> PhaseGridSpec:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _CONFIG_KEYS - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    try:
        n_rule = NRule(
            kind=data["n_rule"]["kind"],
            exponent=data["n_rule"].get("exponent"),
            n=data["n_rule"].get("n"),
        )
        seed = SeedSpec(
            root_seed=int(data["seed"]["root_seed"]),
            stream_id=int(data["seed"].get("stream_id", 0)),
        )
        return PhaseGridSpec(
            regime=str(data["regime"]),
            alpha_range=(float(data["alpha_range"][0]), float(data["alpha_range"][1])),
            alpha_steps=int(data["alpha_steps"]),
            beta_range=(float(data["beta_range"][0]), float(data["beta_range"][1])),
            beta_steps=int(data["beta_steps"]),
            d=int(data["d"]),
            n_rule=n_rule,
            reps=int(data["reps"]),
            level=float(data["level"]),
            calibration_b=int(data["calibration_b"]),
            scheme=Scheme(str(data["scheme"])),
            test=str(data["test"]),
            seed=seed,
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid config: {err}") from err


def spec_to_dict(spec: PhaseGridSpec) -> dict:
    return {
        "regime": spec.regime,
        "alpha_range": list(spec.alpha_range),
        "alpha_steps": spec.alpha_steps,
        "beta_range": list(spec.beta_range),
        "beta_steps": spec.beta_steps,
        "d": spec.d,
        "n_rule": spec.n_rule.to_json_dict(),
        "reps": spec.reps,
        "level": spec.level,
        "calibration_b": spec.calibration_b,
        "scheme": spec.scheme.value,
        "test": spec.test,
        "seed": {
            "root_seed": spec.seed.root_seed,
            "stream_id": spec.seed.stream_id
            if isinstance(spec.seed.stream_id, int)
            else list(spec.seed.stream_id),
        },
    }


def load_config(path: str) -> PhaseGridSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return spec_from_dict(data)
