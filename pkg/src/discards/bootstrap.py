"""Hierarchical bootstrap uncertainty for the discard-rate estimate.

Three resampling strategies over the three-level hierarchy (ships, samples,
observations): resample every level, resample ships only, or ignore the
hierarchy and resample pooled observations. Confidence intervals use the
percentile method with type-7 (linear interpolation) empirical quantiles.

Each replicate derives its own stream from (seed, replicate index), so
results are reproducible and independent of execution order or thread count.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .domain import Sample, ShipRecord, Stratum, SurveyDataset
from .errors import BootstrapUnstableError, DiscardsError
from .estimator import AggregateMode, DiscardEstimate, EstimatorConfig, estimate
from .rng import RngState


class BootstrapStrategy(enum.Enum):
    ALL_LEVELS = "all"
    HIGHEST_LEVEL = "ship"
    INDEPENDENT_OBSERVATIONS = "independent"


@dataclass(frozen=True)
class BootstrapConfig:
    strategy: BootstrapStrategy = BootstrapStrategy.ALL_LEVELS
    replicates: int = 5000
    ci_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    point_estimate: float
    replicate_rates: tuple[float, ...]  # successful replicates only
    ci_low: float
    ci_high: float
    n_failed: int
    strategy: BootstrapStrategy
    replicates: int
    ci_level: float
    seed: int

    @property
    def ci_range(self) -> float:
        return self.ci_high - self.ci_low

    def to_mapping(self, *, dump_replicates: bool = False) -> Mapping:
        out = {
            "strategy": self.strategy.value,
            "replicates": self.replicates,
            "ci_level": self.ci_level,
            "seed": self.seed,
            "point_estimate": self.point_estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "ci_range": self.ci_range,
            "n_failed": self.n_failed,
            "n_successful": len(self.replicate_rates),
        }
        if dump_replicates:
            out["replicate_rates"] = list(self.replicate_rates)
        return out


def _resample_ship_all_levels(
    ship: ShipRecord, draw_index: int, gen: np.random.Generator
) -> ShipRecord:
    n_samples = len(ship.samples)
    sample_idx = gen.integers(0, n_samples, n_samples)
    new_samples = []
    for j, si in enumerate(sample_idx):
        src = ship.samples[si]
        obs_idx = gen.integers(0, src.lengths.size, src.lengths.size)
        new_samples.append(
            Sample(f"{src.sample_id}~{j}", src.lengths[obs_idx])
        )
    return ShipRecord(
        f"{ship.ship_id}~{draw_index}", ship.location_id, tuple(new_samples)
    )


def _resample_stratum(
    stratum: Stratum, strategy: BootstrapStrategy, gen: np.random.Generator
) -> Stratum:
    n_ships = stratum.n_ships
    if n_ships == 0:
        raise DiscardsError(f"cannot resample empty stratum {stratum.kind.value!r}")

    if strategy is BootstrapStrategy.INDEPENDENT_OBSERVATIONS:
        pooled = stratum.pooled_lengths()
        idx = gen.integers(0, pooled.size, pooled.size)
        ship = ShipRecord(
            "pooled", "pooled", (Sample("pooled-0", pooled[idx]),)
        )
        return Stratum(stratum.kind, (ship,))

    ship_idx = gen.integers(0, n_ships, n_ships)
    ships = []
    for i, si in enumerate(ship_idx):
        src = stratum.ships[si]
        if strategy is BootstrapStrategy.HIGHEST_LEVEL:
            # Each ship is taken as one observation: contents carried intact,
            # identity freshened so repeated draws stay distinguishable.
            ships.append(
                ShipRecord(f"{src.ship_id}~{i}", src.location_id, src.samples)
            )
        else:
            ships.append(_resample_ship_all_levels(src, i, gen))
    return Stratum(stratum.kind, tuple(ships))


def resample(
    dataset: SurveyDataset,
    strategy: BootstrapStrategy,
    rng: RngState | np.random.Generator,
) -> SurveyDataset:
    """One bootstrap resample of the dataset under the given strategy.

    The landings record passes through unchanged. Length arrays are shared
    (they are immutable); identities are fresh.
    """
    gen = rng.generator() if isinstance(rng, RngState) else rng
    return SurveyDataset(
        at_sea=_resample_stratum(dataset.at_sea, strategy, gen),
        ashore=_resample_stratum(dataset.ashore, strategy, gen),
        landings=dataset.landings,
        metadata=dataset.metadata,
    )


def run(
    dataset: SurveyDataset,
    est_cfg: EstimatorConfig,
    boot_cfg: BootstrapConfig,
    *,
    threads: int = 1,
    point: DiscardEstimate | None = None,
) -> BootstrapResult:
    """Bootstrap the full estimation pipeline.

    The point estimate is computed on the original data. Replicates that fail
    estimation (e.g. a resample with no catch mass above d_max) are excluded
    and counted; more than 20% failures aborts with BootstrapUnstableError.
    """
    if point is None:
        point = estimate(dataset, est_cfg)
    root = RngState(boot_cfg.seed)
    include_fit = est_cfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC

    def one(r: int) -> float | None:
        redrawn = resample(dataset, boot_cfg.strategy, root.derive(r))
        try:
            result = estimate(
                redrawn, est_cfg, check=False, include_fit=include_fit
            )
        except DiscardsError:
            return None
        return result.discard_rate_numbers

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(boot_cfg.replicates)))
    else:
        outcomes = [one(r) for r in range(boot_cfg.replicates)]

    rates = [r for r in outcomes if r is not None]
    n_failed = boot_cfg.replicates - len(rates)
    if n_failed > 0.2 * boot_cfg.replicates:
        raise BootstrapUnstableError(n_failed, boot_cfg.replicates)

    alpha = (1.0 - boot_cfg.ci_level) / 2.0
    ci_low, ci_high = np.quantile(rates, [alpha, 1.0 - alpha], method="linear")
    return BootstrapResult(
        point_estimate=point.discard_rate_numbers,
        replicate_rates=tuple(rates),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        n_failed=n_failed,
        strategy=boot_cfg.strategy,
        replicates=boot_cfg.replicates,
        ci_level=boot_cfg.ci_level,
        seed=boot_cfg.seed,
    )
