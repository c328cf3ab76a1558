"""Monte Carlo evaluation of monitoring schemes.

A monitoring scheme fixes ships x samples-per-ship x fish-per-sample for each
stratum. Data for each run either come from hierarchical with-replacement
resampling of a real dataset (preserving intra-class correlation) or from a
synthetic population with ship- and tow-level length shifts and a logistic
discarding rule. Precision is the range of the 95% interval of the estimated
rates across runs; bias is the mean estimate minus a reference rate computed
independently of the estimator.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .domain import (
    LandingsRecord,
    Sample,
    ShipRecord,
    Stratum,
    StratumKind,
    SurveyDataset,
)
from .errors import DiscardsError, SimulationUnstableError
from .estimator import (
    AggregateMode,
    EstimatorConfig,
    UndeterminedPolicy,
    _expit,
    estimate,
)
from .rng import RngState

MAX_GENERATED_LENGTH_CM = 250.0


@dataclass(frozen=True)
class StageDesign:
    """Sampling effort for one stratum: ships, samples per ship, fish per
    sample."""

    n_ships: int
    n_samples_per_ship: int
    n_obs_per_sample: int

    def __post_init__(self):
        if min(self.n_ships, self.n_samples_per_ship, self.n_obs_per_sample) < 1:
            raise ValueError("all scheme counts must be at least 1")


@dataclass(frozen=True)
class MonitoringScheme:
    sea: StageDesign
    ashore: StageDesign

    def label(self) -> str:
        s, a = self.sea, self.ashore
        return (
            f"sea {s.n_ships}/{s.n_samples_per_ship}/{s.n_obs_per_sample} "
            f"ashore {a.n_ships}/{a.n_samples_per_ship}/{a.n_obs_per_sample}"
        )


@dataclass(frozen=True)
class LengthModel:
    """Mixture-of-lognormals model for the true catch length distribution.

    Components are (weight, log_mean, log_sd) with weights summing to 1.
    """

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("length model needs at least one component")
        total = sum(w for w, _, _ in self.components)
        if not math.isclose(total, 1.0, rel_tol=1e-9):
            raise ValueError("component weights must sum to 1")
        if any(sd <= 0 or w < 0 for w, _, sd in self.components):
            raise ValueError("weights must be >= 0 and log-sds positive")

    @classmethod
    def lognormal(cls, log_mean: float, log_sd: float) -> "LengthModel":
        return cls(((1.0, log_mean, log_sd),))

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if len(self.components) == 1:
            _, mu, sd = self.components[0]
            return np.exp(gen.normal(mu, sd, n))
        weights = np.array([w for w, _, _ in self.components])
        mus = np.array([m for _, m, _ in self.components])
        sds = np.array([s for _, _, s in self.components])
        comp = gen.choice(len(self.components), size=n, p=weights)
        return np.exp(gen.standard_normal(n) * sds[comp] + mus[comp])

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        for w, mu, sd in self.components:
            z = (np.log(xp) - mu) / sd
            out[pos] += (
                w * np.exp(-0.5 * z * z) / (xp * sd * math.sqrt(2.0 * math.pi))
            )
        return out


@dataclass(frozen=True)
class SyntheticPopulation:
    """Ground-truth population for synthetic monitoring-scheme studies.

    Ship and tow effects shift individual lengths (cm); discarding follows a
    logistic in length, so ashore fish are survivors of the discard rule.
    """

    length_model: LengthModel
    ship_effect_sd: float = 0.0
    tow_effect_sd: float = 0.0
    true_d50_cm: float = 35.0
    true_b: float = -0.5
    true_landed_biomass_kg: float = 1.0e7

    def __post_init__(self):
        if self.ship_effect_sd < 0 or self.tow_effect_sd < 0:
            raise ValueError("effect standard deviations must be non-negative")
        if not self.true_landed_biomass_kg > 0:
            raise ValueError("landed biomass must be positive")

    def discard_probability(self, length_cm) -> np.ndarray:
        return _expit(self.true_b * (np.asarray(length_cm) - self.true_d50_cm))

    def to_mapping(self) -> Mapping:
        return {
            "length_model": {
                "components": [
                    {"weight": w, "log_mean": m, "log_sd": s}
                    for w, m, s in self.length_model.components
                ]
            },
            "ship_effect_sd": self.ship_effect_sd,
            "tow_effect_sd": self.tow_effect_sd,
            "true_d50_cm": self.true_d50_cm,
            "true_b": self.true_b,
            "true_landed_biomass_kg": self.true_landed_biomass_kg,
        }


def population_from_mapping(data: Mapping) -> SyntheticPopulation:
    """Build a population from a JSON-style mapping (see README schema)."""
    model_spec = data["length_model"]
    if "components" in model_spec:
        comps = tuple(
            (float(c["weight"]), float(c["log_mean"]), float(c["log_sd"]))
            for c in model_spec["components"]
        )
        model = LengthModel(comps)
    else:
        model = LengthModel.lognormal(
            float(model_spec["log_mean"]), float(model_spec["log_sd"])
        )
    return SyntheticPopulation(
        length_model=model,
        ship_effect_sd=float(data.get("ship_effect_sd", 0.0)),
        tow_effect_sd=float(data.get("tow_effect_sd", 0.0)),
        true_d50_cm=float(data.get("true_d50_cm", 35.0)),
        true_b=float(data.get("true_b", -0.5)),
        true_landed_biomass_kg=float(data.get("true_landed_biomass_kg", 1.0e7)),
    )


def default_population() -> SyntheticPopulation:
    """Cod-like default: lognormal lengths around 50 cm, clustered ships."""
    return SyntheticPopulation(
        length_model=LengthModel.lognormal(math.log(50.0), 0.35),
        ship_effect_sd=5.0,
        tow_effect_sd=2.0,
        true_d50_cm=35.0,
        true_b=-0.5,
        true_landed_biomass_kg=1.0e7,
    )


def true_discard_fraction(
    pop: SyntheticPopulation, grid_step_cm: float = 0.1
) -> float:
    """Reference discard rate by numbers, by quadrature on a fine length grid.

    Integrates the discard probability against the realized-length density
    (the base model convolved with the ship+tow shift distribution). This is
    an oracle independent of the estimation pipeline.
    """
    x = np.arange(grid_step_cm / 2.0, MAX_GENERATED_LENGTH_CM, grid_step_cm)
    effect_sd = math.hypot(pop.ship_effect_sd, pop.tow_effect_sd)
    if effect_sd == 0:
        density = pop.length_model.pdf(x)
    else:
        shifts = np.linspace(-6.0 * effect_sd, 6.0 * effect_sd, 121)
        shift_w = np.exp(-0.5 * (shifts / effect_sd) ** 2)
        shift_w /= shift_w.sum()
        density = np.zeros_like(x)
        for s, w in zip(shifts, shift_w):
            density += w * pop.length_model.pdf(x - s)
    p = pop.discard_probability(x)
    mass = density.sum()
    if mass <= 0:
        raise DiscardsError("length model has no mass on the length grid")
    return float(np.sum(p * density) / mass)


def _thinned_lengths(
    pop: SyntheticPopulation, n: int, shift: float, gen: np.random.Generator
) -> np.ndarray:
    """Lengths of landed fish: survivors of the logistic discard rule."""
    out: list[np.ndarray] = []
    have = 0
    while have < n:
        m = max(int((n - have) * 2.5) + 16, 32)
        cand = pop.length_model.sample(m, gen) + shift
        cand = np.clip(cand, 1.0, MAX_GENERATED_LENGTH_CM)
        keep = gen.random(m) < (1.0 - pop.discard_probability(cand))
        kept = cand[keep]
        out.append(kept)
        have += kept.size
    return np.concatenate(out)[:n]


def generate(
    pop: SyntheticPopulation,
    scheme: MonitoringScheme,
    rng: RngState | np.random.Generator,
) -> SurveyDataset:
    """Draw a synthetic survey dataset matching the scheme dimensions."""
    gen = rng.generator() if isinstance(rng, RngState) else rng
    strata = []
    for kind, design in (
        (StratumKind.AT_SEA, scheme.sea),
        (StratumKind.ASHORE, scheme.ashore),
    ):
        prefix = kind.value
        ships = []
        for i in range(design.n_ships):
            ship_shift = gen.normal(0.0, pop.ship_effect_sd)
            samples = []
            for j in range(design.n_samples_per_ship):
                shift = ship_shift + gen.normal(0.0, pop.tow_effect_sd)
                if kind is StratumKind.AT_SEA:
                    lengths = pop.length_model.sample(
                        design.n_obs_per_sample, gen
                    ) + shift
                    lengths = np.clip(lengths, 1.0, MAX_GENERATED_LENGTH_CM)
                else:
                    lengths = _thinned_lengths(
                        pop, design.n_obs_per_sample, shift, gen
                    )
                samples.append(Sample(f"{prefix}-s{i}-t{j}", lengths))
            ships.append(ShipRecord(f"{prefix}-{i}", "sim", tuple(samples)))
        strata.append(Stratum(kind, tuple(ships)))
    landings = LandingsRecord(
        "synthetic", "synthetic", 0, pop.true_landed_biomass_kg
    )
    return SurveyDataset(
        at_sea=strata[0],
        ashore=strata[1],
        landings=landings,
        metadata={"mode": "synthetic"},
    )


def resample_scheme(
    source: SurveyDataset,
    scheme: MonitoringScheme,
    rng: RngState | np.random.Generator,
) -> SurveyDataset:
    """Draw a dataset of the scheme's dimensions from a real dataset.

    Ships, then samples within each drawn ship, then observations within each
    drawn sample are all sampled with replacement, preserving the intra-class
    correlation of the source. Dimensions may exceed the source's (sampling
    is with replacement).
    """
    gen = rng.generator() if isinstance(rng, RngState) else rng
    strata = []
    for stratum, design in (
        (source.at_sea, scheme.sea),
        (source.ashore, scheme.ashore),
    ):
        if stratum.n_ships == 0:
            raise DiscardsError(
                f"cannot resample empty stratum {stratum.kind.value!r}"
            )
        ship_idx = gen.integers(0, stratum.n_ships, design.n_ships)
        ships = []
        for i, si in enumerate(ship_idx):
            src_ship = stratum.ships[si]
            sample_idx = gen.integers(
                0, len(src_ship.samples), design.n_samples_per_ship
            )
            samples = []
            for j, sj in enumerate(sample_idx):
                src = src_ship.samples[sj]
                obs_idx = gen.integers(0, src.lengths.size, design.n_obs_per_sample)
                samples.append(Sample(f"{src.sample_id}~{j}", src.lengths[obs_idx]))
            ships.append(
                ShipRecord(
                    f"{src_ship.ship_id}~{i}", src_ship.location_id, tuple(samples)
                )
            )
        strata.append(Stratum(stratum.kind, tuple(ships)))
    return SurveyDataset(
        at_sea=strata[0],
        ashore=strata[1],
        landings=source.landings,
        metadata=source.metadata,
    )


def filter_source(
    dataset: SurveyDataset,
    *,
    sea_min_samples: int = 2,
    ashore_min_samples: int = 1,
    min_obs_per_sample: int = 100,
) -> SurveyDataset:
    """Restrict a source dataset to well-sampled ships before resampling.

    Samples below the observation threshold are dropped first, then ships
    with too few remaining samples. Ashore ships carry one sample each, so
    the sample-count threshold applies to the at-sea stratum.
    """
    strata = []
    for stratum, min_samples in (
        (dataset.at_sea, sea_min_samples),
        (dataset.ashore, ashore_min_samples),
    ):
        ships = []
        for ship in stratum.ships:
            samples = tuple(
                s for s in ship.samples if s.n_obs >= min_obs_per_sample
            )
            if len(samples) >= min_samples:
                ships.append(
                    ShipRecord(ship.ship_id, ship.location_id, samples)
                )
        if not ships:
            raise DiscardsError(
                f"source filter emptied stratum {stratum.kind.value!r}"
            )
        strata.append(Stratum(stratum.kind, tuple(ships)))
    return SurveyDataset(
        at_sea=strata[0],
        ashore=strata[1],
        landings=dataset.landings,
        metadata=dataset.metadata,
    )


class SimulationVariant(enum.Enum):
    """Estimation variants of the bias study: the standard method (1 cm
    classes, undetermined ratios dropped), zero-filling undetermined ratios,
    and 2 cm classes."""

    STANDARD = "standard"
    ZERO_FILL = "zerofill"
    BIN2CM = "bin2"


def apply_variant(cfg: EstimatorConfig, variant: SimulationVariant) -> EstimatorConfig:
    if variant is SimulationVariant.STANDARD:
        changes = {"bin_width_cm": 1.0, "undetermined_policy": UndeterminedPolicy.DROP}
    elif variant is SimulationVariant.ZERO_FILL:
        changes = {
            "bin_width_cm": 1.0,
            "undetermined_policy": UndeterminedPolicy.ZERO_FILL,
        }
    else:
        changes = {"bin_width_cm": 2.0, "undetermined_policy": UndeterminedPolicy.DROP}
    from dataclasses import replace

    return replace(cfg, **changes)


@dataclass(frozen=True)
class SchemeResult:
    scheme: MonitoringScheme
    variant: SimulationVariant
    mean_rate: float
    ci_range: float
    bias: float
    reference_rate: float
    n_runs: int
    n_failed: int

    def to_row(self) -> dict:
        return {
            "variant": self.variant.value,
            "sea_ships": self.scheme.sea.n_ships,
            "sea_samples": self.scheme.sea.n_samples_per_ship,
            "sea_obs": self.scheme.sea.n_obs_per_sample,
            "ashore_ships": self.scheme.ashore.n_ships,
            "ashore_samples": self.scheme.ashore.n_samples_per_ship,
            "ashore_obs": self.scheme.ashore.n_obs_per_sample,
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "mean_rate": self.mean_rate,
            "ci_range": self.ci_range,
            "bias": self.bias,
            "reference_rate": self.reference_rate,
        }


RESULT_COLUMNS = [
    "variant",
    "sea_ships",
    "sea_samples",
    "sea_obs",
    "ashore_ships",
    "ashore_samples",
    "ashore_obs",
    "n_runs",
    "n_failed",
    "mean_rate",
    "ci_range",
    "bias",
    "reference_rate",
]


def table1_grid() -> list[MonitoringScheme]:
    """The 18 x 4 = 72 scheme grid of the monitoring-scheme study.

    At sea: ships 10/20/40, samples 1/2, fish 25/50/100. Ashore: ships 10/20,
    samples 1/2, always 100 fish. Order: at-sea design major, ashore design
    cycling fastest.
    """
    sea_rows = [
        StageDesign(ships, samples, obs)
        for ships in (10, 20, 40)
        for samples in (1, 2)
        for obs in (25, 50, 100)
    ]
    ashore_rows = [
        StageDesign(ships, samples, 100)
        for ships in (10, 20)
        for samples in (1, 2)
    ]
    return [
        MonitoringScheme(sea, ashore) for sea in sea_rows for ashore in ashore_rows
    ]


def _draw_dataset(
    source, scheme: MonitoringScheme, state: RngState
) -> SurveyDataset:
    if isinstance(source, SyntheticPopulation):
        return generate(source, scheme, state)
    return resample_scheme(source, scheme, state)


def _reference_rate(source, cfg: EstimatorConfig) -> float:
    if isinstance(source, SyntheticPopulation):
        return true_discard_fraction(source)
    return estimate(source, cfg, check=False).discard_rate_numbers


def _summarize_rates(
    rates: list[float],
    scheme: MonitoringScheme,
    variant: SimulationVariant,
    reference: float,
    n_runs: int,
) -> SchemeResult:
    n_failed = n_runs - len(rates)
    if n_failed > 0.2 * n_runs:
        raise SimulationUnstableError(n_failed, n_runs)
    arr = np.asarray(rates)
    lo, hi = np.quantile(arr, [0.025, 0.975], method="linear")
    mean_rate = float(arr.mean())
    return SchemeResult(
        scheme=scheme,
        variant=variant,
        mean_rate=mean_rate,
        ci_range=float(hi - lo),
        bias=mean_rate - reference,
        reference_rate=reference,
        n_runs=n_runs,
        n_failed=n_failed,
    )


def evaluate_scheme(
    source: SurveyDataset | SyntheticPopulation,
    scheme: MonitoringScheme,
    cfg: EstimatorConfig,
    n_runs: int,
    seed: int,
    *,
    variant: SimulationVariant = SimulationVariant.STANDARD,
    scheme_index: int = 0,
    reference_rate: float | None = None,
    threads: int = 1,
) -> SchemeResult:
    """Monte Carlo precision and bias of one scheme under one variant.

    The reference rate is the estimate on the full source dataset (resample
    mode) or the quadrature truth of the population (synthetic mode). Runs
    derive their streams from (seed, scheme_index, run), so schemes and runs
    are order- and thread-independent.
    """
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    var_cfg = apply_variant(cfg, variant)
    if reference_rate is None:
        reference_rate = _reference_rate(source, var_cfg)
    root = RngState(seed, (scheme_index,))
    include_fit = var_cfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC

    def one(run: int) -> float | None:
        dataset = _draw_dataset(source, scheme, root.derive(run))
        try:
            result = estimate(dataset, var_cfg, check=False, include_fit=include_fit)
        except DiscardsError:
            return None
        return result.discard_rate_numbers

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(n_runs)))
    else:
        outcomes = [one(r) for r in range(n_runs)]
    rates = [r for r in outcomes if r is not None]
    return _summarize_rates(rates, scheme, variant, reference_rate, n_runs)


def sweep(
    source: SurveyDataset | SyntheticPopulation,
    grid: Sequence[MonitoringScheme],
    variants: Sequence[SimulationVariant],
    cfg: EstimatorConfig,
    n_runs: int,
    seed: int,
    *,
    threads: int = 1,
) -> list[SchemeResult]:
    """Evaluate every scheme in the grid under every requested variant.

    Within one scheme and run, all variants see the same drawn dataset, so
    variant comparisons are paired. Results are ordered scheme-major,
    variants in the requested order.
    """
    if not grid:
        raise ValueError("scheme grid is empty")
    if not variants:
        raise ValueError("no variants requested")
    var_cfgs = {v: apply_variant(cfg, v) for v in variants}
    references = {v: _reference_rate(source, var_cfgs[v]) for v in variants}

    results: list[SchemeResult] = []
    for s_idx, scheme in enumerate(grid):
        root = RngState(seed, (s_idx,))

        def one(run: int) -> dict[SimulationVariant, float | None]:
            dataset = _draw_dataset(source, scheme, root.derive(run))
            rates: dict[SimulationVariant, float | None] = {}
            for v in variants:
                vcfg = var_cfgs[v]
                include_fit = vcfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC
                try:
                    rates[v] = estimate(
                        dataset, vcfg, check=False, include_fit=include_fit
                    ).discard_rate_numbers
                except DiscardsError:
                    rates[v] = None
            return rates

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(one, range(n_runs)))
        else:
            outcomes = [one(r) for r in range(n_runs)]
        for v in variants:
            rates = [o[v] for o in outcomes if o[v] is not None]
            results.append(
                _summarize_rates(rates, scheme, v, references[v], n_runs)
            )
    return results
