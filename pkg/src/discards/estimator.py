"""Length-based minimum discard-rate estimation.

Pipeline: pool the ashore observations into a length distribution, convert
landed biomass to landed numbers per length class via the cubic length-weight
relation, raise the at-sea length proportions to absolute catch numbers using
the classes above the no-discard length, form per-class discard proportions,
fit a logistic curve over length, and aggregate to a single discard rate by
numbers.

Class membership: a fish of length L falls in the class with lower bound
floor(L / bin_width) * bin_width; a class is "above d_max" iff its lower
bound is strictly greater than d_max_cm. Class representative length is the
midpoint. All operations are pure and deterministic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .domain import SurveyDataset, LandingsRecord, validate
from .errors import (
    DiscardsError,
    EmptyReferenceRangeError,
    FitNonConvergenceError,
    InsufficientClassesError,
    ValidationError,
)


class UndeterminedPolicy(enum.Enum):
    """Handling of classes with zero catch numbers in the discard ratio."""

    DROP = "drop"
    ZERO_FILL = "zero"


class AggregateMode(enum.Enum):
    """How per-class proportions aggregate into the headline rate."""

    FITTED_LOGISTIC = "fitted"
    RAW_PROPORTIONS = "raw"


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator knobs. ``d_max_cm`` has no default: it is a biological
    assumption the user must supply."""

    d_max_cm: float
    condition_factor: float = 0.01
    weight_exponent: float = 3.0
    bin_width_cm: float = 1.0
    undetermined_policy: UndeterminedPolicy = UndeterminedPolicy.DROP
    aggregate_mode: AggregateMode = AggregateMode.FITTED_LOGISTIC

    def __post_init__(self):
        if not self.d_max_cm > 0:
            raise ValueError("d_max_cm must be positive")
        if not self.bin_width_cm > 0:
            raise ValueError("bin_width_cm must be positive")
        if not self.condition_factor > 0:
            raise ValueError("condition_factor must be positive")
        if not self.weight_exponent > 0:
            raise ValueError("weight_exponent must be positive")


@dataclass(frozen=True, eq=False)
class LengthDistribution:
    """Binned counts per length class for one stratum.

    ``lower_bounds`` is ascending; ``counts`` are non-negative reals. Classes
    with zero count inside the observed range are retained so two
    distributions over the same range share a grid.
    """

    bin_width_cm: float
    lower_bounds: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.lower_bounds, dtype=np.float64)
        ct = np.asarray(self.counts, dtype=np.float64)
        if lb.shape != ct.shape or lb.ndim != 1:
            raise ValueError("lower_bounds and counts must be 1-D and congruent")
        if lb.size > 1 and np.any(np.diff(lb) <= 0):
            raise ValueError("lower_bounds must be strictly ascending")
        if np.any(ct < 0):
            raise ValueError("counts must be non-negative")
        lb = lb.copy()
        ct = ct.copy()
        lb.setflags(write=False)
        ct.setflags(write=False)
        object.__setattr__(self, "lower_bounds", lb)
        object.__setattr__(self, "counts", ct)

    @classmethod
    def from_lengths(
        cls, lengths: np.ndarray, bin_width_cm: float = 1.0
    ) -> "LengthDistribution":
        lengths = np.asarray(lengths, dtype=np.float64)
        if lengths.size == 0:
            return cls(bin_width_cm, np.empty(0), np.empty(0))
        idx = np.floor(lengths / bin_width_cm).astype(np.int64)
        lo = int(idx.min())
        counts = np.bincount(idx - lo).astype(np.float64)
        lower = (np.arange(lo, lo + counts.size, dtype=np.float64)) * bin_width_cm
        return cls(bin_width_cm, lower, counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def proportions(self) -> np.ndarray:
        total = self.counts.sum()
        if total <= 0:
            raise DiscardsError("length distribution has zero total count")
        return self.counts / total

    def midpoints(self) -> np.ndarray:
        return self.lower_bounds + 0.5 * self.bin_width_cm


def _align(
    a: LengthDistribution, b: LengthDistribution
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Union grid of two distributions with equal bin width.

    Returns (lower_bounds, counts_a, counts_b), zero-padded where one side has
    no classes.
    """
    if a.bin_width_cm != b.bin_width_cm:
        raise DiscardsError(
            f"binning mismatch: {a.bin_width_cm} cm vs {b.bin_width_cm} cm"
        )
    w = a.bin_width_cm
    ia = np.round(a.lower_bounds / w).astype(np.int64)
    ib = np.round(b.lower_bounds / w).astype(np.int64)
    lo = int(min(ia.min(), ib.min()))
    hi = int(max(ia.max(), ib.max()))
    n = hi - lo + 1
    ca = np.zeros(n)
    cb = np.zeros(n)
    ca[ia - lo] = a.counts
    cb[ib - lo] = b.counts
    lower = np.arange(lo, hi + 1, dtype=np.float64) * w
    return lower, ca, cb


def weight_of(length_cm, cfg: EstimatorConfig):
    """Individual weight in kg from length in cm (cubic condition relation).

    The relation yields grams for lengths in cm; the result is converted to
    kg so it divides landed biomass directly.
    """
    length = np.asarray(length_cm, dtype=np.float64)
    if np.any(length <= 0):
        raise ValueError("length_cm must be positive")
    grams = cfg.condition_factor * length**cfg.weight_exponent
    kg = grams / 1000.0
    return float(kg) if np.ndim(length_cm) == 0 else kg


def landed_numbers(
    ashore_dist: LengthDistribution, landings: LandingsRecord, cfg: EstimatorConfig
) -> tuple[float, np.ndarray]:
    """Total landed numbers and their split over length classes.

    Mean landed weight comes from the ashore proportions evaluated at class
    midpoints; total numbers are landed biomass over mean weight.
    """
    props = ashore_dist.proportions()
    mean_weight_kg = float(np.sum(props * weight_of(ashore_dist.midpoints(), cfg)))
    if not mean_weight_kg > 0:
        raise DiscardsError("mean landed weight is zero")
    n_total = landings.total_biomass_kg / mean_weight_kg
    return n_total, n_total * props


def raising_factor(
    landed_per_length: np.ndarray,
    catch_dist: LengthDistribution,
    d_max_cm: float,
) -> float:
    """Raising factor k: landed numbers above d_max over catch proportion
    mass above d_max. k estimates the total numbers caught."""
    landed_per_length = np.asarray(landed_per_length, dtype=np.float64)
    if landed_per_length.shape != catch_dist.lower_bounds.shape:
        raise DiscardsError("binning mismatch between landed numbers and catch")
    above = catch_dist.lower_bounds > d_max_cm
    p_catch = catch_dist.proportions()
    mass = float(p_catch[above].sum())
    if mass <= 0:
        raise EmptyReferenceRangeError(d_max_cm)
    return float(landed_per_length[above].sum()) / mass


def catch_numbers(k: float, catch_dist: LengthDistribution) -> np.ndarray:
    """Absolute catch numbers per class: k times the catch proportions."""
    if not k > 0:
        raise ValueError("raising factor k must be positive")
    return k * catch_dist.proportions()


def discard_proportions(
    landed_per_length: np.ndarray,
    catch_per_length: np.ndarray,
    cfg: EstimatorConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class discard proportions and their aggregation weights.

    Where catch numbers are zero the ratio is undetermined: under DROP the
    class gets NaN and weight 0; under ZERO_FILL it gets proportion 0 with
    its landed numbers as weight, so zero-filled classes actually pull on the
    fit and the aggregate (a class carrying landed fish but absent from the
    catch sample is evidence of no discarding at that length). Determined
    classes are clamped into [0, 1] and weighted by their catch numbers.
    """
    landed = np.asarray(landed_per_length, dtype=np.float64)
    caught = np.asarray(catch_per_length, dtype=np.float64)
    if landed.shape != caught.shape:
        raise DiscardsError("binning mismatch between landed and catch numbers")
    undet = caught <= 0
    p = np.empty_like(caught)
    weights = np.empty_like(caught)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (caught - landed) / caught
    p[~undet] = np.clip(ratio[~undet], 0.0, 1.0)
    weights[~undet] = caught[~undet]
    if cfg.undetermined_policy is UndeterminedPolicy.ZERO_FILL:
        p[undet] = 0.0
        weights[undet] = landed[undet]
    else:
        p[undet] = np.nan
        weights[undet] = 0.0
    return p, weights


def _expit(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_curve(length_cm, d50_cm: float, b_slope: float):
    """Discard probability at length: 1 / (1 + exp(-b (L - d50)))."""
    return _expit(b_slope * (np.asarray(length_cm, dtype=np.float64) - d50_cm))


@dataclass(frozen=True)
class LogisticFit:
    d50_cm: float
    b_slope: float
    iterations: int
    converged: bool
    warning: str | None = None


def _initial_d50(x: np.ndarray, y: np.ndarray) -> float:
    """Length where the proportion sequence crosses 0.5 (fallback: median)."""
    s = np.sign(y - 0.5)
    for i in range(len(x) - 1):
        if s[i] >= 0 and s[i + 1] <= 0 and (s[i] > 0 or s[i + 1] < 0):
            return float(0.5 * (x[i] + x[i + 1]))
        if s[i] <= 0 and s[i + 1] >= 0 and (s[i] < 0 or s[i + 1] > 0):
            return float(0.5 * (x[i] + x[i + 1]))
    return float(np.median(x))


def fit_logistic(
    length_cm: np.ndarray,
    proportions: np.ndarray,
    weights: np.ndarray | None = None,
    *,
    init: tuple[float, float] | None = None,
    step_tol: float = 1e-8,
    max_iter: int = 500,
) -> LogisticFit:
    """Weighted least-squares logistic fit of discard proportion on length.

    Minimizes sum of w_l (p_l - curve(L_l))^2 with a damped Gauss-Newton
    (Levenberg) iteration and analytic derivatives. Deterministic: no random
    restarts. Converged when the parameter step norm drops below ``step_tol``;
    raises after ``max_iter`` iterations, carrying the last iterate. NaN
    proportions (undetermined classes) are excluded; at least 3 determined
    classes are required.
    """
    x = np.asarray(length_cm, dtype=np.float64)
    y = np.asarray(proportions, dtype=np.float64)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    if x.shape != y.shape or x.shape != w.shape:
        raise ValueError("length, proportions and weights must be congruent")
    keep = ~np.isnan(y)
    x, y, w = x[keep], y[keep], w[keep]
    if x.size < 3:
        raise InsufficientClassesError(int(x.size))
    order = np.argsort(x, kind="stable")
    x, y, w = x[order], y[order], w[order]

    if init is None:
        theta = np.array([_initial_d50(x, y), -0.5])
    else:
        theta = np.array(init, dtype=np.float64)

    def ssr_of(t: np.ndarray) -> tuple[float, np.ndarray]:
        m = _expit(t[1] * (x - t[0]))
        r = y - m
        return float(np.sum(w * r * r)), m

    ssr, m = ssr_of(theta)
    lam = 1e-3
    for iteration in range(1, max_iter + 1):
        g = m * (1.0 - m)
        j_d50 = -theta[1] * g
        j_b = g * (x - theta[0])
        r = y - m
        a11 = float(np.sum(w * j_d50 * j_d50))
        a12 = float(np.sum(w * j_d50 * j_b))
        a22 = float(np.sum(w * j_b * j_b))
        g1 = float(np.sum(w * j_d50 * r))
        g2 = float(np.sum(w * j_b * r))
        stepped = False
        while lam < 1e15:
            d1 = a11 * (1.0 + lam) + 1e-300
            d2 = a22 * (1.0 + lam) + 1e-300
            det = d1 * d2 - a12 * a12
            if det > 0:
                delta = np.array(
                    [(g1 * d2 - g2 * a12) / det, (g2 * d1 - g1 * a12) / det]
                )
                trial = theta + delta
                trial_ssr, trial_m = ssr_of(trial)
                if trial_ssr <= ssr * (1.0 + 1e-14) + 1e-300:
                    theta, ssr, m = trial, trial_ssr, trial_m
                    lam = max(lam / 3.0, 1e-12)
                    stepped = True
                    break
            lam *= 10.0
        if not stepped:
            raise FitNonConvergenceError(
                float(theta[0]), float(theta[1]), iteration
            )
        if float(np.hypot(delta[0], delta[1])) < step_tol:
            warning = None
            if abs(theta[1]) < 1e-3:
                warning = "flat proportions: slope near zero, d50 not unique"
            return LogisticFit(
                float(theta[0]), float(theta[1]), iteration, True, warning
            )
    raise FitNonConvergenceError(float(theta[0]), float(theta[1]), max_iter)


@dataclass(frozen=True, eq=False)
class DiscardEstimate:
    """Full output of one estimation: per-length table plus aggregates."""

    config: EstimatorConfig
    lower_bounds: np.ndarray
    n_landed: np.ndarray
    n_catch: np.ndarray
    p_discard: np.ndarray  # NaN where undetermined
    weights: np.ndarray
    p_fitted: np.ndarray | None
    k: float
    n_landed_total: float
    d50_cm: float | None
    b_slope: float | None
    discard_rate_numbers: float
    n_undetermined: int
    fit: LogisticFit | None

    def midpoints(self) -> np.ndarray:
        return self.lower_bounds + 0.5 * self.config.bin_width_cm

    def to_mapping(self) -> Mapping:
        mids = self.midpoints()
        per_length = []
        for i, lower in enumerate(self.lower_bounds):
            p = self.p_discard[i]
            per_length.append(
                {
                    "length_lower_cm": float(lower),
                    "length_mid_cm": float(mids[i]),
                    "n_landed": float(self.n_landed[i]),
                    "n_catch": float(self.n_catch[i]),
                    "p_discard": None if math.isnan(p) else float(p),
                    "p_fitted": (
                        None if self.p_fitted is None else float(self.p_fitted[i])
                    ),
                }
            )
        return {
            "config": {
                "d_max_cm": self.config.d_max_cm,
                "condition_factor": self.config.condition_factor,
                "weight_exponent": self.config.weight_exponent,
                "bin_width_cm": self.config.bin_width_cm,
                "undetermined_policy": self.config.undetermined_policy.value,
                "aggregate_mode": self.config.aggregate_mode.value,
            },
            "k": self.k,
            "n_landed_total": self.n_landed_total,
            "d50_cm": self.d50_cm,
            "b_slope": self.b_slope,
            "discard_rate_numbers": self.discard_rate_numbers,
            "n_undetermined": self.n_undetermined,
            "n_classes": int(self.lower_bounds.size),
            "fit_converged": None if self.fit is None else self.fit.converged,
            "fit_warning": None if self.fit is None else self.fit.warning,
            "per_length": per_length,
        }


def estimate(
    dataset: SurveyDataset,
    cfg: EstimatorConfig,
    *,
    check: bool = True,
    include_fit: bool = True,
) -> DiscardEstimate:
    """Run the full length-based pipeline on a dataset.

    ``include_fit=False`` skips the logistic fit when the aggregate mode does
    not need it (raw proportions); d50/b are then reported as None. Internal
    Monte Carlo loops use it as a speed knob; the rate is unaffected.
    """
    if check:
        violations = validate(dataset)
        if violations:
            raise ValidationError(violations)

    w = cfg.bin_width_cm
    land_dist = LengthDistribution.from_lengths(dataset.ashore.pooled_lengths(), w)
    catch_dist = LengthDistribution.from_lengths(dataset.at_sea.pooled_lengths(), w)
    if land_dist.total <= 0:
        raise DiscardsError("ashore stratum has no observations")
    if catch_dist.total <= 0:
        raise DiscardsError("at-sea stratum has no observations")

    lower, land_counts, catch_counts = _align(land_dist, catch_dist)
    mids = lower + 0.5 * w
    p_land = land_counts / land_counts.sum()
    p_catch = catch_counts / catch_counts.sum()

    mean_weight_kg = float(np.sum(p_land * weight_of(mids, cfg)))
    n_landed_total = dataset.landings.total_biomass_kg / mean_weight_kg
    n_landed = n_landed_total * p_land

    above = lower > cfg.d_max_cm
    catch_mass_above = float(p_catch[above].sum())
    if catch_mass_above <= 0:
        raise EmptyReferenceRangeError(cfg.d_max_cm)
    if not float(p_land[above].sum()) > 0:
        raise DiscardsError(
            f"cannot raise: no landed numbers above {cfg.d_max_cm} cm"
        )
    # Reassociated form of the raising factor: identical sea/ashore
    # distributions give a mass ratio of exactly 1.0, hence k equal to the
    # landed total bitwise and exactly zero discard proportions.
    k = n_landed_total * (float(p_land[above].sum()) / catch_mass_above)
    n_catch = k * p_catch

    p_disc, weights = discard_proportions(n_landed, n_catch, cfg)
    determined = ~np.isnan(p_disc)
    n_undetermined = int(np.count_nonzero(~determined))
    active = weights > 0

    fit: LogisticFit | None = None
    p_fitted: np.ndarray | None = None
    no_signal = not np.any(p_disc[determined] > 0)
    need_fit = include_fit or cfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC
    if need_fit and not no_signal:
        try:
            fit = fit_logistic(mids[active], p_disc[active], weights[active])
        except (InsufficientClassesError, FitNonConvergenceError):
            if cfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC:
                raise
            fit = None
        if fit is not None:
            p_fitted = logistic_curve(mids, fit.d50_cm, fit.b_slope)

    total_weight = float(weights[active].sum())
    if no_signal or total_weight <= 0:
        rate = 0.0
    elif cfg.aggregate_mode is AggregateMode.FITTED_LOGISTIC:
        assert p_fitted is not None
        p_hat = np.where(above, 0.0, p_fitted)
        rate = float(np.sum(p_hat[active] * weights[active]) / total_weight)
    else:
        rate = float(
            np.sum(p_disc[active] * weights[active]) / total_weight
        )
    rate = min(max(rate, 0.0), 1.0)

    return DiscardEstimate(
        config=cfg,
        lower_bounds=lower,
        n_landed=n_landed,
        n_catch=n_catch,
        p_discard=p_disc,
        weights=weights,
        p_fitted=p_fitted,
        k=k,
        n_landed_total=n_landed_total,
        d50_cm=None if fit is None else fit.d50_cm,
        b_slope=None if fit is None else fit.b_slope,
        discard_rate_numbers=rate,
        n_undetermined=n_undetermined,
        fit=fit,
    )


def config_with(cfg: EstimatorConfig, **changes) -> EstimatorConfig:
    """Convenience wrapper over dataclasses.replace for estimator configs."""
    return replace(cfg, **changes)
