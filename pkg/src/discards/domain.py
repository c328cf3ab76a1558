"""Hierarchical data model for length samples and landings.

The sampling hierarchy is strictly three levels deep: ships carry samples
(tows), samples carry individual fish length measurements. Two strata exist,
one sampled at sea before any discarding and one sampled ashore from landings.
All types are immutable after construction and safe to share across threads;
length vectors are stored as read-only numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

DEFAULT_MAX_LENGTH_CM = 250.0


class StratumKind(enum.Enum):
    AT_SEA = "sea"
    ASHORE = "ashore"


def _as_length_array(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("lengths must be a one-dimensional sequence")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LengthObservation:
    """A single length measurement, in cm."""

    length_cm: float


@dataclass(frozen=True, eq=False)
class Sample:
    """One sample (a tow at sea, a landing sample ashore)."""

    sample_id: str
    lengths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lengths", _as_length_array(self.lengths))

    @property
    def n_obs(self) -> int:
        return int(self.lengths.size)

    @property
    def observations(self) -> tuple[LengthObservation, ...]:
        return tuple(LengthObservation(float(x)) for x in self.lengths)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return self.sample_id == other.sample_id and np.array_equal(
            self.lengths, other.lengths
        )

    __hash__ = None  # mutable-feeling equality; samples are not hashable


@dataclass(frozen=True)
class ShipRecord:
    """All samples taken from one ship at one location.

    A ship sampled at two locations appears as two records sharing ship_id
    with distinct location_ids; identity within a stratum is the pair.
    """

    ship_id: str
    location_id: str
    samples: tuple[Sample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def n_obs(self) -> int:
        return sum(s.n_obs for s in self.samples)

    def all_lengths(self) -> np.ndarray:
        if len(self.samples) == 1:
            return self.samples[0].lengths
        return np.concatenate([s.lengths for s in self.samples])


@dataclass(frozen=True)
class Stratum:
    kind: StratumKind
    ships: tuple[ShipRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "ships", tuple(self.ships))

    @property
    def n_ships(self) -> int:
        return len(self.ships)

    @property
    def n_obs(self) -> int:
        return sum(ship.n_obs for ship in self.ships)

    def pooled_lengths(self) -> np.ndarray:
        """All observations in the stratum, every fish weighted equally."""
        if not self.ships:
            return np.empty(0, dtype=np.float64)
        return np.concatenate([s.lengths for ship in self.ships for s in ship.samples])


@dataclass(frozen=True)
class LandingsRecord:
    """Total landed biomass for one species/gear/year."""

    species: str
    gear: str
    year: int
    total_biomass_kg: float


@dataclass(frozen=True)
class SurveyDataset:
    """At-sea and ashore strata plus the landings they are raised against."""

    at_sea: Stratum
    ashore: Stratum
    landings: LandingsRecord
    metadata: Mapping[str, str] = field(default_factory=dict)

    def stratum(self, kind: StratumKind) -> Stratum:
        return self.at_sea if kind is StratumKind.AT_SEA else self.ashore


def _validate_stratum(
    stratum: Stratum,
    label: str,
    violations: list[str],
    max_length_cm: float,
    single_sample: bool,
) -> None:
    seen: set[tuple[str, str]] = set()
    for ship in stratum.ships:
        key = (ship.ship_id, ship.location_id)
        if key in seen:
            violations.append(
                f"{label} stratum: duplicate ship {ship.ship_id!r} "
                f"at location {ship.location_id!r}"
            )
        seen.add(key)
        if not ship.samples:
            violations.append(f"{label} ship {ship.ship_id!r}: no samples")
            continue
        if single_sample and len(ship.samples) != 1:
            violations.append(
                f"{label} ship {ship.ship_id!r}: {len(ship.samples)} samples "
                f"(ashore ships carry exactly one sample)"
            )
        sample_ids = [s.sample_id for s in ship.samples]
        if len(set(sample_ids)) != len(sample_ids):
            violations.append(
                f"{label} ship {ship.ship_id!r}: duplicate sample ids"
            )
        for sample in ship.samples:
            where = f"{label} ship {ship.ship_id!r} sample {sample.sample_id!r}"
            if sample.n_obs == 0:
                violations.append(f"{where}: no observations")
                continue
            if np.any(sample.lengths <= 0):
                bad = float(sample.lengths[sample.lengths <= 0][0])
                violations.append(f"{where}: non-positive length {bad:g} cm")
            if np.any(sample.lengths > max_length_cm):
                bad = float(sample.lengths[sample.lengths > max_length_cm][0])
                violations.append(
                    f"{where}: length {bad:g} cm exceeds sanity bound "
                    f"{max_length_cm:g} cm"
                )


def validate(
    dataset: SurveyDataset,
    *,
    max_length_cm: float = DEFAULT_MAX_LENGTH_CM,
    ashore_single_sample: bool = False,
) -> list[str]:
    """Return every invariant violation in the dataset; empty means valid.

    Pure: never mutates the input, identical calls yield identical output.
    ``ashore_single_sample`` enforces the ingest-time rule that ashore ships
    carry exactly one sample; simulated datasets relax it.
    """
    violations: list[str] = []
    if dataset.at_sea.kind is not StratumKind.AT_SEA:
        violations.append("at_sea stratum has wrong kind")
    if dataset.ashore.kind is not StratumKind.ASHORE:
        violations.append("ashore stratum has wrong kind")
    if dataset.at_sea.n_ships == 0:
        violations.append("at-sea stratum is empty")
    if dataset.ashore.n_ships == 0:
        violations.append("ashore stratum is empty")
    _validate_stratum(dataset.at_sea, "at-sea", violations, max_length_cm, False)
    _validate_stratum(
        dataset.ashore, "ashore", violations, max_length_cm, ashore_single_sample
    )
    if not dataset.landings.total_biomass_kg > 0:
        violations.append(
            f"landings biomass must be positive, got "
            f"{dataset.landings.total_biomass_kg:g} kg"
        )
    return violations
