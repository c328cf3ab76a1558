"""Data-usage methods that filter a survey dataset before estimation.

Three methods: use everything (M1), keep only ships sampled in both strata
(M2), or keep only locations with enough observations in both strata (M3).
All are pure and idempotent; the landings record always passes through.
"""

from __future__ import annotations

import enum

from .domain import Stratum, SurveyDataset
from .errors import SelectionEmptiedStratumError


class SelectionMethod(enum.Enum):
    M1_ALL = "m1"
    M2_SAME_SHIPS = "m2"
    M3_SAME_LOCATIONS = "m3"


DEFAULT_M3_MIN_OBS = 90


def _location_obs(stratum: Stratum) -> dict[str, int]:
    counts: dict[str, int] = {}
    for ship in stratum.ships:
        counts[ship.location_id] = counts.get(ship.location_id, 0) + ship.n_obs
    return counts


def _keep(stratum: Stratum, predicate) -> Stratum:
    return Stratum(stratum.kind, tuple(s for s in stratum.ships if predicate(s)))


def select(
    dataset: SurveyDataset,
    method: SelectionMethod,
    *,
    m3_min_obs: int = DEFAULT_M3_MIN_OBS,
) -> SurveyDataset:
    """Apply a data-usage method, returning a filtered dataset.

    M1 returns the dataset unchanged. M2 keeps ships whose ship_id occurs in
    both strata (matching is by ship_id only, so the retained samples need not
    share locations). M3 keeps ships at locations with at least ``m3_min_obs``
    pooled observations in the at-sea stratum and at least as many ashore.

    Raises SelectionEmptiedStratumError if a stratum ends up with no ships.
    """
    if method is SelectionMethod.M1_ALL:
        return dataset

    if method is SelectionMethod.M2_SAME_SHIPS:
        sea_ids = {s.ship_id for s in dataset.at_sea.ships}
        ashore_ids = {s.ship_id for s in dataset.ashore.ships}
        both = sea_ids & ashore_ids
        at_sea = _keep(dataset.at_sea, lambda s: s.ship_id in both)
        ashore = _keep(dataset.ashore, lambda s: s.ship_id in both)
    else:
        if m3_min_obs < 1:
            raise ValueError("m3_min_obs must be at least 1")
        sea_obs = _location_obs(dataset.at_sea)
        ashore_obs = _location_obs(dataset.ashore)
        eligible = {
            loc
            for loc in set(sea_obs) & set(ashore_obs)
            if sea_obs[loc] >= m3_min_obs and ashore_obs[loc] >= m3_min_obs
        }
        at_sea = _keep(dataset.at_sea, lambda s: s.location_id in eligible)
        ashore = _keep(dataset.ashore, lambda s: s.location_id in eligible)

    for stratum in (at_sea, ashore):
        if stratum.n_ships == 0:
            raise SelectionEmptiedStratumError(method.value, stratum.kind.value)
    return SurveyDataset(
        at_sea=at_sea,
        ashore=ashore,
        landings=dataset.landings,
        metadata=dataset.metadata,
    )
