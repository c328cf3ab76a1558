"""CSV ingest and structured result output.

On-disk formats (UTF-8, comma separator, "." decimal point):

* samples:  ``stratum,ship_id,location_id,sample_id,length_cm`` with stratum
  one of ``sea`` / ``ashore``; duplicate rows are distinct observations.
* landings: ``species,gear,year,total_biomass_kg``.

Results are written as CSV (flat ``field,value`` pairs, or one row per record
for tables) or JSON. Numeric CSV fields are printed at 17 significant digits
so re-reading reproduces the value bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

from .domain import (
    DEFAULT_MAX_LENGTH_CM,
    LandingsRecord,
    Sample,
    ShipRecord,
    Stratum,
    StratumKind,
    SurveyDataset,
)
from .errors import IngestError

SAMPLES_HEADER = ["stratum", "ship_id", "location_id", "sample_id", "length_cm"]
LANDINGS_HEADER = ["species", "gear", "year", "total_biomass_kg"]

_STRATUM_TOKENS = {kind.value: kind for kind in StratumKind}


def _fmt(value: Any) -> str:
    """CSV cell formatting; floats at 17 significant digits (lossless)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value:  # NaN marks undetermined values
            return "NA"
        return format(value, ".17g")
    if value is None:
        return "NA"
    return str(value)


def read_samples(
    path: str | Path, *, max_length_cm: float = DEFAULT_MAX_LENGTH_CM
) -> tuple[Stratum, Stratum]:
    """Read a samples CSV into (at-sea, ashore) strata.

    Rows are grouped by (stratum, ship_id, location_id, sample_id); row order
    within a sample is preserved. Errors carry the 1-based line number.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"samples file not found: {path}")
    # grouped[kind][(ship, loc)][sample_id] -> list of lengths, insertion ordered
    grouped: dict[StratumKind, dict] = {kind: {} for kind in StratumKind}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("samples file is empty (missing header)") from None
        if [h.strip() for h in header] != SAMPLES_HEADER:
            raise IngestError(
                f"unexpected samples header {header!r}, "
                f"expected {SAMPLES_HEADER!r}",
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(SAMPLES_HEADER):
                raise IngestError(
                    f"expected {len(SAMPLES_HEADER)} fields, got {len(row)}",
                    line=lineno,
                )
            stratum_tok, ship_id, location_id, sample_id, length_tok = (
                cell.strip() for cell in row
            )
            kind = _STRATUM_TOKENS.get(stratum_tok)
            if kind is None:
                raise IngestError(
                    f"unknown stratum token {stratum_tok!r} "
                    f"(expected 'sea' or 'ashore')",
                    line=lineno,
                )
            try:
                length = float(length_tok)
            except ValueError:
                raise IngestError(
                    f"non-numeric length_cm {length_tok!r}", line=lineno
                ) from None
            if not length > 0:
                raise IngestError(
                    f"non-positive length_cm {length:g}", line=lineno
                )
            if length > max_length_cm:
                raise IngestError(
                    f"length_cm {length:g} exceeds sanity bound "
                    f"{max_length_cm:g}",
                    line=lineno,
                )
            ships = grouped[kind]
            samples = ships.setdefault((ship_id, location_id), {})
            samples.setdefault(sample_id, []).append(length)

    strata = []
    for kind in (StratumKind.AT_SEA, StratumKind.ASHORE):
        ships = tuple(
            ShipRecord(
                ship_id=ship_id,
                location_id=location_id,
                samples=tuple(
                    Sample(sample_id, lengths)
                    for sample_id, lengths in samples.items()
                ),
            )
            for (ship_id, location_id), samples in grouped[kind].items()
        )
        strata.append(Stratum(kind, ships))
    return strata[0], strata[1]


def write_samples(path: str | Path, at_sea: Stratum, ashore: Stratum) -> None:
    """Inverse of :func:`read_samples`; one row per observation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLES_HEADER)
        for stratum in (at_sea, ashore):
            token = stratum.kind.value
            for ship in stratum.ships:
                for sample in ship.samples:
                    for length in sample.lengths:
                        writer.writerow(
                            [
                                token,
                                ship.ship_id,
                                ship.location_id,
                                sample.sample_id,
                                _fmt(float(length)),
                            ]
                        )


def read_landings(
    path: str | Path, species: str, gear: str, year: int
) -> LandingsRecord:
    """Look up the landings record for one species/gear/year."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"landings file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("landings file is empty (missing header)") from None
        if [h.strip() for h in header] != LANDINGS_HEADER:
            raise IngestError(
                f"unexpected landings header {header!r}, "
                f"expected {LANDINGS_HEADER!r}",
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(LANDINGS_HEADER):
                raise IngestError(
                    f"expected {len(LANDINGS_HEADER)} fields, got {len(row)}",
                    line=lineno,
                )
            row_species, row_gear, year_tok, biomass_tok = (
                cell.strip() for cell in row
            )
            try:
                row_year = int(year_tok)
            except ValueError:
                raise IngestError(
                    f"non-integer year {year_tok!r}", line=lineno
                ) from None
            if (row_species, row_gear, row_year) != (species, gear, year):
                continue
            try:
                biomass = float(biomass_tok)
            except ValueError:
                raise IngestError(
                    f"non-numeric total_biomass_kg {biomass_tok!r}", line=lineno
                ) from None
            if not biomass > 0:
                raise IngestError(
                    f"non-positive total_biomass_kg {biomass:g}", line=lineno
                )
            return LandingsRecord(species, gear, row_year, biomass)
    raise IngestError(
        f"no landings record for species={species!r} gear={gear!r} year={year}"
    )


def build_dataset(
    samples_path: str | Path,
    landings_path: str | Path,
    species: str,
    gear: str,
    year: int,
    *,
    max_length_cm: float = DEFAULT_MAX_LENGTH_CM,
) -> SurveyDataset:
    """Read both files and assemble a SurveyDataset."""
    at_sea, ashore = read_samples(samples_path, max_length_cm=max_length_cm)
    landings = read_landings(landings_path, species, gear, year)
    return SurveyDataset(
        at_sea=at_sea,
        ashore=ashore,
        landings=landings,
        metadata={"species": species, "gear": gear, "year": str(year)},
    )


def _flatten(prefix: str, value: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(value, Mapping):
        for key, sub in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), sub, out)
    elif isinstance(value, (list, tuple)):
        for i, sub in enumerate(value):
            _flatten(f"{prefix}[{i}]", sub, out)
    else:
        out.append((prefix, value))


def write_results(
    path: str | Path | None,
    payload: Mapping[str, Any] | Sequence[Mapping[str, Any]],
    fmt: str = "csv",
    *,
    columns: Sequence[str] | None = None,
    stream=None,
) -> None:
    """Write a result payload deterministically as CSV or JSON.

    ``payload`` is either a mapping (written as flat ``field,value`` rows in
    CSV) or a sequence of flat mappings sharing keys (written as a table, one
    header plus one row per record; ``columns`` fixes the header for empty
    tables). Result objects expose ``to_mapping()`` / ``to_row()`` to produce
    these. JSON preserves the nested structure.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")

    def _dump(fh) -> None:
        if fmt == "json":
            json.dump(payload, fh, indent=2, allow_nan=True)
            fh.write("\n")
            return
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(payload, Mapping):
            writer.writerow(["field", "value"])
            flat: list[tuple[str, Any]] = []
            _flatten("", payload, flat)
            for key, value in flat:
                writer.writerow([key, _fmt(value)])
        else:
            rows = list(payload)
            header = list(columns) if columns else (
                list(rows[0].keys()) if rows else []
            )
            if header:
                writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(row[key]) for key in header])

    if path is None:
        _dump(stream)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _dump(fh)
