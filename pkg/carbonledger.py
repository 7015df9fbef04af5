"""
Carbon accounting: CF = E x alpha

Emission factors are kept in gCO2/kWh (grid carbon intensity units) and
converted to kg in exactly one place, `footprint`. Factors come from a CSV
table with `#` citation comments:

    # Source: ...
    region,gco2_per_kwh,scope
    test-grid,400,scope2
"""

import csv
import enum
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from energymeter import EnergyReading
from errors import InvalidFactor, MalformedFactorFile, UnknownRegion, ZeroInferences

logger = logging.getLogger(__name__)

FACTOR_HEADER = ["region", "gco2_per_kwh", "scope"]
GRAMS_PER_KG = 1000.0


class Scope(str, enum.Enum):
    SCOPE1 = "scope1"
    SCOPE2 = "scope2"
    SCOPE3 = "scope3"


@dataclass(frozen=True)
class EmissionFactor:
    region: str
    gco2_per_kwh: float
    scope: Scope = Scope.SCOPE2

    def __post_init__(self):
        if not self.region:
            raise InvalidFactor("emission factor region must not be empty")
        if not 0 < self.gco2_per_kwh < math.inf:
            raise InvalidFactor(f"gco2_per_kwh must be positive and finite, got {self.gco2_per_kwh}")
        object.__setattr__(self, "gco2_per_kwh", float(self.gco2_per_kwh))
        object.__setattr__(self, "scope", Scope(self.scope))


@dataclass(frozen=True)
class CarbonFootprint:
    kg_co2e: float
    energy_kwh: float
    factor: EmissionFactor
    per_inference_kg: Optional[float] = None


@dataclass(frozen=True)
class FactorTable:
    """
    Parsed emission factor file, keyed by lower-cased region.

    `lines` maps each region key to the file line it came from, for
    provenance.
    """
    path: str
    factors: Dict[str, EmissionFactor] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)

    def regions(self) -> List[str]:
        return [f.region for f in self.factors.values()]


def footprint(energy: EnergyReading, factor: EmissionFactor, n_inferences: Optional[int] = None) -> CarbonFootprint:
    """
    Carbon footprint of an energy reading.

    Args:
        energy: Measured energy
        factor: Emission factor in gCO2/kWh
        n_inferences: When given, per_inference_kg is filled in as well

    Returns:
        CarbonFootprint with kg_co2e = kwh * gco2_per_kwh / 1000

    Example:
        >>> from energymeter import EnergyReading, Provider
        >>> e = EnergyReading.from_joules(36000.0, Provider.CONSTANT_POWER, 3600000)
        >>> footprint(e, EmissionFactor("test-grid", 400)).kg_co2e
        0.004
    """
    kg = energy.kwh * factor.gco2_per_kwh / GRAMS_PER_KG
    cf = CarbonFootprint(kg_co2e=kg, energy_kwh=energy.kwh, factor=factor)
    if n_inferences is not None:
        cf = CarbonFootprint(
            kg_co2e=kg,
            energy_kwh=energy.kwh,
            factor=factor,
            per_inference_kg=per_inference(cf, n_inferences),
        )
    return cf


def per_inference(cf: CarbonFootprint, n_inferences: int) -> float:
    """
    kg CO2e per inference task.

    Raises:
        ZeroInferences: If n_inferences < 1
    """
    if n_inferences < 1:
        raise ZeroInferences(f"need at least one inference, got {n_inferences}")
    return cf.kg_co2e / n_inferences


def parse_factor_table(text: str, path: str = "<memory>") -> FactorTable:
    """
    Parse emission factor file contents.

    Lines starting with `#` and blank lines are skipped; the first remaining
    line must be the `region,gco2_per_kwh,scope` header.

    Raises:
        MalformedFactorFile: With the offending line number
    """
    factors: Dict[str, EmissionFactor] = {}
    lines: Dict[str, int] = {}
    header_seen = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = [cell.strip() for cell in next(csv.reader([stripped]))]
        if not header_seen:
            if [c.lower() for c in row] != FACTOR_HEADER:
                raise MalformedFactorFile(f"expected header {','.join(FACTOR_HEADER)}, got {stripped!r}", line_no)
            header_seen = True
            continue
        if len(row) != 3:
            raise MalformedFactorFile(f"expected 3 columns, got {len(row)}", line_no)
        region, value, scope = row
        try:
            gco2 = float(value)
        except ValueError:
            raise MalformedFactorFile(f"gco2_per_kwh '{value}' is not a number", line_no)
        try:
            factor = EmissionFactor(region=region, gco2_per_kwh=gco2, scope=Scope(scope.lower() or "scope2"))
        except ValueError as e:
            raise MalformedFactorFile(str(e), line_no)
        key = region.lower()
        if key in factors:
            raise MalformedFactorFile(f"duplicate region '{region}' (first seen on line {lines[key]})", line_no)
        factors[key] = factor
        lines[key] = line_no

    if not header_seen:
        raise MalformedFactorFile("file has no header row", 1)
    logger.debug(f"Loaded {len(factors)} emission factor(s) from {path}")
    return FactorTable(path=path, factors=factors, lines=lines)


def load_factor_table(path) -> FactorTable:
    with open(path, "r", encoding="utf-8") as f:
        return parse_factor_table(f.read(), path=os.fspath(path))


def lookup_factor(table: FactorTable, region: str) -> EmissionFactor:
    """
    Case-insensitive region lookup.

    Raises:
        UnknownRegion: Listing the available region keys
    """
    try:
        return table.factors[region.strip().lower()]
    except KeyError:
        raise UnknownRegion(region, table.regions()) from None


def factor_source(table: FactorTable, region: str) -> Tuple[str, int]:
    """(path, line) of the row a region resolves to."""
    key = region.strip().lower()
    if key not in table.lines:
        raise UnknownRegion(region, table.regions())
    return table.path, table.lines[key]


def list_regions(table: FactorTable) -> Dict[str, float]:
    return {f.region: f.gco2_per_kwh for f in table.factors.values()}
