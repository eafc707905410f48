#!/usr/bin/env python3
"""
Importers for external price series and coordinate lists.
"""

import re
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from src.scenario.scenario import ScenarioSpec, ScenarioValidationError, StationSpec, with_stations


def load_price_csv(path: str, station_ids: Sequence[str], xi: int) -> Dict[str, Tuple[float, ...]]:
    """
    Read a price table with one row per slot and one column per station.

    The header row holds station ids; every requested station must be present
    and the table must have exactly xi rows.
    """
    df = pd.read_csv(path)
    df.columns = [str(c).strip() for c in df.columns]

    missing = [sid for sid in station_ids if sid not in df.columns]
    if missing:
        raise ScenarioValidationError('prices', f"price file {path} lacks columns for stations {missing}")
    if len(df) != xi:
        raise ScenarioValidationError('prices', f"price file {path} has {len(df)} rows for {xi} slots")

    prices = {}
    for sid in station_ids:
        column = pd.to_numeric(df[sid], errors='coerce')
        if column.isna().any():
            raise ScenarioValidationError('prices', f"non-numeric price for station {sid}")
        prices[sid] = tuple(float(p) for p in column)
    return prices


def apply_prices(spec: ScenarioSpec, prices: Dict[str, Sequence[float]]) -> ScenarioSpec:
    """Replace station price series; stations not in the mapping keep theirs."""
    stations = [
        StationSpec(id=s.id, g=s.g, prices=tuple(prices.get(s.id, s.prices)), dummy_count=s.dummy_count)
        for s in spec.stations
    ]
    return with_stations(spec, stations)


def import_coordinates(path: str) -> List[Tuple[str, float, float]]:
    """
    Read a VRP-REP style coordinate list: one `id x y` entry per line.

    Whitespace or commas separate fields; blank lines, `#` comments and a
    non-numeric header line are skipped.
    """
    coords = []
    with open(path, 'r') as f:
        for line_number, raw in enumerate(f, 1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            parts = [p for p in re.split(r'[,\s]+', line) if p]
            if len(parts) < 3:
                raise ValueError(f"{path}:{line_number}: expected 'id x y', got {raw.strip()!r}")
            try:
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                if not coords:
                    continue  # header
                raise ValueError(f"{path}:{line_number}: non-numeric coordinate in {raw.strip()!r}")
            coords.append((re.sub(r'[^A-Za-z0-9]', '', parts[0]), x, y))
    return coords
