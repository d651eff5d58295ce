"""Ingestion and validation of quote and forward-history files, plus
persistence of calibration artifacts.

File formats (both CSV, UTF-8, comma delimited, ISO-8601 dates, decimal
point):

* option quotes - header ``date,asset,expiry,strike,price``; one quoted
  call per row; every row shares the valuation date.
* forward history - header ``date,<asset1>,<asset2>``; strictly
  increasing dates, positive prices.

Loaders are total: every input either yields a fully validated object or
a diagnostic naming the offending line and field - never a partially
valid object.  Loaded objects are immutable.

Calibration artifacts are versioned JSON documents; loading checks the
schema and version before reconstruction, and a save/load round trip is
the identity field for field.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from typing import Mapping

import numpy as np

from .calibration import CalibrationResult, OptionQuote
from .models import (
    BBSDDependence,
    LSSDDependence,
    ModelSpec,
    SSDDependence,
    VGMarginal,
)
from .pricing import MarketFrame, carr_madan_calls
from .sampling import RngStream, TimeGrid, simulate_paths, to_forward_prices

__all__ = [
    "DataFileError",
    "SchemaError",
    "VersionError",
    "ForwardHistory",
    "QuoteSet",
    "load_option_quotes",
    "load_forward_history",
    "save_calibration",
    "load_calibration",
    "generate_synthetic_dataset",
    "ARTIFACT_VERSION",
]

ARTIFACT_VERSION = 1

QUOTES_HEADER = ["date", "asset", "expiry", "strike", "price"]
DAYS_PER_YEAR = 365.0


class DataFileError(ValueError):
    """A data file failed to parse or validate; names the line and field."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class SchemaError(ValueError):
    """A persisted artifact does not match the expected schema."""


class VersionError(SchemaError):
    """A persisted artifact carries an unsupported version."""


@dataclass(frozen=True)
class ForwardHistory:
    """Aligned daily forward quotations for two assets."""

    dates: tuple[date, ...]
    assets: tuple[str, str]
    prices: np.ndarray  # shape (2, n_dates)

    def series(self, asset: str) -> np.ndarray:
        return self.prices[self.assets.index(asset)]


@dataclass(frozen=True)
class QuoteSet:
    """Validated vanilla quotes sharing one valuation date."""

    quotes: tuple[OptionQuote, ...]
    valuation_date: date
    f0: Mapping[str, float]
    r: float

    def for_asset(self, asset: str) -> tuple[OptionQuote, ...]:
        return tuple(q for q in self.quotes if q.asset == asset)


def _parse_date(raw: str, path, line: int, fieldname: str) -> date:
    try:
        return date.fromisoformat(raw.strip())
    except ValueError as exc:
        raise DataFileError(path, line, f"field '{fieldname}': {exc}") from exc


def _parse_positive(raw: str, path, line: int, fieldname: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataFileError(path, line,
                            f"field '{fieldname}': not a number ({raw!r})") from exc
    if not value > 0.0 or not math.isfinite(value):
        raise DataFileError(path, line,
                            f"field '{fieldname}': must be > 0, got {value}")
    return value


def load_option_quotes(path, f0: Mapping[str, float], r: float,
                       strike_window: float = 10.0) -> QuoteSet:
    """Load and validate a quotes file, applying the strike-window filter.

    Deep in/out-of-the-money rows with |K - F0| > strike_window (price
    units) are dropped, mirroring the usual liquid-strike screen around
    the forward level.  F0 per asset and the flat rate come from
    configuration, not from the file.
    """
    rows = _read_csv(path, QUOTES_HEADER)
    quotes: list[OptionQuote] = []
    val_date: date | None = None
    for line, row in rows:
        d = _parse_date(row["date"], path, line, "date")
        if val_date is None:
            val_date = d
        elif d != val_date:
            raise DataFileError(path, line,
                                f"field 'date': valuation date {d} differs "
                                f"from {val_date}")
        asset = row["asset"].strip()
        if asset not in f0:
            raise DataFileError(path, line,
                                f"field 'asset': unknown asset {asset!r} "
                                f"(known: {sorted(f0)})")
        expiry = _parse_date(row["expiry"], path, line, "expiry")
        if expiry <= d:
            raise DataFileError(path, line,
                                "field 'expiry': must be after the "
                                "valuation date")
        strike = _parse_positive(row["strike"], path, line, "strike")
        price = _parse_positive(row["price"], path, line, "price")
        if abs(strike - f0[asset]) > strike_window:
            continue
        quotes.append(OptionQuote(asset=asset,
                                  T=(expiry - d).days / DAYS_PER_YEAR,
                                  K=strike, price=price))
    if not quotes:
        raise DataFileError(path, None,
                            "no quotes left after the strike-window filter")
    return QuoteSet(tuple(quotes), val_date, dict(f0), float(r))


def load_forward_history(path) -> ForwardHistory:
    """Load a two-asset forward history, rejecting non-monotone dates and
    non-positive or missing prices."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFileError(path, 1, "empty file") from None
        if len(header) != 3 or header[0].strip() != "date":
            raise DataFileError(path, 1,
                                f"expected header 'date,<asset1>,<asset2>', "
                                f"got {','.join(header)!r}")
        assets = (header[1].strip(), header[2].strip())
        dates: list[date] = []
        p1: list[float] = []
        p2: list[float] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 or any(not c.strip() for c in row):
                raise DataFileError(path, line,
                                    "missing cell: every row needs "
                                    "date and both prices")
            d = _parse_date(row[0], path, line, "date")
            if dates and d <= dates[-1]:
                raise DataFileError(path, line,
                                    f"field 'date': {d} not after "
                                    f"{dates[-1]} (duplicate or out of order)")
            dates.append(d)
            p1.append(_parse_positive(row[1], path, line, assets[0]))
            p2.append(_parse_positive(row[2], path, line, assets[1]))
    if not dates:
        raise DataFileError(path, None, "no data rows")
    return ForwardHistory(tuple(dates), assets, np.array([p1, p2]))


def _read_csv(path, expected_header: list[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataFileError(path, 1, "empty file") from None
        if header != expected_header:
            raise DataFileError(path, 1,
                                f"expected header "
                                f"{','.join(expected_header)!r}, got "
                                f"{','.join(header)!r}")
        out = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DataFileError(path, line,
                                    f"expected {len(expected_header)} "
                                    f"fields, got {len(row)}")
            out.append((line, dict(zip(expected_header, row))))
    return out


# ---------------------------------------------------------------------------
# Calibration artifact (versioned JSON)
# ---------------------------------------------------------------------------

_DEP_FIELDS = {
    "ssd": ("A", "a", "B"),
    "lssd": ("A", "a", "rho", "B"),
    "bbsd": ("a1", "a2", "a", "nuR"),
}
_DEP_TYPES = {"ssd": SSDDependence, "lssd": LSSDDependence,
              "bbsd": BBSDDependence}


def save_calibration(result: CalibrationResult, path) -> None:
    doc = {
        "version": result.version,
        "kind": result.kind,
        "assets": list(result.assets),
        "marginals": [{"mu": m.mu, "sigma": m.sigma, "alpha": m.alpha}
                      for m in result.marginals],
        "dependence": {f: getattr(result.dependence, f)
                       for f in _DEP_FIELDS[result.kind]},
        "rho_mod": result.rho_mod,
        "rho_mkt": result.rho_mkt,
        "marginal_objectives": list(result.marginal_objectives),
        "dependence_objective": result.dependence_objective,
        "per_quote_errors": [list(e) for e in result.per_quote_errors],
        "solver": result.solver,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_calibration(path) -> CalibrationResult:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    required = ["version", "kind", "assets", "marginals", "dependence",
                "rho_mod", "rho_mkt", "marginal_objectives",
                "dependence_objective", "per_quote_errors", "solver"]
    missing = [k for k in required if k not in doc]
    if missing:
        raise SchemaError(f"{path}: missing keys {missing}")
    if doc["version"] != ARTIFACT_VERSION:
        raise VersionError(f"{path}: artifact version {doc['version']} not "
                           f"supported (expected {ARTIFACT_VERSION})")
    kind = doc["kind"]
    if kind not in _DEP_TYPES:
        raise SchemaError(f"{path}: unknown model kind {kind!r}")
    try:
        marginals = tuple(VGMarginal(m["mu"], m["sigma"], m["alpha"])
                          for m in doc["marginals"])
        dependence = _DEP_TYPES[kind](**doc["dependence"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed record ({exc})") from exc
    if len(marginals) != 2 or len(doc["assets"]) != 2:
        raise SchemaError(f"{path}: expected exactly two assets")
    return CalibrationResult(
        kind=kind,
        assets=tuple(doc["assets"]),
        marginals=marginals,
        dependence=dependence,
        rho_mod=float(doc["rho_mod"]),
        rho_mkt=float(doc["rho_mkt"]),
        marginal_objectives=tuple(float(x)
                                  for x in doc["marginal_objectives"]),
        dependence_objective=float(doc["dependence_objective"]),
        per_quote_errors=tuple(tuple(float(x) for x in row)
                               for row in doc["per_quote_errors"]),
        solver=doc["solver"],
        version=doc["version"],
    )


# ---------------------------------------------------------------------------
# Bundled synthetic dataset (seeded) for tests and demos
# ---------------------------------------------------------------------------

DEMO_ASSETS = ("PWRA", "PWRB")
DEMO_MARGINALS = (VGMarginal(0.40, 0.31, 0.02), VGMarginal(0.61, 0.32, 0.02))
DEMO_F0 = {"PWRA": 50.0, "PWRB": 49.0}
DEMO_RATE = 0.015


def generate_synthetic_dataset(outdir, seed: int = 7,
                               marginals=DEMO_MARGINALS,
                               assets=DEMO_ASSETS,
                               f0: Mapping[str, float] | None = None,
                               r: float = DEMO_RATE,
                               n_days: int = 260,
                               expiry_years: float = 1.0) -> dict:
    """Write a market-shaped quotes CSV and history CSV from known inputs.

    Quotes are exact model prices on a seven-strike ladder around each
    forward, so a calibration round trip can recover the generator
    marginals; the history is one simulated year of strongly correlated
    forwards.  Returns the written paths plus the generator inputs.
    """
    from pathlib import Path

    f0 = dict(f0 or DEMO_F0)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    valuation = date(2024, 1, 2)
    expiry = date(2024 + int(expiry_years), 1, 2)
    t_years = (expiry - valuation).days / DAYS_PER_YEAR

    quotes_path = outdir / "quotes.csv"
    with open(quotes_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUOTES_HEADER)
        for asset, m in zip(assets, marginals):
            fwd = f0[asset]
            strikes = [fwd + off for off in (-9.0, -6.0, -3.0, 0.0, 3.0,
                                             6.0, 9.0)]
            frame = MarketFrame(fwd, r, t_years)
            for k, res in zip(strikes, carr_madan_calls(m, frame, strikes)):
                writer.writerow([valuation.isoformat(), asset,
                                 expiry.isoformat(), f"{k:.4f}",
                                 f"{res.price:.10f}"])

    # history: one path of a strongly coupled model, daily grid
    dep = BBSDDependence(a1=0.7, a2=0.7, a=0.99, nuR=2.0 * max(
        m.alpha for m in marginals))
    spec = ModelSpec.bbsd(*marginals, dep)
    grid = TimeGrid.uniform(n_days / DAYS_PER_YEAR, n_days)
    batch = simulate_paths(spec, grid, 1, RngStream(seed))
    fwd_batch = to_forward_prices(batch, (f0[assets[0]], f0[assets[1]]),
                                  marginals)
    history_path = outdir / "history.csv"
    ordinal0 = valuation.toordinal() - n_days - 30
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", assets[0], assets[1]])
        for k in range(n_days + 1):
            d = date.fromordinal(ordinal0 + k)
            writer.writerow([d.isoformat(),
                             f"{fwd_batch.values[0, 0, k]:.6f}",
                             f"{fwd_batch.values[1, 0, k]:.6f}"])
    return {"quotes": quotes_path, "history": history_path,
            "marginals": marginals, "assets": assets, "f0": f0, "r": r,
            "T": t_years}
