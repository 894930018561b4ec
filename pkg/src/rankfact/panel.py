"""Panel data model: market caps per (date, stock), optional dividend rates and
ranking attributes, CSV ingestion/serialization and derived market weights.

Panels are immutable after construction; absence (delisted / not yet listed) is
encoded as NaN in the cap matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date as Date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CoverageError, PanelParseError, PanelValidationError

CORE_COLUMNS = ("date", "stock_id", "market_cap", "dividend_rate")


@dataclass(frozen=True)
class MarketPanel:
    """Aligned time x stock grid of market capitalizations.

    caps[t, j] is the capitalization of stocks[j] at dates[t]; NaN marks the
    stock absent at that date. dividend_rates, if given, are per-period
    continuously-compounded log rates on the same grid. attributes holds named
    matrices (e.g. book_to_price) usable as alternative ranking keys.
    """

    dates: tuple[Date, ...]
    stocks: tuple[str, ...]
    caps: np.ndarray
    dividend_rates: np.ndarray | None = None
    attributes: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (len(self.dates), len(self.stocks))
        if self.caps.shape != shape:
            raise PanelValidationError(
                f"caps shape {self.caps.shape} != (dates, stocks) {shape}"
            )
        if any(d1 >= d2 for d1, d2 in zip(self.dates, self.dates[1:])):
            raise PanelValidationError("dates must be strictly increasing")
        present = ~np.isnan(self.caps)
        if not np.all(self.caps[present] > 0):
            raise PanelValidationError("all present market caps must be > 0")
        if self.dividend_rates is not None:
            if self.dividend_rates.shape != shape:
                raise PanelValidationError("dividend_rates shape mismatch")
            dr = self.dividend_rates[~np.isnan(self.dividend_rates)]
            if not np.all(np.isfinite(dr)):
                raise PanelValidationError("dividend rates must be finite where present")
        for name, mat in self.attributes.items():
            if mat.shape != shape:
                raise PanelValidationError(f"attribute {name!r} shape mismatch")
        # freeze the arrays and build lookup indices
        for arr in (self.caps, self.dividend_rates, *self.attributes.values()):
            if arr is not None:
                arr.flags.writeable = False
        object.__setattr__(self, "_date_index", {d: i for i, d in enumerate(self.dates)})
        object.__setattr__(self, "_stock_index", {s: j for j, s in enumerate(self.stocks)})

    # -- lookups ------------------------------------------------------------

    def date_loc(self, date: Date) -> int:
        try:
            return self._date_index[date]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"date {date} not in panel") from None

    def stock_loc(self, stock: str) -> int:
        try:
            return self._stock_index[stock]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"stock {stock!r} not in panel") from None

    def present_mask(self, date: Date) -> np.ndarray:
        """Boolean vector over self.stocks: listed (cap present) at date."""
        return ~np.isnan(self.caps[self.date_loc(date)])

    def present_stocks(self, date: Date) -> tuple[str, ...]:
        mask = self.present_mask(date)
        return tuple(s for s, m in zip(self.stocks, mask) if m)

    def is_present(self, stock: str, date: Date) -> bool:
        return bool(not math.isnan(self.caps[self.date_loc(date), self.stock_loc(stock)]))

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_stocks(self) -> int:
        return len(self.stocks)


@dataclass(frozen=True)
class WeightVector:
    """Market weights mu_i = X_i / sum_j X_j over the stocks present at one date."""

    date: Date
    stocks: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        if len(self.stocks) != len(self.weights):
            raise PanelValidationError("stocks/weights length mismatch")
        if not np.all(self.weights > 0):
            raise PanelValidationError("weights must be strictly positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise PanelValidationError("weights must sum to 1 within 1e-12")
        self.weights.flags.writeable = False


def market_weights(panel: MarketPanel, date: Date) -> WeightVector:
    """Market weights at `date` over the stocks present there."""
    t = panel.date_loc(date)
    mask = ~np.isnan(panel.caps[t])
    if not mask.any():
        raise CoverageError(f"no stocks present at {date}")
    caps = panel.caps[t][mask]
    return WeightVector(
        date=date,
        stocks=tuple(s for s, m in zip(panel.stocks, mask) if m),
        weights=caps / caps.sum(),
    )


def total_market_cap(panel: MarketPanel, date: Date) -> float:
    """Combined capitalization of all stocks present at `date`."""
    t = panel.date_loc(date)
    row = panel.caps[t]
    mask = ~np.isnan(row)
    if not mask.any():
        raise CoverageError(f"no stocks present at {date}")
    return float(row[mask].sum())


# -- CSV ingestion ----------------------------------------------------------


def _parse_date(text: str, row_num: int) -> Date:
    try:
        return Date.fromisoformat(text.strip())
    except ValueError:
        raise PanelParseError(f"row {row_num}: bad date {text!r} (want YYYY-MM-DD)") from None


def _parse_float(text: str, row_num: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise PanelParseError(f"row {row_num}: bad {col} value {text!r}") from None


def load_exclusions(path: str | Path) -> list[tuple[str, Date, Date]]:
    """Read an exclusion list CSV: stock_id,start_date,end_date (inclusive range)."""
    out: list[tuple[str, Date, Date]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"stock_id", "start_date", "end_date"}:
            raise PanelParseError("exclusion file needs header stock_id,start_date,end_date")
        for row_num, row in enumerate(reader, start=2):
            start = _parse_date(row["start_date"], row_num)
            end = _parse_date(row["end_date"], row_num)
            if end < start:
                raise PanelParseError(f"row {row_num}: end_date before start_date")
            out.append((row["stock_id"].strip(), start, end))
    return out


def load_panel(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    exclusions: Sequence[tuple[str, Date, Date]] | None = None,
) -> MarketPanel:
    """Load a long-format CSV (date,stock_id,market_cap[,dividend_rate][,attr...]).

    `schema` maps canonical names ("date", "stock_id", "market_cap",
    "dividend_rate", or an attribute name) to the file's column names; columns
    not mentioned and not canonical are ingested as attributes under their own
    header. Rows with an empty market_cap mark the stock absent at that date.
    `exclusions` drops (stock, date-range) rows before any validation.
    """
    schema = dict(schema or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelParseError("empty file: header row required") from None
        header = [h.strip() for h in header]

        col_for = {name: schema.get(name, name) for name in CORE_COLUMNS}
        missing = [col_for[n] for n in ("date", "stock_id", "market_cap") if col_for[n] not in header]
        if missing:
            raise PanelParseError(f"missing required column(s): {', '.join(missing)}")
        col_idx = {name: header.index(col) for name, col in col_for.items() if col in header}

        # attribute columns: explicit schema entries first, then leftover headers
        attr_cols: dict[str, int] = {}
        for name, col in schema.items():
            if name not in CORE_COLUMNS:
                if col not in header:
                    raise PanelParseError(f"schema column {col!r} not in header")
                attr_cols[name] = header.index(col)
        claimed = set(col_idx.values()) | set(attr_cols.values())
        for j, col in enumerate(header):
            if j not in claimed:
                attr_cols[col] = j

        has_div = "dividend_rate" in col_idx
        rows: list[tuple[Date, str, float | None, float | None, dict[str, float]]] = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelParseError(
                    f"row {row_num}: expected {len(header)} fields, got {len(row)}"
                )
            date = _parse_date(row[col_idx["date"]], row_num)
            stock = row[col_idx["stock_id"]].strip()
            if not stock:
                raise PanelParseError(f"row {row_num}: empty stock_id")
            cap_text = row[col_idx["market_cap"]].strip()
            cap = _parse_float(cap_text, row_num, "market_cap") if cap_text else None
            div = None
            if has_div:
                div_text = row[col_idx["dividend_rate"]].strip()
                div = _parse_float(div_text, row_num, "dividend_rate") if div_text else None
            attrs: dict[str, float] = {}
            for name, j in attr_cols.items():
                text = row[j].strip()
                if text:
                    attrs[name] = _parse_float(text, row_num, name)
            rows.append((date, stock, cap, div, attrs))

    if exclusions:
        def excluded(date: Date, stock: str) -> bool:
            return any(s == stock and a <= date <= b for s, a, b in exclusions)

        rows = [r for r in rows if not excluded(r[0], r[1])]

    dates = tuple(sorted({r[0] for r in rows}))
    # sorted ids keep the stock-list order (and with it the rank tie rule)
    # independent of the file's row order, and make save/load round-trip stable
    stocks = tuple(sorted({r[1] for r in rows}))
    if not dates or not stocks:
        raise PanelValidationError("no data rows after parsing/exclusions")

    d_idx = {d: i for i, d in enumerate(dates)}
    s_idx = {s: j for j, s in enumerate(stocks)}
    caps = np.full((len(dates), len(stocks)), np.nan)
    divs = np.full_like(caps, np.nan) if has_div else None
    attr_names = sorted({name for r in rows for name in r[4]})
    attrs_mat = {name: np.full_like(caps, np.nan) for name in attr_names}
    seen: set[tuple[int, int]] = set()
    for date, stock, cap, div, attrs in rows:
        t, j = d_idx[date], s_idx[stock]
        if (t, j) in seen:
            raise PanelValidationError(f"duplicate row for stock {stock!r} at {date}")
        seen.add((t, j))
        if cap is not None:
            if cap <= 0:
                raise PanelValidationError(
                    f"non-positive market_cap for stock {stock!r} at {date}"
                )
            caps[t, j] = cap
        if div is not None and divs is not None:
            divs[t, j] = div
        for name, val in attrs.items():
            attrs_mat[name][t, j] = val

    return MarketPanel(
        dates=dates, stocks=stocks, caps=caps, dividend_rates=divs, attributes=attrs_mat
    )


def save_panel(panel: MarketPanel, path: str | Path) -> None:
    """Write the panel back to long-format CSV (one row per present (date, stock))."""
    attr_names = sorted(panel.attributes)
    header = ["date", "stock_id", "market_cap"]
    if panel.dividend_rates is not None:
        header.append("dividend_rate")
    header.extend(attr_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, date in enumerate(panel.dates):
            for j, stock in enumerate(panel.stocks):
                cap = panel.caps[t, j]
                if math.isnan(cap):
                    continue
                row = [date.isoformat(), stock, repr(float(cap))]
                if panel.dividend_rates is not None:
                    d = panel.dividend_rates[t, j]
                    row.append("" if math.isnan(d) else repr(float(d)))
                for name in attr_names:
                    v = panel.attributes[name][t, j]
                    row.append("" if math.isnan(v) else repr(float(v)))
                writer.writerow(row)
