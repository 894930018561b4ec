"""Rank permutations over present stocks, by market weight or any panel attribute.

Rank 1 is the largest value; ties go to the stock appearing earlier in the
panel's stock list, which keeps permutations deterministic across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date

import numpy as np

from .errors import CoverageError, PanelValidationError
from .panel import MarketPanel

MARKET_WEIGHT = "market_weight"


@dataclass(frozen=True)
class RankPermutation:
    """Mapping from rank slot (1-based, 1 = largest) to stock identity at one date."""

    date: Date
    order: tuple[str, ...]
    attribute: str


def _attribute_values(panel: MarketPanel, t: int, mask: np.ndarray, attribute: str) -> np.ndarray:
    """Values of `attribute` for the masked stocks at date row t."""
    if attribute == MARKET_WEIGHT:
        caps = panel.caps[t][mask]
        return caps / caps.sum()
    try:
        mat = panel.attributes[attribute]
    except KeyError:
        raise PanelValidationError(f"unknown ranking attribute {attribute!r}") from None
    vals = mat[t][mask]
    if np.isnan(vals).any():
        bad = [s for s, v in zip(np.array(panel.stocks)[mask], vals) if np.isnan(v)]
        raise PanelValidationError(
            f"attribute {attribute!r} missing for stock(s) {', '.join(map(str, bad))} at {panel.dates[t]}"
        )
    return vals


def descending_order(values: np.ndarray) -> np.ndarray:
    """Indices sorting `values` descending; equal values keep input order (stable)."""
    return np.argsort(-values, kind="stable")


def rank(panel: MarketPanel, date: Date, attribute: str = MARKET_WEIGHT) -> RankPermutation:
    """Rank the stocks present at `date` by `attribute`, descending."""
    t = panel.date_loc(date)
    mask = panel.present_mask(date)
    if not mask.any():
        raise CoverageError(f"no stocks present at {date}")
    vals = _attribute_values(panel, t, mask, attribute)
    present = np.flatnonzero(mask)
    order = present[descending_order(vals)]
    return RankPermutation(
        date=date, order=tuple(panel.stocks[j] for j in order), attribute=attribute
    )


def ranked_weights(panel: MarketPanel, date: Date) -> np.ndarray:
    """Market weights at `date` sorted descending (mu_(1) >= ... >= mu_(n))."""
    t = panel.date_loc(date)
    mask = panel.present_mask(date)
    if not mask.any():
        raise CoverageError(f"no stocks present at {date}")
    caps = panel.caps[t][mask]
    w = caps / caps.sum()
    return w[descending_order(w)]


def gap(panel: MarketPanel, date: Date, m: int) -> float:
    """Log-weight gap at rank boundary m: log mu_(m) - log mu_(m+1) >= 0."""
    w = ranked_weights(panel, date)
    if not 1 <= m < len(w):
        raise ValueError(f"boundary m={m} out of range for {len(w)} present stocks")
    return float(np.log(w[m - 1]) - np.log(w[m]))
