"""Shared test helpers."""

from datetime import date

import numpy as np

from rankfact import MarketPanel


def monthly_dates(n, start_year=2000, start_month=1):
    months = start_year * 12 + (start_month - 1) + np.arange(n)
    return tuple(date(int(m // 12), int(m % 12) + 1, 1) for m in months)


def make_panel(caps, dividends=None, attributes=None, stocks=None):
    """Panel from a (n_dates, n_stocks) cap array; NaN marks absence."""
    caps = np.asarray(caps, dtype=float)
    n_dates, n_stocks = caps.shape
    stocks = tuple(stocks) if stocks else tuple(chr(65 + j) for j in range(n_stocks))
    return MarketPanel(
        dates=monthly_dates(n_dates),
        stocks=stocks,
        caps=caps.copy(),
        dividend_rates=None if dividends is None else np.asarray(dividends, dtype=float).copy(),
        attributes={k: np.asarray(v, dtype=float).copy() for k, v in (attributes or {}).items()},
    )


def random_panel(rng, n_stocks, n_dates, scale=1.0):
    """Fully-present panel with lognormal caps."""
    caps = np.exp(rng.normal(0.0, scale, size=(n_dates, n_stocks)))
    return make_panel(caps, stocks=[f"S{j:03d}" for j in range(n_stocks)])


def engineered_ratio_equal_pair(rng, n):
    """Cap pair whose t1 ranked values are a common multiple of the t0 ranked
    values, assigned to identities by a random permutation: the rebalanced
    large/small growth ratios agree exactly (for every boundary) while ranks
    shuffle freely."""
    caps0 = np.exp(rng.normal(0.0, 1.0, n))
    growth = np.exp(rng.normal(0.0, 0.3))
    ranked0 = np.sort(caps0)[::-1]
    order0 = np.argsort(-caps0, kind="stable")
    perm = rng.permutation(n)
    caps1 = np.empty(n)
    caps1[order0] = growth * ranked0[perm]
    return caps0, caps1
