"""Discrete factorization of returns in a ranked market.

Per period (t0, t1) the relative log return of a stock splits exactly into a
distributional part (what happened to its t0 rank slot) and a rank part (what
its migration across slots contributed); a dividend correction extends the
identity when per-stock dividend rates are available. The same triangle applied
to coefficient portfolios yields the generating-function / rank-sensitivity
decomposition, and the rebalanced large/small construction yields the
mechanical size-effect check.

Every period is evaluated on the intersection universe (stocks present at both
dates) with weights renormalized over it, so delistings never require
imputation.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CoverageError, PanelValidationError
from .panel import MarketPanel
from .ranking import MARKET_WEIGHT, _attribute_values, descending_order

log = logging.getLogger(__name__)

PERIODS_PER_YEAR = {"monthly": 12, "quarterly": 4, "semi-annual": 2, "annual": 1}


# -- pair view ----------------------------------------------------------------


@dataclass(frozen=True)
class PairView:
    """One period's working data over the intersection universe.

    order0/order1 are positions into the intersection arrays sorted by the
    ranking attribute (descending) at t0/t1; rank_of0 inverts order0.
    """

    t0: Date
    t1: Date
    stocks: tuple[str, ...]
    caps0: np.ndarray
    caps1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    order0: np.ndarray
    order1: np.ndarray
    rank_of0: np.ndarray
    div1: np.ndarray | None
    attribute: str = MARKET_WEIGHT


def pair_view(
    panel: MarketPanel, t0: Date, t1: Date, attribute: str = MARKET_WEIGHT
) -> PairView:
    """Build the intersection-universe view for the period (t0, t1)."""
    i0, i1 = panel.date_loc(t0), panel.date_loc(t1)
    if i1 <= i0:
        raise ValueError(f"t1 ({t1}) must come after t0 ({t0})")
    row0, row1 = panel.caps[i0], panel.caps[i1]
    cols = np.flatnonzero(~np.isnan(row0) & ~np.isnan(row1))
    if cols.size == 0:
        raise CoverageError(f"no stocks present at both {t0} and {t1}")
    caps0, caps1 = row0[cols], row1[cols]
    w0 = caps0 / caps0.sum()
    w1 = caps1 / caps1.sum()
    if attribute == MARKET_WEIGHT:
        order0, order1 = descending_order(w0), descending_order(w1)
    else:
        try:
            mat = panel.attributes[attribute]
        except KeyError:
            raise PanelValidationError(f"unknown ranking attribute {attribute!r}") from None
        a0, a1 = mat[i0][cols], mat[i1][cols]
        for d, vals in ((t0, a0), (t1, a1)):
            if np.isnan(vals).any():
                bad = [panel.stocks[cols[k]] for k in np.flatnonzero(np.isnan(vals))]
                raise PanelValidationError(
                    f"attribute {attribute!r} missing for stock(s) {', '.join(bad)} at {d}"
                )
        order0, order1 = descending_order(a0), descending_order(a1)
    rank_of0 = np.empty_like(order0)
    rank_of0[order0] = np.arange(order0.size)
    div1 = None
    if panel.dividend_rates is not None:
        div1 = panel.dividend_rates[i1][cols]
    return PairView(
        t0=t0, t1=t1,
        stocks=tuple(panel.stocks[j] for j in cols),
        caps0=caps0, caps1=caps1, w0=w0, w1=w1,
        order0=order0, order1=order1, rank_of0=rank_of0,
        div1=div1, attribute=attribute,
    )


def consecutive_pairs(panel: MarketPanel) -> list[tuple[Date, Date]]:
    return list(zip(panel.dates, panel.dates[1:]))


# -- domain types --------------------------------------------------------------


@dataclass(frozen=True)
class ComponentDecomposition:
    """Log-return components of one subject over one period, relative to the market.

    total is the price-only relative log return and equals
    distributional + rank up to rounding; dividend is the extra correction
    (0 without dividend data), so total + dividend is the with-dividend figure.
    """

    t0: Date
    t1: Date
    subject: str
    total: float
    distributional: float
    rank: float
    dividend: float = 0.0

    @property
    def total_with_dividends(self) -> float:
        return self.total + self.dividend


@dataclass(frozen=True)
class ComponentSeries:
    """Ordered per-period decompositions for one subject at one sampling rate."""

    subject: str
    decompositions: tuple[ComponentDecomposition, ...]
    sampling: str = "monthly"
    dropped: int = 0

    def __post_init__(self) -> None:
        decs = self.decompositions
        if any(d.t0 >= d.t1 for d in decs):
            raise PanelValidationError("each period needs t0 < t1")
        contiguous = not self.sampling.startswith("rolling")
        for a, b in zip(decs, decs[1:]):
            if contiguous and b.t0 != a.t1:
                raise PanelValidationError(
                    f"periods must be contiguous: {a.t1} != {b.t0}"
                )
            if not contiguous and b.t0 < a.t0:
                raise PanelValidationError("periods out of order")

    def __len__(self) -> int:
        return len(self.decompositions)

    def totals(self, with_dividends: bool = False) -> np.ndarray:
        if with_dividends:
            return np.array([d.total + d.dividend for d in self.decompositions])
        return np.array([d.total for d in self.decompositions])

    def component(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.decompositions])


@dataclass(frozen=True)
class PortfolioSpec:
    """Declarative portfolio definition.

    Either a rank range on a ranking attribute (membership re-formed at every
    period start; per-period returns are measured on the period-start
    membership, i.e. before reconstitution) or an explicit non-negative
    coefficient vector over stock ids (passive holdings).
    """

    name: str
    kind: str
    attribute: str = MARKET_WEIGHT
    lo: int | None = None
    hi: int | None = None
    coefficients: tuple[tuple[str, float], ...] | None = None
    rebalance: bool = True

    def __post_init__(self) -> None:
        if self.kind == "rank_range":
            if self.lo is None or self.hi is None or not 1 <= self.lo <= self.hi:
                raise ValueError(f"rank range needs 1 <= lo <= hi, got {self.lo}..{self.hi}")
            if not self.rebalance:
                raise ValueError(
                    "rank-range portfolios support only per-period reconstitution"
                )
        elif self.kind == "explicit":
            if not self.coefficients:
                raise ValueError("explicit spec needs coefficients")
            vals = [v for _, v in self.coefficients]
            if any(v < 0 for v in vals) or not any(v > 0 for v in vals):
                raise ValueError("coefficients must be non-negative and not all zero")
        else:
            raise ValueError(f"unknown portfolio kind {self.kind!r}")

    @classmethod
    def rank_range(
        cls, name: str, lo: int, hi: int, attribute: str = MARKET_WEIGHT
    ) -> "PortfolioSpec":
        return cls(name=name, kind="rank_range", attribute=attribute, lo=lo, hi=hi)

    @classmethod
    def explicit(cls, name: str, coefficients: Mapping[str, float]) -> "PortfolioSpec":
        return cls(
            name=name, kind="explicit",
            coefficients=tuple(sorted(coefficients.items())),
        )


@dataclass(frozen=True)
class StockComponents:
    """Vectorized per-stock decomposition of one period (intersection universe)."""

    t0: Date
    t1: Date
    stocks: tuple[str, ...]
    total: np.ndarray
    distributional: np.ndarray
    rank: np.ndarray
    dividend: np.ndarray


@dataclass(frozen=True)
class SizeEffectResult:
    r_large: float
    r_small: float
    ratio_equality_holds: bool


# -- dividend helpers -----------------------------------------------------------


def _require_dividends(view: PairView) -> np.ndarray:
    if view.div1 is None:
        raise CoverageError("panel carries no dividend rates")
    missing = np.isnan(view.div1)
    if missing.any():
        bad = [view.stocks[k] for k in np.flatnonzero(missing)]
        raise CoverageError(
            f"dividend rate missing at {view.t1} for stock(s): {', '.join(bad)}"
        )
    return view.div1


def _market_dividend_rate(view: PairView) -> float:
    div1 = _require_dividends(view)
    return float(np.log((view.w1 * np.exp(div1)).sum()))


def market_dividend_rate(panel: MarketPanel, t0: Date, t1: Date) -> float:
    """Market-wide dividend log rate over (t0, t1): the held-value-weighted
    log-mean-exp of per-stock rates at t1."""
    return _market_dividend_rate(pair_view(panel, t0, t1))


# -- stock-level factorization ---------------------------------------------------


def decompose_stocks(
    panel: MarketPanel, t0: Date, t1: Date, dividend_mode: str = "difference"
) -> StockComponents:
    """Decompose every intersection stock's relative return over (t0, t1).

    dividend_mode "difference" reports each stock's rate in excess of the
    market rate (so the market aggregate is zero); "verbatim" reports the sum
    of market and stock rates instead. Without dividend data the dividend
    column is zero.
    """
    view = pair_view(panel, t0, t1)
    lw0 = np.log(view.w0)
    lw1 = np.log(view.w1)
    slot_lw1 = lw1[view.order1][view.rank_of0]  # t1 log weight of each stock's t0 slot
    total = lw1 - lw0
    distributional = slot_lw1 - lw0
    rank_component = lw1 - slot_lw1
    if panel.dividend_rates is None:
        dividend = np.zeros_like(total)
    else:
        div1 = _require_dividends(view)
        delta_market = _market_dividend_rate(view)
        if dividend_mode == "difference":
            dividend = div1 - delta_market
        elif dividend_mode == "verbatim":
            dividend = delta_market + div1
        else:
            raise ValueError(f"unknown dividend_mode {dividend_mode!r}")
    return StockComponents(
        t0=t0, t1=t1, stocks=view.stocks,
        total=total, distributional=distributional,
        rank=rank_component, dividend=dividend,
    )


def decompose_stock(
    panel: MarketPanel, stock: str, t0: Date, t1: Date, dividend_mode: str = "difference"
) -> ComponentDecomposition:
    """Single-stock decomposition over one consecutive-date period."""
    i0, i1 = panel.date_loc(t0), panel.date_loc(t1)
    if i1 != i0 + 1:
        raise ValueError(f"{t0} and {t1} are not consecutive panel dates")
    batch = decompose_stocks(panel, t0, t1, dividend_mode)
    try:
        pos = batch.stocks.index(stock)
    except ValueError:
        panel.stock_loc(stock)  # unknown id raises KeyError
        raise CoverageError(f"stock {stock!r} not present at both {t0} and {t1}") from None
    return ComponentDecomposition(
        t0=t0, t1=t1, subject=stock,
        total=float(batch.total[pos]),
        distributional=float(batch.distributional[pos]),
        rank=float(batch.rank[pos]),
        dividend=float(batch.dividend[pos]),
    )


def decompose_stock_series(
    panel: MarketPanel,
    stock: str,
    sampling: str = "monthly",
    dividend_mode: str = "difference",
) -> ComponentSeries:
    """Decomposition series over every consecutive pair where the stock is present.

    The presence run must be unbroken: a listing gap would leave a hole in the
    period chain, so decompose the contiguous stretches separately instead.
    """
    decs = []
    for t0, t1 in consecutive_pairs(panel):
        if panel.is_present(stock, t0) and panel.is_present(stock, t1):
            if decs and decs[-1].t1 != t0:
                raise CoverageError(
                    f"stock {stock!r} has a listing gap between {decs[-1].t1} and {t0};"
                    " decompose the contiguous stretches separately"
                )
            decs.append(decompose_stock(panel, stock, t0, t1, dividend_mode))
    if not decs:
        raise CoverageError(f"stock {stock!r} never present on consecutive dates")
    return ComponentSeries(subject=stock, decompositions=tuple(decs), sampling=sampling)


# -- portfolio-level factorization ------------------------------------------------


def _member_slots(view: PairView, spec: PortfolioSpec) -> slice:
    n = len(view.stocks)
    assert spec.lo is not None and spec.hi is not None
    if spec.hi > n:
        raise CoverageError(
            f"rank range {spec.lo}-{spec.hi} exceeds the {n}-stock universe"
            f" for period {view.t0} -> {view.t1}"
        )
    return slice(spec.lo - 1, spec.hi)


def _slot_coefficients(view: PairView, spec: PortfolioSpec) -> np.ndarray:
    """Coefficients per t0 rank slot: indicator of the rank range, or the
    explicit per-stock holdings mapped through the t0 permutation."""
    n = len(view.stocks)
    if spec.kind == "rank_range":
        v = np.zeros(n)
        v[_member_slots(view, spec)] = 1.0
        return v
    by_stock = dict(spec.coefficients or ())
    v_stock = np.array([by_stock.get(s, 0.0) for s in view.stocks])
    if not np.any(v_stock > 0):
        raise CoverageError(
            f"portfolio {spec.name!r} holds nothing in the universe"
            f" for period {view.t0} -> {view.t1}"
        )
    return v_stock[view.order0]


def portfolio_value(panel: MarketPanel, spec: PortfolioSpec, date: Date) -> float:
    """Portfolio value at one date: member-cap sum (rank range) or sum(v_i X_i)."""
    t = panel.date_loc(date)
    mask = panel.present_mask(date)
    if not mask.any():
        raise CoverageError(f"no stocks present at {date}")
    caps = panel.caps[t][mask]
    if spec.kind == "rank_range":
        if spec.attribute == MARKET_WEIGHT:
            vals = caps
        else:
            vals = _attribute_values(panel, t, mask, spec.attribute)
        assert spec.lo is not None and spec.hi is not None
        if spec.hi > caps.size:
            raise CoverageError(
                f"rank range {spec.lo}-{spec.hi} exceeds the {caps.size}-stock universe at {date}"
            )
        order = descending_order(vals)
        return float(caps[order[spec.lo - 1 : spec.hi]].sum())
    by_stock = dict(spec.coefficients or ())
    stocks = [s for s, m in zip(panel.stocks, mask) if m]
    v = np.array([by_stock.get(s, 0.0) for s in stocks])
    return float((v * caps).sum())


def decompose_portfolio_vs_market(
    panel: MarketPanel, spec: PortfolioSpec, t0: Date, t1: Date
) -> ComponentDecomposition:
    """Portfolio triangle vs the market: generating-function change
    (distributional), rank-sensitivity log (rank) and dividend-rate excess."""
    view = pair_view(panel, t0, t1, spec.attribute)
    v = _slot_coefficients(view, spec)
    ranked_w0 = view.w0[view.order0]
    ranked_w1 = view.w1[view.order1]
    held_w1 = view.w1[view.order0]  # t0-membership weights carried to t1
    s0 = float((v * ranked_w0).sum())
    s1_recon = float((v * ranked_w1).sum())
    v1_held = float((v * held_w1).sum())
    total = math.log(v1_held) - math.log(s0)
    distributional = math.log(s1_recon) - math.log(s0)
    rank_component = math.log(v1_held) - math.log(s1_recon)
    dividend = 0.0
    if panel.dividend_rates is not None:
        div1 = _require_dividends(view)
        held_div = div1[view.order0]
        delta_v = math.log(float((v * held_w1 * np.exp(held_div)).sum()) / v1_held)
        dividend = delta_v - _market_dividend_rate(view)
    return ComponentDecomposition(
        t0=t0, t1=t1, subject=spec.name,
        total=total, distributional=distributional,
        rank=rank_component, dividend=dividend,
    )


def decompose_portfolio_vs_portfolio(
    panel: MarketPanel, spec_a: PortfolioSpec, spec_b: PortfolioSpec, t0: Date, t1: Date
) -> ComponentDecomposition:
    """Relative triangle of two portfolios: the market terms cancel, so each
    component is the difference of the vs-market components."""
    a = decompose_portfolio_vs_market(panel, spec_a, t0, t1)
    b = decompose_portfolio_vs_market(panel, spec_b, t0, t1)
    return ComponentDecomposition(
        t0=t0, t1=t1, subject=f"{spec_a.name}/{spec_b.name}",
        total=a.total - b.total,
        distributional=a.distributional - b.distributional,
        rank=a.rank - b.rank,
        dividend=a.dividend - b.dividend,
    )


def decompose_portfolio_series(
    panel: MarketPanel,
    spec: PortfolioSpec,
    benchmark: PortfolioSpec | None = None,
    sampling: str = "monthly",
) -> ComponentSeries:
    """Per-period portfolio decomposition over all consecutive panel dates,
    vs the market or vs a benchmark portfolio."""
    if panel.n_dates < 2:
        raise CoverageError("panel needs at least 2 dates to decompose")
    decs = []
    for t0, t1 in consecutive_pairs(panel):
        if benchmark is None:
            decs.append(decompose_portfolio_vs_market(panel, spec, t0, t1))
        else:
            decs.append(decompose_portfolio_vs_portfolio(panel, spec, benchmark, t0, t1))
    subject = decs[0].subject if decs else spec.name
    return ComponentSeries(subject=subject, decompositions=tuple(decs), sampling=sampling)


# -- size effect -----------------------------------------------------------------


RATIO_EQUALITY_TOL = 1e-9


def size_effect_check(
    panel: MarketPanel, m: int, t0: Date, t1: Date
) -> SizeEffectResult:
    """Held-membership returns of the top-m (large) and residual (small)
    portfolios, plus whether the rebalanced-value ratio condition holds.

    When the reconstituted large and small portfolios grow by the same factor
    (within RATIO_EQUALITY_TOL, relative), the small return can not fall below
    the large return.
    """
    view = pair_view(panel, t0, t1)
    n = len(view.stocks)
    if not 1 <= m < n:
        raise ValueError(f"boundary m={m} out of range for {n}-stock universe")
    top, bottom = view.order0[:m], view.order0[m:]
    r_large = math.log(float(view.caps1[top].sum()) / float(view.caps0[top].sum()))
    r_small = math.log(float(view.caps1[bottom].sum()) / float(view.caps0[bottom].sum()))
    ranked_caps1 = view.caps1[view.order1]
    ratio_large = float(ranked_caps1[:m].sum()) / float(view.caps0[top].sum())
    ratio_small = float(ranked_caps1[m:].sum()) / float(view.caps0[bottom].sum())
    holds = abs(ratio_large / ratio_small - 1.0) <= RATIO_EQUALITY_TOL
    return SizeEffectResult(r_large=r_large, r_small=r_small, ratio_equality_holds=holds)


# -- decimation ------------------------------------------------------------------


def decimate(series: ComponentSeries, target: str) -> ComponentSeries:
    """Re-sample to a coarser rate by summing log components over consecutive
    groups anchored at the series start; an incomplete trailing group is
    dropped (count kept on the result and logged)."""
    try:
        ppy_source = PERIODS_PER_YEAR[series.sampling]
        ppy_target = PERIODS_PER_YEAR[target]
    except KeyError as exc:
        raise ValueError(f"unknown sampling label {exc.args[0]!r}") from None
    if ppy_target >= ppy_source or ppy_source % ppy_target:
        raise ValueError(f"target {target!r} must be coarser than {series.sampling!r}")
    group = ppy_source // ppy_target
    decs = series.decompositions
    n_groups, dropped = divmod(len(decs), group)
    if dropped:
        log.info(
            "decimate %s -> %s: dropped %d trailing period(s) of %s",
            series.sampling, target, dropped, series.subject,
        )
    out = []
    for g in range(n_groups):
        chunk = decs[g * group : (g + 1) * group]
        out.append(
            ComponentDecomposition(
                t0=chunk[0].t0, t1=chunk[-1].t1, subject=series.subject,
                total=sum(d.total for d in chunk),
                distributional=sum(d.distributional for d in chunk),
                rank=sum(d.rank for d in chunk),
                dividend=sum(d.dividend for d in chunk),
            )
        )
    return ComponentSeries(
        subject=series.subject, decompositions=tuple(out), sampling=target, dropped=dropped
    )


# -- serialization -----------------------------------------------------------------

SERIES_COLUMNS = ("t0", "t1", "subject", "total", "distributional", "rank", "dividend")


def series_to_csv(series: ComponentSeries, path: str | Path) -> None:
    """Write the series as CSV with 6-decimal component columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for d in series.decompositions:
            writer.writerow(
                [
                    d.t0.isoformat(), d.t1.isoformat(), d.subject,
                    f"{d.total:.6f}", f"{d.distributional:.6f}",
                    f"{d.rank:.6f}", f"{d.dividend:.6f}",
                ]
            )


def series_from_csv(path: str | Path, sampling: str = "monthly") -> ComponentSeries:
    decs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SERIES_COLUMNS:
            raise PanelValidationError(f"unexpected series header in {path}")
        for row in reader:
            decs.append(
                ComponentDecomposition(
                    t0=Date.fromisoformat(row["t0"]),
                    t1=Date.fromisoformat(row["t1"]),
                    subject=row["subject"],
                    total=float(row["total"]),
                    distributional=float(row["distributional"]),
                    rank=float(row["rank"]),
                    dividend=float(row["dividend"]),
                )
            )
    if not decs:
        raise PanelValidationError(f"empty series file {path}")
    return ComponentSeries(
        subject=decs[0].subject, decompositions=tuple(decs), sampling=sampling
    )


def series_to_json(series: ComponentSeries, path: str | Path) -> None:
    """Full-precision JSON mirror of the CSV serialization."""
    payload = {
        "subject": series.subject,
        "sampling": series.sampling,
        "dropped": series.dropped,
        "periods": [
            {
                "t0": d.t0.isoformat(), "t1": d.t1.isoformat(), "subject": d.subject,
                "total": d.total, "distributional": d.distributional,
                "rank": d.rank, "dividend": d.dividend,
            }
            for d in series.decompositions
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
