"""Cumulative local time at rank boundaries.

Two estimators of boundary-crossing intensity between the top-m and residual
portfolios: a discrete Tanaka sum over the signed log-weight gap of the two
identities holding ranks m and m+1 at each period start, and the
portfolio-integration form that backs the gap out of the difference between the
reconstituted top-k index and the held top-k portfolio. The two discretize
different representations; no cross-method equality is asserted anywhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .factorization import PairView, consecutive_pairs, pair_view
from .panel import MarketPanel

TANAKA = "tanaka"
PORTFOLIO = "portfolio-integration"


@dataclass(frozen=True, eq=False)
class LocalTimePath:
    """Cumulative local time at one rank boundary, aligned with the panel dates.

    cumulative[0] is 0 and the series never decreases; gaps lists periods the
    boundary was skipped because the intersection universe was too small.
    """

    boundary: int
    dates: tuple[Date, ...]
    cumulative: np.ndarray
    method: str
    gaps: tuple[tuple[Date, Date], ...] = ()

    def __post_init__(self) -> None:
        if len(self.dates) != self.cumulative.size:
            raise ValueError("dates/cumulative length mismatch")
        self.cumulative.flags.writeable = False

    @property
    def terminal(self) -> float:
        return float(self.cumulative[-1])


def tanaka_increment(m_t0: float, m_t1: float) -> float:
    """One-step local-time increment (|M1| - |M0| - sgn(M0) (M1 - M0)) / 2.

    sgn follows the indicator convention sgn(m) = 2 I_(0,inf)(m) - 1, so
    sgn(0) = -1. The increment is non-negative for any finite inputs.
    """
    if not (math.isfinite(m_t0) and math.isfinite(m_t1)):
        raise ValueError("tanaka_increment needs finite inputs")
    sgn0 = 1.0 if m_t0 > 0 else -1.0
    return 0.5 * (abs(m_t1) - abs(m_t0) - sgn0 * (m_t1 - m_t0))


def _pair_increments(view: PairView, boundaries: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
    """Increments for every requested boundary over one period.

    Returns (increments, valid) arrays; invalid boundaries (m + 1 beyond the
    intersection universe) get increment 0 and valid False.
    """
    n = len(view.stocks)
    inc = np.zeros(boundaries.size)
    valid = boundaries + 1 <= n
    if not valid.any():
        return inc, valid
    ms = boundaries[valid]
    if method == TANAKA:
        lw0_held = np.log(view.w0[view.order0])
        lw1_held = np.log(view.w1[view.order0])
        g0 = lw0_held[ms - 1] - lw0_held[ms]
        g1 = lw1_held[ms - 1] - lw1_held[ms]
        sgn0 = np.where(g0 > 0, 1.0, -1.0)
        inc[valid] = 0.5 * (np.abs(g1) - np.abs(g0) - sgn0 * (g1 - g0))
    elif method == PORTFOLIO:
        ranked_w0 = view.w0[view.order0]
        ranked_w1 = view.w1[view.order1]
        held_c0 = view.caps0[view.order0]
        held_c1 = view.caps1[view.order0]
        pw0 = np.cumsum(ranked_w0)
        pw1 = np.cumsum(ranked_w1)
        pc0 = np.cumsum(held_c0)
        pc1 = np.cumsum(held_c1)
        log_m_ratio = math.log(float(view.caps1.sum())) - math.log(float(view.caps0.sum()))
        # top-k membership unchanged <=> the held stocks occupy exactly the top k
        # slots at t1 <=> running max of their t1 ranks equals k - 1
        rank1_of = np.empty(n, dtype=np.int64)
        rank1_of[view.order1] = np.arange(n)
        unchanged = np.maximum.accumulate(rank1_of[view.order0]) == np.arange(n)
        k = ms - 1  # 0-based boundary index
        prefactor = 2.0 * pw0[k] / ranked_w0[k]
        bracket = (
            np.log(pw1[k]) - np.log(pw0[k])
            - (np.log(pc1[k]) - np.log(pc0[k]))
            + log_m_ratio
        )
        inc[valid] = np.where(unchanged[k], 0.0, prefactor * bracket)
    else:
        raise ValueError(f"unknown local-time method {method!r}")
    return inc, valid


def localtime_profile(
    panel: MarketPanel, boundaries: Sequence[int], method: str = PORTFOLIO
) -> list[LocalTimePath]:
    """Cumulative local-time path for each boundary, sharing one pass over the panel."""
    bounds = np.asarray(list(boundaries), dtype=np.int64)
    if bounds.size == 0 or np.any(bounds < 1):
        raise ValueError("boundaries must be a non-empty list of ranks >= 1")
    if method not in (TANAKA, PORTFOLIO):
        raise ValueError(f"unknown local-time method {method!r}")
    pairs = consecutive_pairs(panel)
    cumulative = np.zeros((bounds.size, len(panel.dates)))
    gaps: list[list[tuple[Date, Date]]] = [[] for _ in bounds]
    for step, (t0, t1) in enumerate(pairs, start=1):
        view = pair_view(panel, t0, t1)
        inc, valid = _pair_increments(view, bounds, method)
        cumulative[:, step] = cumulative[:, step - 1] + inc
        for b in np.flatnonzero(~valid):
            gaps[b].append((t0, t1))
    return [
        LocalTimePath(
            boundary=int(m), dates=panel.dates, cumulative=cumulative[b],
            method=method, gaps=tuple(gaps[b]),
        )
        for b, m in enumerate(bounds)
    ]


def localtime_tanaka(panel: MarketPanel, m: int) -> LocalTimePath:
    """Tanaka-sum local time of the signed gap between the rank-m and rank-(m+1)
    identities, re-selected at each period start."""
    return localtime_profile(panel, [m], method=TANAKA)[0]


def localtime_portfolio(panel: MarketPanel, k: int) -> LocalTimePath:
    """Local time at boundary k integrated from the spread between the
    reconstituted top-k index and the held top-k portfolio."""
    return localtime_profile(panel, [k], method=PORTFOLIO)[0]


# -- serialization ------------------------------------------------------------


def paths_to_csv(paths: Iterable[LocalTimePath], path: str | Path) -> None:
    """Long-format CSV: date,boundary_m,cumulative_local_time (6 decimals)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "boundary_m", "cumulative_local_time"])
        for p in sorted(paths, key=lambda p: p.boundary):
            for d, v in zip(p.dates, p.cumulative):
                writer.writerow([d.isoformat(), p.boundary, f"{v:.6f}"])


def profile_to_matrix_csv(paths: Sequence[LocalTimePath], path: str | Path) -> None:
    """Dense surface CSV: one row per boundary, one column per date."""
    if not paths:
        raise ValueError("no paths to write")
    dates = paths[0].dates
    if any(p.dates != dates for p in paths):
        raise ValueError("paths cover different date grids")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["boundary_m"] + [d.isoformat() for d in dates])
        for p in sorted(paths, key=lambda p: p.boundary):
            writer.writerow([p.boundary] + [f"{v:.6f}" for v in p.cumulative])
