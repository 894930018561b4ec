#!/usr/bin/env python3
"""Regenerate data/synthetic_panel.csv: a 250-stock, 152-month panel.

Caps follow a correlated log-diffusion (one market factor plus idiosyncratic
noise, smaller stocks more volatile) started from a Zipf-like capital
distribution; per-stock dividend rates and a slowly-varying book-to-price
attribute are attached so the full pipeline (Value portfolio included) runs
on the bundled file. Fully deterministic for a given seed.
"""

import argparse
from datetime import date
from pathlib import Path

import numpy as np

from rankfact import MarketPanel, SimConfig, save_panel, simulate

N_STOCKS = 250
N_MONTHS = 152  # Nov 1994 .. Jun 2007
SEED = 19941101


def monthly_dates(n, start_year=1994, start_month=11):
    months = start_year * 12 + (start_month - 1) + np.arange(n)
    return tuple(date(int(m // 12), int(m % 12) + 1, 1) for m in months)


def build_panel(seed: int = SEED) -> MarketPanel:
    rng = np.random.default_rng(seed)
    n, periods = N_STOCKS, N_MONTHS - 1

    ranks = np.arange(1, n + 1)
    initial = 120e9 * ranks**-1.05  # Zipf-like capital distribution curve

    idio = 0.16 + 0.22 * ranks / n  # smaller stocks are noisier
    beta = rng.uniform(0.7, 1.3, size=n)
    xi = np.hstack([(beta * 0.14)[:, None], np.diag(idio)])  # market factor + idio

    cfg = SimConfig(
        n_stocks=n, n_periods=periods, dt=1 / 12,
        gamma=0.07, xi=xi, initial_caps=initial, seed=seed,
    )
    caps = simulate(cfg).caps.copy()

    base_div = np.clip(rng.normal(0.0021, 0.0009, size=n), 0.0, None)
    dividends = np.clip(
        base_div + rng.normal(0.0, 0.0004, size=(N_MONTHS, n)), 0.0, None
    )

    log_bp = np.empty((N_MONTHS, n))
    log_bp[0] = rng.normal(0.0, 0.4, size=n)
    for t in range(1, N_MONTHS):  # slowly mean-reverting book-to-price
        log_bp[t] = 0.97 * log_bp[t - 1] + rng.normal(0.0, 0.06, size=n)
    book_to_price = np.exp(log_bp)

    return MarketPanel(
        dates=monthly_dates(N_MONTHS),
        stocks=tuple(f"S{j + 1:03d}" for j in range(n)),
        caps=caps,
        dividend_rates=dividends,
        attributes={"book_to_price": book_to_price},
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data" / "synthetic_panel.csv")
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()
    panel = build_panel(args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_panel(panel, out)
    print(f"wrote {panel.n_dates} x {panel.n_stocks} panel to {out}")


if __name__ == "__main__":
    main()
