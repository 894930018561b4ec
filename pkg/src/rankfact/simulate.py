"""Synthetic market-cap panels from a constant-coefficient log-diffusion.

Per period, log X_i steps by gamma_i dt + sqrt(dt) * sum_nu xi_inu Z_nu with
independent standard normal draws, i.e. the exact per-period integral of the
continuous model, so there is no discretization bias. With equal growth rates
and exchangeable volatilities the simulated market is a null case: any
small-over-large outperformance is purely mechanical.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from typing import Mapping

import numpy as np

from .panel import MarketPanel


def _monthly_grid(n_dates: int, start_year: int = 2000, start_month: int = 1) -> tuple[Date, ...]:
    months = start_year * 12 + (start_month - 1) + np.arange(n_dates)
    return tuple(Date(int(m // 12), int(m % 12) + 1, 1) for m in months)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Simulation inputs; scalars broadcast to per-stock vectors.

    gamma is per year, xi per sqrt-year with one row per stock (a scalar means
    sigma * identity), dt in years. The seed fixes the panel bit-for-bit.
    """

    n_stocks: int
    n_periods: int
    dt: float = 1.0 / 12.0
    gamma: float | np.ndarray = 0.0
    xi: float | np.ndarray = 0.0
    initial_caps: float | np.ndarray = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_stocks < 2:
            raise ValueError("n_stocks must be >= 2")
        if self.n_periods < 1:
            raise ValueError("n_periods must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), (self.n_stocks,)).copy()
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim == 0:
            xi = float(xi) * np.eye(self.n_stocks)
        elif xi.ndim == 1:
            if xi.size != self.n_stocks:
                raise ValueError("per-stock volatility vector has wrong length")
            xi = np.diag(xi.astype(float))
        elif xi.shape[0] != self.n_stocks:
            raise ValueError(f"xi needs one row per stock, got shape {xi.shape}")
        initial = np.broadcast_to(
            np.asarray(self.initial_caps, dtype=float), (self.n_stocks,)
        ).copy()
        if not np.all(initial > 0):
            raise ValueError("initial caps must be positive")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(xi))):
            raise ValueError("gamma and xi must be finite")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "initial_caps", initial)

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> "SimConfig":
        """Build from parsed key-value config (keys matching the field names;
        `sigma` is accepted as an alias for diagonal xi)."""
        known = {"n_stocks", "n_periods", "dt", "gamma", "xi", "sigma", "initial_caps", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown simulation key(s): {', '.join(sorted(unknown))}")
        kwargs = {k: v for k, v in data.items() if k in known and k != "sigma"}
        if "sigma" in data:
            if "xi" in data:
                raise ValueError("give either xi or sigma, not both")
            kwargs["xi"] = data["sigma"]
        for key in ("gamma", "xi", "initial_caps"):
            if isinstance(kwargs.get(key), list):
                kwargs[key] = np.asarray(kwargs[key], dtype=float)
        for key, cast in (("n_stocks", int), ("n_periods", int), ("seed", int), ("dt", float)):
            if key in kwargs:
                kwargs[key] = cast(kwargs[key])  # type: ignore[arg-type]
        return cls(**kwargs)  # type: ignore[arg-type]


def _trial_rng(seed: int, trial: int | None) -> np.random.Generator:
    # spawn_key gives each trial an independent stream, so trial order and
    # parallel scheduling cannot change any trial's draws
    if trial is None:
        ss = np.random.SeedSequence(entropy=seed)
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.default_rng(ss)


def _simulate_caps(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    xi = config.xi  # type: ignore[assignment]
    gamma = config.gamma  # type: ignore[assignment]
    z = rng.standard_normal((config.n_periods, xi.shape[1]))
    steps = gamma * config.dt + np.sqrt(config.dt) * z @ xi.T
    log_caps = np.empty((config.n_periods + 1, config.n_stocks))
    log_caps[0] = np.log(config.initial_caps)
    np.cumsum(steps, axis=0, out=log_caps[1:])
    log_caps[1:] += log_caps[0]
    return np.exp(log_caps)


def simulate(config: SimConfig, trial: int | None = None) -> MarketPanel:
    """Simulate a panel on a synthetic monthly date grid, all stocks present
    throughout; `trial` selects an independent stream off the same seed."""
    caps = _simulate_caps(config, _trial_rng(config.seed, trial))
    width = len(str(config.n_stocks))
    return MarketPanel(
        dates=_monthly_grid(config.n_periods + 1),
        stocks=tuple(f"S{j + 1:0{width}d}" for j in range(config.n_stocks)),
        caps=caps,
    )


# -- null-market size experiment ------------------------------------------------


@dataclass(frozen=True, eq=False)
class NullExperimentResult:
    """Per-trial cumulative small-minus-large log returns and their summary."""

    diffs: np.ndarray
    mean: float
    std: float
    frac_small_wins: float

    @property
    def n_trials(self) -> int:
        return self.diffs.size


def _cumulative_size_spread(caps: np.ndarray, m: int) -> float:
    """Sum over periods of r_S - r_L with membership re-formed each period
    start and returns measured before reconstitution."""
    order = np.argsort(-caps[:-1], axis=1, kind="stable")
    top, bottom = order[:, :m], order[:, m:]
    c0, c1 = caps[:-1], caps[1:]
    large0 = np.take_along_axis(c0, top, axis=1).sum(axis=1)
    large1 = np.take_along_axis(c1, top, axis=1).sum(axis=1)
    small0 = np.take_along_axis(c0, bottom, axis=1).sum(axis=1)
    small1 = np.take_along_axis(c1, bottom, axis=1).sum(axis=1)
    r_large = np.log(large1) - np.log(large0)
    r_small = np.log(small1) - np.log(small0)
    return float((r_small - r_large).sum())


def null_size_experiment(
    config: SimConfig, m: int, horizon: int, n_trials: int
) -> NullExperimentResult:
    """Distribution of the cumulative size spread in the random-price null market.

    Growth rates must be identical across stocks (otherwise the market is not
    a null case); the boundary m splits top-m large from the rest.
    """
    gamma = np.asarray(config.gamma, dtype=float)
    if np.ptp(gamma) != 0:
        raise ValueError("null case requires identical growth rates for all stocks")
    if not 1 <= m < config.n_stocks:
        raise ValueError(f"boundary m={m} out of range for {config.n_stocks} stocks")
    if horizon < 1 or n_trials < 1:
        raise ValueError("horizon and n_trials must be >= 1")
    run_cfg = config if config.n_periods == horizon else SimConfig(
        n_stocks=config.n_stocks, n_periods=horizon, dt=config.dt,
        gamma=config.gamma, xi=config.xi,
        initial_caps=config.initial_caps, seed=config.seed,
    )
    diffs = np.empty(n_trials)
    for trial in range(n_trials):
        caps = _simulate_caps(run_cfg, _trial_rng(run_cfg.seed, trial))
        diffs[trial] = _cumulative_size_spread(caps, m)
    return NullExperimentResult(
        diffs=diffs,
        mean=float(diffs.mean()),
        std=float(diffs.std(ddof=1)) if n_trials > 1 else 0.0,
        frac_small_wins=float((diffs > 0).mean()),
    )
