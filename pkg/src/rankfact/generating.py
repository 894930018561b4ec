"""Continuous-model estimators: market entropy, excess growth rate, relative
covariances, portfolio weights generated by a function of the (ranked) weight
vector, and their discrete per-period increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date
from typing import Callable

import numpy as np

from .errors import CapabilityError
from .factorization import pair_view
from .panel import MarketPanel, WeightVector
from .ranking import descending_order


def _as_weights(weights) -> np.ndarray:
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if not np.all(w > 0):
        raise ValueError("weights must lie on the open simplex (all > 0)")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    return w


# -- entropy ----------------------------------------------------------------


def market_entropy(weights) -> float:
    """Entropy -sum(mu_i log mu_i) of a weight vector on the open simplex."""
    w = _as_weights(weights)
    return float(-(w * np.log(w)).sum())


def entropy_portfolio(weights) -> np.ndarray:
    """Weights proportional to -mu_i log mu_i (positive, summing to 1).

    The proportions are each stock's entropy contribution over the total; the
    minus sign keeps them positive on the interior of the simplex.
    """
    w = _as_weights(weights)
    if w.size < 2:
        raise ValueError("entropy portfolio needs at least 2 stocks")
    contrib = -w * np.log(w)
    return contrib / contrib.sum()


# -- generating functions -----------------------------------------------------


@dataclass(frozen=True)
class GeneratingFunction:
    """A positive function of the (ranked) weight vector with its derivatives.

    `value` maps a weight vector to a positive scalar; `gradient` returns the
    first partials; `hessian` (optional) the second-partial matrix, needed only
    for smooth-drift estimation.
    """

    name: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def check_derivatives(
        self, points, grad_rtol: float = 1e-6, hess_rtol: float = 1e-5
    ) -> None:
        """Verify supplied derivatives against central finite differences of
        `value` at the given simplex points; raises AssertionError on mismatch."""
        for x in points:
            x = np.asarray(x, dtype=float)
            if self.gradient is not None:
                fd = _fd_gradient(self.value, x)
                g = np.asarray(self.gradient(x), dtype=float)
                if not np.allclose(g, fd, rtol=grad_rtol, atol=grad_rtol):
                    raise AssertionError(
                        f"{self.name}: gradient disagrees with finite differences"
                    )
            if self.hessian is not None:
                fd2 = _fd_hessian(self.value, x)
                h = np.asarray(self.hessian(x), dtype=float)
                if not np.allclose(h, fd2, rtol=hess_rtol, atol=hess_rtol):
                    raise AssertionError(
                        f"{self.name}: hessian disagrees with finite differences"
                    )


def _fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def _fd_hessian(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    n = x.size
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            out[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h * h)
    return out


def market_sum() -> GeneratingFunction:
    """S(x) = sum of all coordinates; generates the market portfolio itself."""
    return GeneratingFunction(
        name="market-sum",
        value=lambda x: float(np.sum(x)),
        gradient=lambda x: np.ones_like(x),
        hessian=lambda x: np.zeros((x.size, x.size)),
    )


def top_m_sum(m: int) -> GeneratingFunction:
    """S(x) = x_1 + ... + x_m on a rank-ordered vector: the large-cap index weight."""
    if m < 1:
        raise ValueError("m must be >= 1")

    def _check(x: np.ndarray) -> None:
        if x.size < m:
            raise ValueError(f"top-{m} sum needs at least {m} coordinates")

    def value(x: np.ndarray) -> float:
        _check(x)
        return float(np.sum(x[:m]))

    def gradient(x: np.ndarray) -> np.ndarray:
        _check(x)
        g = np.zeros_like(x)
        g[:m] = 1.0
        return g

    return GeneratingFunction(
        name=f"top-{m}-sum", value=value, gradient=gradient,
        hessian=lambda x: np.zeros((x.size, x.size)),
    )


def bottom_sum(m: int) -> GeneratingFunction:
    """S(x) = x_{m+1} + ... + x_n on a rank-ordered vector: the small-cap complement."""
    if m < 1:
        raise ValueError("m must be >= 1")

    def _check(x: np.ndarray) -> None:
        if x.size <= m:
            raise ValueError(f"bottom sum below rank {m} needs more than {m} coordinates")

    def value(x: np.ndarray) -> float:
        _check(x)
        return float(np.sum(x[m:]))

    def gradient(x: np.ndarray) -> np.ndarray:
        _check(x)
        g = np.zeros_like(x)
        g[m:] = 1.0
        return g

    return GeneratingFunction(
        name=f"bottom-sum-below-{m}", value=value, gradient=gradient,
        hessian=lambda x: np.zeros((x.size, x.size)),
    )


def entropy_function() -> GeneratingFunction:
    return GeneratingFunction(
        name="entropy",
        value=lambda x: float(-(x * np.log(x)).sum()),
        gradient=lambda x: -(np.log(x) + 1.0),
        hessian=lambda x: np.diag(-1.0 / x),
    )


def linear_function(v) -> GeneratingFunction:
    """S(x) = sum(v_k x_k) for a fixed coefficient vector."""
    coeff = np.asarray(v, dtype=float)

    def _check(x: np.ndarray) -> None:
        if x.size != coeff.size:
            raise ValueError(f"linear function expects {coeff.size} coordinates, got {x.size}")

    def value(x: np.ndarray) -> float:
        _check(x)
        return float((coeff * x).sum())

    def gradient(x: np.ndarray) -> np.ndarray:
        _check(x)
        return coeff.copy()

    return GeneratingFunction(
        name="linear", value=value, gradient=gradient,
        hessian=lambda x: np.zeros((x.size, x.size)),
    )


# -- covariance estimation -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Sample covariances of per-period log returns over a window, with the
    market pieces sigma_iu = sum_j mu_j sigma_ij, sigma_uu = mu' sigma mu and
    the relative covariances tau_ij = sigma_ij - sigma_iu - sigma_ju + sigma_uu.

    mu_bar is the average of the period-start weight vectors used for the
    market pieces. When by_rank, rows/columns refer to rank slots rather than
    stock identities (slot return series mix identities across crossovers).
    """

    window: tuple[Date, Date]
    labels: tuple[str, ...]
    sigma: np.ndarray
    tau: np.ndarray
    sigma_mu: np.ndarray
    sigma_mumu: float
    mu_bar: np.ndarray
    n_periods: int
    by_rank: bool


def estimate_covariances(
    panel: MarketPanel, window: tuple[Date, Date], by_rank: bool = False
) -> CovarianceEstimate:
    """Estimate sigma/tau over the window (inclusive), on the stocks present
    throughout it; by_rank switches to rank-slot return series."""
    start, end = window
    i0, i1 = panel.date_loc(start), panel.date_loc(end)
    if i1 - i0 < 3:
        raise ValueError("window must span at least 3 periods")
    caps = panel.caps[i0 : i1 + 1]
    cols = np.flatnonzero(~np.isnan(caps).any(axis=0))
    if cols.size == 0:
        raise ValueError("no stocks present throughout the window")
    caps = caps[:, cols]
    if by_rank:
        caps = -np.sort(-caps, axis=1)  # each row ranked descending
        labels = tuple(f"rank_{k}" for k in range(1, cols.size + 1))
    else:
        labels = tuple(panel.stocks[j] for j in cols)
    log_caps = np.log(caps)
    returns = np.diff(log_caps, axis=0)
    sigma = np.atleast_2d(np.cov(returns, rowvar=False, ddof=1))
    starts = caps[:-1]
    mu_bar = (starts / starts.sum(axis=1, keepdims=True)).mean(axis=0)
    mu_bar = mu_bar / mu_bar.sum()
    sigma_mu = sigma @ mu_bar
    sigma_mumu = float(mu_bar @ sigma_mu)
    tau = sigma - sigma_mu[:, None] - sigma_mu[None, :] + sigma_mumu
    return CovarianceEstimate(
        window=(start, end), labels=labels, sigma=sigma, tau=tau,
        sigma_mu=sigma_mu, sigma_mumu=sigma_mumu, mu_bar=mu_bar,
        n_periods=returns.shape[0], by_rank=by_rank,
    )


def excess_growth_rate(pi, cov) -> float:
    """gamma* = (sum_i pi_i sigma_ii - sum_ij pi_i pi_j sigma_ij) / 2."""
    sigma = cov.sigma if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    p = np.asarray(pi, dtype=float)
    if sigma.shape != (p.size, p.size):
        raise ValueError(f"covariance shape {sigma.shape} does not match {p.size} weights")
    return 0.5 * float((p * np.diag(sigma)).sum() - p @ sigma @ p)


# -- functionally generated portfolio weights -----------------------------------


def fgp_weights(S: GeneratingFunction, weights, ranked: bool = True) -> np.ndarray:
    """Portfolio weights generated by S at the given market weights.

    pi_k = (D_k log S + 1 - sum_j mu_j D_j log S) * mu_k, evaluated on the
    rank-ordered vector when `ranked` and mapped back to the input order.
    """
    w = _as_weights(weights)
    if S.gradient is None:
        raise CapabilityError(f"generating function {S.name!r} has no gradient")
    perm = descending_order(w) if ranked else np.arange(w.size)
    x = w[perm]
    val = float(S.value(x))
    if val <= 0:
        raise ValueError(f"generating function {S.name!r} not positive at these weights")
    dlog = np.asarray(S.gradient(x), dtype=float) / val
    pi_sorted = (dlog + 1.0 - float((x * dlog).sum())) * x
    out = np.empty_like(w)
    out[perm] = pi_sorted
    return out


def distributional_increment(
    S: GeneratingFunction, panel: MarketPanel, t0: Date, t1: Date, m: int
) -> float:
    """log S(top-m ranked weights at t1) - log S(top-m ranked weights at t0)
    over one consecutive-date period (intersection universe)."""
    i0, i1 = panel.date_loc(t0), panel.date_loc(t1)
    if i1 != i0 + 1:
        raise ValueError(f"{t0} and {t1} are not consecutive panel dates")
    view = pair_view(panel, t0, t1)
    n = len(view.stocks)
    if not 1 <= m <= n:
        raise ValueError(f"m={m} out of range for {n}-stock universe")
    r0 = view.w0[view.order0][:m]
    r1 = view.w1[view.order1][:m]
    return math.log(float(S.value(r1))) - math.log(float(S.value(r0)))


def smooth_drift_increment(
    S: GeneratingFunction, weights, cov: CovarianceEstimate
) -> float:
    """Per-period smooth drift -1/(2 S) * sum_ij D_ij S x_i x_j tau_ij on the
    ranked weights; vanishes for linear generating functions."""
    if S.hessian is None:
        raise CapabilityError(f"generating function {S.name!r} has no hessian")
    if not cov.by_rank:
        raise ValueError("smooth drift needs a by-rank covariance estimate")
    w = _as_weights(weights)
    x = w[descending_order(w)]
    if cov.tau.shape != (x.size, x.size):
        raise ValueError(
            f"covariance dimension {cov.tau.shape} does not match {x.size} weights"
        )
    hess = np.asarray(S.hessian(x), dtype=float)
    val = float(S.value(x))
    return float(-(x @ (hess * cov.tau) @ x) / (2.0 * val))
