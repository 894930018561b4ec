import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import rankfact as rf
from util import make_panel, random_panel

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def stable_rank_panel(rng, n_dates=12, scale=0.02):
    """Prices move but ranks never change (caps decades apart)."""
    base = 10.0 ** np.arange(5, 0, -1)
    caps = base * np.exp(rng.normal(0.0, scale, size=(n_dates, 5)))
    return make_panel(caps)


def swap_panel():
    """One m=2/m=3 crossover: B and C trade places."""
    return make_panel([[4.0, 2.0, 1.0], [4.0, 1.0, 2.0]])


class TestTanakaIncrement:
    def test_no_sign_change(self):
        assert rf.tanaka_increment(0.3, 0.1) == 0.0

    def test_sign_flip_returns_terminal_magnitude(self):
        assert math.isclose(rf.tanaka_increment(0.2, -0.3), 0.3, rel_tol=1e-15)

    def test_zero_start_uses_negative_sign(self):
        assert rf.tanaka_increment(0.0, 0.5) == 0.5
        assert rf.tanaka_increment(0.0, -0.5) == 0.0

    def test_non_finite_rejected(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError):
                rf.tanaka_increment(bad, 0.1)
            with pytest.raises(ValueError):
                rf.tanaka_increment(0.1, bad)

    @given(finite, finite)
    @settings(max_examples=300)
    def test_nonnegative(self, a, b):
        assert rf.tanaka_increment(a, b) >= 0.0


class TestTanakaPath:
    def test_no_crossovers_stays_zero(self):
        panel = stable_rank_panel(np.random.default_rng(1))
        for m in (1, 2, 3, 4):
            path = rf.localtime_tanaka(panel, m)
            assert np.all(path.cumulative == 0.0)

    def test_single_swap_increment(self):
        path = rf.localtime_tanaka(swap_panel(), 2)
        # pre-gap log 2 flips to -log 2: increment is the reversed gap
        assert math.isclose(path.terminal, math.log(2), rel_tol=1e-14)
        assert path.cumulative[0] == 0.0

    def test_swap_invisible_at_other_boundary(self):
        path = rf.localtime_tanaka(swap_panel(), 1)
        assert np.all(path.cumulative == 0.0)

    def test_matches_crossover_accounting_oracle(self):
        cfg = rf.SimConfig(n_stocks=10, n_periods=60, dt=1 / 12, gamma=0.0, xi=0.4, seed=14)
        panel = rf.simulate(cfg)
        for m in (1, 3, 5, 9):
            path = rf.localtime_tanaka(panel, m)
            cum = [0.0]
            for t0, t1 in zip(panel.dates, panel.dates[1:]):
                order = rf.rank(panel, t0).order
                i_star, j_star = order[m - 1], order[m]
                w0 = dict(zip(*(lambda v: (v.stocks, v.weights))(rf.market_weights(panel, t0))))
                w1 = dict(zip(*(lambda v: (v.stocks, v.weights))(rf.market_weights(panel, t1))))
                g0 = math.log(w0[i_star]) - math.log(w0[j_star])
                g1 = math.log(w1[i_star]) - math.log(w1[j_star])
                inc = max(-g1, 0.0) if g0 > 0 else max(g1, 0.0)
                cum.append(cum[-1] + inc)
            assert np.max(np.abs(path.cumulative - np.array(cum))) <= 1e-12


class TestPortfolioPath:
    def test_constant_panel_zero(self):
        panel = make_panel(np.tile([4.0, 2.0, 1.0], (6, 1)))
        for k in (1, 2):
            assert np.all(rf.localtime_portfolio(panel, k).cumulative == 0.0)

    def test_no_crossover_with_price_changes_zero(self):
        panel = make_panel([[4.0, 2.0, 1.0], [4.0, 3.0, 1.0]])
        path = rf.localtime_portfolio(panel, 1)
        assert abs(path.terminal) <= 1e-12

    def test_no_crossover_many_periods_zero(self):
        panel = stable_rank_panel(np.random.default_rng(2))
        for k in (1, 2, 3, 4):
            assert np.max(np.abs(rf.localtime_portfolio(panel, k).cumulative)) <= 1e-12

    def test_single_swap_hand_formula(self):
        # prefactor 2*(6/7)/(2/7) = 6; held top-2 caps shrink 6 -> 5 while the
        # reconstituted top-2 weight sum and total cap are unchanged
        path = rf.localtime_portfolio(swap_panel(), 2)
        assert math.isclose(path.terminal, 6 * math.log(6 / 5), rel_tol=1e-12)

    def test_nondecreasing_on_gbm(self):
        for seed in range(8):
            cfg = rf.SimConfig(n_stocks=12, n_periods=48, dt=1 / 12, gamma=0.0, xi=0.35, seed=seed)
            panel = rf.simulate(cfg)
            for path in rf.localtime_profile(panel, range(1, 12)):
                assert np.all(np.diff(path.cumulative) >= 0.0)
                assert path.cumulative[0] == 0.0


class TestProfile:
    def test_constant_panel_zero_surface(self):
        panel = make_panel(np.tile([5.0, 4.0, 3.0, 2.0], (5, 1)))
        paths = rf.localtime_profile(panel, [1, 2, 3])
        assert all(np.all(p.cumulative == 0.0) for p in paths)

    def test_higher_volatility_raises_local_time(self):
        # paired draws over 100 seeds; one-sided binomial at 99% needs >= 63 wins
        wins = 0
        for seed in range(100):
            lo = rf.simulate(rf.SimConfig(n_stocks=8, n_periods=36, dt=1 / 12, xi=0.2, seed=seed))
            hi = rf.simulate(rf.SimConfig(n_stocks=8, n_periods=36, dt=1 / 12, xi=0.4, seed=seed))
            t_lo = sum(p.terminal for p in rf.localtime_profile(lo, range(1, 8)))
            t_hi = sum(p.terminal for p in rf.localtime_profile(hi, range(1, 8)))
            wins += t_hi > t_lo
        assert wins >= 63

    def test_dominant_top_crosses_less_than_bottom(self):
        initial = np.array([1000.0] + [1.0] * 9)
        cfg = rf.SimConfig(n_stocks=10, n_periods=120, dt=1 / 12, xi=0.3,
                           initial_caps=initial, seed=3)
        panel = rf.simulate(cfg)

        def crossings(m):
            count = 0
            for t0, t1 in zip(panel.dates, panel.dates[1:]):
                top0 = set(rf.rank(panel, t0).order[:m])
                top1 = set(rf.rank(panel, t1).order[:m])
                count += top0 != top1
            return count

        assert crossings(9) > crossings(1)
        paths = {p.boundary: p for p in rf.localtime_profile(panel, [1, 9], method="tanaka")}
        assert paths[9].terminal > paths[1].terminal

    def test_boundary_validation(self):
        panel = make_panel([[4.0, 2.0], [4.0, 2.0]])
        with pytest.raises(ValueError):
            rf.localtime_profile(panel, [])
        with pytest.raises(ValueError):
            rf.localtime_profile(panel, [0])
        with pytest.raises(ValueError):
            rf.localtime_profile(panel, [1], method="other")

    def test_shrunk_universe_recorded_as_gap(self):
        caps = np.array([
            [8.0, 4.0, 2.0],
            [8.0, 4.0, np.nan],  # intersection of periods 1-2 has 2 stocks
            [8.0, 4.0, 2.0],
        ])
        panel = make_panel(caps)
        path = rf.localtime_tanaka(panel, 2)
        assert len(path.gaps) == 2  # both periods touching the delisting
        assert np.all(path.cumulative == 0.0)


class TestSerialization:
    def test_long_and_matrix_csv(self, tmp_path):
        panel = random_panel(np.random.default_rng(4), 6, 5)
        paths = rf.localtime_profile(panel, [1, 2, 3])
        long_csv = tmp_path / "paths.csv"
        rf.paths_to_csv(paths, long_csv)
        lines = long_csv.read_text().strip().splitlines()
        assert lines[0] == "date,boundary_m,cumulative_local_time"
        assert len(lines) == 1 + 3 * panel.n_dates
        matrix_csv = tmp_path / "surface.csv"
        rf.profile_to_matrix_csv(paths, matrix_csv)
        rows = matrix_csv.read_text().strip().splitlines()
        assert len(rows) == 4 and rows[0].startswith("boundary_m,2000-01-01")
