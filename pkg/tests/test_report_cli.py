import json
import math
from pathlib import Path

import numpy as np
import pytest

import rankfact as rf
from rankfact.cli import main
from rankfact.report import build_table_from_files, table_to_csv
from util import make_panel, monthly_dates


def hand_panel():
    """Three dates: one B/C swap, then pure growth of A."""
    return make_panel([[10, 8, 6, 4], [10, 6, 8, 4], [12, 6, 8, 4]])


def custom_config(out_dir, **kw):
    defaults = dict(
        out_dir=Path(out_dir),
        schemes=("custom",),
        custom_ranges=(("Large", 1, 2), ("Small", 3, 4)),
        samplings=(),
        rolling_window=0,
        boundaries=(1, 2),
    )
    defaults.update(kw)
    return rf.RunConfig(**defaults)


class TestRunDecomposition:
    def test_constant_panel_all_zero(self, tmp_path):
        panel = make_panel(np.tile([10.0, 8.0, 6.0, 4.0], (4, 1)))
        result = rf.run_decomposition(custom_config(tmp_path), panel)
        for series in result.series.values():
            for d in series.decompositions:
                assert d.total == d.distributional == d.rank == d.dividend == 0.0
        for (subject, component, sampling), (mean, std, n) in result.tables["custom"].cells.items():
            assert mean == 0.0 and std == 0.0 and n == 3

    def test_hand_panel_table_cells(self, tmp_path):
        result = rf.run_decomposition(custom_config(tmp_path), hand_panel())
        # Large vs market, by hand: period 1 has the B/C swap (pure rank move),
        # period 2 is pure growth of A (pure distributional move)
        p1_total = math.log(16 / 18)
        p2_total = math.log(20 / 18) - math.log(30 / 28)
        expect_mean = 12 * (p1_total + p2_total) / 2
        expect_std = math.sqrt(12) * np.std([p1_total, p2_total], ddof=1)
        mean, std, n = result.tables["custom"].cells[("Large", "total", "monthly")]
        assert n == 2
        assert math.isclose(mean, expect_mean, abs_tol=1e-4)  # cells come from 6dp CSVs
        assert math.isclose(std, expect_std, abs_tol=1e-4)
        rank_mean = result.tables["custom"].cells[("Large", "rank", "monthly")][0]
        assert math.isclose(rank_mean, 12 * p1_total / 2, abs_tol=1e-4)
        dist_mean = result.tables["custom"].cells[("Large", "distributional", "monthly")][0]
        assert math.isclose(dist_mean, 12 * p2_total / 2, abs_tol=1e-4)

    def test_pair_series_equals_difference_of_vs_market(self, tmp_path):
        rng = np.random.default_rng(15)
        panel = make_panel(np.exp(rng.normal(0, 0.5, size=(8, 6))),
                           stocks=[f"S{k}" for k in range(6)])
        config = custom_config(
            tmp_path, custom_ranges=(("Large", 1, 3), ("Small", 4, 6)), samplings=("quarterly",)
        )
        rf.run_decomposition(config, panel)
        series_dir = Path(tmp_path) / "scheme_custom" / "series"

        def load(name):
            payload = json.loads((series_dir / name).read_text())
            return payload["periods"]

        small = load("Small__monthly.json")
        large = load("Large__monthly.json")
        pair = load("Small_vs_Large__monthly.json")
        for s, l, p in zip(small, large, pair):
            for field in ("total", "distributional", "rank", "dividend"):
                assert abs(p[field] - (s[field] - l[field])) <= 1e-12

    def test_table_self_consistent_under_recomputation(self, tmp_path):
        rng = np.random.default_rng(25)
        panel = make_panel(np.exp(rng.normal(0, 0.4, size=(30, 8))),
                           stocks=[f"S{k}" for k in range(8)])
        config = custom_config(
            tmp_path, custom_ranges=(("Large", 1, 4), ("Small", 5, 8)),
            samplings=("quarterly", "semi-annual", "annual"), rolling_window=6,
        )
        result = rf.run_decomposition(config, panel)
        scheme_dir = Path(tmp_path) / "scheme_custom"
        recomputed = build_table_from_files(scheme_dir, "custom")
        assert recomputed == result.tables["custom"]
        rewritten = scheme_dir / "tables" / "again.csv"
        table_to_csv(recomputed, rewritten)
        assert rewritten.read_bytes() == (scheme_dir / "tables" / "aggregate.csv").read_bytes()

    def test_decimated_and_rolling_files_emitted(self, tmp_path):
        rng = np.random.default_rng(35)
        panel = make_panel(np.exp(rng.normal(0, 0.3, size=(27, 4))))
        config = custom_config(tmp_path, samplings=("quarterly", "annual"), rolling_window=12)
        rf.run_decomposition(config, panel)
        series_dir = Path(tmp_path) / "scheme_custom" / "series"
        assert (series_dir / "Large__quarterly.csv").exists()
        assert (series_dir / "Large__annual.csv").exists()
        assert (Path(tmp_path) / "scheme_custom" / "rolling" / "Large__rolling12-monthly.csv").exists()

    def test_value_portfolio_auto_included(self, tmp_path):
        rng = np.random.default_rng(45)
        caps = np.exp(rng.normal(0, 0.4, size=(5, 6)))
        bp = np.abs(rng.normal(1, 0.3, size=(5, 6)))
        panel = make_panel(caps, attributes={"book_to_price": bp},
                           stocks=[f"S{k}" for k in range(6)])
        config = custom_config(
            tmp_path, custom_ranges=(("Large", 1, 3), ("Small", 4, 6)), value_size=2
        )
        result = rf.run_decomposition(config, panel)
        assert ("custom", "Value", "monthly") in result.series
        assert ("custom", "Small/Value", "monthly") in result.series

    def test_value_portfolio_skipped_without_attribute(self, tmp_path):
        result = rf.run_decomposition(custom_config(tmp_path), hand_panel())
        assert all("Value" not in key[1] for key in result.series)
        assert any("skipped" in note for note in result.notes)

    def test_partition_exceeding_universe_raises_coverage(self, tmp_path):
        config = custom_config(tmp_path, custom_ranges=(("Large", 1, 9),))
        with pytest.raises(rf.CoverageError):
            rf.run_decomposition(config, hand_panel())

    def test_deterministic_output_bytes(self, tmp_path):
        rng = np.random.default_rng(55)
        caps = np.exp(rng.normal(0, 0.4, size=(15, 6)))
        panel = make_panel(caps, stocks=[f"S{k}" for k in range(6)])
        outs = []
        for sub in ("one", "two"):
            config = custom_config(
                tmp_path / sub, custom_ranges=(("Large", 1, 3), ("Small", 4, 6)),
                samplings=("quarterly",), rolling_window=6,
            )
            rf.run_decomposition(config, panel)
            rf.run_localtimes(config, panel)
            outs.append(tmp_path / sub)
        files1 = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()

    def test_gbm_null_panel_small_beats_large(self, tmp_path):
        # equal growth rates: any Small/Large edge is mechanical; the pair's
        # cumulative total must equal the null-experiment spread for the
        # same caps
        from rankfact.simulate import _cumulative_size_spread

        i = np.arange(1, 21)
        cfg = rf.SimConfig(n_stocks=20, n_periods=240, dt=1 / 12, gamma=0.04,
                           xi=0.35, initial_caps=i**-2.0, seed=6)
        panel = rf.simulate(cfg)
        config = custom_config(
            tmp_path, custom_ranges=(("Large", 1, 10), ("Small", 11, 20))
        )
        result = rf.run_decomposition(config, panel)
        pair = result.series[("custom", "Small/Large", "monthly")]
        totals = pair.totals()
        assert totals.mean() > 0
        assert abs(totals.sum() - _cumulative_size_spread(panel.caps, 10)) <= 1e-10

    def test_localtime_emission_matches_hand_example(self, tmp_path):
        swap = make_panel([[4.0, 2.0, 1.0], [4.0, 1.0, 2.0]])
        config = custom_config(tmp_path, boundaries=(2,), localtime_method="tanaka")
        paths = rf.run_localtimes(config, swap)
        assert math.isclose(paths[0].terminal, math.log(2), rel_tol=1e-12)
        emitted = (Path(tmp_path) / "localtime" / "boundary_0002.csv").read_text().strip()
        assert emitted.splitlines()[-1] == f"2000-02-01,2,{math.log(2):.6f}"

    def test_manifest_lists_artifacts_and_hash(self, tmp_path):
        config = custom_config(tmp_path)
        result = rf.run_decomposition(config, hand_panel())
        rf.run_localtimes(config, hand_panel())
        manifest = json.loads((Path(tmp_path) / "manifest.json").read_text())
        assert manifest["config_hash"]
        listed = set(manifest["artifacts"])
        for art in result.artifacts:
            assert str(art.relative_to(tmp_path)) in listed
        assert "localtime/surface.csv" in listed
        for rel in listed:
            assert (Path(tmp_path) / rel).exists()


class TestEmitRolling:
    def series_of(self, totals):
        dates = monthly_dates(len(totals) + 1)
        decs = tuple(
            rf.ComponentDecomposition(dates[i], dates[i + 1], "P", totals[i],
                                      totals[i] / 3, totals[i] - totals[i] / 3, 0.0)
            for i in range(len(totals))
        )
        return rf.ComponentSeries(subject="P", decompositions=decs)

    def test_constant_window(self):
        c = 0.02
        rolled = rf.emit_rolling(self.series_of([c] * 24), 12)
        assert len(rolled) == 13
        assert all(math.isclose(d.total, 12 * c, rel_tol=1e-12) for d in rolled.decompositions)

    def test_window_one_is_identity(self):
        series = self.series_of([0.1, -0.2, 0.3])
        rolled = rf.emit_rolling(series, 1)
        assert [d.total for d in rolled.decompositions] == [0.1, -0.2, 0.3]

    def test_matches_brute_force_windows(self):
        rng = np.random.default_rng(65)
        totals = list(rng.normal(0, 0.05, 24))
        rolled = rf.emit_rolling(self.series_of(totals), 12)
        expected = np.convolve(totals, np.ones(12), mode="valid")
        got = np.array([d.total for d in rolled.decompositions])
        assert np.max(np.abs(got - expected)) <= 1e-12

    def test_window_too_long(self):
        with pytest.raises(ValueError, match="longer"):
            rf.emit_rolling(self.series_of([0.1, 0.2]), 3)


class TestRunConfigFile:
    def test_parse_full_config(self, tmp_path):
        cfg_text = (
            "panel = panel.csv\n"
            "out_dir = out\n"
            "schemes = custom\n"
            "custom_ranges = Large:1-3, Small:4-6\n"
            "value_size = 2\n"
            "include_value = false\n"
            "samplings = quarterly, annual\n"
            "rolling_window = 6\n"
            "boundaries = 1, 2, 3\n"
            "localtime_method = tanaka\n"
        )
        path = tmp_path / "run.cfg"
        path.write_text(cfg_text)
        config = rf.RunConfig.from_file(path)
        assert config.schemes == ("custom",)
        assert config.custom_ranges == (("Large", 1, 3), ("Small", 4, 6))
        assert config.samplings == ("quarterly", "annual")
        assert config.boundaries == (1, 2, 3)
        assert config.localtime_method == "tanaka"
        assert config.include_value is False
        assert len(config.config_hash) == 64

    def test_out_dir_override(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("panel = p.csv\nout_dir = a\n")
        config = rf.RunConfig.from_file(path, out_dir=tmp_path / "b")
        assert config.out_dir == tmp_path / "b"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("panel = p.csv\nmystery = 1\n")
        with pytest.raises(rf.PanelParseError, match="mystery"):
            rf.RunConfig.from_file(path)

    def test_bad_custom_range(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("panel = p.csv\nschemes = custom\ncustom_ranges = Large|1-3\n")
        with pytest.raises(rf.PanelParseError, match="custom range"):
            rf.RunConfig.from_file(path)

    def test_overlapping_ranges_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            rf.RunConfig(schemes=("custom",),
                         custom_ranges=(("Large", 1, 5), ("Small", 4, 8)))

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            rf.RunConfig(schemes=("25/75",))

    def test_named_schemes_resolve(self):
        config = rf.RunConfig()
        assert config.resolve_ranges("50/100/250")[0] == ("Large", 1, 50)
        assert config.resolve_ranges("10/40/165")[2] == ("Small", 41, 165)


class TestCli:
    def write_panel(self, tmp_path):
        rng = np.random.default_rng(75)
        caps = np.exp(rng.normal(0, 0.4, size=(25, 30)))
        panel = make_panel(caps, stocks=[f"S{k:02d}" for k in range(30)])
        path = tmp_path / "panel.csv"
        rf.save_panel(panel, path)
        return path

    def run_cfg_text(self, panel_path, out_dir):
        return (
            f"panel = {panel_path}\n"
            f"out_dir = {out_dir}\n"
            "schemes = custom\n"
            "custom_ranges = Large:1-5, Mid:6-12, Small:13-30\n"
            "samplings = quarterly, semi-annual, annual\n"
            "rolling_window = 12\n"
            "boundaries = 5, 12\n"
        )

    def test_validate_ok(self, tmp_path, capsys):
        panel_path = self.write_panel(tmp_path)
        assert main(["validate", str(panel_path)]) == 0
        out = capsys.readouterr().out
        assert "25 dates" in out and "30 stocks" in out

    def test_validate_with_schema_mapping(self, tmp_path, capsys):
        f = tmp_path / "mapped.csv"
        f.write_text("dt,id,mcap\n2000-01-01,A,4\n2000-01-01,B,2\n")
        assert main(["validate", str(f), "--map", "date=dt",
                     "--map", "stock_id=id", "--map", "market_cap=mcap"]) == 0
        assert "2 stocks" in capsys.readouterr().out

    def test_validate_bad_file_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,stock_id,market_cap\n2000-01-01,A,zero\n")
        assert main(["validate", str(bad)]) == 1
        assert "row 2" in capsys.readouterr().err

    def test_validate_missing_file_exits_2(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.csv")]) == 2

    def test_simulate_then_report_pipeline(self, tmp_path, capsys):
        sim_cfg = tmp_path / "sim.cfg"
        sim_cfg.write_text(
            "n_stocks = 30\nn_periods = 24\ndt = 0.08333333333333333\n"
            "gamma = 0.05\nsigma = 0.3\nseed = 42\n"
        )
        panel_csv = tmp_path / "sim_panel.csv"
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(panel_csv)]) == 0
        assert main(["validate", str(panel_csv)]) == 0

        run_cfg = tmp_path / "run.cfg"
        out_dir = tmp_path / "out"
        run_cfg.write_text(self.run_cfg_text(panel_csv, out_dir))
        assert main(["report", "--config", str(run_cfg)]) == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert "localtime/surface.csv" in manifest["artifacts"]
        assert (out_dir / "scheme_custom" / "tables" / "aggregate.csv").exists()
        assert (out_dir / "scheme_custom" / "tables" / "aggregate.txt").exists()

    def test_decompose_and_localtime_subcommands(self, tmp_path):
        panel_path = self.write_panel(tmp_path)
        run_cfg = tmp_path / "run.cfg"
        run_cfg.write_text(self.run_cfg_text(panel_path, tmp_path / "outA"))
        assert main(["decompose", "--config", str(run_cfg)]) == 0
        assert main(["localtime", "--config", str(run_cfg),
                     "--out-dir", str(tmp_path / "outB")]) == 0
        assert (tmp_path / "outA" / "scheme_custom").is_dir()
        assert (tmp_path / "outB" / "localtime" / "boundary_0005.csv").exists()

    def test_coverage_error_exits_2(self, tmp_path):
        panel_path = self.write_panel(tmp_path)
        run_cfg = tmp_path / "run.cfg"
        run_cfg.write_text(
            f"panel = {panel_path}\nout_dir = {tmp_path / 'out'}\n"
            "schemes = custom\ncustom_ranges = Large:1-500\n"
        )
        assert main(["decompose", "--config", str(run_cfg)]) == 2

    def test_bad_config_exits_1(self, tmp_path):
        run_cfg = tmp_path / "run.cfg"
        run_cfg.write_text("panel = p.csv\nnot a key value line\n")
        assert main(["decompose", "--config", str(run_cfg)]) == 1
