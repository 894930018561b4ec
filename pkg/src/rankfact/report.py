"""Pipeline orchestration: partition the market, decompose, decimate, tabulate,
and emit plot-ready CSV/JSON artifacts plus local-time surfaces.

Aggregate tables are always computed by reading back the emitted series CSVs,
so recomputing any cell from the published artifacts reproduces the table
exactly. All outputs are deterministic functions of (panel, config); the
manifest lists every artifact together with the config hash.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PanelParseError, PanelValidationError
from .factorization import (
    PERIODS_PER_YEAR,
    ComponentDecomposition,
    ComponentSeries,
    PortfolioSpec,
    decimate,
    decompose_portfolio_series,
    series_from_csv,
    series_to_csv,
    series_to_json,
)
from .kvconfig import parse_kv_file
from .localtime import PORTFOLIO, TANAKA, LocalTimePath, localtime_profile, paths_to_csv, profile_to_matrix_csv
from .panel import MarketPanel, load_panel

PARTITION_SCHEMES: dict[str, tuple[tuple[str, int, int], ...]] = {
    "50/100/250": (("Large", 1, 50), ("Mid", 51, 100), ("Small", 101, 250)),
    "10/40/165": (("Large", 1, 10), ("Mid", 11, 40), ("Small", 41, 165)),
}

TABLE_COMPONENTS = ("total", "distributional", "rank", "dividend")

ANNUALIZATION_NOTE = (
    "annualized log-return units: mean = per-period mean x periods/year, "
    "std = per-period std (ddof=1) x sqrt(periods/year); "
    "the total column includes the dividend component"
)


@dataclass(frozen=True)
class RunConfig:
    """Pipeline settings (see README for the config-file keys)."""

    panel_path: Path | None = None
    out_dir: Path = Path("out")
    schemes: tuple[str, ...] = ("50/100/250", "10/40/165")
    custom_ranges: tuple[tuple[str, int, int], ...] = ()
    value_size: int = 50
    value_attribute: str = "book_to_price"
    include_value: bool | None = None
    samplings: tuple[str, ...] = ("quarterly", "semi-annual", "annual")
    rolling_window: int = 12
    boundaries: tuple[int, ...] = (10, 50, 100)
    localtime_method: str = PORTFOLIO
    config_hash: str | None = None

    def __post_init__(self) -> None:
        for scheme in self.schemes:
            ranges = self.resolve_ranges(scheme)
            ordered = sorted(ranges, key=lambda r: r[1])
            for (_, _, prev_hi), (name, lo, _) in zip(ordered, ordered[1:]):
                if lo <= prev_hi:
                    raise ValueError(f"scheme {scheme!r}: range {name!r} overlaps the previous one")
        if self.value_size < 1:
            raise ValueError("value_size must be >= 1")
        for s in self.samplings:
            if s not in PERIODS_PER_YEAR or s == "monthly":
                raise ValueError(f"bad decimation target {s!r}")
        if self.rolling_window < 0:
            raise ValueError("rolling_window must be >= 0")
        if any(b < 1 for b in self.boundaries):
            raise ValueError("boundaries must be >= 1")
        if self.localtime_method not in (TANAKA, PORTFOLIO):
            raise ValueError(f"unknown localtime method {self.localtime_method!r}")

    def resolve_ranges(self, scheme: str) -> tuple[tuple[str, int, int], ...]:
        if scheme in PARTITION_SCHEMES:
            return PARTITION_SCHEMES[scheme]
        if scheme == "custom":
            if not self.custom_ranges:
                raise ValueError("scheme 'custom' needs custom_ranges")
            return self.custom_ranges
        raise ValueError(
            f"unknown scheme {scheme!r}; named schemes: {', '.join(PARTITION_SCHEMES)}"
        )

    @classmethod
    def from_file(cls, path: str | Path, out_dir: str | Path | None = None) -> "RunConfig":
        path = Path(path)
        raw = path.read_bytes()
        data = parse_kv_file(path)
        known = {
            "panel", "out_dir", "schemes", "custom_ranges", "value_size",
            "value_attribute", "include_value", "samplings", "rolling_window",
            "boundaries", "localtime_method",
        }
        unknown = set(data) - known
        if unknown:
            raise PanelParseError(f"{path}: unknown key(s): {', '.join(sorted(unknown))}")

        def as_list(value) -> list:
            return value if isinstance(value, list) else [value]

        kwargs: dict = {"config_hash": hashlib.sha256(raw).hexdigest()}
        if "panel" in data:
            kwargs["panel_path"] = Path(str(data["panel"]))
        if out_dir is not None:
            kwargs["out_dir"] = Path(out_dir)
        elif "out_dir" in data:
            kwargs["out_dir"] = Path(str(data["out_dir"]))
        if "schemes" in data:
            kwargs["schemes"] = tuple(str(s) for s in as_list(data["schemes"]))
        if "custom_ranges" in data:
            ranges = []
            for item in as_list(data["custom_ranges"]):
                try:
                    name, span = str(item).split(":")
                    lo, hi = span.split("-")
                    ranges.append((name.strip(), int(lo), int(hi)))
                except ValueError:
                    raise PanelParseError(
                        f"{path}: bad custom range {item!r} (want Name:lo-hi)"
                    ) from None
            kwargs["custom_ranges"] = tuple(ranges)
        for key, cast in (
            ("value_size", int), ("value_attribute", str),
            ("rolling_window", int), ("localtime_method", str),
        ):
            if key in data:
                kwargs[key] = cast(data[key])
        if kwargs.get("localtime_method") == "portfolio":
            kwargs["localtime_method"] = PORTFOLIO
        if "include_value" in data:
            if not isinstance(data["include_value"], bool):
                raise PanelParseError(f"{path}: include_value must be true/false")
            kwargs["include_value"] = data["include_value"]
        if "samplings" in data:
            kwargs["samplings"] = tuple(str(s) for s in as_list(data["samplings"]))
        if "boundaries" in data:
            kwargs["boundaries"] = tuple(int(b) for b in as_list(data["boundaries"]))
        return cls(**kwargs)


# -- rolling sums --------------------------------------------------------------


def emit_rolling(series: ComponentSeries, window: int) -> ComponentSeries:
    """Trailing-window sums of every component, aligned to the window end."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > len(series):
        raise ValueError(f"window {window} longer than series ({len(series)} periods)")
    decs = series.decompositions
    out = []
    for j in range(window - 1, len(decs)):
        chunk = decs[j - window + 1 : j + 1]
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
        subject=series.subject, decompositions=tuple(out),
        sampling=f"rolling{window}-{series.sampling}",
    )


# -- aggregate tables ------------------------------------------------------------


@dataclass(frozen=True)
class AggregateTable:
    """Annualized mean/std cells keyed by (subject, component, sampling)."""

    scheme: str
    cells: Mapping[tuple[str, str, str], tuple[float, float, int]]

    def subjects(self) -> list[str]:
        return sorted({k[0] for k in self.cells})

    def samplings(self) -> list[str]:
        present = {k[2] for k in self.cells}
        return [s for s in PERIODS_PER_YEAR if s in present]


def annualize(values: np.ndarray, sampling: str) -> tuple[float, float, int]:
    ppy = PERIODS_PER_YEAR[sampling]
    return (
        float(values.mean()) * ppy,
        float(values.std(ddof=1)) * math.sqrt(ppy),
        int(values.size),
    )


def _component_values(series: ComponentSeries, component: str) -> np.ndarray:
    if component == "total":
        return series.totals(with_dividends=True)
    return series.component(component)


def build_table_from_files(scheme_dir: Path, scheme: str) -> AggregateTable:
    """Aggregate the emitted series CSVs of one scheme directory into a table.

    Cells with fewer than 2 observations are omitted.
    """
    cells: dict[tuple[str, str, str], tuple[float, float, int]] = {}
    for csv_path in sorted((scheme_dir / "series").glob("*__*.csv")):
        sampling = csv_path.stem.rsplit("__", 1)[1]
        series = series_from_csv(csv_path, sampling=sampling)
        if len(series) < 2:
            continue
        for component in TABLE_COMPONENTS:
            cells[(series.subject, component, sampling)] = annualize(
                _component_values(series, component), sampling
            )
    return AggregateTable(scheme=scheme, cells=dict(sorted(cells.items())))


def table_to_csv(table: AggregateTable, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("subject,component,sampling,annualized_mean,annualized_std,n_periods\n")
        for (subject, component, sampling), (mean, std, n) in sorted(table.cells.items()):
            fh.write(f"{subject},{component},{sampling},{mean:.6f},{std:.6f},{n}\n")


def table_to_text(table: AggregateTable, path: Path) -> None:
    samplings = table.samplings()
    subjects = table.subjects()
    width = max([len(s) for s in subjects] + [8])
    lines = [
        f"# Aggregate components -- scheme {table.scheme}",
        f"# {ANNUALIZATION_NOTE}",
        "",
    ]
    header = f"{'Component':<16}{'Subject':<{width + 2}}" + "".join(
        f"{s:>24}" for s in samplings
    )
    lines.append(header)
    for component in TABLE_COMPONENTS:
        for subject in subjects:
            row = f"{component.capitalize():<16}{subject:<{width + 2}}"
            for sampling in samplings:
                cell = table.cells.get((subject, component, sampling))
                text = "-" if cell is None else f"{cell[0]:.6f} ({cell[1]:.6f})"
                row += f"{text:>24}"
            lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- pipeline ---------------------------------------------------------------------


@dataclass
class DecompositionResult:
    tables: dict[str, AggregateTable]
    series: dict[tuple[str, str, str], ComponentSeries]
    artifacts: list[Path] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _scheme_slug(scheme: str) -> str:
    return "scheme_" + "".join(c if c.isalnum() else "_" for c in scheme)


def _subject_slug(subject: str) -> str:
    return subject.replace("/", "_vs_")


def _build_specs(
    config: RunConfig, scheme: str, panel: MarketPanel
) -> tuple[list[PortfolioSpec], PortfolioSpec | None, str | None]:
    ranges = sorted(config.resolve_ranges(scheme), key=lambda r: r[1])
    specs = [PortfolioSpec.rank_range(name, lo, hi) for name, lo, hi in ranges]
    want_value = config.include_value
    if want_value is None:
        want_value = config.value_attribute in panel.attributes
    note = None
    value_spec = None
    if want_value:
        if config.value_attribute not in panel.attributes:
            raise PanelValidationError(
                f"value portfolio needs panel attribute {config.value_attribute!r}"
            )
        value_spec = PortfolioSpec.rank_range(
            "Value", 1, config.value_size, attribute=config.value_attribute
        )
    else:
        note = f"value portfolio skipped: no {config.value_attribute!r} attribute"
    return specs, value_spec, note


def run_decomposition(config: RunConfig, panel: MarketPanel | None = None) -> DecompositionResult:
    """Decompose every configured partition, emit series (CSV 6dp + JSON full
    precision), decimations, rolling sums and the aggregate tables."""
    if panel is None:
        if config.panel_path is None:
            raise ValueError("config has no panel path and no panel was given")
        panel = load_panel(config.panel_path)
    out = Path(config.out_dir)
    result = DecompositionResult(tables={}, series={})

    def emit(series: ComponentSeries, directory: Path) -> None:
        slug = f"{_subject_slug(series.subject)}__{series.sampling}"
        csv_path = directory / f"{slug}.csv"
        series_to_csv(series, csv_path)
        series_to_json(series, directory / f"{slug}.json")
        result.artifacts += [csv_path, directory / f"{slug}.json"]

    for scheme in config.schemes:
        specs, value_spec, note = _build_specs(config, scheme, panel)
        if note and note not in result.notes:
            result.notes.append(note)
        scheme_dir = out / _scheme_slug(scheme)
        series_dir = scheme_dir / "series"
        series_dir.mkdir(parents=True, exist_ok=True)

        monthly: list[ComponentSeries] = [
            decompose_portfolio_series(panel, spec) for spec in specs
        ]
        if value_spec is not None:
            monthly.append(decompose_portfolio_series(panel, value_spec))
        for i, a in enumerate(specs):
            for b in specs[:i]:
                monthly.append(decompose_portfolio_series(panel, a, benchmark=b))
        if value_spec is not None:
            monthly.append(decompose_portfolio_series(panel, specs[-1], benchmark=value_spec))

        for series in monthly:
            emit(series, series_dir)
            result.series[(scheme, series.subject, "monthly")] = series
            for target in config.samplings:
                if len(series) // (PERIODS_PER_YEAR["monthly"] // PERIODS_PER_YEAR[target]) < 1:
                    continue
                coarse = decimate(series, target)
                emit(coarse, series_dir)
                result.series[(scheme, series.subject, target)] = coarse
            if config.rolling_window and len(series) >= config.rolling_window:
                rolling_dir = scheme_dir / "rolling"
                rolling_dir.mkdir(exist_ok=True)
                emit(emit_rolling(series, config.rolling_window), rolling_dir)

        table = build_table_from_files(scheme_dir, scheme)
        tables_dir = scheme_dir / "tables"
        tables_dir.mkdir(exist_ok=True)
        table_to_csv(table, tables_dir / "aggregate.csv")
        table_to_text(table, tables_dir / "aggregate.txt")
        result.artifacts += [tables_dir / "aggregate.csv", tables_dir / "aggregate.txt"]
        result.tables[scheme] = table

    update_manifest(out, config, result.artifacts, result.notes)
    return result


def run_localtimes(config: RunConfig, panel: MarketPanel | None = None) -> list[LocalTimePath]:
    """Estimate local-time paths at the configured boundaries and emit the
    per-boundary CSVs plus the dense surface matrix."""
    if panel is None:
        if config.panel_path is None:
            raise ValueError("config has no panel path and no panel was given")
        panel = load_panel(config.panel_path)
    out = Path(config.out_dir) / "localtime"
    out.mkdir(parents=True, exist_ok=True)
    paths = localtime_profile(panel, config.boundaries, method=config.localtime_method)
    artifacts = []
    for p in paths:
        f = out / f"boundary_{p.boundary:04d}.csv"
        paths_to_csv([p], f)
        artifacts.append(f)
    surface = out / "surface.csv"
    profile_to_matrix_csv(paths, surface)
    artifacts.append(surface)
    update_manifest(Path(config.out_dir), config, artifacts, [f"localtime method: {config.localtime_method}"])
    return paths


def run_report(config: RunConfig, panel: MarketPanel | None = None) -> DecompositionResult:
    """Full pipeline: decomposition artifacts plus local-time surfaces."""
    if panel is None:
        if config.panel_path is None:
            raise ValueError("config has no panel path and no panel was given")
        panel = load_panel(config.panel_path)
    result = run_decomposition(config, panel)
    run_localtimes(config, panel)
    return result


# -- manifest ---------------------------------------------------------------------


def _settings_dict(config: RunConfig) -> dict:
    return {
        "panel": str(config.panel_path) if config.panel_path else None,
        "schemes": list(config.schemes),
        "custom_ranges": [list(r) for r in config.custom_ranges],
        "value_size": config.value_size,
        "value_attribute": config.value_attribute,
        "samplings": list(config.samplings),
        "rolling_window": config.rolling_window,
        "boundaries": list(config.boundaries),
        "localtime_method": config.localtime_method,
        "annualization": ANNUALIZATION_NOTE,
    }


def update_manifest(
    out_dir: Path, config: RunConfig, new_artifacts: Iterable[Path], notes: Sequence[str] = ()
) -> Path:
    """Write (or merge into) out_dir/manifest.json deterministically."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    artifacts: set[str] = set()
    old_notes: list[str] = []
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text(encoding="utf-8"))
        artifacts.update(old.get("artifacts", []))
        old_notes = old.get("notes", [])
    artifacts.update(str(Path(p).relative_to(out_dir)) for p in new_artifacts)
    config_hash = config.config_hash or hashlib.sha256(
        json.dumps(_settings_dict(config), sort_keys=True).encode()
    ).hexdigest()
    payload = {
        "config_hash": config_hash,
        "settings": _settings_dict(config),
        "artifacts": sorted(artifacts),
        "notes": sorted({*old_notes, *notes}),
    }
    manifest_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path
