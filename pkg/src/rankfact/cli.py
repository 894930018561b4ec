"""Command-line interface.

Exit codes: 0 success, 1 validation/parse error, 2 runtime or coverage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import CapabilityError, CoverageError, PanelParseError, PanelValidationError
from .kvconfig import parse_kv_file
from .panel import MarketPanel, load_exclusions, load_panel, save_panel
from .report import RunConfig, run_decomposition, run_localtimes, run_report
from .simulate import SimConfig, simulate


def _schema_from_args(pairs: list[str] | None) -> dict[str, str] | None:
    if not pairs:
        return None
    schema = {}
    for pair in pairs:
        if "=" not in pair:
            raise PanelParseError(f"bad --map {pair!r} (want canonical=column)")
        key, col = pair.split("=", 1)
        schema[key.strip()] = col.strip()
    return schema


def _load_from_args(args: argparse.Namespace) -> MarketPanel:
    exclusions = load_exclusions(args.exclusions) if args.exclusions else None
    return load_panel(args.panel, schema=_schema_from_args(args.map), exclusions=exclusions)


def _cmd_validate(args: argparse.Namespace) -> int:
    panel = _load_from_args(args)
    present = ~np.isnan(panel.caps)
    print(f"panel OK: {panel.n_dates} dates ({panel.dates[0]} .. {panel.dates[-1]}), "
          f"{panel.n_stocks} stocks")
    print(f"presence: {present.sum()} of {present.size} cells "
          f"({100.0 * present.mean():.1f}%), "
          f"universe per date min={present.sum(axis=1).min()} max={present.sum(axis=1).max()}")
    print(f"dividend rates: {'yes' if panel.dividend_rates is not None else 'no'}")
    attrs = ", ".join(sorted(panel.attributes)) or "none"
    print(f"attributes: {attrs}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = SimConfig.from_mapping(parse_kv_file(args.config))
    panel = simulate(config)
    save_panel(panel, args.out)
    print(f"wrote {panel.n_dates} x {panel.n_stocks} simulated panel to {args.out}")
    return 0


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.from_file(args.config, out_dir=args.out_dir)


def _cmd_decompose(args: argparse.Namespace) -> int:
    result = run_decomposition(_run_config(args))
    print(f"emitted {len(result.artifacts)} artifact(s); "
          f"tables for scheme(s): {', '.join(result.tables)}")
    return 0


def _cmd_localtime(args: argparse.Namespace) -> int:
    config = _run_config(args)
    paths = run_localtimes(config)
    for p in paths:
        print(f"boundary {p.boundary}: terminal local time {p.terminal:.6f} "
              f"({len(p.gaps)} skipped period(s))")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    config = _run_config(args)
    result = run_report(config)
    print(f"report complete under {config.out_dir} "
          f"({len(result.tables)} table(s) + local-time surfaces)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankfact",
        description="Decompose ranked-market equity returns into distributional, "
                    "rank and dividend components; estimate rank-boundary local "
                    "times; simulate random-price null markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and validate a panel CSV")
    p.add_argument("panel")
    p.add_argument("--map", action="append", metavar="CANONICAL=COLUMN",
                   help="map a canonical column name onto the file's header")
    p.add_argument("--exclusions", help="CSV of stock_id,start_date,end_date rows to drop")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="simulate a synthetic panel")
    p.add_argument("--config", required=True, help="key-value simulation config")
    p.add_argument("--out", required=True, help="output panel CSV path")
    p.set_defaults(func=_cmd_simulate)

    for name, helptext, func in (
        ("decompose", "run the component decomposition pipeline", _cmd_decompose),
        ("localtime", "estimate local times at the configured boundaries", _cmd_localtime),
        ("report", "full pipeline: decomposition + local times", _cmd_report),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="key-value run config")
        p.add_argument("--out-dir", default=None, help="override the config's out_dir")
        p.set_defaults(func=func)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PanelParseError, PanelValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CoverageError, CapabilityError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
