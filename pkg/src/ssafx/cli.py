"""Command-line front end: ingest, forecast, backtest, sweep, report.

Runs are driven by a plain key=value config file ('#' starts a comment).
Every run echoes its fully resolved config to the output directory so it
can be reproduced bit-identically. Exit codes: 0 success, 1 pipeline
error, 2 usage/IO error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backtest as bt
from .eigen import JacobiConfig
from .errors import SsafxError
from .nonlinear import TrainConfig
from .quotes import (
    GapPolicy,
    PanelConfig,
    PriceScheme,
    build_panels,
    panel_to_csv,
    parse_quote_csv,
    prices_to_csv,
    smooth_panel,
)
from .ssa import ForecastRule, Mode, describe
from .strategy import ExitRule, StrategyConfig, generate_signals

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    """Bad config file contents; maps to the usage exit code."""


@dataclass
class RunConfig:
    """Resolved run parameters; field names double as config keys."""

    quotes_path: str = ""
    pair_order: tuple[str, ...] = ()
    date_range: str = ""
    timeframe_minutes: int = 1
    price_scheme: str = "ohlc4"
    gap_policy: str = "drop_row"
    pre_average_p: int = 5
    mode: str = "SSA1"
    k: int = 1
    l: int = 1
    n: int = 1
    i: int = 1
    forecast_rule: str = "projector"
    nonlinear: str = "off"
    epsilon: float = 0.001
    epsilon_relative: bool = False
    max_sweeps: int = 100
    refit_interval: int = 1
    calibration_window: int = 256
    epochs: int = 500
    learning_rate: float = 0.1
    l2_penalty: float = 0.0
    entry_threshold: float = 0.0
    exit_rule: str = "reverse_on_opposite"
    spread: float = 0.0
    spread_per_pair: dict = field(default_factory=dict)
    traded_pairs: tuple[str, ...] = ()
    initial_deposit: float = 10_000.0
    leverage: int = 100
    lot_fraction: float = 0.1
    margin_call_level: float = 0.0
    warmup: int = -1  # -1 means: use the model minimum
    seed: int = 0
    output_dir: str = "out"
    sweep_l: tuple[int, ...] = (1, 2, 3, 4)
    sweep_modes: tuple[str, ...] = ("SSA1", "SSA2")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_pairs(raw: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in raw.split(",") if p.strip())


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in raw.split(",") if p.strip())


def _parse_spread_map(raw: str) -> dict:
    out = {}
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        pair, _, value = item.partition(":")
        if not value:
            raise ValueError(f"expected PAIR:spread, got {item!r}")
        out[pair.strip()] = float(value)
    return out


_PARSERS = {
    "quotes_path": str,
    "pair_order": _parse_pairs,
    "date_range": str,
    "timeframe_minutes": int,
    "price_scheme": str,
    "gap_policy": str,
    "pre_average_p": int,
    "mode": str,
    "k": int,
    "l": int,
    "n": int,
    "i": int,
    "forecast_rule": str,
    "nonlinear": str,
    "epsilon": float,
    "epsilon_relative": _parse_bool,
    "max_sweeps": int,
    "refit_interval": int,
    "calibration_window": int,
    "epochs": int,
    "learning_rate": float,
    "l2_penalty": float,
    "entry_threshold": float,
    "exit_rule": str,
    "spread": float,
    "spread_per_pair": _parse_spread_map,
    "traded_pairs": _parse_pairs,
    "initial_deposit": float,
    "leverage": int,
    "lot_fraction": float,
    "margin_call_level": float,
    "warmup": int,
    "seed": int,
    "output_dir": str,
    "sweep_l": _parse_int_list,
    "sweep_modes": _parse_pairs,
}


def load_config(path: str | Path) -> RunConfig:
    """Parse a key=value file into a RunConfig; unknown keys are errors."""
    cfg = RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            setattr(cfg, key, _PARSERS[key](value.strip()))
        except ValueError as exc:
            raise ConfigError(f"{path}:{line_no}: bad value for {key}: {exc}") from exc
    if not cfg.quotes_path:
        raise ConfigError("config must set quotes_path")
    if not cfg.pair_order:
        raise ConfigError("config must set pair_order")
    if not cfg.traded_pairs:
        cfg.traded_pairs = cfg.pair_order
    return cfg


def echo_config(cfg: RunConfig) -> str:
    """Render the resolved config back to parseable key=value text."""
    lines = []
    for name in _PARSERS:
        value = getattr(cfg, name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, dict):
            value = ",".join(f"{k}:{v!r}" for k, v in value.items())
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


def _panel_config(cfg: RunConfig) -> PanelConfig:
    return PanelConfig(
        pair_order=cfg.pair_order,
        timeframe_minutes=cfg.timeframe_minutes,
        pre_average_p=cfg.pre_average_p,
        price_scheme=PriceScheme(cfg.price_scheme.lower()),
        gap_policy=GapPolicy(cfg.gap_policy.lower()),
    )


def _nonlinear_spec(cfg: RunConfig) -> bt.NonlinearSpec | None:
    raw = cfg.nonlinear.strip().lower()
    if raw in ("", "off", "none"):
        return None
    kind, _, rest = raw.partition(":")
    train = TrainConfig(
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        l2_penalty=cfg.l2_penalty,
    )
    if kind == "poly":
        return bt.NonlinearSpec(
            kind="poly",
            degree=int(rest or 2),
            train=train,
            calibration_window=cfg.calibration_window,
        )
    if kind == "mlp":
        parts = [p for p in rest.split(",") if p]
        hidden = int(parts[0]) if parts else 2
        width = int(parts[1]) if len(parts) > 1 else 8
        return bt.NonlinearSpec(
            kind="mlp",
            hidden_layers=hidden,
            width=width,
            train=train,
            calibration_window=cfg.calibration_window,
        )
    raise ConfigError(f"nonlinear must be off, poly:<degree> or mlp:<T>,<width>")


def _model_spec(cfg: RunConfig, mode: str | None = None, l: int | None = None) -> bt.ModelSpec:
    return bt.ModelSpec(
        mode=Mode(mode or cfg.mode.upper()),
        k=cfg.k,
        l=cfg.l if l is None else l,
        shifts=cfg.n,
        depth=cfg.i,
        rule=ForecastRule(cfg.forecast_rule.lower()),
        jacobi=JacobiConfig(
            epsilon=cfg.epsilon,
            max_sweeps=cfg.max_sweeps,
            relative=cfg.epsilon_relative,
        ),
        nonlinear=_nonlinear_spec(cfg),
        refit_interval=cfg.refit_interval,
        seed=cfg.seed,
    )


def _strategy_config(cfg: RunConfig) -> StrategyConfig:
    spreads = {p: cfg.spread for p in cfg.pair_order} if cfg.spread else {}
    spreads.update(cfg.spread_per_pair)
    try:
        rule = ExitRule(cfg.exit_rule.lower())
    except ValueError as exc:
        raise ConfigError(f"unknown exit_rule {cfg.exit_rule!r}") from exc
    return StrategyConfig(
        traded_pairs=cfg.traded_pairs,
        entry_threshold=cfg.entry_threshold,
        exit_rule=rule,
        spread_per_pair=spreads,
    )


def _account_config(cfg: RunConfig) -> bt.AccountConfig:
    return bt.AccountConfig(
        initial_deposit=cfg.initial_deposit,
        leverage=cfg.leverage,
        lot_fraction=cfg.lot_fraction,
        margin_call_level=cfg.margin_call_level,
    )


def _date_filter(bars, cfg: RunConfig):
    if not cfg.date_range:
        return bars
    start_s, _, end_s = cfg.date_range.partition(":")
    try:
        start = int(start_s) if start_s else None
        end = int(end_s) if end_s else None
    except ValueError as exc:
        raise ConfigError(f"date_range must be <start>:<end> minutes: {exc}") from exc
    return [
        b
        for b in bars
        if (start is None or b.timestamp >= start) and (end is None or b.timestamp <= end)
    ]


def _load_panels(cfg: RunConfig):
    try:
        text = Path(cfg.quotes_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read quotes {cfg.quotes_path}: {exc}") from exc
    bars = _date_filter(parse_quote_csv(text), cfg)
    prices, panel = build_panels(bars, _panel_config(cfg))
    smoothed = smooth_panel(panel, cfg.pre_average_p)
    return prices, panel, smoothed


def _resolve_warmup(cfg: RunConfig, forecaster, panel) -> int:
    minimum = forecaster.min_history(panel)
    return minimum if cfg.warmup < 0 else max(cfg.warmup, minimum)


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    logger.debug("wrote %s", path)


# --- commands ----------------------------------------------------------


def cmd_ingest(cfg: RunConfig, out: Path, verbose: bool) -> int:
    prices, panel, smoothed = _load_panels(cfg)
    stats = panel.stats
    _write(out / "panel.csv", panel_to_csv(panel))
    _write(out / "prices.csv", prices_to_csv(prices))
    _write(out / "config_echo.txt", echo_config(cfg))
    print(f"pairs:            {len(panel.pair_order)} ({', '.join(panel.pair_order)})")
    print(f"panel rows:       {panel.rows}")
    print(f"smoothed rows:    {smoothed.rows} (p={cfg.pre_average_p})")
    print(f"time range:       {int(panel.timestamps[0])}..{int(panel.timestamps[-1])}")
    print(f"skipped bars:     {stats.skipped_unknown} (unknown pair)")
    print(f"dropped rows:     {stats.dropped_rows}")
    print(f"carried cells:    {stats.carried_cells}")
    return EXIT_OK


def cmd_forecast(cfg: RunConfig, out: Path, verbose: bool) -> int:
    _, _, smoothed = _load_panels(cfg)
    spec = _model_spec(cfg)
    forecaster = bt.SsaForecaster(spec)
    at = smoothed.rows - 1
    if at < forecaster.min_history(smoothed):
        raise SsafxError(
            f"panel too short: {smoothed.rows} rows, "
            f"model needs {forecaster.min_history(smoothed) + 1}"
        )
    values = forecaster.predict(smoothed, at)
    signals = generate_signals(values, _strategy_config(cfg))
    directions = {s.pair: s.direction.value for s in signals}
    print(f"{'pair':<10}{'forecast':>15}  signal")
    for pair in cfg.pair_order:
        print(
            f"{pair:<10}{values[pair]:>15.3e}  {directions.get(pair, '(not traded)')}"
        )
    if verbose:
        print()
        print(describe(forecaster._model))
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, out: Path, verbose: bool) -> int:
    prices, _, smoothed = _load_panels(cfg)
    spec = _model_spec(cfg)
    forecaster = bt.SsaForecaster(spec)
    warmup = _resolve_warmup(cfg, forecaster, smoothed)
    report = bt.run_backtest(
        smoothed, prices, forecaster, _strategy_config(cfg), _account_config(cfg), warmup
    )
    cells = [bt.SweepCell(mode=spec.mode, l=spec.l, report=report)]
    table = bt.report_text(cells)
    _write(out / "report.txt", table)
    _write(out / "equity.csv", bt.equity_to_csv(report.equity))
    _write(out / "trades.csv", bt.trades_to_csv(report.trades))
    _write(out / "config_echo.txt", echo_config(cfg))
    if forecaster._phi is not None:
        from .nonlinear import save_filter

        _write(out / "filter.txt", save_filter(forecaster._phi))
    print(table, end="")
    if report.partial:
        print(f"RUN STOPPED: equity floor reached at {report.bankrupt_time}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, verbose: bool) -> int:
    prices, _, smoothed = _load_panels(cfg)
    base = _model_spec(cfg)
    warmup = _resolve_warmup(cfg, bt.SsaForecaster(base), smoothed)
    cells = bt.run_sweep(
        smoothed,
        prices,
        base,
        _strategy_config(cfg),
        _account_config(cfg),
        warmup,
        l_values=cfg.sweep_l,
        modes=tuple(Mode(m.upper()) for m in cfg.sweep_modes),
    )
    table = bt.report_text(cells)
    _write(out / "report.txt", table)
    _write(out / "sweep.csv", bt.sweep_to_csv(cells))
    for cell in cells:
        tag = f"{cell.mode.value}_l{cell.l}"
        _write(out / f"equity_{tag}.csv", bt.equity_to_csv(cell.report.equity))
        _write(out / f"trades_{tag}.csv", bt.trades_to_csv(cell.report.trades))
    _write(out / "config_echo.txt", echo_config(cfg))
    print(table, end="")
    return EXIT_OK


def _load_equity_csv(path: Path) -> bt.EquityCurve:
    rows = [ln.split(",") for ln in path.read_text().splitlines()[1:] if ln]
    return bt.EquityCurve(
        timestamps=np.array([int(r[0]) for r in rows], dtype=np.int64),
        equity=np.array([float(r[1]) for r in rows]),
    )


def _load_trades_csv(path: Path) -> tuple:
    from .strategy import Direction

    trades = []
    for ln in path.read_text().splitlines()[1:]:
        if not ln:
            continue
        pair, direction, open_t, close_t, open_p, close_p, pnl = ln.split(",")
        trades.append(
            bt.Trade(
                pair=pair,
                direction=Direction(direction),
                open_time=int(open_t),
                close_time=int(close_t),
                open_price=float(open_p),
                close_price=float(close_p),
                pnl=float(pnl),
            )
        )
    return tuple(trades)


def cmd_report(out: Path, verbose: bool) -> int:
    """Rebuild the summary table from a run directory and render figures."""
    from . import plots

    equity_path = out / "equity.csv"
    trades_path = out / "trades.csv"
    sweep_path = out / "sweep.csv"
    report_path = out / "report.txt"
    wrote_any = False

    if equity_path.exists() and trades_path.exists():
        curve = _load_equity_csv(equity_path)
        trades = _load_trades_csv(trades_path)
        report = bt.BacktestReport(
            profit=bt.profit(trades),
            sharpe=bt._safe_sharpe(trades),
            drawdown_pct=bt.max_drawdown(curve),
            trade_count=len(trades),
            trades=trades,
            equity=curve,
            config_echo={},
        )
        for path in plots.render_run_figures(report, out):
            print(f"figure: {path}")
        wrote_any = True

    for cell_equity in sorted(out.glob("equity_*.csv")):
        tag = cell_equity.stem.removeprefix("equity_")
        curve = _load_equity_csv(cell_equity)
        trades = _load_trades_csv(out / f"trades_{tag}.csv")
        report = bt.BacktestReport(
            profit=bt.profit(trades),
            sharpe=bt._safe_sharpe(trades),
            drawdown_pct=bt.max_drawdown(curve),
            trade_count=len(trades),
            trades=trades,
            equity=curve,
            config_echo={},
        )
        for path in plots.render_run_figures(report, out, prefix=tag):
            print(f"figure: {path}")
        wrote_any = True

    if sweep_path.exists():
        cells = _load_sweep_csv(sweep_path)
        from .plots import render_sweep_figures

        for path in render_sweep_figures(cells, out):
            print(f"figure: {path}")
        wrote_any = True

    if not wrote_any:
        raise FileNotFoundError(f"no run output found in {out}")
    if report_path.exists():
        print(report_path.read_text(), end="")
    return EXIT_OK


def _load_sweep_csv(path: Path) -> list[bt.SweepCell]:
    cells = []
    for ln in path.read_text().splitlines()[1:]:
        if not ln:
            continue
        mode, l, p, sh, dd, count = ln.split(",")
        dummy_curve = bt.EquityCurve(
            timestamps=np.array([0], dtype=np.int64), equity=np.array([1.0])
        )
        cells.append(
            bt.SweepCell(
                mode=Mode(mode),
                l=int(l),
                report=bt.BacktestReport(
                    profit=float(p),
                    sharpe=float(sh),
                    drawdown_pct=float(dd),
                    trade_count=int(count),
                    trades=(),
                    equity=dummy_curve,
                    config_echo={},
                ),
            )
        )
    return cells


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssafx", description="spectral cross-pair forecasting and backtesting"
    )
    parser.add_argument("command", choices=["ingest", "forecast", "backtest", "sweep", "report"])
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--verbose", action="store_true")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "report":
            out = Path(args.out) if args.out else None
            if out is None and args.config:
                out = Path(load_config(args.config).output_dir)
            if out is None:
                print("report needs --out or --config", file=sys.stderr)
                return EXIT_USAGE
            return cmd_report(out, args.verbose)

        if not args.config:
            print(f"{args.command} needs --config", file=sys.stderr)
            return EXIT_USAGE
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        handler = {
            "ingest": cmd_ingest,
            "forecast": cmd_forecast,
            "backtest": cmd_backtest,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(cfg, out, args.verbose)
    except (FileNotFoundError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SsafxError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    raise SystemExit(main())
