"""Deterministic walk-forward simulator and its performance metrics.

At every bar after warmup the forecaster sees trailing history only,
signals are generated from its per-pair forecast, and the resulting
order intents fill at the NEXT bar's weighted price +- spread/2. Marks
use the most recent known price; open positions are force-closed at the
end of data so profit equals the equity delta.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigen import JacobiConfig
from .errors import (
    DegenerateDesignError,
    EmptyCurveError,
    InsufficientDataError,
    TooFewSamplesError,
    TooFewTradesError,
    ZeroVarianceError,
)
from .nonlinear import (
    MlpNetwork,
    TrainConfig,
    mlp_train,
    nonlinear_forecast,
    polyfit,
)
from .quotes import PricePanel, ReturnPanel
from .ssa import ForecastRule, Mode, fit, predict_returns
from .strategy import Direction, Intent, StrategyConfig, generate_signals, next_position

logger = logging.getLogger(__name__)

STANDARD_LOT = 100_000.0


@dataclass(frozen=True)
class AccountConfig:
    initial_deposit: float = 10_000.0
    leverage: int = 100
    lot_fraction: float = 0.1
    margin_call_level: float = 0.0

    def __post_init__(self):
        if self.initial_deposit <= 0 or self.leverage <= 0 or self.lot_fraction <= 0:
            raise ValueError("deposit, leverage and lot fraction must be positive")
        if self.margin_call_level < 0:
            raise ValueError("margin_call_level must be >= 0")

    @property
    def units(self) -> float:
        return self.lot_fraction * STANDARD_LOT


@dataclass(frozen=True, slots=True)
class Trade:
    pair: str
    direction: Direction
    open_time: int
    close_time: int
    open_price: float
    close_price: float
    pnl: float

    def __post_init__(self):
        # force-close can land on the opening bar, hence >= rather than >
        if self.close_time < self.open_time:
            raise ValueError("close_time must not precede open_time")


@dataclass(frozen=True, eq=False)
class EquityCurve:
    timestamps: np.ndarray
    equity: np.ndarray

    def __post_init__(self):
        if len(self.timestamps) != len(self.equity):
            raise ValueError("timestamps and equity must align")


@dataclass(frozen=True, eq=False)
class BacktestReport:
    profit: float
    sharpe: float
    drawdown_pct: float
    trade_count: int
    trades: tuple[Trade, ...]
    equity: EquityCurve
    config_echo: dict
    bankrupt_time: int | None = None

    @property
    def partial(self) -> bool:
        return self.bankrupt_time is not None


# --- metrics -----------------------------------------------------------


def profit(trades) -> float:
    """Total realized pnl."""
    return float(sum(t.pnl for t in trades))


def sharpe(trades) -> float:
    """Mean per-trade pnl over its sample standard deviation; unannualized."""
    pnls = np.array([t.pnl for t in trades], dtype=np.float64)
    if len(pnls) < 2:
        raise TooFewTradesError(f"need >= 2 trades, got {len(pnls)}")
    std = float(np.std(pnls, ddof=1))
    if std == 0.0:
        raise ZeroVarianceError("all trade pnls identical")
    return float(np.mean(pnls)) / std


def max_drawdown(curve: EquityCurve) -> float:
    """Largest peak-to-trough equity decline, percent of the peak."""
    if len(curve.equity) == 0:
        raise EmptyCurveError("empty equity curve")
    peaks = np.maximum.accumulate(curve.equity)
    return float(np.max((peaks - curve.equity) / peaks)) * 100.0


def _safe_sharpe(trades) -> float:
    try:
        return sharpe(trades)
    except (TooFewTradesError, ZeroVarianceError):
        return math.nan


# --- forecasters -------------------------------------------------------


@dataclass(frozen=True)
class NonlinearSpec:
    """Correction filter applied on top of the spectral forecast."""

    kind: str = "poly"  # "poly" | "mlp"
    degree: int = 2
    hidden_layers: int = 2
    width: int = 8
    train: TrainConfig = field(default_factory=TrainConfig)
    calibration_window: int = 256

    def __post_init__(self):
        if self.kind not in ("poly", "mlp"):
            raise ValueError("kind must be 'poly' or 'mlp'")
        if self.calibration_window < 2:
            raise ValueError("calibration_window must be >= 2")


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to (re)fit the forecasting pipeline at a bar."""

    mode: Mode = Mode.SSA1
    k: int = 1
    l: int = 1
    shifts: int = 1
    depth: int = 1
    rule: ForecastRule = ForecastRule.PROJECTOR
    jacobi: JacobiConfig = field(default_factory=JacobiConfig)
    nonlinear: NonlinearSpec | None = None
    refit_interval: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.refit_interval < 1:
            raise ValueError("refit_interval must be >= 1")


class SsaForecaster:
    """Stateful walk-forward wrapper: refits on trailing data, then predicts.

    Refits happen at the first call and every refit_interval bars after;
    between refits the existing basis filters the newest window, so no
    forecast ever sees data past the requested bar.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._model = None
        self._phi = None
        self._fitted_at = None

    def min_history(self, panel: ReturnPanel) -> int:
        base = self.spec.shifts - 1 if self.spec.mode is Mode.SSA2 else 0
        if self.spec.nonlinear is not None:
            base += self.spec.nonlinear.calibration_window + 1
        return base

    def reset(self) -> None:
        self._model = None
        self._phi = None
        self._fitted_at = None

    def predict(self, panel: ReturnPanel, at: int) -> dict[str, float]:
        spec = self.spec
        if self._model is None or at - self._fitted_at >= spec.refit_interval:
            self._model = fit(
                panel,
                at,
                mode=spec.mode,
                k=spec.k,
                l=spec.l,
                shifts=spec.shifts,
                depth=spec.depth,
                rule=spec.rule,
                jacobi=spec.jacobi,
            )
            self._fitted_at = at
            if spec.nonlinear is not None:
                self._phi = self._fit_phi(panel, at)
        values = predict_returns(self._model, panel, at)
        if self._phi is not None:
            values = nonlinear_forecast(self._phi, values)
        return dict(zip(panel.pair_order, values.tolist()))

    def _fit_phi(self, panel: ReturnPanel, at: int):
        nl = self.spec.nonlinear
        first = at - nl.calibration_window + 1
        inputs = np.stack(
            [predict_returns(self._model, panel, s - 1) for s in range(first, at + 1)]
        )
        targets = panel.y[first : at + 1]
        try:
            if nl.kind == "poly":
                return polyfit(inputs, targets, nl.degree)
            net = MlpNetwork.init(
                [panel.n_pairs] + [nl.width] * nl.hidden_layers + [panel.n_pairs],
                seed=(self.spec.seed, at),
            )
            trained, _ = mlp_train(net, inputs, targets, nl.train)
            return trained
        except (TooFewSamplesError, DegenerateDesignError) as exc:
            logger.debug("correction filter skipped at row %d: %s", at, exc)
            return None


class _Position:
    __slots__ = ("direction", "open_price", "open_time")

    def __init__(self, direction: int, open_price: float, open_time: int):
        self.direction = direction
        self.open_price = open_price
        self.open_time = open_time


def _conversion_plans(pair_order: tuple[str, ...], currency_slice) -> list[tuple[str, int]]:
    """Per pair: how to turn one unit of its slice currency into USD."""
    index = {p: i for i, p in enumerate(pair_order)}
    plans = []
    for pair in pair_order:
        if len(pair) != 6:
            logger.info("pair %s has no 6-letter form; converting 1:1", pair)
            plans.append(("one", -1))
            continue
        ccy = currency_slice(pair)
        if ccy == "USD":
            plans.append(("one", -1))
        elif ccy + "USD" in index:
            plans.append(("mul", index[ccy + "USD"]))
        elif "USD" + ccy in index:
            plans.append(("div", index["USD" + ccy]))
        else:
            logger.info("no USD cross for %s leg %s; converting 1:1", pair, ccy)
            plans.append(("one", -1))
    return plans


def _factor(plan: tuple[str, int], px_row: np.ndarray) -> float:
    op, idx = plan
    if op == "mul":
        return abs(float(px_row[idx]))
    if op == "div":
        return 1.0 / abs(float(px_row[idx]))
    return 1.0


def run_backtest(
    panel: ReturnPanel,
    prices: PricePanel,
    forecaster,
    strategy_cfg: StrategyConfig,
    account_cfg: AccountConfig,
    warmup: int,
) -> BacktestReport:
    """Walk the panel bar by bar and account every fill deterministically.

    The forecaster must expose min_history(panel) and predict(panel, at).
    Bankruptcy (equity at or below margin_call_level * deposit) stops the
    run early and flags the returned report as partial.
    """
    if warmup >= panel.rows:
        raise InsufficientDataError(
            f"warmup {warmup} leaves no bars out of {panel.rows}"
        )
    needed = forecaster.min_history(panel)
    if warmup < needed:
        raise InsufficientDataError(f"warmup {warmup} below model minimum {needed}")
    if panel.pair_order != prices.pair_order:
        raise ValueError("panel and price pair order differ")
    missing = set(strategy_cfg.traded_pairs) - set(panel.pair_order)
    if missing:
        raise ValueError(f"traded pairs not in panel: {sorted(missing)}")
    if hasattr(forecaster, "reset"):
        forecaster.reset()

    price_index = {int(t): i for i, t in enumerate(prices.timestamps)}
    # row n's return completes one price row past the row stamped with its ts
    known_at = np.empty(panel.rows, dtype=np.int64)
    for n, ts in enumerate(panel.timestamps):
        pos = price_index.get(int(ts))
        if pos is None or pos + 1 >= prices.rows:
            raise ValueError(f"panel row {n} has no matching price rows")
        known_at[n] = pos + 1

    pair_order = panel.pair_order
    col = {p: i for i, p in enumerate(pair_order)}
    quote_plan = {p: pl for p, pl in zip(pair_order, _conversion_plans(pair_order, lambda s: s[3:]))}
    base_plan = {p: pl for p, pl in zip(pair_order, _conversion_plans(pair_order, lambda s: s[:3]))}
    units = account_cfg.units
    floor = account_cfg.margin_call_level * account_cfg.initial_deposit

    balance = account_cfg.initial_deposit
    positions: dict[str, _Position] = {}
    trades: list[Trade] = []
    pending: list[tuple[str, tuple[Intent, ...]]] = []
    equity_values: list[float] = [account_cfg.initial_deposit] * warmup
    skipped_margin = 0
    bankrupt_time: int | None = None

    def open_position(pair, direction, px_row, t_now, equity):
        nonlocal skipped_margin
        mid = float(px_row[col[pair]])
        # notional is `units` of base currency, valued in USD
        margin_used = sum(
            units * _factor(base_plan[p], px_row) / account_cfg.leverage
            for p in positions
        )
        required = units * _factor(base_plan[pair], px_row) / account_cfg.leverage
        if margin_used + required > equity:
            skipped_margin += 1
            logger.debug("margin blocks opening %s at %d", pair, t_now)
            return
        half = strategy_cfg.spread(pair) / 2.0
        fill = mid + half if direction > 0 else mid - half
        positions[pair] = _Position(direction, fill, t_now)

    def close_position(pair, px_row, t_now):
        nonlocal balance
        pos = positions.pop(pair, None)
        if pos is None:
            return
        mid = float(px_row[col[pair]])
        half = strategy_cfg.spread(pair) / 2.0
        fill = mid - half if pos.direction > 0 else mid + half
        pnl = pos.direction * (fill - pos.open_price) * units * _factor(
            quote_plan[pair], px_row
        )
        balance += pnl
        trades.append(
            Trade(
                pair=pair,
                direction=Direction.LONG if pos.direction > 0 else Direction.SHORT,
                open_time=pos.open_time,
                close_time=t_now,
                open_price=pos.open_price,
                close_price=fill,
                pnl=pnl,
            )
        )

    def unrealized(px_row) -> float:
        total = 0.0
        for pair, pos in positions.items():
            mid = float(px_row[col[pair]])
            total += pos.direction * (mid - pos.open_price) * units * _factor(
                quote_plan[pair], px_row
            )
        return total

    last_px_row = None
    last_t = None
    for n in range(warmup, panel.rows):
        j = known_at[n]
        px_row = prices.x[j]
        t_now = int(prices.timestamps[j])
        last_px_row, last_t = px_row, t_now

        equity_before = balance + unrealized(px_row)
        for pair, intents in pending:
            for intent in intents:
                if intent is Intent.CLOSE:
                    close_position(pair, px_row, t_now)
                elif intent is Intent.OPEN_LONG:
                    open_position(pair, 1, px_row, t_now, equity_before)
                elif intent is Intent.OPEN_SHORT:
                    open_position(pair, -1, px_row, t_now, equity_before)
        pending = []

        equity = balance + unrealized(px_row)
        equity_values.append(equity)

        if equity <= floor:
            bankrupt_time = t_now
            logger.warning("equity %.2f hit the floor at %d; stopping", equity, t_now)
            break

        forecast_map = forecaster.predict(panel, n)
        for sig in generate_signals(forecast_map, strategy_cfg):
            pos = positions.get(sig.pair)
            current = (
                Direction.FLAT
                if pos is None
                else (Direction.LONG if pos.direction > 0 else Direction.SHORT)
            )
            intents = next_position(current, sig, strategy_cfg)
            if intents != (Intent.HOLD,):
                pending.append((sig.pair, intents))

    for pair in list(positions):
        close_position(pair, last_px_row, last_t)
    if equity_values:
        equity_values[-1] = balance

    if skipped_margin:
        logger.info("%d opens skipped for insufficient margin", skipped_margin)

    curve = EquityCurve(
        timestamps=panel.timestamps[: len(equity_values)].copy(),
        equity=np.array(equity_values, dtype=np.float64),
    )
    echo = {
        "warmup": warmup,
        "initial_deposit": account_cfg.initial_deposit,
        "leverage": account_cfg.leverage,
        "lot_fraction": account_cfg.lot_fraction,
        "margin_call_level": account_cfg.margin_call_level,
        "entry_threshold": strategy_cfg.entry_threshold,
        "exit_rule": strategy_cfg.exit_rule.value,
        "traded_pairs": ",".join(strategy_cfg.traded_pairs),
    }
    if hasattr(forecaster, "spec"):
        spec = forecaster.spec
        echo.update(
            {
                "mode": spec.mode.value,
                "k": spec.k,
                "l": spec.l,
                "shifts": spec.shifts,
                "depth": spec.depth,
                "rule": spec.rule.value,
                "refit_interval": spec.refit_interval,
                "seed": spec.seed,
            }
        )
    return BacktestReport(
        profit=balance - account_cfg.initial_deposit,
        sharpe=_safe_sharpe(trades),
        drawdown_pct=max_drawdown(curve),
        trade_count=len(trades),
        trades=tuple(trades),
        equity=curve,
        config_echo=echo,
        bankrupt_time=bankrupt_time,
    )


# --- sweep harness -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepCell:
    mode: Mode
    l: int
    report: BacktestReport


_SWEEP_SHARED: dict = {}


def _sweep_init(panel, prices, strategy_cfg, account_cfg, warmup):
    _SWEEP_SHARED["args"] = (panel, prices, strategy_cfg, account_cfg, warmup)


def _sweep_worker(spec: ModelSpec) -> BacktestReport:
    panel, prices, strategy_cfg, account_cfg, warmup = _SWEEP_SHARED["args"]
    return run_backtest(
        panel, prices, SsaForecaster(spec), strategy_cfg, account_cfg, warmup
    )


def run_sweep(
    panel: ReturnPanel,
    prices: PricePanel,
    base_spec: ModelSpec,
    strategy_cfg: StrategyConfig,
    account_cfg: AccountConfig,
    warmup: int,
    l_values=(1, 2, 3, 4),
    modes=(Mode.SSA1, Mode.SSA2),
    jobs: int = 1,
) -> list[SweepCell]:
    """One backtest per (mode, l) cell; cells are independent, so the
    optional process pool changes wall time only, never results."""
    specs = [
        dataclasses.replace(base_spec, mode=mode, l=l)
        for mode in modes
        for l in l_values
    ]
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(specs)),
            initializer=_sweep_init,
            initargs=(panel, prices, strategy_cfg, account_cfg, warmup),
        ) as pool:
            reports = list(pool.map(_sweep_worker, specs))
    else:
        _sweep_init(panel, prices, strategy_cfg, account_cfg, warmup)
        reports = [_sweep_worker(spec) for spec in specs]
    return [
        SweepCell(mode=spec.mode, l=spec.l, report=rep)
        for spec, rep in zip(specs, reports)
    ]


# --- report rendering --------------------------------------------------


def report_rows(cells: list[SweepCell]) -> list[tuple]:
    return [
        (
            c.mode.value,
            c.l,
            c.report.profit,
            c.report.sharpe,
            c.report.drawdown_pct,
            c.report.trade_count,
        )
        for c in cells
    ]


def report_text(cells: list[SweepCell]) -> str:
    """Summary table: one row per cell with columns l, P,$, Sh, D% and trades."""
    lines = [f"{'mode':<6}{'l':>3}{'P,$':>12}{'Sh':>8}{'D%':>8}{'trades':>9}"]
    for mode, l, p, sh, dd, count in report_rows(cells):
        sh_txt = f"{sh:8.2f}" if math.isfinite(sh) else f"{'-':>8}"
        lines.append(f"{mode:<6}{l:>3}{p:>12.1f}{sh_txt}{dd:>8.2f}{count:>9}")
    return "\n".join(lines) + "\n"


def equity_to_csv(curve: EquityCurve) -> str:
    lines = ["timestamp,equity"]
    for ts, eq in zip(curve.timestamps, curve.equity):
        lines.append(f"{int(ts)},{repr(float(eq))}")
    return "\n".join(lines) + "\n"


def trades_to_csv(trades) -> str:
    lines = ["pair,dir,open_time,close_time,open_price,close_price,pnl"]
    for t in trades:
        lines.append(
            f"{t.pair},{t.direction.value},{t.open_time},{t.close_time},"
            f"{repr(float(t.open_price))},{repr(float(t.close_price))},{repr(float(t.pnl))}"
        )
    return "\n".join(lines) + "\n"


def sweep_to_csv(cells: list[SweepCell]) -> str:
    lines = ["mode,l,profit,sharpe,drawdown_pct,trades"]
    for mode, l, p, sh, dd, count in report_rows(cells):
        lines.append(f"{mode},{l},{repr(p)},{repr(sh)},{repr(dd)},{count}")
    return "\n".join(lines) + "\n"
