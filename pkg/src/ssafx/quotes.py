"""OHLC quote ingestion, weighted prices and cross-pair return panels.

Bars are bucketed onto a fixed timeframe grid, collapsed to one weighted
price x per bucket, and differenced into per-pair returns y[n] = x[n+1] - x[n].
All pairs are aligned onto common timestamps before differencing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    BadWindowError,
    EmptyInputError,
    MalformedLineError,
    NoOverlapError,
    TooShortError,
)

logger = logging.getLogger(__name__)

CSV_HEADER = "symbol,timestamp,open,high,low,close"


class PriceScheme(Enum):
    """Weighting of the four bar prices into a single value."""

    OHLC4 = "ohlc4"
    HLC3 = "hlc3"
    HLCC4 = "hlcc4"


class GapPolicy(Enum):
    DROP_ROW = "drop_row"
    CARRY_FORWARD = "carry_forward"


@dataclass(frozen=True)
class QuoteBar:
    """One OHLC bar of one pair; timestamp in integer minutes."""

    symbol: str
    timestamp: int
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if any(not np.isfinite(p) or p <= 0.0 for p in prices):
            raise ValueError("prices must be positive and finite")
        if self.low > min(self.open, self.close):
            raise ValueError("low above open/close")
        if self.high < max(self.open, self.close):
            raise ValueError("high below open/close")


@dataclass(frozen=True)
class PanelConfig:
    """Panel-building parameters; pair_order fixes the column layout."""

    pair_order: tuple[str, ...]
    timeframe_minutes: int = 1
    pre_average_p: int = 5
    price_scheme: PriceScheme = PriceScheme.OHLC4
    gap_policy: GapPolicy = GapPolicy.DROP_ROW

    def __post_init__(self):
        object.__setattr__(self, "pair_order", tuple(self.pair_order))
        if len(self.pair_order) < 1:
            raise ValueError("pair_order must name at least one pair")
        if len(set(self.pair_order)) != len(self.pair_order):
            raise ValueError("pair identifiers must be unique")
        if self.timeframe_minutes < 1:
            raise ValueError("timeframe_minutes must be >= 1")
        if self.pre_average_p < 1:
            raise ValueError("pre_average_p must be >= 1")


@dataclass
class PanelStats:
    """Ingestion diagnostics reported by the CLI."""

    skipped_unknown: int = 0
    dropped_rows: int = 0
    carried_cells: int = 0


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned weighted prices x, one column per pair."""

    x: np.ndarray
    timestamps: np.ndarray
    pair_order: tuple[str, ...]

    def __post_init__(self):
        _check_panel_arrays(self.x, self.timestamps, self.pair_order)

    @property
    def rows(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Aligned per-pair price differences y, one column per pair.

    Row n holds y[n] = x[n+1] - x[n]; its timestamp is the time of x[n].
    Timestamps are uniformly spaced whenever gap handling left no holes
    (gap-free input, or CARRY_FORWARD).
    """

    y: np.ndarray
    timestamps: np.ndarray
    pair_order: tuple[str, ...]
    stats: PanelStats | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_panel_arrays(self.y, self.timestamps, self.pair_order)

    @property
    def rows(self) -> int:
        return self.y.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.y.shape[1]

    def column(self, pair: str) -> np.ndarray:
        return self.y[:, self.pair_order.index(pair)]


def _check_panel_arrays(values, timestamps, pair_order):
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError("panel needs at least one row")
    if values.shape[1] != len(pair_order):
        raise ValueError("column count must match pair_order")
    if not np.all(np.isfinite(values)):
        raise ValueError("panel entries must be finite")
    if len(timestamps) != values.shape[0]:
        raise ValueError("one timestamp per row required")
    if len(timestamps) > 1 and not np.all(np.diff(timestamps) > 0):
        raise ValueError("timestamps must be strictly increasing")


def parse_quote_csv(text: str) -> list[QuoteBar]:
    """Parse `symbol,timestamp,open,high,low,close` lines into bars.

    The whole file is rejected on the first malformed line (1-based
    line number over the raw input, header and blanks included).
    """
    bars: list[QuoteBar] = []
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen and not bars and line.lower() == CSV_HEADER:
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 6:
            raise MalformedLineError(line_no, f"expected 6 fields, got {len(fields)}")
        try:
            bar = QuoteBar(
                symbol=fields[0],
                timestamp=int(fields[1]),
                open=float(fields[2]),
                high=float(fields[3]),
                low=float(fields[4]),
                close=float(fields[5]),
            )
        except ValueError as exc:
            raise MalformedLineError(line_no, str(exc)) from exc
        bars.append(bar)
    if not bars:
        raise EmptyInputError("no quote lines in input")
    return bars


def weighted_price(bar: QuoteBar, scheme: PriceScheme = PriceScheme.OHLC4) -> float:
    """Collapse a bar's four prices into one value per the scheme."""
    if scheme is PriceScheme.OHLC4:
        return (bar.open + bar.high + bar.low + bar.close) / 4.0
    if scheme is PriceScheme.HLC3:
        return (bar.high + bar.low + bar.close) / 3.0
    if scheme is PriceScheme.HLCC4:
        return (bar.high + bar.low + 2.0 * bar.close) / 4.0
    raise ValueError(f"unknown price scheme {scheme!r}")


def _aggregate_bucket(bucket_bars: list[QuoteBar], bucket_ts: int) -> QuoteBar:
    ordered = sorted(bucket_bars, key=lambda b: b.timestamp)
    return QuoteBar(
        symbol=ordered[0].symbol,
        timestamp=bucket_ts,
        open=ordered[0].open,
        high=max(b.high for b in ordered),
        low=min(b.low for b in ordered),
        close=ordered[-1].close,
    )


def build_panels(bars: list[QuoteBar], cfg: PanelConfig) -> tuple[PricePanel, ReturnPanel]:
    """Bucket, weight and align bars; return (price panel, return panel).

    Bars whose symbol is not in pair_order are skipped and counted.
    Rows where some pair lacks a bar are dropped or forward-filled per
    the gap policy.
    """
    tf = cfg.timeframe_minutes
    known = set(cfg.pair_order)
    stats = PanelStats()

    buckets: dict[str, dict[int, list[QuoteBar]]] = {p: {} for p in cfg.pair_order}
    for bar in bars:
        if bar.symbol not in known:
            stats.skipped_unknown += 1
            continue
        key = (bar.timestamp // tf) * tf
        buckets[bar.symbol].setdefault(key, []).append(bar)
    if stats.skipped_unknown:
        logger.debug("skipped %d bars with unknown symbols", stats.skipped_unknown)

    xs: dict[str, dict[int, float]] = {}
    for pair in cfg.pair_order:
        if not buckets[pair]:
            raise NoOverlapError(f"pair {pair!r} has no bars")
        xs[pair] = {
            ts: weighted_price(_aggregate_bucket(group, ts), cfg.price_scheme)
            for ts, group in buckets[pair].items()
        }

    if cfg.gap_policy is GapPolicy.DROP_ROW:
        common = set(xs[cfg.pair_order[0]])
        for pair in cfg.pair_order[1:]:
            common &= set(xs[pair])
        grid = sorted(common)
        if len(grid) >= 2:
            union = set()
            for pair in cfg.pair_order:
                union |= set(xs[pair])
            in_range = {t for t in union if grid[0] <= t <= grid[-1]}
            stats.dropped_rows = len(in_range) - len(grid)
        x = np.array([[xs[p][t] for p in cfg.pair_order] for t in grid], dtype=np.float64)
    else:
        start = max(min(xs[p]) for p in cfg.pair_order)
        end = min(max(xs[p]) for p in cfg.pair_order)
        if start > end:
            raise NoOverlapError("pairs share no common time range")
        grid = list(range(start, end + 1, tf))
        cols = []
        for pair in cfg.pair_order:
            series = xs[pair]
            known_ts = sorted(series)
            col = np.empty(len(grid), dtype=np.float64)
            ptr = 0
            last = None
            for row, t in enumerate(grid):
                while ptr < len(known_ts) and known_ts[ptr] <= t:
                    last = series[known_ts[ptr]]
                    ptr += 1
                if last is None:
                    # start = max of per-pair minima, so a value always exists
                    raise NoOverlapError(f"pair {pair!r} starts after {t}")
                if t not in series:
                    stats.carried_cells += 1
                col[row] = last
            cols.append(col)
        x = np.column_stack(cols)

    if len(grid) < 2:
        raise NoOverlapError("fewer than two aligned rows; no returns can be formed")

    ts = np.asarray(grid, dtype=np.int64)
    prices = PricePanel(x=x, timestamps=ts, pair_order=cfg.pair_order)
    panel = ReturnPanel(
        y=np.diff(x, axis=0),
        timestamps=ts[:-1],
        pair_order=cfg.pair_order,
        stats=stats,
    )
    return prices, panel


def build_panel(bars: list[QuoteBar], cfg: PanelConfig) -> ReturnPanel:
    """Return panel only; see build_panels."""
    return build_panels(bars, cfg)[1]


def smooth_panel(panel: ReturnPanel, p: int) -> ReturnPanel:
    """Trailing simple moving average of width p down every column.

    Output has rows - p + 1 rows; row t keeps the timestamp of the
    window's most recent input row. p = 1 is the identity.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if panel.rows < p:
        raise TooShortError(f"panel has {panel.rows} rows, need >= {p}")
    if p == 1:
        return ReturnPanel(panel.y, panel.timestamps, panel.pair_order, panel.stats)
    csum = np.vstack([np.zeros((1, panel.n_pairs)), np.cumsum(panel.y, axis=0)])
    smoothed = (csum[p:] - csum[:-p]) / p
    return ReturnPanel(
        y=smoothed,
        timestamps=panel.timestamps[p - 1 :],
        pair_order=panel.pair_order,
        stats=panel.stats,
    )


def _rolling_sum(a: np.ndarray, w: int) -> np.ndarray:
    csum = np.concatenate([[0.0], np.cumsum(a)])
    return csum[w:] - csum[:-w]


def rolling_correlation(panel: ReturnPanel, i: int, j: int, window: int) -> np.ndarray:
    """Trailing Pearson correlation of columns i and j over each window.

    Value t covers rows t .. t+window-1, so the output aligns with
    panel.timestamps[window-1:]. Windows where either column has zero
    variance yield NaN rather than asserting a correlation.
    """
    if i == j:
        raise ValueError("column indices must differ")
    if not (0 <= i < panel.n_pairs and 0 <= j < panel.n_pairs):
        raise ValueError("column index out of range")
    if window < 2 or window > panel.rows:
        raise BadWindowError(f"window {window} outside [2, {panel.rows}]")

    a = panel.y[:, i]
    b = panel.y[:, j]
    n = float(window)
    sa, sb = _rolling_sum(a, window), _rolling_sum(b, window)
    saa, sbb = _rolling_sum(a * a, window), _rolling_sum(b * b, window)
    sab = _rolling_sum(a * b, window)
    var_a = saa - sa * sa / n
    var_b = sbb - sb * sb / n
    cov = sab - sa * sb / n
    # cancellation can leave ~1e-16-relative residue on constant windows
    tiny = np.finfo(np.float64).tiny
    thresh_a = 1e-12 * (saa + tiny)
    thresh_b = 1e-12 * (sbb + tiny)
    degenerate = (var_a <= thresh_a) | (var_b <= thresh_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.sqrt(var_a * var_b)
    corr = np.clip(corr, -1.0, 1.0)
    corr[degenerate] = np.nan
    return corr


def panel_to_csv(panel: ReturnPanel) -> str:
    """Export per the interface: header `timestamp,<pair0>,...`, full precision."""
    lines = ["timestamp," + ",".join(panel.pair_order)]
    for ts, row in zip(panel.timestamps, panel.y):
        lines.append(str(int(ts)) + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def prices_to_csv(prices: PricePanel) -> str:
    """Same layout as panel_to_csv but for the aligned price matrix."""
    lines = ["timestamp," + ",".join(prices.pair_order)]
    for ts, row in zip(prices.timestamps, prices.x):
        lines.append(str(int(ts)) + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
