"""Synthetic correlated random-walk market data for demos and tests.

Pairwise return correlation rho comes from a one-factor model:
r_i = sqrt(rho) * common + sqrt(1 - rho) * idiosyncratic, both N(0, 1),
scaled by sigma. No real broker feed ships with the package, so every
example and acceptance fixture is generated here.
"""

from __future__ import annotations

import argparse

import numpy as np

from .quotes import PricePanel, QuoteBar, ReturnPanel


def correlated_returns(
    n_rows: int, n_pairs: int, rho: float = 0.7, sigma: float = 1e-4, seed: int = 0
) -> np.ndarray:
    """(n_rows x n_pairs) returns with pairwise correlation rho."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((n_rows, 1))
    own = rng.standard_normal((n_rows, n_pairs))
    return sigma * (np.sqrt(rho) * common + np.sqrt(1.0 - rho) * own)


def make_panels(
    n_rows: int,
    pairs: tuple[str, ...],
    rho: float = 0.7,
    sigma: float = 1e-4,
    seed: int = 0,
    start_price: float = 1.3,
    start_ts: int = 0,
    timeframe: int = 1,
) -> tuple[PricePanel, ReturnPanel]:
    """Aligned price/return panels of correlated random walks.

    Cheap array-level path used for large fixtures; make_quote_csv goes
    through real bars instead.
    """
    y = correlated_returns(n_rows, len(pairs), rho, sigma, seed)
    x = start_price + np.vstack([np.zeros((1, len(pairs))), np.cumsum(y, axis=0)])
    ts = start_ts + timeframe * np.arange(n_rows + 1, dtype=np.int64)
    prices = PricePanel(x=x, timestamps=ts, pair_order=tuple(pairs))
    panel = ReturnPanel(y=np.diff(x, axis=0), timestamps=ts[:-1], pair_order=tuple(pairs))
    return prices, panel


def make_quote_bars(
    n_bars: int,
    pairs: tuple[str, ...],
    rho: float = 0.7,
    sigma: float = 1e-4,
    seed: int = 0,
    start_price: float = 1.3,
    start_ts: int = 0,
) -> list[QuoteBar]:
    """One-minute OHLC bars along correlated close paths."""
    rng = np.random.default_rng(seed)
    closes = start_price + np.cumsum(
        correlated_returns(n_bars, len(pairs), rho, sigma, seed + 1), axis=0
    )
    wick = np.abs(rng.standard_normal((n_bars, len(pairs)))) * sigma * 0.5
    bars = []
    for i, pair in enumerate(pairs):
        prev = start_price
        for t in range(n_bars):
            close = float(closes[t, i])
            top = max(prev, close) + float(wick[t, i])
            bottom = min(prev, close) - float(wick[t, i])
            bars.append(
                QuoteBar(
                    symbol=pair,
                    timestamp=start_ts + t,
                    open=prev,
                    high=top,
                    low=bottom,
                    close=close,
                )
            )
            prev = close
    return bars


def make_quote_csv(*args, **kwargs) -> str:
    """CSV text for make_quote_bars, ready for the ingest command."""
    bars = make_quote_bars(*args, **kwargs)
    lines = ["symbol,timestamp,open,high,low,close"]
    for b in sorted(bars, key=lambda b: (b.timestamp, b.symbol)):
        lines.append(
            f"{b.symbol},{b.timestamp},{b.open!r},{b.high!r},{b.low!r},{b.close!r}"
        )
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write a synthetic quote CSV")
    parser.add_argument("--out", required=True)
    parser.add_argument("--pairs", default="EURUSD,GBPUSD,AUDUSD,NZDUSD")
    parser.add_argument("--minutes", type=int, default=2000)
    parser.add_argument("--rho", type=float, default=0.7)
    parser.add_argument("--sigma", type=float, default=1e-4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    pairs = tuple(p.strip() for p in args.pairs.split(",") if p.strip())
    text = make_quote_csv(
        args.minutes, pairs, rho=args.rho, sigma=args.sigma, seed=args.seed
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.minutes} minutes x {len(pairs)} pairs to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
