import numpy as np
import pytest

from ssafx.quotes import QuoteBar, ReturnPanel


def flat_bar(symbol: str, ts: int, price: float) -> QuoteBar:
    """Bar with open=high=low=close, so every scheme weighs it to `price`."""
    return QuoteBar(symbol=symbol, timestamp=ts, open=price, high=price, low=price, close=price)


def panel_from_rows(rows, pairs=None, start_ts=0) -> ReturnPanel:
    y = np.asarray(rows, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    pairs = tuple(pairs or [f"P{i:02d}USD"[:6] for i in range(y.shape[1])])
    return ReturnPanel(
        y=y,
        timestamps=np.arange(start_ts, start_ts + y.shape[0], dtype=np.int64),
        pair_order=pairs,
    )


def rank_hankel_rows(n_rows: int, n_pairs: int, rank: int, seed: int = 0) -> np.ndarray:
    """Rows y[n][i] = sum_j a[n,j] * ratio_j**i: every length-w window of a
    row lies in the rank-dimensional span of the geometric progressions."""
    rng = np.random.default_rng(seed)
    ratios = np.linspace(0.55, 1.45, rank)
    coeffs = rng.standard_normal((n_rows, rank))
    powers = ratios[None, :] ** np.arange(n_pairs)[:, None]  # (n_pairs, rank)
    return coeffs @ powers.T


def separable_rank_rows(n_rows: int, n_pairs: int, rank: int, seed: int = 0) -> np.ndarray:
    """y[n][i] = sum_j b_j * mu_j**n * ratio_j**i; geometric in time as well,
    so even the time-lagged block embedding stays rank-dimensional."""
    rng = np.random.default_rng(seed)
    ratios = np.linspace(0.6, 1.4, rank)
    mus = np.linspace(0.85, 1.08, rank)
    amps = rng.uniform(0.5, 2.0, rank) * rng.choice([-1.0, 1.0], rank)
    time_part = amps[None, :] * mus[None, :] ** np.arange(n_rows)[:, None]
    pair_part = ratios[None, :] ** np.arange(n_pairs)[:, None]
    return time_part @ pair_part.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
