"""Matplotlib figures rendered next to the delimited report output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .backtest import BacktestReport, EquityCurve, SweepCell

FIG_DPI = 150


def equity_figure(curve: EquityCurve, title: str = "equity"):
    """Equity line with the running peak and an underwater panel below."""
    peaks = np.maximum.accumulate(curve.equity)
    underwater = (peaks - curve.equity) / peaks * 100.0
    fig, (ax_eq, ax_dd) = plt.subplots(
        2, 1, sharex=True, figsize=(9, 6), height_ratios=[3, 1]
    )
    ax_eq.plot(curve.timestamps, curve.equity, lw=0.9, label="equity")
    ax_eq.plot(curve.timestamps, peaks, lw=0.7, ls="--", color="gray", label="peak")
    ax_eq.set_ylabel("equity, $")
    ax_eq.set_title(title)
    ax_eq.legend(loc="best", fontsize=8)
    ax_dd.fill_between(curve.timestamps, -underwater, 0.0, color="firebrick", alpha=0.6)
    ax_dd.set_ylabel("drawdown, %")
    ax_dd.set_xlabel("time, min")
    fig.tight_layout()
    return fig


def pnl_histogram(report: BacktestReport, title: str = "trade pnl"):
    fig, ax = plt.subplots(figsize=(7, 4))
    pnls = [t.pnl for t in report.trades]
    if pnls:
        ax.hist(pnls, bins=min(40, max(5, len(pnls) // 3)), color="steelblue")
    ax.axvline(0.0, color="black", lw=0.8)
    ax.set_xlabel("pnl per trade, $")
    ax.set_ylabel("count")
    ax.set_title(f"{title} ({len(pnls)} trades)")
    fig.tight_layout()
    return fig


def sweep_figure(cells: list[SweepCell], title: str = "sweep"):
    """Grouped bars of profit per retained-component count, one group per mode."""
    modes = sorted({c.mode.value for c in cells})
    ls = sorted({c.l for c in cells})
    width = 0.8 / max(1, len(modes))
    fig, ax = plt.subplots(figsize=(7, 4))
    for m_idx, mode in enumerate(modes):
        xs, ys = [], []
        for l_idx, l in enumerate(ls):
            for c in cells:
                if c.mode.value == mode and c.l == l:
                    xs.append(l_idx + m_idx * width)
                    ys.append(c.report.profit)
        ax.bar(xs, ys, width=width, label=mode)
    ax.set_xticks([i + width * (len(modes) - 1) / 2 for i in range(len(ls))])
    ax.set_xticklabels([str(l) for l in ls])
    ax.set_xlabel("retained components l")
    ax.set_ylabel("profit, $")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def save_figure(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return path


def render_run_figures(report: BacktestReport, out_dir: Path, prefix: str = "run") -> list[Path]:
    """Equity and pnl figures for one finished backtest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        save_figure(equity_figure(report.equity, title=prefix), out_dir / f"{prefix}_equity.png"),
        save_figure(pnl_histogram(report, title=prefix), out_dir / f"{prefix}_pnl_hist.png"),
    ]
    return written


def render_sweep_figures(cells: list[SweepCell], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [save_figure(sweep_figure(cells), out_dir / "sweep_profit.png")]
