"""Rank-l spectral filtering of cross-pair return windows.

A return row y[n] (one value per pair) is embedded into a Hankel window
matrix U whose rows slide across the pair index. Its correlation matrix
R2 = U^T U / k is diagonalized with the Jacobi solver and the leading-l
eigenvectors form the filtering basis. SSA2 stacks time-shifted copies
of U into a block-Hankel lag matrix F before forming R2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .eigen import JacobiConfig, SymmetricMatrix, jacobi_eigen
from .errors import (
    BadKError,
    BadLError,
    BadParamsError,
    DimensionMismatchError,
    InsufficientHistoryError,
)
from .quotes import ReturnPanel

logger = logging.getLogger(__name__)


class Mode(Enum):
    SSA1 = "SSA1"
    SSA2 = "SSA2"


class ForecastRule(Enum):
    """PROJECTOR reconstructs rank-l (V_l V_l^T x); TRUNCATED multiplies the
    first l window components straight through the basis columns (V_l x[:l])."""

    PROJECTOR = "projector"
    TRUNCATED = "truncated"


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    """k x (M-k+1) Hankel embedding of one return row."""

    entries: np.ndarray
    k: int
    source_index: int = -1

    @property
    def window(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class LagMatrix:
    """Block-Hankel stack of time-shifted info matrices.

    blocks[a][b] embeds panel row start + a + b; depth block-rows by
    (shifts - depth + 1) block-columns.
    """

    blocks: tuple[tuple[InfoMatrix, ...], ...]
    k: int
    shifts: int
    depth: int
    start: int

    def flattened(self) -> np.ndarray:
        return np.block([[im.entries for im in row] for row in self.blocks])


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """R2 = X^T X / divisor for the (flattened) embedding X."""

    matrix: SymmetricMatrix
    divisor: int

    @property
    def order(self) -> int:
        return self.matrix.order


@dataclass(frozen=True, eq=False)
class ForecastModel:
    """Fitted filtering state: leading-l eigenvector basis of R2."""

    mode: Mode
    k: int
    l: int
    shifts: int
    depth: int
    rule: ForecastRule
    basis: np.ndarray
    eigenvalues: np.ndarray
    n_pairs: int
    fitted_at: int
    sweeps_used: int
    final_offdiag: float

    @property
    def order(self) -> int:
        return self.basis.shape[0]

    @property
    def window(self) -> int:
        return self.n_pairs - self.k + 1


def build_info_matrix(y_row: np.ndarray, k: int, source_index: int = -1) -> InfoMatrix:
    """Hankel-embed one M-vector: entries[r][c] = y_row[c + r]."""
    y_row = np.asarray(y_row, dtype=np.float64)
    m = y_row.shape[-1]
    if y_row.ndim != 1:
        raise ValueError("y_row must be one panel row")
    if not 1 <= k < m:
        raise BadKError(f"k={k} outside 1 <= k < {m}")
    w = m - k + 1
    entries = np.empty((k, w), dtype=np.float64)
    for r in range(k):
        entries[r] = y_row[r : r + w]
    return InfoMatrix(entries=entries, k=k, source_index=source_index)


def correlation_matrix(source: InfoMatrix | LagMatrix) -> CorrelationMatrix:
    """R2 = X^T X / (rows of the embedding): k for U, k*depth for F."""
    if isinstance(source, InfoMatrix):
        x = source.entries
        divisor = source.k
    else:
        x = source.flattened()
        divisor = source.k * source.depth
    r2 = (x.T @ x) / divisor
    return CorrelationMatrix(matrix=SymmetricMatrix(entries=r2), divisor=divisor)


def _check_lag_params(shifts: int, depth: int) -> None:
    # 1 <= depth < shifts, except the lag-free degenerate shifts = depth = 1
    if shifts == 1 and depth == 1:
        return
    if not 1 <= depth < shifts:
        raise BadParamsError(f"depth={depth} outside 1 <= depth < shifts={shifts}")


def build_lag_matrix(
    panel: ReturnPanel, start: int, k: int, shifts: int, depth: int
) -> LagMatrix:
    """Stack info matrices of rows start .. start+shifts-1 block-Hankel-wise."""
    _check_lag_params(shifts, depth)
    if start < 0 or start + shifts > panel.rows:
        raise InsufficientHistoryError(
            f"need rows {start}..{start + shifts - 1}, panel has {panel.rows}"
        )
    blocks = tuple(
        tuple(
            build_info_matrix(panel.y[start + a + b], k, source_index=start + a + b)
            for b in range(shifts - depth + 1)
        )
        for a in range(depth)
    )
    return LagMatrix(blocks=blocks, k=k, shifts=shifts, depth=depth, start=start)


def _embedding_rows(
    panel: ReturnPanel, at: int, mode: Mode, k: int, shifts: int, depth: int
) -> np.ndarray:
    """Flattened embedding whose last k rows and trailing window touch row `at`."""
    if mode is Mode.SSA1:
        if not 0 <= at < panel.rows:
            raise InsufficientHistoryError(f"row {at} outside panel of {panel.rows} rows")
        return build_info_matrix(panel.y[at], k, source_index=at).entries
    start = at - shifts + 1
    return build_lag_matrix(panel, start, k, shifts, depth).flattened()


def fit(
    panel: ReturnPanel,
    at: int,
    mode: Mode = Mode.SSA1,
    k: int = 1,
    l: int = 1,
    shifts: int = 1,
    depth: int = 1,
    rule: ForecastRule = ForecastRule.PROJECTOR,
    jacobi: JacobiConfig | None = None,
) -> ForecastModel:
    """Fit the filtering basis using history up to and including row `at`.

    SSA1 embeds row `at` alone; SSA2 embeds rows at-shifts+1 .. at.
    """
    if mode is Mode.SSA1:
        shifts = 1
        depth = 1
    x = _embedding_rows(panel, at, mode, k, shifts, depth)
    r2 = (x.T @ x) / x.shape[0]
    order = r2.shape[0]
    if not 1 <= l <= order:
        raise BadLError(f"l={l} outside 1 <= l <= {order}")
    m = panel.n_pairs
    if not 1 < l < m - k:
        # recommended operating range; legal but flagged for diagnostics
        logger.debug("l=%d outside the recommended range 1 < l < %d", l, m - k)
    decomp = jacobi_eigen(SymmetricMatrix(entries=r2), jacobi)
    return ForecastModel(
        mode=mode,
        k=k,
        l=l,
        shifts=shifts,
        depth=depth,
        rule=rule,
        basis=decomp.vectors[:, :l].copy(),
        eigenvalues=decomp.values,
        n_pairs=m,
        fitted_at=at,
        sweeps_used=decomp.sweeps_used,
        final_offdiag=decomp.final_offdiag,
    )


def current_window(model: ForecastModel, panel: ReturnPanel, at: int) -> np.ndarray:
    """The embedding's last row at time `at`; input vector for forecast()."""
    rows = _embedding_rows(panel, at, model.mode, model.k, model.shifts, model.depth)
    return rows[-1].copy()


def forecast(model: ForecastModel, current: np.ndarray) -> np.ndarray:
    """Filter one window vector through the retained basis.

    PROJECTOR: V_l V_l^T current. TRUNCATED: out[i] = sum_q<l basis[i][q]
    * current[q]. Output stays in window coordinates.
    """
    current = np.asarray(current, dtype=np.float64)
    if current.shape != (model.order,):
        raise DimensionMismatchError(
            f"window of length {model.order} expected, got {current.shape}"
        )
    if model.rule is ForecastRule.PROJECTOR:
        return model.basis @ (model.basis.T @ current)
    return model.basis @ current[: model.l]


def predict_returns(model: ForecastModel, panel: ReturnPanel, at: int) -> np.ndarray:
    """Per-pair next-step return forecast from the filtered row at `at`.

    Every embedding row touching time `at` is filtered, and pair i takes
    the mean of all filtered components that cover it (each pair sits in
    up to k windows).
    """
    rows = _embedding_rows(panel, at, model.mode, model.k, model.shifts, model.depth)
    last_k = rows[-model.k :, :]
    if model.rule is ForecastRule.PROJECTOR:
        filtered = (last_k @ model.basis) @ model.basis.T
    else:
        filtered = last_k[:, : model.l] @ model.basis.T
    w = model.window
    tail = filtered[:, -w:]
    out = np.zeros(model.n_pairs)
    count = np.zeros(model.n_pairs)
    for r in range(model.k):
        out[r : r + w] += tail[r]
        count[r : r + w] += 1.0
    return out / count


def describe(model: ForecastModel) -> str:
    """Plain-text diagnostics dump of a fitted model."""
    retained = ", ".join(f"{v:.6g}" for v in model.eigenvalues[: model.l])
    discarded = ", ".join(f"{v:.6g}" for v in model.eigenvalues[model.l :]) or "(none)"
    return "\n".join(
        [
            f"mode:            {model.mode.value}",
            f"k:               {model.k}",
            f"l:               {model.l}",
            f"shifts (N):      {model.shifts}",
            f"depth (I):       {model.depth}",
            f"rule:            {model.rule.value}",
            f"fitted at row:   {model.fitted_at}",
            f"retained values: {retained}",
            f"discarded:       {discarded}",
            f"sweeps used:     {model.sweeps_used}",
            f"final offdiag:   {model.final_offdiag:.3e}",
        ]
    )
