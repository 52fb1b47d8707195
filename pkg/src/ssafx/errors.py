"""Exception types shared across the package."""


class SsafxError(Exception):
    """Base class for every failure raised by this package."""


# quote ingestion / panel construction

class EmptyInputError(SsafxError):
    """Quote stream contained no data lines."""


class MalformedLineError(SsafxError):
    """A quote line could not be parsed; rejects the whole file."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NoOverlapError(SsafxError):
    """Pairs share no common time range after bucketing."""


class TooShortError(SsafxError):
    """Panel has fewer rows than the requested smoothing width."""


class BadWindowError(SsafxError):
    """Rolling window outside [2, row count]."""


# eigensolver

class DidNotConvergeError(SsafxError):
    """Sweep cap hit before the off-diagonal threshold was reached."""

    def __init__(self, sweeps: int, final_offdiag: float):
        super().__init__(
            f"no convergence after {sweeps} sweeps "
            f"(max off-diagonal {final_offdiag:.3e})"
        )
        self.sweeps = sweeps
        self.final_offdiag = final_offdiag


# forecasting

class BadKError(SsafxError):
    """Window parameter k outside 1 <= k < M."""


class BadLError(SsafxError):
    """Retained-component count outside the decomposition order."""


class BadParamsError(SsafxError):
    """Lag parameters violate 1 <= depth < shifts (or 1 = depth = shifts)."""


class InsufficientHistoryError(SsafxError):
    """Panel does not cover the rows a model needs."""


class DimensionMismatchError(SsafxError):
    """Input vector length does not match the model/filter."""


class TooFewSamplesError(SsafxError):
    """Not enough samples for the requested polynomial degree."""


class DegenerateDesignError(SsafxError):
    """All fit inputs identical; the design has no usable spread."""


class NonFiniteLossError(SsafxError):
    """Training loss became NaN/inf (learning rate too high)."""


# strategy / backtest

class MissingForecastError(SsafxError):
    """A traded pair has no forecast value."""

    def __init__(self, pair: str):
        super().__init__(f"no forecast for traded pair {pair!r}")
        self.pair = pair


class InsufficientDataError(SsafxError):
    """Panel too short for the requested warmup/model."""


class TooFewTradesError(SsafxError):
    """Sharpe needs at least two trades."""


class ZeroVarianceError(SsafxError):
    """All trade pnls identical; Sharpe undefined."""


class EmptyCurveError(SsafxError):
    """Drawdown of an empty equity curve."""
