"""Forecast-to-signal conversion and position transition rules.

Signals come from one shared forecast vector built on the joint panel,
so every pair's decision reflects all pairs' dynamics. A dead zone of
entry_threshold + spread/2 around zero suppresses noise trades.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import MissingForecastError


class Direction(Enum):
    LONG = "long"
    SHORT = "short"
    FLAT = "flat"


class ExitRule(Enum):
    REVERSE_ON_OPPOSITE = "reverse_on_opposite"
    FLAT_ON_WEAK = "flat_on_weak"


class Intent(Enum):
    OPEN_LONG = "open_long"
    OPEN_SHORT = "open_short"
    CLOSE = "close"
    HOLD = "hold"


@dataclass(frozen=True, slots=True)
class Signal:
    pair: str
    direction: Direction
    forecast_value: float

    def __post_init__(self):
        if self.direction is Direction.LONG and not self.forecast_value > 0.0:
            raise ValueError("long signal requires a positive forecast")
        if self.direction is Direction.SHORT and not self.forecast_value < 0.0:
            raise ValueError("short signal requires a negative forecast")


@dataclass(frozen=True)
class StrategyConfig:
    traded_pairs: tuple[str, ...]
    entry_threshold: float = 0.0
    exit_rule: ExitRule = ExitRule.REVERSE_ON_OPPOSITE
    spread_per_pair: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "traded_pairs", tuple(self.traded_pairs))
        if not self.traded_pairs:
            raise ValueError("traded_pairs must not be empty")
        if self.entry_threshold < 0.0:
            raise ValueError("entry_threshold must be >= 0")
        if any(s < 0.0 for s in self.spread_per_pair.values()):
            raise ValueError("spreads must be >= 0")

    def spread(self, pair: str) -> float:
        return self.spread_per_pair.get(pair, 0.0)


def generate_signals(
    forecast: Mapping[str, float], cfg: StrategyConfig
) -> list[Signal]:
    """One signal per traded pair: long above the dead zone, short below."""
    signals = []
    for pair in cfg.traded_pairs:
        if pair not in forecast:
            raise MissingForecastError(pair)
        value = float(forecast[pair])
        band = cfg.entry_threshold + cfg.spread(pair) / 2.0
        if value > band:
            direction = Direction.LONG
        elif value < -band:
            direction = Direction.SHORT
        else:
            direction = Direction.FLAT
        signals.append(Signal(pair=pair, direction=direction, forecast_value=value))
    return signals


SIGNAL_CSV_HEADER = "timestamp,pair,direction,forecast_value"


def signals_to_csv(timestamp: int, signals: list[Signal]) -> str:
    """Loggable CSV rows (no header) for one bar's signals."""
    return "\n".join(
        f"{timestamp},{s.pair},{s.direction.value},{repr(float(s.forecast_value))}"
        for s in signals
    )


_OPEN_FOR = {Direction.LONG: Intent.OPEN_LONG, Direction.SHORT: Intent.OPEN_SHORT}


def next_position(
    current: Direction, signal: Signal, cfg: StrategyConfig
) -> tuple[Intent, ...]:
    """Order intents moving the pair's position toward the signal.

    Under REVERSE_ON_OPPOSITE a flat signal holds any open position;
    under FLAT_ON_WEAK it closes it. An opposite signal always closes
    then reopens in the new direction within the same bar sequence.
    """
    want = signal.direction
    if want is Direction.FLAT:
        if cfg.exit_rule is ExitRule.FLAT_ON_WEAK and current is not Direction.FLAT:
            return (Intent.CLOSE,)
        return (Intent.HOLD,)
    if current is want:
        return (Intent.HOLD,)
    if current is Direction.FLAT:
        return (_OPEN_FOR[want],)
    return (Intent.CLOSE, _OPEN_FOR[want])
