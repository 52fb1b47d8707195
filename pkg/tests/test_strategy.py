import pytest

from ssafx.errors import MissingForecastError
from ssafx.strategy import (
    Direction,
    ExitRule,
    Intent,
    Signal,
    StrategyConfig,
    generate_signals,
    next_position,
    signals_to_csv,
)


def cfg(**kwargs):
    defaults = dict(traded_pairs=("EURUSD",))
    defaults.update(kwargs)
    return StrategyConfig(**defaults)


class TestSignal:
    def test_long_requires_positive_value(self):
        with pytest.raises(ValueError):
            Signal("EURUSD", Direction.LONG, -0.1)

    def test_short_requires_negative_value(self):
        with pytest.raises(ValueError):
            Signal("EURUSD", Direction.SHORT, 0.1)

    def test_flat_any_value(self):
        Signal("EURUSD", Direction.FLAT, 0.5)


class TestGenerateSignals:
    def test_above_band_goes_long(self):
        c = cfg(spread_per_pair={"EURUSD": 0.0002})
        [sig] = generate_signals({"EURUSD": 0.0010}, c)
        assert sig.direction is Direction.LONG

    def test_zero_forecast_is_flat(self):
        [sig] = generate_signals({"EURUSD": 0.0}, cfg())
        assert sig.direction is Direction.FLAT
        [sig] = generate_signals({"EURUSD": 0.0}, cfg(entry_threshold=0.001))
        assert sig.direction is Direction.FLAT

    def test_band_arithmetic_short(self):
        # band = 0.0001 + 0.0002/2 = 0.0002 and -0.0003 < -0.0002
        c = cfg(entry_threshold=0.0001, spread_per_pair={"EURUSD": 0.0002})
        [sig] = generate_signals({"EURUSD": -0.0003}, c)
        assert sig.direction is Direction.SHORT

    def test_inside_band_is_flat(self):
        c = cfg(entry_threshold=0.0001, spread_per_pair={"EURUSD": 0.0002})
        [sig] = generate_signals({"EURUSD": 0.00015}, c)
        assert sig.direction is Direction.FLAT

    def test_missing_forecast(self):
        with pytest.raises(MissingForecastError):
            generate_signals({"GBPUSD": 0.1}, cfg())

    def test_sign_only_decision_scales(self, rng):
        pairs = ("AAAUSD", "BBBUSD", "CCCUSD")
        c = cfg(traded_pairs=pairs)
        values = dict(zip(pairs, rng.normal(size=3)))
        base = [s.direction for s in generate_signals(values, c)]
        scaled = [s.direction for s in generate_signals(
            {p: 17.0 * v for p, v in values.items()}, c)]
        assert base == scaled

    def test_order_follows_traded_pairs(self):
        pairs = ("BBBUSD", "AAAUSD")
        sigs = generate_signals({"AAAUSD": 1.0, "BBBUSD": -1.0}, cfg(traded_pairs=pairs))
        assert [s.pair for s in sigs] == list(pairs)

    def test_per_pair_decision_independent_of_listing_order(self, rng):
        pairs = ("AAAUSD", "BBBUSD", "CCCUSD")
        values = dict(zip(pairs, rng.normal(size=3)))
        forward = {
            s.pair: s.direction for s in generate_signals(values, cfg(traded_pairs=pairs))
        }
        backward = {
            s.pair: s.direction
            for s in generate_signals(values, cfg(traded_pairs=pairs[::-1]))
        }
        assert forward == backward

    def test_signals_csv_rows(self):
        sigs = [
            Signal("AAAUSD", Direction.LONG, 0.0003),
            Signal("BBBUSD", Direction.FLAT, 0.0),
        ]
        text = signals_to_csv(42, sigs)
        assert text.splitlines() == [
            "42,AAAUSD,long,0.0003",
            "42,BBBUSD,flat,0.0",
        ]

    def test_empty_traded_pairs_rejected(self):
        with pytest.raises(ValueError):
            StrategyConfig(traded_pairs=())


class TestNextPosition:
    def test_open_from_flat(self):
        sig = Signal("EURUSD", Direction.LONG, 0.1)
        assert next_position(Direction.FLAT, sig, cfg()) == (Intent.OPEN_LONG,)

    def test_hold_same_direction(self):
        sig = Signal("EURUSD", Direction.LONG, 0.1)
        assert next_position(Direction.LONG, sig, cfg()) == (Intent.HOLD,)

    def test_reverse_closes_then_opens(self):
        sig = Signal("EURUSD", Direction.SHORT, -0.1)
        assert next_position(Direction.LONG, sig, cfg()) == (
            Intent.CLOSE,
            Intent.OPEN_SHORT,
        )

    def test_flat_signal_holds_under_reverse_rule(self):
        sig = Signal("EURUSD", Direction.FLAT, 0.0)
        assert next_position(Direction.LONG, sig, cfg()) == (Intent.HOLD,)

    def test_flat_signal_closes_under_flat_rule(self):
        c = cfg(exit_rule=ExitRule.FLAT_ON_WEAK)
        sig = Signal("EURUSD", Direction.FLAT, 0.0)
        assert next_position(Direction.SHORT, sig, c) == (Intent.CLOSE,)
        assert next_position(Direction.FLAT, sig, c) == (Intent.HOLD,)

    def test_no_two_opens_without_close_between(self, rng):
        c = cfg()
        position = Direction.FLAT
        history = []
        for value in rng.normal(size=400):
            if value > 0.2:
                sig = Signal("EURUSD", Direction.LONG, value)
            elif value < -0.2:
                sig = Signal("EURUSD", Direction.SHORT, value)
            else:
                sig = Signal("EURUSD", Direction.FLAT, value)
            for intent in next_position(position, sig, c):
                if intent is Intent.CLOSE:
                    position = Direction.FLAT
                    history.append("close")
                elif intent is Intent.OPEN_LONG:
                    position = Direction.LONG
                    history.append("open")
                elif intent is Intent.OPEN_SHORT:
                    position = Direction.SHORT
                    history.append("open")
        opens = [i for i, h in enumerate(history) if h == "open"]
        for first, second in zip(opens, opens[1:]):
            assert "close" in history[first + 1 : second]
