
import pytest

from ssafx.cli import main
from ssafx.synth import make_quote_csv

PAIRS = ("AAAUSD", "BBBUSD", "CCCUSD")


@pytest.fixture
def quotes_path(tmp_path):
    path = tmp_path / "quotes.csv"
    path.write_text(make_quote_csv(420, PAIRS, rho=0.6, sigma=2e-4, seed=8))
    return path


def write_config(tmp_path, quotes_path, out_name="run_out", **overrides):
    lines = {
        "quotes_path": str(quotes_path),
        "pair_order": ",".join(PAIRS),
        "pre_average_p": "1",
        "k": "2",
        "l": "1",
        "epsilon_relative": "true",
        "output_dir": str(tmp_path / out_name),
        "warmup": "10",
    }
    lines.update({k: str(v) for k, v in overrides.items()})
    path = tmp_path / "run.cfg"
    path.write_text(
        "# test configuration\n"
        + "\n".join(f"{key} = {value}" for key, value in lines.items())
        + "\n"
    )
    return path


class TestIngest:
    def test_summary_and_exports(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path)
        assert main(["ingest", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "pairs:" in out and "3" in out
        assert "panel rows:" in out
        out_dir = tmp_path / "run_out"
        panel_csv = (out_dir / "panel.csv").read_text().splitlines()
        assert panel_csv[0] == "timestamp," + ",".join(PAIRS)
        assert (out_dir / "prices.csv").exists()
        assert (out_dir / "config_echo.txt").exists()

    def test_missing_quotes_file_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, tmp_path / "nope.csv")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_unknown_pair_counted(self, tmp_path, quotes_path, capsys):
        extra = quotes_path.read_text() + "ZZZUSD,5,1.0,1.0,1.0,1.0\n"
        quotes_path.write_text(extra)
        cfg = write_config(tmp_path, quotes_path)
        assert main(["ingest", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "skipped bars:     1" in out

    def test_unknown_config_key_exits_2(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path)
        cfg.write_text(cfg.read_text() + "bogus_key = 1\n")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_config_without_quotes_path_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("pair_order = AAAUSD\n")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_date_range_filters_bars(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, date_range="100:199")
        assert main(["ingest", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "panel rows:       99" in out
        assert "time range:       100..198" in out


class TestForecast:
    def test_constant_panel_all_flat(self, tmp_path, capsys):
        quotes = tmp_path / "const.csv"
        rows = ["symbol,timestamp,open,high,low,close"]
        for t in range(60):
            for pair in PAIRS:
                rows.append(f"{pair},{t},2.0,2.0,2.0,2.0")
        quotes.write_text("\n".join(rows) + "\n")
        cfg = write_config(tmp_path, quotes)
        assert main(["forecast", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert out.count("flat") == len(PAIRS)
        for line in out.splitlines()[1:]:
            assert float(line.split()[1]) == 0.0

    def test_rank_one_pattern_recovered(self, tmp_path, capsys):
        quotes = tmp_path / "rank1.csv"
        steps = {"AAAUSD": 2e-4, "BBBUSD": 1e-4}
        rows = ["symbol,timestamp,open,high,low,close"]
        for t in range(50):
            for pair, step in steps.items():
                px = 1.0 + step * t
                rows.append(f"{pair},{t},{px!r},{px!r},{px!r},{px!r}")
        quotes.write_text("\n".join(rows) + "\n")
        cfg = write_config(
            tmp_path, quotes, pair_order="AAAUSD,BBBUSD", k=1, l=1, pre_average_p=1
        )
        assert main(["forecast", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        values = {ln.split()[0]: float(ln.split()[1]) for ln in out.splitlines()[1:3]}
        assert values["AAAUSD"] == pytest.approx(2e-4, abs=1e-8)
        assert values["BBBUSD"] == pytest.approx(1e-4, abs=1e-8)

    def test_ssa2_degenerate_matches_ssa1(self, tmp_path, quotes_path, capsys):
        cfg1 = write_config(tmp_path, quotes_path, mode="SSA1")
        main(["forecast", "--config", str(cfg1)])
        out1 = capsys.readouterr().out
        cfg2 = write_config(tmp_path, quotes_path, mode="SSA2", n=1, i=1)
        main(["forecast", "--config", str(cfg2)])
        out2 = capsys.readouterr().out
        assert out1 == out2

    def test_verbose_prints_model_dump(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path)
        assert main(["forecast", "--config", str(cfg), "--verbose"]) == 0
        assert "sweeps used" in capsys.readouterr().out


class TestBacktest:
    def test_writes_artifacts_and_prints_table(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, spread="0.0001")
        assert main(["backtest", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split() == ["mode", "l", "P,$", "Sh", "D%", "trades"]
        out_dir = tmp_path / "run_out"
        for name in ("report.txt", "equity.csv", "trades.csv", "config_echo.txt"):
            assert (out_dir / name).exists(), name

    def test_invalid_l_exits_1_before_running(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, l=0)
        assert main(["backtest", "--config", str(cfg)]) == 1

    def test_out_of_range_epsilon_exits_2(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, epsilon=5.0)
        assert main(["backtest", "--config", str(cfg)]) == 2

    def test_nonlinear_run_writes_filter_dump(self, tmp_path, quotes_path, capsys):
        from ssafx.nonlinear import PolyFilter, load_filter

        cfg = write_config(
            tmp_path, quotes_path, nonlinear="poly:2", calibration_window=32
        )
        assert main(["backtest", "--config", str(cfg)]) == 0
        dump = tmp_path / "run_out" / "filter.txt"
        assert dump.exists()
        assert isinstance(load_filter(dump.read_text()), PolyFilter)

    def test_echo_reproduces_run_bit_identically(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, spread="0.0001", seed=5)
        assert main(["backtest", "--config", str(cfg)]) == 0
        out_dir = tmp_path / "run_out"
        echo = out_dir / "config_echo.txt"
        replay_dir = tmp_path / "replay_out"
        assert main(["backtest", "--config", str(echo), "--out", str(replay_dir)]) == 0
        assert (out_dir / "equity.csv").read_bytes() == (replay_dir / "equity.csv").read_bytes()
        assert (out_dir / "trades.csv").read_bytes() == (replay_dir / "trades.csv").read_bytes()


class TestSweep:
    def test_rows_per_cell(self, tmp_path, quotes_path, capsys):
        cfg = write_config(
            tmp_path, quotes_path, sweep_l="1,2", sweep_modes="SSA1,SSA2", n=2, i=1
        )
        assert main(["sweep", "--config", str(cfg)]) == 0
        out_dir = tmp_path / "run_out"
        lines = (out_dir / "report.txt").read_text().strip().splitlines()
        assert len(lines) == 5  # header + 2 modes x 2 l values
        assert sum(ln.startswith("SSA1") for ln in lines) == 2
        assert sum(ln.startswith("SSA2") for ln in lines) == 2
        sweep_lines = (out_dir / "sweep.csv").read_text().strip().splitlines()
        assert sweep_lines[0] == "mode,l,profit,sharpe,drawdown_pct,trades"
        assert len(sweep_lines) == 5
        assert (out_dir / "equity_SSA1_l1.csv").exists()
        assert (out_dir / "trades_SSA2_l2.csv").exists()


class TestReport:
    def test_renders_figures_next_to_csv(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, spread="0.0001")
        assert main(["backtest", "--config", str(cfg)]) == 0
        capsys.readouterr()
        out_dir = tmp_path / "run_out"
        assert main(["report", "--out", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "figure:" in out
        assert "P,$" in out  # table reprinted
        equity_png = out_dir / "run_equity.png"
        hist_png = out_dir / "run_pnl_hist.png"
        assert equity_png.exists() and hist_png.exists()
        assert equity_png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_sweep_figures(self, tmp_path, quotes_path, capsys):
        cfg = write_config(tmp_path, quotes_path, sweep_l="1,2", sweep_modes="SSA1")
        assert main(["sweep", "--config", str(cfg)]) == 0
        out_dir = tmp_path / "run_out"
        assert main(["report", "--out", str(out_dir)]) == 0
        assert (out_dir / "sweep_profit.png").exists()
        assert (out_dir / "SSA1_l1_equity.png").exists()

    def test_empty_directory_exits_2(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", "--out", str(empty)]) == 2

    def test_report_needs_target(self, capsys):
        assert main(["report"]) == 2
