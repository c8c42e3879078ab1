import csv
import io

import pytest
from click.testing import CliRunner

from framepipe.cli import cli
from framepipe.errors import MalformedLog
from framepipe.profiler import parse_log, phase_totals, render_text, to_csv


def line(ts, worker, index, name, phase, frames, dur):
    return f"{ts}\t{worker}\t{index}\t{name}\t{phase}\t{frames}\t{dur}"


TWO_WORKERS = "\n".join([
    line(0, 0, 2, "MinusLog", "setup", 0, 5),
    line(10, 0, 2, "MinusLog", "pre", 0, 20),
    line(40, 0, 2, "MinusLog", "load", 2, 30),
    line(41, 1, 2, "MinusLog", "load", 2, 25),
    line(70, 0, 2, "MinusLog", "process", 2, 100),
    line(72, 1, 2, "MinusLog", "process", 2, 90),
    line(170, 0, 2, "MinusLog", "write", 2, 15),
    line(165, 1, 2, "MinusLog", "write", 2, 12),
    line(200, 0, 2, "MinusLog", "post", 0, 8),
]) + "\n"


def test_csv_totals_equal_input_sums():
    rows = list(csv.DictReader(io.StringIO(to_csv(parse_log(TWO_WORKERS)))))
    totals = {}
    for r in rows:
        totals[r["phase"]] = totals.get(r["phase"], 0) + int(r["duration_us"])
    assert totals == {"setup": 5, "pre": 20, "load": 55, "process": 190, "write": 27, "post": 8}
    assert phase_totals(parse_log(TWO_WORKERS))[(2, "MinusLog", "process")] == 190


def test_rows_time_ordered_per_worker():
    rows = parse_log(TWO_WORKERS)
    for w in (0, 1):
        starts = [r.start_us for r in rows if r.worker == w]
        assert starts == sorted(starts)


def test_text_has_one_lane_per_worker():
    text = render_text(parse_log(TWO_WORKERS), width=40)
    assert "worker 0" in text and "worker 1" in text
    bars = [ln for ln in text.splitlines() if "[2] MinusLog" in ln]
    assert len(bars) == 2
    assert all(ln.count("|") == 2 and len(ln.split("|")[1]) == 40 for ln in bars)
    assert "0.2 ms" in bars[0]  # worker 0 busy 178 us


def test_out_of_order_phase_names_line():
    bad = TWO_WORKERS.splitlines()
    bad.insert(6, line(180, 0, 2, "MinusLog", "pre", 0, 1))
    with pytest.raises(MalformedLog) as info:
        parse_log("\n".join(bad))
    assert info.value.line_no == 7 and "line 7" in str(info.value)


@pytest.mark.parametrize("text", ["1\t0\t1\tX\tload\t1", "a\t0\t1\tX\tload\t1\t2", "1\t0\t1\tX\tsleep\t1\t2"])
def test_malformed_lines(text):
    with pytest.raises(MalformedLog):
        parse_log(text)


def test_cli_profile_formats(tmp_path):
    log = tmp_path / "run.log"
    log.write_text(TWO_WORKERS)
    runner = CliRunner()
    result = runner.invoke(cli, ["profile", str(log), "--format", "csv"])
    assert result.exit_code == 0 and result.output.startswith("worker,plugin_index")
    png = tmp_path / "gantt.png"
    result = runner.invoke(cli, ["profile", str(log), "--plot", str(png)])
    assert result.exit_code == 0 and "worker 1" in result.output
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_cli_profile_empty_and_malformed(tmp_path):
    empty = tmp_path / "empty.log"
    empty.write_text("")
    result = CliRunner().invoke(cli, ["profile", str(empty)])
    assert result.exit_code == 0 and "no events" in result.output
    bad = tmp_path / "bad.log"
    bad.write_text("garbage\n")
    assert CliRunner().invoke(cli, ["profile", str(bad)]).exit_code == 1
