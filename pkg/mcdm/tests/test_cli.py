from __future__ import annotations

import csv
import json
import logging
import tempfile
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
import hypothesis.strategies as st

from mcdm.app.bitfile import BitFileFormat, read_bits, write_bits
from mcdm.app.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, parse_int_list
from mcdm.app.codebook import BitVector, make_2c, make_cc, make_range, make_weight_set
from mcdm.app.config import get_settings
from mcdm.app.schemas import CSV_HEADER


@pytest.fixture(autouse=True)
def inline_settings(monkeypatch):
    monkeypatch.delenv("MCDM_USE_CELERY", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def _lines(capsys) -> list[str]:
    return capsys.readouterr().out.splitlines()


def test_parse_int_list():
    assert parse_int_list("4") == [4]
    assert parse_int_list("10,20") == [10, 20]
    assert parse_int_list("10:30:10,7") == [10, 20, 30, 7]


def test_info_reports_codebook(capsys):
    assert main(["info", "--n", "4", "--kind", "cc", "--m", "2", "--p1", "0.5"]) == EXIT_OK
    lines = _lines(capsys)
    assert "codebook=[2]-out-of-4" in lines
    assert "M=6" in lines
    assert "k=2" in lines
    assert "rate=0.5" in lines


def test_info_json(capsys):
    assert main(["info", "--n", "4", "--kind", "set", "--weights", "1,3", "--p1", "0.5", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["size"] == "8"
    assert report["k"] == 3
    assert report["weights"] == [1, 3]


def test_optimize(capsys):
    assert main(["optimize", "--n", "4", "--kind", "cc", "--p1", "0.5"]) == EXIT_OK
    assert "m*=2" in _lines(capsys)
    assert main(["optimize", "--n", "10", "--kind", "opt", "--p1", "0.422", "--objective", "base"]) == EXIT_OK
    assert "m*=8" in _lines(capsys)


def test_encode_and_decode_files(tmp_path):
    source = tmp_path / "in.txt"
    encoded = tmp_path / "encoded.txt"
    decoded = tmp_path / "decoded.txt"
    source.write_text("0011\n")
    spec_args = ["--n", "4", "--kind", "cc", "--m", "2"]
    assert main(["encode", *spec_args, "--in", str(source), "--out", str(encoded)]) == EXIT_OK
    assert encoded.read_text() == "00111010\n"
    assert main(["decode", *spec_args, "--in", str(encoded), "--out", str(decoded)]) == EXIT_OK
    assert decoded.read_text() == "0011\n"


def test_packed_round_trip_through_optimised_codebook(tmp_path):
    source = tmp_path / "in.txt"
    packed = tmp_path / "encoded.bin"
    spec_args = ["--n", "12", "--kind", "opt", "--p1", "0.422"]
    source.write_text("101100111000")
    assert main(["encode", *spec_args, "--in", str(source), "--out", str(packed), "--format", "packed"]) == EXIT_OK
    back = tmp_path / "back.bin"
    assert main(["decode", *spec_args, "--in", str(packed), "--out", str(back), "--format", "packed"]) == EXIT_OK
    assert main(["decode", *spec_args, "--in", str(packed), "--out", str(tmp_path / "b.txt")]) == EXIT_DATA


def test_strict_decode_reports_unused_codeword(tmp_path, capsys):
    source = tmp_path / "words.txt"
    source.write_text("0110\n")
    spec_args = ["--n", "4", "--kind", "cc", "--m", "2"]
    out = tmp_path / "out.txt"
    assert main(["decode", *spec_args, "--in", str(source), "--out", str(out)]) == EXIT_DATA
    assert "block 0: codeword not in actual codebook" in capsys.readouterr().err
    assert main(["decode", *spec_args, "--no-strict", "--in", str(source), "--out", str(out)]) == EXIT_OK
    assert out.read_text() == "10\n"


def test_usage_errors(tmp_path, capsys):
    assert main(["info", "--n", "4", "--kind", "cc", "--m", "5", "--p1", "0.5"]) == EXIT_USAGE
    assert main(["info", "--n", "4", "--kind", "range", "--m-low", "1", "--p1", "0.5"]) == EXIT_USAGE
    assert main(["analyze", "--p1", "0.422", "--n", "4", "--kinds", "range"]) == EXIT_USAGE
    missing = tmp_path / "missing.txt"
    assert main(["encode", "--n", "4", "--kind", "cc", "--m", "2", "--in", str(missing), "--out", str(tmp_path / "o")]) == EXIT_DATA
    capsys.readouterr()
    with pytest.raises(SystemExit) as excinfo:
        main(["info", "--n", "4"])
    assert excinfo.value.code == 2


def test_analyze_writes_reproducible_csv(tmp_path):
    args = ["analyze", "--p1", "0.422", "--n", "4,6", "--kinds", "cc,2c,opt", "--samples", "200", "--seed", "3"]
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    assert main([*args, "--out", str(first)]) == EXIT_OK
    assert main([*args, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 6
    assert lines[1].startswith("4,cc,1,2,0.5,")


def test_analyze_to_stdout(capsys):
    assert main(["analyze", "--p1", "0.422", "--n", "10", "--kinds", "opt"]) == EXIT_OK
    lines = _lines(capsys)
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].startswith("10,opt,10,10,1,")


def test_target(capsys):
    assert main(["target", "--p1", "0.422", "--target", "0.05", "--kinds", "cc,opt", "--json"]) == EXIT_OK
    reports = [json.loads(line) for line in _lines(capsys)]
    assert [report["kind"] for report in reports] == ["cc", "opt"]
    assert all(report["div_base"] <= 0.05 for report in reports)
    assert main(["target", "--p1", "0.422", "--target", "-1", "--kinds", "cc", "--n-max", "5"]) == EXIT_OK
    assert "no n <= 5" in capsys.readouterr().out


def test_analyze_saves_under_results_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MCDM_RESULTS_DIR", str(tmp_path / "results"))
    get_settings.cache_clear()
    assert main(["analyze", "--p1", "0.422", "--n", "4:8:2", "--kinds", "2c", "--save"]) == EXIT_OK
    with (tmp_path / "results" / "sweep_p1_0.422.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["n"] for row in rows] == ["4", "6", "8"]
    assert all(row["method"] == "exact" for row in rows)


CLI_SPECS = (
    (["--n", "4", "--kind", "cc", "--m", "2"], make_cc(4, 2)),
    (["--n", "12", "--kind", "opt", "--m", "5"], make_range(12, 0, 5)),
    (["--n", "9", "--kind", "set", "--weights", "1,4,8"], make_weight_set(9, (1, 4, 8))),
    (["--n", "40", "--kind", "2c", "--m", "17"], make_2c(40, 17)),
)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.data())
def test_cli_round_trips_random_streams(data):
    spec_args, spec = data.draw(st.sampled_from(CLI_SPECS), label="spec")
    fmt = data.draw(st.sampled_from([fmt.value for fmt in BitFileFormat]), label="format")
    blocks = data.draw(st.integers(min_value=0, max_value=6), label="blocks")
    bits = data.draw(st.lists(st.integers(0, 1), min_size=blocks * spec.k, max_size=blocks * spec.k), label="bits")
    # function-scoped fixtures do not reset between generated examples
    with tempfile.TemporaryDirectory() as workdir:
        source, encoded, decoded = (Path(workdir) / name for name in ("in", "encoded", "decoded"))
        write_bits(source, BitVector(tuple(bits)), fmt)
        assert main(["encode", *spec_args, "--in", str(source), "--out", str(encoded), "--format", fmt]) == EXIT_OK
        assert len(read_bits(encoded, fmt)) == blocks * spec.n
        assert main(["decode", *spec_args, "--in", str(encoded), "--out", str(decoded), "--format", fmt]) == EXIT_OK
        assert read_bits(decoded, fmt) == BitVector(tuple(bits))


def test_analyze_csv_is_stable_with_several_workers(tmp_path):
    args = ["analyze", "--p1", "0.422", "--n", "20,30", "--kinds", "cc,opt", "--samples", "300", "--seed", "4"]
    args += ["--workers", "3", "--budget", "4"]
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    assert main([*args, "--out", str(first)]) == EXIT_OK
    assert main([*args, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    rows = first.read_text().splitlines()[1:]
    assert rows and all(row.endswith(",monte-carlo,300,4,3") for row in rows)


def test_data_errors_are_logged(tmp_path, caplog):
    source = tmp_path / "words.txt"
    source.write_text("0110\n")
    package_logger = logging.getLogger("mcdm")
    # the package logger does not propagate to the root handler caplog installs
    package_logger.addHandler(caplog.handler)
    try:
        args = ["decode", "--n", "4", "--kind", "cc", "--m", "2", "--in", str(source), "--out", str(tmp_path / "o")]
        assert main(args) == EXIT_DATA
    finally:
        package_logger.removeHandler(caplog.handler)
    errors = [record for record in caplog.records if record.levelno == logging.ERROR]
    assert errors and "decode failed" in errors[0].getMessage()
