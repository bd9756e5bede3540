import numpy as np
import pytest

from lib.solutions.errors import ContractViolation
from lib.solutions.HRN.output import RecordStream, read_snapshot, read_stream, write_csv, write_snapshot


def test_stream_header_and_records(tmp_path):
    path = str(tmp_path / "ledger.jsonl")
    with RecordStream(path, "ledger", ["time", "value"], "abc") as stream:
        stream.append({"time": 0.0, "value": np.float64(1.5)})
        stream.append({"time": 0.1, "value": np.inf, "ignored": 3})
    contents = read_stream(path)
    assert contents.header == {"config_hash": "abc", "stream": "ledger", "fields": ["time", "value"]}
    assert contents.records == [{"time": 0.0, "value": 1.5}, {"time": 0.1, "value": "inf"}]


def test_records_need_every_field(tmp_path):
    with RecordStream(str(tmp_path / "s.jsonl"), "s", ["time", "value"], "abc") as stream:
        with pytest.raises(ContractViolation):
            stream.append({"time": 0.0})


def test_truncated_tail_is_dropped(tmp_path):
    path = tmp_path / "ledger.jsonl"
    path.write_text('{"config_hash": "abc", "stream": "ledger", "fields": ["time"]}\n{"time": 0.0}\n{"ti')
    assert read_stream(str(path)).records == [{"time": 0.0}]


def test_snapshot_round_trip(tmp_path):
    path = str(tmp_path / "snapshot.bin")
    rho = np.arange(64, dtype=float).reshape(8, 8)
    velocity = np.stack([rho * 2, -rho])
    write_snapshot(path, "abc", 0.25, rho, velocity)
    snapshot = read_snapshot(path)
    assert snapshot.config_hash == "abc"
    assert snapshot.time == 0.25
    assert np.array_equal(snapshot.rho, rho)
    assert np.array_equal(snapshot.velocity, velocity)
    with open(path, "rb") as f:
        assert f.readline() == b"# config_hash=abc\n"
        assert f.read(8) == b"NSVSNAP1"


def test_snapshot_layout_must_match(tmp_path):
    with pytest.raises(ContractViolation):
        write_snapshot(str(tmp_path / "s.bin"), "abc", 0.0, np.zeros((8, 8)), np.zeros((3, 8, 8)))


def test_csv_with_hash_header(tmp_path):
    path = tmp_path / "series.csv"
    write_csv(str(path), ["time", "energy"], [{"time": 0.0, "energy": 2.0}, {"time": 1.0, "energy": 1.0}], "abc")
    assert path.read_text() == "# config_hash=abc\ntime,energy\n0.0,2.0\n1.0,1.0\n"
