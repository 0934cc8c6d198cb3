import math

import pandas as pd
import pytest

from configs.tools.table_writer import TableWriter


@pytest.fixture
def frame():
    return pd.DataFrame(
        {
            "M": [1024, 2048],
            "N": [12, 30],
            "P": [0.1, 2.0 / 3.0],
            "P_stderr": [0.0012345678901234567, math.pi * 1e-7],
            "tau": [1.0, math.nan],
        }
    )


@pytest.mark.parametrize("suffix,output_format", [(".json", "json"), (".csv", "csv")])
def test_tables_read_back_exactly(tmp_path, frame, suffix, output_format):
    path = str(tmp_path / f"table{suffix}")
    TableWriter(output_format).write_frame(frame, path)
    back = TableWriter.read_frames([path])
    pd.testing.assert_frame_equal(back, frame, check_exact=True)


def test_json_table_uses_null_for_missing_values(tmp_path, frame):
    path = tmp_path / "table.json"
    TableWriter("json").write_frame(frame, str(path))
    text = path.read_text()
    assert "null" in text
    assert "NaN" not in text
    assert text.endswith("]\n")


def test_csv_uses_lf_line_endings(tmp_path, frame):
    path = tmp_path / "table.csv"
    TableWriter("csv").write_frame(frame, str(path))
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"M,N,P,P_stderr,tau"


def test_missing_input_table(tmp_path):
    with pytest.raises(FileNotFoundError):
        TableWriter.read_frames([str(tmp_path / "absent.csv")])


def test_unknown_format():
    with pytest.raises(ValueError):
        TableWriter("xml")
