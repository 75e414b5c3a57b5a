import math

import numpy as np
import pytest

from spinchain_metrology.records import (
    SweepRecord,
    read_table,
    records_to_rows,
    write_table,
)


def _sample_records():
    rng = np.random.default_rng(42)
    recs = []
    for k in range(20):
        recs.append(
            SweepRecord(
                model="XX",
                n=int(rng.integers(4, 100000)),
                j=float(rng.uniform(0.1, 3)),
                h=float(rng.normal()),
                gamma=0.0,
                beta=float(np.exp(rng.uniform(-20, 20))),
                quantity="qfi_h",
                value=float(rng.normal() * 10.0 ** rng.integers(-30, 30)),
                provenance="exact-free-fermion",
            )
        )
    return recs


def test_csv_json_bit_exact_roundtrip(tmp_path):
    recs = _sample_records()
    cols, rows = records_to_rows(recs)
    config = {"seed": 7, "note": "roundtrip", "grid": [0.0, 0.5]}
    csv_path = tmp_path / "out.csv"
    json_path = tmp_path / "out.json"
    write_table(csv_path, "csv", cols, rows, config)
    write_table(json_path, "json", cols, rows, config)

    cfg_c, cols_c, rows_c = read_table(csv_path)
    cfg_j, cols_j, rows_j = read_table(json_path)
    assert cols_c == cols_j == cols
    assert cfg_c == cfg_j == config
    for a, b, orig in zip(rows_c, rows_j, rows):
        for col in cols:
            assert a[col] == b[col] == orig[col]  # bit-exact floats


def test_estimator_column_only_when_present():
    recs = _sample_records()
    cols, _ = records_to_rows(recs)
    assert "estimator" not in cols
    recs.append(
        SweepRecord("XX", 8, 1.0, 0.5, 0.0, 2.0, "est", 1.0, "oracle", estimator="Jz")
    )
    cols, rows = records_to_rows(recs)
    assert cols[-1] == "estimator"
    assert rows[0]["estimator"] == ""
    assert rows[-1]["estimator"] == "Jz"


def test_bool_and_special_values(tmp_path):
    cols = ["x", "flag"]
    rows = [{"x": -math.inf, "flag": True}, {"x": 1.5, "flag": False}]
    path = tmp_path / "t.csv"
    write_table(path, "csv", cols, rows, {})
    _, _, back = read_table(path)
    assert back[0]["x"] == -math.inf
    assert back[0]["flag"] is True
    assert back[1]["flag"] is False


def test_bad_format(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "x", "xml", ["a"], [], {})
