"""Tests for the benchmark sweep runner."""

import asyncio
import csv
import json
import logging
import math

import pytest
from pydantic import ValidationError

from src.benchmark import (
    CSV_FIELDS,
    BenchSweep,
    format_cell,
    generate_encoding_summary,
    load_sweep,
    run_benchmark,
)


def _row(encoding, prob, min_distance, optimum, qubits=15, mode="reset"):
    return {
        "n": 6,
        "encoding": encoding,
        "mode": mode,
        "seed": 0,
        "valid_probability": prob,
        "min_distance": min_distance,
        "optimum_reference": optimum,
        "qubits": qubits,
    }


def test_generate_encoding_summary_logic(caplog, tmp_path):
    """Test the summary statistics implicitly by reading logs and the markdown file."""
    rows = [
        _row("slack", 0.5, 3.0, 3.0, qubits=17),
        _row("slack", 0.3, None, 3.0, qubits=19),
        _row("unbalanced", 0.8, 3.5, 3.0),
        _row("unbalanced", 0.6, 3.0, 3.0, mode="cumulative"),
    ]
    md_path = tmp_path / "report.md"

    with caplog.at_level(logging.INFO):
        md = generate_encoding_summary(rows, str(md_path))

    output = caplog.text
    assert "ENCODING COMPARISON" in output
    assert "Encoding: slack / reset constraints (2 runs)" in output
    assert "Encoding: unbalanced / reset constraints (1 runs)" in output
    assert "Encoding: unbalanced / cumulative constraints (1 runs)" in output
    assert "Encoding: slack / cumulative" not in output
    assert "Mean Valid Probability:  0.4000" in output
    assert "Optimal Tours Found:     1" in output
    assert "Runs Without Valid Tour: 1" in output
    assert "Mean Qubits:             18.0" in output
    assert "Mean Gap to Optimum:     0.5000" in output
    assert "Encoding: relaxation" not in output
    assert output.index("unbalanced / reset") < output.index("unbalanced / cumulative")

    assert md_path.read_text() == md
    assert md.startswith("# Sub-tour Elimination Benchmark Report")


def test_format_cell():
    assert format_cell(1 / 3) == "0.333333333333"
    assert format_cell(math.inf) == ""
    assert format_cell(None) == ""
    assert format_cell(6) == "6"
    assert format_cell("slack") == "slack"


def test_sweep_validation():
    with pytest.raises(ValidationError):
        BenchSweep(cities=[2, 5])
    with pytest.raises(ValidationError):
        BenchSweep(encodings=["dense"])
    with pytest.raises(ValidationError):
        BenchSweep(modes=[])
    with pytest.raises(ValidationError):
        BenchSweep(modes=["sometimes"])
    assert BenchSweep(modes=["cumulative", "reset", "cumulative"]).modes == ["cumulative", "reset"]


def test_load_sweep_overrides(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({"cities": [5], "reads": 10, "solver": "exact", "modes": ["reset", "cumulative"]}))

    sweep = load_sweep(str(path), reads=20, seeds=None)
    assert sweep.modes == ["reset", "cumulative"]

    assert sweep.cities == [5]
    assert sweep.reads == 20
    assert sweep.seeds == [0]
    assert sweep.solver == "exact"


def test_run_benchmark_writes_csv(tmp_path):
    sweep = BenchSweep(
        cities=[5], encodings=["slack", "unbalanced"], modes=["reset", "cumulative"], seeds=[0, 1],
        reads=1024, solver="exact",
    )
    out = tmp_path / "results.csv"
    md = tmp_path / "report.md"

    rows = asyncio.run(run_benchmark(sweep, str(out), str(md)))

    assert [(r["encoding"], r["mode"], r["seed"]) for r in rows] == [
        (enc, mode, seed)
        for enc in ("slack", "unbalanced")
        for mode in ("reset", "cumulative")
        for seed in (0, 1)
    ]
    with open(out, newline="") as f:
        lines = list(csv.DictReader(f))
    assert list(lines[0].keys()) == CSV_FIELDS
    assert len(lines) == 8
    assert {line["mode"] for line in lines} == {"reset", "cumulative"}
    for line in lines:
        assert line["n"] == "5"
        assert line["iterations_used"] == "1"
        assert float(line["min_distance"]) == pytest.approx(float(line["optimum_reference"]))
    assert md.exists()
