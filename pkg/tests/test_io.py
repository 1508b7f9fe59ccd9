"""Deterministic JSON/CSV writers and the SVG plotter."""
import csv
import json
import math

import numpy as np

from kfl import io, svg


def test_dumps_sorted_and_full_precision():
    s = io.dumps({"b": 0.1, "a": [np.float64(1 / 3), np.int64(2), True, None], "c": {"z": 1, "y": "t"}})
    obj = json.loads(s)
    assert list(obj) == ["a", "b", "c"] and list(obj["c"]) == ["y", "z"]
    assert obj["a"][0] == 1 / 3 and obj["b"] == 0.1
    assert s == io.dumps(json.loads(s))


def test_dumps_nonfinite():
    s = io.dumps({"x": math.nan, "y": math.inf, "z": -math.inf})
    obj = json.loads(s)
    assert math.isnan(obj["x"]) and obj["y"] == math.inf and obj["z"] == -math.inf


def test_csv_union_of_columns(tmp_path):
    p = io.write_csv([{"a": 1, "b": 0.25}, {"a": 2, "c": [1, 2]}], tmp_path / "t.csv")
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["a", "b", "c"]
    assert rows[1] == ["1", "0.25", ""]
    assert float(rows[1][1]) == 0.25


def test_svg_plot(tmp_path):
    x = np.linspace(0, 1, 20)
    p = svg.plot([{"x": x, "y": x**2, "label": "a<b"}, {"x": x, "y": [math.nan] + list(x[1:]), "style": "points"}],
                 tmp_path / "p.svg", title="t & u", xlabel="x", ylabel="y")
    text = p.read_text()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    assert "a&lt;b" in text and "t &amp; u" in text
    assert text.count("<circle") == 19 and "<polyline" in text


def test_svg_constant_series(tmp_path):
    p = svg.plot([{"x": [1, 1], "y": [2, 2]}], tmp_path / "c.svg")
    assert "nan" not in p.read_text()
