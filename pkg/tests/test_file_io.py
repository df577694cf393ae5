import json
from pathlib import Path

import numpy as np
import pytest

from segretool import catalog
from segretool.errors import ConfigurationError
from segretool.file_io import csvio, jsonio, paths
from segretool.util import parse_complex, parse_point


@pytest.mark.parametrize(
    "text, value",
    [
        ("0.1", 0.1),
        ("-2i", -2j),
        ("1+0.5i", 1 + 0.5j),
        ("i", 1j),
        ("1 - i", 1 - 1j),
        ("1e-3+2j", 0.001 + 2j),
        ("-.5", -0.5),
    ],
)
def test_parse_complex(text: str, value: complex):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+", "2ii", "1,2"])
def test_parse_complex_rejects(text: str):
    with pytest.raises(ConfigurationError):
        parse_complex(text)


def test_parse_point():
    np.testing.assert_array_equal(parse_point("0.3, 1+i", 2), [0.3, 1 + 1j])
    with pytest.raises(ConfigurationError):
        parse_point("0.3, 1+i", 3)


def test_dumps_is_deterministic():
    payload = {"b": 1, "a": complex(1, 2), "c": [0.1, float("nan")], "d": np.array([1.5, 2.0])}
    expected = '{\n  "a": [1, 2],\n  "b": 1,\n  "c": [0.10000000000000001, null],\n  "d": [1.5, 2]\n}\n'
    assert jsonio.dumps(payload) == expected
    assert jsonio.dumps(dict(reversed(payload.items()))) == expected


def test_dumps_nested_structures_are_valid_json():
    payload = {"levels": [{"points": np.array([[1 + 1j, 2]]), "parents": [0]}], "flag": True, "none": None}
    data = json.loads(jsonio.dumps(payload))
    assert data["levels"][0]["points"] == [[[1, 1], [2, 0]]]
    assert data["flag"] is True and data["none"] is None


def test_export_json(tmp_path: Path):
    success, message = jsonio.export_json(tmp_path / "result.json", {"x": 1})
    assert success, message
    assert jsonio.load(tmp_path / "result.json") == {"x": 1}


def test_export_json_rejects_other_suffix(tmp_path: Path):
    success, message = jsonio.export_json(tmp_path / "result.txt", {"x": 1})
    assert not success
    assert "not a JSON file" in message
    assert not (tmp_path / "result.txt").exists()


def test_load_missing_file(tmp_path: Path):
    with pytest.raises(ConfigurationError):
        jsonio.load(tmp_path / "missing.json")


def test_complex_value_forms():
    assert jsonio.complex_value([1, 2]) == 1 + 2j
    assert jsonio.complex_value(3) == 3
    assert jsonio.complex_value("2-i") == 2 - 1j
    with pytest.raises(ConfigurationError):
        jsonio.complex_value(True)
    with pytest.raises(ConfigurationError):
        jsonio.point_value([1, 2], 3)


def test_surface_payload_reads_back():
    M = catalog.get("mlog").surface
    again = jsonio.read_surface(json.loads(jsonio.dumps(jsonio.surface_payload(M))))
    assert again.defining == M.defining
    assert again.phi == M.phi
    assert again.u1 == M.u1 and again.u2 == M.u2
    assert again.nonminimal


def test_read_surface_requires_fields():
    with pytest.raises(ConfigurationError, match="defining"):
        jsonio.read_surface({"n": 2, "u1": 0.5, "u2": 1})


def test_germ_payload_reads_back():
    germ = catalog.get("ex62").germs[0].build()
    again = jsonio.read_germ(json.loads(jsonio.dumps(jsonio.germ_payload(germ))), 3)
    P = germ.base + np.array([0.01, -0.01j, 0.002])
    np.testing.assert_allclose(again(P), germ(P), atol=1e-14)


def test_read_germ_with_signs():
    payload = {"components": ["z1", "w", "1"], "base": [0, 0.5], "radius": 0.2, "signs": [1]}
    germ = jsonio.read_germ(payload, 2)
    np.testing.assert_allclose(germ(np.array([0.1, 0.5])), [0.1, 0.5, 1])


def test_read_path_loop_and_waypoints():
    loop = jsonio.read_path({"loop": {"z0": [0.1, 0.0], "w_radius": 1.0, "turns": 1}}, 2)
    np.testing.assert_allclose(loop.start, [0.1, 1.0], atol=1e-15)
    np.testing.assert_allclose(loop.waypoints[0], loop.waypoints[-1], atol=1e-12)
    loop = jsonio.read_path({"loop": {"z0": [0.1], "radius": 1.0, "turns": 1}}, 2)
    np.testing.assert_allclose(loop.waypoints[0], loop.waypoints[-1], atol=1e-12)
    straight = jsonio.read_path({"waypoints": [[0, 1], [0.1, "1+0.1i"]]}, 2)
    assert len(straight.waypoints) == 2
    with pytest.raises(ConfigurationError):
        jsonio.read_path({"waypoints": [[0, 1]]}, 2)
    with pytest.raises(ConfigurationError, match="w_radius"):
        jsonio.read_path({"loop": {"z0": [0]}}, 2)


def test_csv_dumps():
    assert csvio.dumps(["a", "b"], [["1", "2"], ["3", "x,y"]]) == 'a,b\n1,2\n3,"x,y"\n'


def test_export_csv(tmp_path: Path):
    success, message = csvio.export_csv(tmp_path / "rows.csv", ["a"], [["1"]])
    assert success, message
    assert (tmp_path / "rows.csv").read_text() == "a\n1\n"
    success, _ = csvio.export_csv(tmp_path / "rows.json", ["a"], [["1"]])
    assert not success


def test_exports_create_missing_directories(tmp_path: Path):
    success, message = jsonio.export_json(tmp_path / "runs" / "seed-1" / "result.json", {"x": 1})
    assert success, message
    assert jsonio.load(tmp_path / "runs" / "seed-1" / "result.json") == {"x": 1}
    success, message = csvio.export_csv(tmp_path / "plots" / "rows.csv", ["a"], [["1"]])
    assert success, message
    assert (tmp_path / "plots" / "rows.csv").read_text() == "a\n1\n"


def test_paths(tmp_path: Path):
    assert paths.with_format_suffix("out/result.json", "csv") == Path("out/result.csv")
    assert paths.with_format_suffix("result", ".JSON") == Path("result.json")
    file = tmp_path / "a.json"
    assert not paths.path_exists(file)
    file.write_text("{}")
    assert paths.path_exists(file)
    assert not paths.path_exists(tmp_path)
    assert paths.get_abs_path("~").is_absolute()
