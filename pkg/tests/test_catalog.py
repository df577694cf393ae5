import json

import numpy as np
import pytest

from segretool import catalog, hypersurface
from segretool.continuation import validate_germ
from segretool.errors import ConfigurationError
from segretool.file_io import jsonio
from segretool.report import Report

ENTRIES = ["mlog", "malpha(0.3)", "malpha(0.5)", "km(1)", "km(2)", "ex62", "quadric(1,0)"]


def test_list_entries():
    assert [entry.name for entry in catalog.list_entries()] == [
        "mlog", "malpha(0.3)", "malpha(0.5)", "km(1)", "km(2)", "ex62", "quadric(1,0,2)",
    ]


@pytest.mark.parametrize("name", ["nope", "km", "km(x)", "km(0)", "malpha(-1)", "quadric(1,1,5)", "mlog(1)", ""])
def test_unknown_or_malformed_names(name: str):
    with pytest.raises(ConfigurationError):
        catalog.get(name)


def test_names_are_parsed_loosely():
    assert catalog.get(" km( 2 ) ").name == "km(2)"
    assert catalog.get("quadric(2,1)").surface.n == 4


def test_finite_orders_of_malpha():
    assert catalog.get("malpha(0.25)").expected.finite_order == 4
    assert catalog.get("malpha(0.3)").expected.finite_order == 10
    assert catalog.get("malpha(0.7071067811865476)").expected.finite_order is None


@pytest.mark.parametrize("name", ENTRIES)
def test_expected_levi_signatures(name: str):
    entry = catalog.get(name)
    for point, signature in entry.expected.levi:
        assert hypersurface.levi_signature(entry.surface, point) == signature


@pytest.mark.parametrize("name", ENTRIES)
def test_germs_are_valid(name: str):
    entry = catalog.get(name)
    for spec in entry.germs:
        validate_germ(entry.surface, spec.build())


def test_surfaces_contain_x():
    for name in ENTRIES:
        M = catalog.get(name).surface
        if M.nonminimal:
            z = np.array([0.1 + 0.2j] * (M.n - 1))
            assert abs(M.rho(np.append(z, 0), np.append(z, 0))) < 1e-12


def test_export_reads_back():
    payload = json.loads(jsonio.dumps(catalog.export("ex62")))
    M = jsonio.read_surface(payload["surface"])
    assert M.n == 3
    germ = jsonio.read_germ(payload["germs"][0], M.n)
    validate_germ(M, germ)


def test_report():
    report = Report("demo")
    report.report("INFO", "started")
    assert report.check("first", True)
    assert report.passed
    assert not report.check("second", False, "off by one")
    assert report.failures == ["second: off by one"]
    assert report.as_dict() == {
        "name": "demo",
        "passed": False,
        "messages": [
            {"kind": "INFO", "message": "started"},
            {"kind": "PASS", "message": "first"},
            {"kind": "FAIL", "message": "second: off by one"},
        ],
    }


@pytest.mark.slow
@pytest.mark.parametrize("name", ["quadric(1,0)", "km(1)", "mlog"])
def test_verify(name: str, rng):
    report = catalog.verify(name, rng)
    assert report.passed, report.failures
