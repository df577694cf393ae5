import json
from pathlib import Path

import pytest

from segretool import catalog
from segretool.cli import main
from segretool.file_io import jsonio


def _run(capsys, *argv: str) -> tuple[int, dict]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else {}


def test_catalog_listing(capsys):
    code, payload = _run(capsys, "catalog")
    assert code == 0
    assert "ex62" in payload["entries"]
    assert "km(m)" in payload["families"]


def test_catalog_export(tmp_path: Path):
    assert main(["catalog", "--export", "mlog", "--output", str(tmp_path / "mlog.json")]) == 0
    payload = jsonio.load(tmp_path / "mlog.json")
    assert payload["surface"]["name"] == "mlog"


def test_levi(capsys):
    code, payload = _run(capsys, "levi", "--catalog", "ex62", "--point", "0,0,-0.1")
    assert code == 0
    assert payload["signature"] == [1, 1]


def test_levi_from_surface_file(tmp_path: Path, capsys):
    surface = tmp_path / "sphere.json"
    surface.write_text(jsonio.dumps(jsonio.surface_payload(catalog.get("quadric(1,0)").surface)))
    code, payload = _run(capsys, "levi", "--surface", str(surface), "--point", "0, 0.5")
    assert code == 0
    assert len(payload["eigenvalues"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["levi"],
        ["levi", "--catalog", "nope", "--point", "0,1"],
        ["levi", "--catalog", "mlog", "--point", "abc"],
        ["levi", "--catalog", "mlog", "--point", "0,1", "--tol", "newton"],
        ["levi", "--catalog", "mlog", "--point", "0,1", "--tol", "bogus=1"],
        ["levi", "--catalog", "mlog", "--point", "0,1", "--format", "csv"],
        ["levi", "--point", "0,1"],
        ["levi", "--surface", "missing.json", "--point", "0,1"],
    ],
)
def test_usage_errors(argv: list[str]):
    assert main(argv) == 2


def test_numerical_failure(capsys):
    assert main(["levi", "--catalog", "mlog", "--point", "0.3,0"]) == 1
    assert capsys.readouterr().out == ""


def test_segre(capsys):
    code, payload = _run(capsys, "segre", "--catalog", "quadric(1,0)", "--point", "0.1,0.3", "--count", "3")
    assert code == 0
    assert payload["rank"] == 2
    assert len(payload["graph"]) == 3


def test_cloud_csv(tmp_path: Path):
    argv = ["cloud", "--catalog", "mlog", "--point", "0,1", "--depth", "1", "--count", "5", "--csv",
            "--output", str(tmp_path / "cloud")]
    assert main(argv) == 0
    lines = (tmp_path / "cloud.csv").read_text().splitlines()
    assert lines[0] == "depth,index,parent,z1_re,z1_im,w_re,w_im"
    assert lines[1].startswith("0,0,,")
    assert len(lines) >= 3


def test_output_is_reproducible(capsys):
    argv = ["cloud", "--catalog", "quadric(1,0)", "--point", "0.1,0.3", "--depth", "2", "--count", "10",
            "--seed", "5"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_chain(capsys):
    code, payload = _run(capsys, "chain", "--catalog", "quadric(1,0)", "--point", "0.1,0.3",
                         "--target=-0.2i,0.4+0.1i")
    assert code == 0
    assert payload["steps"] == 2


def test_continue(capsys):
    code, payload = _run(capsys, "continue", "--catalog", "mlog", "--target", "0.05,1.1")
    assert code == 0
    assert payload["passed"]
    assert payload["germ"]["components"] == ["z1", "Lw", "1.0"]


def test_monodromy(capsys):
    code, payload = _run(capsys, "monodromy", "--catalog", "km(1)")
    assert code == 0
    assert payload["finite_order"] == 1
    assert payload["turns"] == 1
    assert payload["formula"]["deviation"] < 1e-8


def test_monodromy_with_germ_file(tmp_path: Path, capsys):
    germ = tmp_path / "germ.json"
    germ.write_text(jsonio.dumps(catalog.export("mlog")["germs"][0]))
    code, payload = _run(capsys, "monodromy", "--catalog", "mlog", "--germ", str(germ), "--loop-turns", "2")
    assert code == 0
    assert payload["turns"] == 2
    assert payload["finite_order"] is None


def test_monodromy_formula_failure_exits_1(capsys):
    code, payload = _run(capsys, "monodromy", "--catalog", "mlog", "--tol", "step_consistency=-1")
    assert code == 1
    assert payload["passed"] is False


def test_transfer(capsys):
    code, payload = _run(capsys, "transfer", "--catalog", "mlog")
    assert code == 0
    assert payload["passed"] is True
    assert payload["plus"]["signature"] == [1, 0]


def test_transfer_single_valued_fails(capsys):
    assert main(["transfer", "--catalog", "mlog", "--single-valued"]) == 1


def test_kroot(capsys):
    code, payload = _run(capsys, "kroot", "--catalog", "mlog", "--k", "2")
    assert code == 0
    assert payload["name"] == "mlog-root2"


@pytest.mark.slow
def test_verify(capsys):
    code, payload = _run(capsys, "verify", "--catalog", "quadric(1,0)")
    assert code == 0
    assert payload["passed"]


def test_verify_rejects_surface_file(tmp_path: Path):
    surface = tmp_path / "sphere.json"
    surface.write_text(jsonio.dumps(jsonio.surface_payload(catalog.get("quadric(1,0)").surface)))
    assert main(["verify", "--surface", str(surface)]) == 2
