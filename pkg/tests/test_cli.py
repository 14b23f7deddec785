"""Command line: generated flags, config files and the SEED override."""
from __future__ import annotations

import json

import pytest

from sosputil import SospExperiments
from sosputil.cli import build_arg_parser, main, spec_from_args


@pytest.fixture
def lib():
    return SospExperiments()


def test_flags_come_from_the_schema(lib):
    parser = build_arg_parser(lib)
    args = parser.parse_args(["run-zpsgd", "--dim", "3", "--eps", "1/10", "--x0", "0.1", "0.2", "0.3", "--random-start"])
    spec = spec_from_args(args, lib, environ={})
    assert spec.kind == "zpsgd-run"
    assert spec.params == {"d": "3", "eps": "1/10", "x0": ["0.1", "0.2", "0.3"], "random_start": True}
    assert spec.output_path == "zpsgd-run"
    assert spec.seed == 0


def test_seed_variable_wins(lib):
    args = build_arg_parser(lib).parse_args(["gd-run", "--seed", "3"])
    assert spec_from_args(args, lib, environ={}).seed == 3
    assert spec_from_args(args, lib, environ={"SEED": "9"}).seed == 9


def test_config_file_then_flags(lib, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"kind": "zpsgd-run", "params": {"iters": 5, "eps": 0.2}, "seed": 4, "workers": 2}))
    args = build_arg_parser(lib).parse_args(["zpsgd-run", "--config", str(config), "--iters", "7"])
    spec = spec_from_args(args, lib, environ={})
    assert spec.params == {"iters": "7", "eps": 0.2}
    assert (spec.seed, spec.workers) == (4, 2)

    flat = tmp_path / "flat.json"
    flat.write_text(json.dumps({"iters": 5, "seed": 11}))
    args = build_arg_parser(lib).parse_args(["zpsgd-run", "--config", str(flat)])
    spec = spec_from_args(args, lib, environ={})
    assert spec.params == {"iters": 5}
    assert spec.seed == 11


def test_int_run_writes_artifacts(tmp_path, monkeypatch):
    monkeypatch.delenv("SEED", raising=False)
    out = tmp_path / "r"
    argv = ["run-zpsgd", "--dim", "2", "--eps", "0.1", "--seed", "7", "--iters", "5", "--batch-m", "10", "-o", str(out)]
    assert main(argv) == 0
    summary = json.loads((tmp_path / "r.summary.json").read_text())
    assert summary["spec"]["seed"] == 7
    assert summary["resolved"]["iters"] == 5
    assert (tmp_path / "r.csv").exists()
    assert json.loads((tmp_path / "r.meta.json").read_text())["stream_ids"] == [1]


def test_int_schema_subcommand(capsys):
    assert main(["schema"]) == 0
    names = {kind["name"] for kind in json.loads(capsys.readouterr().out)}
    assert {"zpsgd-run", "hard-instance", "landscape", "exp-search"} <= names


def test_int_bad_config_is_an_error_document(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["gd-run", "--config", str(broken), "-o", str(tmp_path / "g")]) == 2
    doc = json.loads(capsys.readouterr().out)
    assert doc["error"] == "ConfigError"
    assert doc["kind"] == "gd-run"


def test_int_bad_parameter_exits_two(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEED", raising=False)
    assert main(["gd-run", "--eps", "-1", "-o", str(tmp_path / "g")]) == 2
    assert (tmp_path / "g.error.json").exists()
    assert json.loads(capsys.readouterr().out)["error"] == "ConversionFromError"


def test_int_unknown_kind_is_rejected_by_the_parser():
    with pytest.raises(SystemExit):
        main(["not-a-kind"])


@pytest.mark.parametrize("value", ["abc", "1/0"])
def test_int_unparseable_numbers_are_error_documents(value, tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEED", raising=False)
    out = tmp_path / "z"
    assert main(["run-zpsgd", "--eps", value, "-o", str(out)]) == 2
    doc = json.loads((tmp_path / "z.error.json").read_text())
    assert doc["error"] == "ConversionFromError"
    assert doc["kind"] == "zpsgd-run"
    assert json.loads(capsys.readouterr().out) == doc
