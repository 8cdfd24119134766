"""The command-line front end: subcommands, configs, reports and exit codes."""

import json

import pytest

from heatbesov.cli import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    bundled_config,
    bundled_names,
    load_config,
    main,
)
from heatbesov.errors import ConfigError
from heatbesov.io import read_report


def _run(tmp_path, *argv):
    code = main(list(argv))
    return code, (read_report(tmp_path / "report.json") if (tmp_path / "report.json").exists() else None)


def test_bundled_configs_validate():
    names = bundled_names()
    assert "path64" in names and "grid16" in names
    for name in names:
        load_config(bundled_config(name)).validate()


def test_space_single_point(tmp_path):
    code, rep = _run(tmp_path, "space", "--config", "point", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert rep["space"]["geometry"]["n"] == 0
    assert rep["space"]["degenerate"] is True


def test_norms_of_zero(tmp_path):
    code, rep = _run(tmp_path, "norms", "--config", "tiny4", "--out", str(tmp_path), "--function", "zero()")
    assert code == EXIT_OK
    assert rep["norms"]
    assert all(row["value"] == 0.0 for row in rep["norms"])


def test_norms_from_file(tmp_path):
    (tmp_path / "f.txt").write_text("1\n0\n0\n2\n")
    code, rep = _run(tmp_path, "norms", "--config", "tiny4", "--out", str(tmp_path),
                     "--function", f"file({tmp_path / 'f.txt'})")
    assert code == EXIT_OK
    assert all(row["value"] > 0 for row in rep["norms"])


def test_malformed_config_is_a_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[space]\nkind = path\nsize = many\n")
    assert main(["space", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "space" in err and "size" in err


def test_unknown_section_is_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[spaces]\nkind = path\n")
    assert main(["space", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE


def test_bad_norm_params_are_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[norms]\np = 0\n")
    assert main(["norms", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_USAGE


def test_config_overrides():
    cfg = load_config(bundled_config("path64"))
    assert cfg.with_overrides({"run": {"seed": "7"}}).seed() == 7
    with pytest.raises(ConfigError):
        cfg.with_overrides({"nowhere": {"x": "1"}})
    assert RunConfig.from_mapping({}).text("space", "kind") == "path"


def test_verify_point_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", "point", "--seed", "7", "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--config", "point", "--seed", "7", "--out", str(b)]) == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_verify_jobs_do_not_change_values(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", "two-point", "--jobs", "1", "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--config", "two-point", "--jobs", "3", "--out", str(b)]) == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_embedded_config_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", "point", "--seed", "3", "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--config", str(a / "report.json"), "--out", str(b)]) == EXIT_OK
    ra, rb = read_report(a / "report.json"), read_report(b / "report.json")
    assert ra["config"] == rb["config"]
    assert [c["measured_constant"] for c in ra["checks"]] == [c["measured_constant"] for c in rb["checks"]]


def test_report_aggregates(tmp_path):
    a, out = tmp_path / "a", tmp_path / "agg"
    main(["space", "--config", "point", "--out", str(a)])
    code = main(["report", str(a / "report.json"), "--out", str(out)])
    assert code == EXIT_OK
    rep = read_report(out / "report.json")
    assert rep["reports"][0]["command"] == "space"


def test_report_rejects_foreign_json(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"hello": 1}))
    assert main(["report", str(tmp_path / "x.json"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_failed_check_sets_exit_code(tmp_path):
    cfg = tmp_path / "strict.ini"
    cfg.write_text(
        "[space]\nkind = path\nsize = 16\n"
        "[verify]\nchecks = calderon\nrefine = off\n"
        "[filters]\ncalderon = littlewood\n"
    )
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_FAILED


def test_kernels_csv(tmp_path):
    cfg = tmp_path / "k.ini"
    cfg.write_text("[space]\nkind = path\nsize = 5\n[output]\nkernels = true\nkernel_times = 0.1, 1\n")
    assert main(["space", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "kernels.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 25


def test_configs_subcommand(capsys):
    assert main(["configs"]) == EXIT_OK
    assert "path64" in capsys.readouterr().out.split()
