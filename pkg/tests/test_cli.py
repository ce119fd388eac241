from __future__ import annotations

import json

import pytest

from dyadt1.cli import DEFAULTS, apply_overrides, load_config, main
from dyadt1.errors import ConfigError
from dyadt1.report import read_csv

SMALL_VERIFY = ["--set", "ks=[-1,0,1]", "--set", "ns=[1,2]", "--set", "ps=[2.0]",
                "--set", "J=6", "--set", "trials=3"]


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def column(path, name):
    _, header, rows = read_csv(path)
    i = header.index(name)
    return [float(r[i]) for r in rows]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_overrides_parse_json_and_nested_keys():
    cfg = apply_overrides({"a": 1, "p": {"x": 0}}, ["a=[1,2]", "p.x=2.5", "name=hello"])
    assert cfg == {"a": [1, 2], "p": {"x": 2.5}, "name": "hello"}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    with pytest.raises(ConfigError):
        apply_overrides({"a": 1}, ["a.b=1"])


def test_load_config_rejects_unknown_and_mismatched(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        load_config("reduce", None, ["bogus=1"])
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "represent", "J1": 2}))
    with pytest.raises(ConfigError, match="represent"):
        load_config("reduce", str(p), [])
    cfg = load_config("represent", str(p), ["J2=2"])
    assert cfg["J1"] == 2 and cfg["J2"] == 2 and cfg["command"] == "represent"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config("reduce", str(p), [])


def test_defaults_are_not_mutated():
    before = json.dumps(DEFAULTS, sort_keys=True)
    load_config("verify-square-fn", None, ["ks=[0]"])
    assert json.dumps(DEFAULTS, sort_keys=True) == before


@pytest.mark.parametrize("argv", [
    ["reduce", "--set", "bogus=1"],
    ["reduce", "--config", "/nonexistent/config.json"],
    ["reduce", "--set", "source=nonsense"],
    ["kernel-audit", "--set", "kernel=no_such_kernel"],
    ["t1-limit", "--set", "kernel=fefferman_stein"],
])
def test_configuration_errors_exit_3(tmp_path, argv):
    assert run(tmp_path, *argv) == 3


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def test_verify_square_fn_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "verify-square-fn", *SMALL_VERIFY) == 0
    assert run(b, "verify-square-fn", *SMALL_VERIFY, "--jobs", "2") == 0
    assert (a / "verify_square_fn.csv").read_bytes() == (b / "verify_square_fn.csv").read_bytes()


def test_verify_identity_cell_is_an_isometry(tmp_path):
    assert run(tmp_path, "verify-square-fn", "--set", "ks=[0]", "--set", "ns=[1]", "--set", "ps=[2.0]",
               "--set", "J=6") == 0
    ratio = column(tmp_path / "verify_square_fn.csv", "ratio")
    assert ratio[0] <= 1.0 + 1e-9


def test_verify_zero_input(tmp_path):
    assert run(tmp_path, "verify-square-fn", *SMALL_VERIFY, "--set", "input=zero") == 0
    assert set(column(tmp_path / "verify_square_fn.csv", "measured")) == {0.0}


def test_weak_type_small_grid(tmp_path):
    assert run(tmp_path, "weak-type", "--set", "ks=[-1,0,1]", "--set", "ns=[1,4]", "--set", "J=6",
               "--set", "trials=2") == 0
    assert max(column(tmp_path / "weak_type.csv", "ratio")) <= 10.0


def test_kernel_audit_zero_kernel(tmp_path):
    assert run(tmp_path, "kernel-audit", "--set", "kernel=zero", "--set", "samples=200") == 0
    rep = json.loads((tmp_path / "kernel_audit_zero.json").read_text())
    assert rep["passed"]


def test_kernel_audit_scaled_hilbert_passes(tmp_path):
    assert run(tmp_path, "kernel-audit", "--set", "params.scale=2", "--set", "samples=200") == 0


def test_kernel_audit_flags_abs_product(tmp_path):
    assert run(tmp_path, "kernel-audit", "--set", "kernel=abs_product", "--set", "samples=200") == 1
    rep = json.loads((tmp_path / "kernel_audit_abs_product.json").read_text())
    assert not rep["conditions"]["annulus_cancellation"]["passed"]
    assert not rep["passed"]


def test_bump_decay_zero_kernel_passes(tmp_path):
    assert run(tmp_path, "bump-decay", "--set", "kernel=zero", "--set", "es=[1,2]", "--set", "ms=[2,4]") == 0
    assert set(column(tmp_path / "bump_decay.csv", "value")) == {0.0}


@pytest.mark.parametrize("source", ["random", "zero", "identity", "classical"])
def test_reduce_sources(tmp_path, source):
    assert run(tmp_path, "reduce", "--set", f"source={source}") == 0
    rep = json.loads((tmp_path / "reduce.json").read_text())
    assert rep["max_residual"] <= 1e-10
    assert rep["fixed_point_change"] <= 1e-10
    if source == "classical":
        assert rep["round_trip_residual"] <= 1e-10
    after = column(tmp_path / "reduce.csv", "after")
    assert max(after) <= 1e-10


def test_represent_small(tmp_path):
    assert run(tmp_path, "represent", "--set", "operators=3", "--set", "pairs=5", "--set", "J1=3",
               "--set", "J2=3") == 0
    assert max(column(tmp_path / "represent.csv", "residual")) <= 1e-10


def test_t1_limit_default(tmp_path):
    assert run(tmp_path, "t1-limit", "--set", "kmax=8") == 0
    _, header, rows = read_csv(tmp_path / "t1_limit.csv")
    assert [int(r[0]) for r in rows] == list(range(1, 9))


def test_t1_limit_zero_kernel(tmp_path):
    assert run(tmp_path, "t1-limit", "--set", "kernel=zero", "--set", "kmax=4") == 0
    assert set(column(tmp_path / "t1_limit.csv", "value")) == {0.0}


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--version"])
    assert ei.value.code == 0
    assert "dyadt1" in capsys.readouterr().out
