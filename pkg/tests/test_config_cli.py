"""Config parsing, hashing, and the command line entry points."""

import json
import os
import shutil

import numpy as np
import pytest

from warpmin.cli import main
from warpmin.config import (
    DEFAULT_CONFIG,
    RunConfig,
    config_hash,
    parse_config,
)
from warpmin.errors import ConfigError


def test_parse_comments_and_coercion():
    cfg = parse_config(
        """
        # leading comment
        profile = quarter-cosine   # trailing comment
        n_list = 2                 # single entry still a tuple
        eps0 = 0.25
        rings = 30
        """
    )
    assert cfg.profile == "quarter-cosine"
    assert cfg.n_list == (2,)
    assert cfg.eps0 == 0.25
    assert isinstance(cfg.rings, int) and cfg.rings == 30
    # untouched keys fall back to defaults
    assert cfg.max_iter == RunConfig().max_iter


def test_parse_rejects_duplicates():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("rings = 24\nrings = 32\n")


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("ringz = 24\n")


def test_parse_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config("rings = ten\n")
    with pytest.raises(ConfigError):
        parse_config("eps0 = many\n")
    with pytest.raises(ConfigError):
        parse_config("n_list = a,b\n")
    with pytest.raises(ConfigError, match="key=value"):
        parse_config("just a line\n")


def test_default_config_is_default():
    assert parse_config(DEFAULT_CONFIG) == RunConfig()


def test_hash_ignores_threads():
    a = RunConfig(threads=1)
    b = RunConfig(threads=8)
    assert config_hash(a) == config_hash(b)


def test_hash_tracks_semantics():
    a = RunConfig()
    b = RunConfig(eps0=0.15)
    c = RunConfig(n_list=(1, 2))
    hashes = {config_hash(a), config_hash(b), config_hash(c)}
    assert len(hashes) == 3
    for h in hashes:
        assert len(h) == 16
        assert set(h) <= set("0123456789abcdef")
    assert config_hash(RunConfig()) == config_hash(RunConfig())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"profile": "bogus"},
        {"profile": "cosine"},  # cosine needs coefficients
        {"n_list": ()},
        {"n_list": (0,)},
        {"n_list": (1.5,)},
        {"eps0": 0.5},  # above pi/8
        {"eps0": 0.0},
        {"halvings": -1},
        {"rings": 4},
        {"levels_per_wrap": 4},
        {"max_iter": 0},
        {"grad_tol": 0.0},
        {"mc_tol": -1.0},
        {"delta": 3.5},
        {"phi_star": 0.05},
        {"monotone_planes": 0},
        {"seed": -1},
        {"threads": 0},
    ],
)
def test_runconfig_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_profile_builders():
    assert RunConfig().build_profile().name == "quarter-cosine"
    assert RunConfig(profile="product").build_profile().mode == "product"
    cos = RunConfig(profile="cosine", cosine_coeffs=(1.25, -0.25))
    assert cos.build_profile().omega(0.0) == pytest.approx(1.0)


def test_runconfig_adapters():
    cfg = RunConfig(eps0=0.2, halvings=2, max_iter=123, grad_tol=1e-3, delta=2.5)
    sched = cfg.schedule()
    assert sched.eps0 == 0.2 and sched.halvings == 2
    assert cfg.solver().max_iter == 123
    assert cfg.solver().grad_tol == 1e-3
    assert cfg.transversal().delta == 2.5
    d = cfg.to_dict()
    assert d["n_list"] == [1, 2, 3]  # tuples flatten for json


def test_verify_metric_passes(tmp_path, capsys):
    assert main(["verify-metric", "--out", str(tmp_path)]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("PASS")]
    assert len(lines) == 6
    report = json.loads((tmp_path / "metric_report.json").read_text())
    assert report["passed"] is True
    assert len(report["checks"]) == 6
    assert report["profile"] == "quarter-cosine"


def test_verify_metric_flags_bad_profile(tmp_path, capsys):
    cfgp = tmp_path / "bad.cfg"
    cfgp.write_text("profile = cosine\ncosine_coeffs = 1.25,-0.05,-0.22\n")
    assert main(["verify-metric", "--config", str(cfgp), "--out", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    report = json.loads((tmp_path / "metric_report.json").read_text())
    assert report["passed"] is False


def test_run_dir_artifacts(tiny_run_dir):
    tiny_run_dir = tiny_run_dir["dir"]
    assert (tiny_run_dir / "manifest.json").exists()
    report = json.loads((tiny_run_dir / "report.json").read_text())
    assert report["complete"] is True
    rec = report["records"][0]
    assert rec["census"]["two_sided"] is True
    assert rec["trace"]["fraction"] == 1.0


def test_diagnose_recomputes(tiny_run_dir, capsys):
    tiny_run_dir = tiny_run_dir["dir"]
    before = json.loads((tiny_run_dir / "report.json").read_text())
    assert main(["diagnose", "--out", str(tiny_run_dir)]) == 0
    after = json.loads((tiny_run_dir / "report.json").read_text())
    assert after["records"] == before["records"]


def test_diagnose_missing_manifest(tmp_path, capsys):
    assert main(["diagnose", "--out", str(tmp_path)]) == 3
    assert "manifest" in capsys.readouterr().err


def test_export_all(tiny_run_dir, tmp_path, capsys):
    tiny_run_dir = tiny_run_dir["dir"]
    rd = tmp_path / "run"
    shutil.copytree(tiny_run_dir, rd)
    assert main(["export", "--out", str(rd)]) == 0
    dest = rd / "export"
    objs = sorted(p.name for p in dest.glob("*.obj"))
    assert len(objs) == 4  # solved, core, projected, assembled
    for name in objs:
        assert (dest / name).with_suffix(".json").exists()
    assert list(dest.glob("*.csv"))
    payload = json.loads((dest / "export.json").read_text())
    assert "manifest" in payload and "report" in payload


def test_export_format_filter(tiny_run_dir, tmp_path, capsys):
    tiny_run_dir = tiny_run_dir["dir"]
    rd = tmp_path / "run"
    shutil.copytree(tiny_run_dir, rd)
    assert main(["export", "--out", str(rd), "--format", "csv"]) == 0
    dest = rd / "export"
    assert list(dest.glob("*.csv"))
    assert not list(dest.glob("*.obj"))
    assert not (dest / "export.json").exists()


def test_export_missing_manifest(tmp_path, capsys):
    assert main(["export", "--out", str(tmp_path)]) == 3


def test_run_rejects_bad_config(tmp_path, capsys):
    cfgp = tmp_path / "bad.cfg"
    cfgp.write_text("eps0 = 2.0\n")
    assert main(["run", "--config", str(cfgp), "--out", str(tmp_path / "r")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["export", "--format", "bogus"])
    assert exc.value.code == 1


def test_bad_thread_count(capsys):
    assert main(["verify-metric", "--threads", "0"]) == 1


def test_threads_flag_sets_env(tmp_path, capsys):
    main(["verify-metric", "--threads", "2", "--out", str(tmp_path)])
    assert os.environ["OMP_NUM_THREADS"] == "2"
