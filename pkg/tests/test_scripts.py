"""Smoke runs of the experiment scripts at toy sizes."""
import dataclasses
import importlib.util
import json
import sys
from pathlib import Path

import pytest

from mrcknock.config import load_config

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def load(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    sys.modules[name] = mod
    spec.loader.exec_module(mod)
    return mod


@pytest.mark.parametrize("path", sorted((SCRIPTS / "configs").glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_run(path, tmp_path):
    cfg = load_config(path)
    small = dataclasses.replace(cfg, p=min(cfg.p, 20), n=max(60, 3 * min(cfg.p, 20)),
                                k=min(cfg.k, 6), replications=1)
    rc = load("run_config")
    toml = tmp_path / "c.toml"
    body = "\n".join(f"{k} = {json.dumps(v)}" for k, v in small.to_dict().items())
    toml.write_text(body + "\n")
    rc.main([str(toml), "--out", str(tmp_path / "o.csv")])
    assert (tmp_path / "o.csv").read_text().startswith("method,cov_kind,")


def test_smatrix_gap_script(capsys):
    load("smatrix_gap").main(["--ps", "5", "20", "--rhos", "0.5"])
    assert "rho=0.5" in capsys.readouterr().out


def test_mse_identity_script(capsys):
    load("mse_identity").main(["--reps", "20"])
    out = capsys.readouterr().out
    assert "mvr" in out and "sdp" in out
