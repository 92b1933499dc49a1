import subprocess
import sys

import numpy as np
import pytest

from mrcknock import cli
from mrcknock.covariance import equicorrelated


def save(path, M):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")
    return str(path)


@pytest.fixture
def design(tmp_path):
    rng = np.random.default_rng(0)
    p, n = 6, 80
    sigma = equicorrelated(p, 0.4)
    X = rng.normal(size=(n, p)) @ np.linalg.cholesky(sigma).T
    y = 3 * X[:, 0] - 3 * X[:, 1] + rng.normal(size=n)
    return {
        "sigma": save(tmp_path / "sigma.csv", sigma),
        "x": save(tmp_path / "x.csv", X),
        "y": save(tmp_path / "y.csv", y[:, None]),
        "dir": tmp_path,
        "p": p,
    }


def test_smatrix_equi(design):
    out = design["dir"] / "s.csv"
    assert cli.main(["smatrix", "--sigma", design["sigma"], "--method", "sdp", "--out", str(out)]) == 0
    s = cli.read_vector(out)
    np.testing.assert_allclose(s, min(1.0, 2 - 2 * 0.4), atol=1e-3)  # s is capped at 1


def test_smatrix_gamma_and_blocks(design):
    full = design["dir"] / "full.csv"
    half = design["dir"] / "half.csv"
    blk = design["dir"] / "blk.csv"
    cli.main(["smatrix", "--sigma", design["sigma"], "--method", "mvr", "--out", str(full)])
    cli.main(["smatrix", "--sigma", design["sigma"], "--method", "mvr", "--gamma", "0.5", "--out", str(half)])
    assert cli.main(["smatrix", "--sigma", design["sigma"], "--method", "me",
                     "--block-size", "3", "--out", str(blk)]) == 0
    np.testing.assert_allclose(cli.read_vector(half), 0.5 * cli.read_vector(full), rtol=1e-12)
    assert cli.read_vector(blk).shape == (design["p"],)


def test_smatrix_block_size_rejected_for_sdp(design, capsys):
    rc = cli.main(["smatrix", "--sigma", design["sigma"], "--method", "sdp", "--block-size", "2",
                   "--out", str(design["dir"] / "x.out")])
    assert rc == cli.EXIT_USAGE
    assert "block-size" in capsys.readouterr().err


def test_smatrix_indefinite_input(tmp_path):
    sigma = save(tmp_path / "bad.csv", [[1.0, 2.0], [2.0, 1.0]])
    rc = cli.main(["smatrix", "--sigma", sigma, "--method", "mvr", "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_NUMERIC


def test_missing_file(tmp_path):
    rc = cli.main(["smatrix", "--sigma", str(tmp_path / "nope.csv"), "--method", "mvr",
                   "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_USAGE


@pytest.mark.parametrize("kind", ["mx", "second", "fixedx"])
def test_sample_then_filter(design, kind):
    d = design["dir"]
    s_file = d / "s.csv"
    if kind == "fixedx":
        X = cli.read_matrix(design["x"])
        X = X / np.linalg.norm(X, axis=0)
        design["x"] = save(d / "xn.csv", X)
        save(d / "gram.csv", X.T @ X)
        cli.main(["smatrix", "--sigma", str(d / "gram.csv"), "--method", "mvr", "--out", str(s_file)])
    else:
        cli.main(["smatrix", "--sigma", design["sigma"], "--method", "mvr", "--out", str(s_file)])
    xk = d / "xk.csv"
    rc = cli.main(["sample", "--x", design["x"], "--sigma", design["sigma"], "--s", str(s_file),
                   "--kind", kind, "--seed", "3", "--out", str(xk)])
    assert rc == 0
    assert cli.read_matrix(xk).shape == cli.read_matrix(design["x"]).shape
    out = d / "w.csv"
    rc = cli.main(["filter", "--x", design["x"], "--xk", str(xk), "--y", design["y"],
                   "--stat", "lcd", "--q", "0.3", "--seed", "1", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# threshold=") and " selected=" in lines[0]
    assert len(lines) == design["p"] + 1
    idx = [int(line.split(",")[0]) for line in lines[1:]]
    assert idx == list(range(design["p"]))


def test_sample_is_seeded(design):
    d = design["dir"]
    cli.main(["smatrix", "--sigma", design["sigma"], "--method", "mvr", "--out", str(d / "s.csv")])
    outs = []
    for name in ("a", "b"):
        cli.main(["sample", "--x", design["x"], "--sigma", design["sigma"], "--s", str(d / "s.csv"),
                  "--kind", "mx", "--seed", "7", "--out", str(d / name)])
        outs.append((d / name).read_bytes())
    assert outs[0] == outs[1]


def test_sample_mx_needs_sigma(design):
    d = design["dir"]
    save(d / "s.csv", np.full(design["p"], 0.5))
    rc = cli.main(["sample", "--x", design["x"], "--s", str(d / "s.csv"), "--kind", "mx",
                   "--out", str(d / "o")])
    assert rc == cli.EXIT_USAGE


def test_filter_bad_q(design):
    d = design["dir"]
    rc = cli.main(["filter", "--x", design["x"], "--xk", design["x"], "--y", design["y"],
                   "--q", "1.5", "--out", str(d / "o")])
    assert rc == cli.EXIT_USAGE


CONFIG = """
p = 8
n = 50
k = 2
coef_size = 2.0
cov_kind = "ar1"
method = ["mvr", "sdp"]
q = [0.1, 0.2]
replications = 3
base_seed = 4
"""


def test_simulate_is_byte_reproducible(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(a), "--no-timing"]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(b), "--no-timing",
                     "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 3 * 2 * 2


def test_simulate_seed_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["simulate", "--config", str(cfg), "--out", str(a), "--no-timing"])
    cli.main(["simulate", "--config", str(cfg), "--out", str(b), "--no-timing", "--seed", "5"])
    assert a.read_bytes() != b.read_bytes()


def test_simulate_config_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG + "unknown_key = 1\n")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "none.toml"),
                     "--out", str(tmp_path / "o.csv")]) == 2


def test_simulate_failed_replications(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG.replace("n = 50", "n = 6") + 'cov_estimation = "mle"\n')
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 3
    assert out.exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mrcknock", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("smatrix", "sample", "filter", "simulate"):
        assert name in proc.stdout
