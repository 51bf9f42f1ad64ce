import json

import pytest

from focusnls.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, main

SMALL = """
[experiment]
N = [2]
T = 0.1
samples = 3
[basis]
L = 1
M_z = 16
L_z = 12.0
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(SMALL)
    return str(p)


@pytest.mark.parametrize("cmd", ["evolve", "nls", "sweep"])
def test_commands_succeed(tmp_path, cfg, cmd):
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), cmd]) == EXIT_OK
    lines = (out / "results.jsonl").read_text().splitlines()
    assert lines and all(json.loads(x) for x in lines)


def test_rates(tmp_path):
    assert main(["--out", str(tmp_path), "rates"]) == EXIT_OK


def test_rates_bad_kappa(tmp_path):
    assert main(["--out", str(tmp_path), "rates", "--kappa", "0.9"]) == EXIT_ASSERT


def test_unknown_key(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[experiment]\nfoo = 1\n")
    assert main(["--config", str(p), "--out", str(tmp_path), "sweep"]) == EXIT_CONFIG


def test_missing_config(tmp_path):
    assert main(["--config", str(tmp_path / "nope.toml"), "sweep"]) == EXIT_CONFIG


def test_trend_assertion(tmp_path, cfg):
    # a single cell cannot show a decreasing trend
    assert main(["--config", cfg, "--out", str(tmp_path), "sweep", "--assert-trend"]) == EXIT_ASSERT


def test_bad_threads(cfg):
    with pytest.raises(SystemExit):
        main(["--config", cfg, "--threads", "0", "sweep"])
