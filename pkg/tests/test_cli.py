import csv

import pytest

from dirtymac import cli
from dirtymac.channels import ConfigError


def run(tmp_path, command, config_text, *extra):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(config_text, encoding="utf-8")
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_parse_config_ranges_and_lists():
    cfg = cli.parse_config("""
        # comment
        channel = single
        p1 = 1, 2.5
        snr = linspace(0.1, 1, 10)
        n = logspace(-1, 1, 3)
        presets = plain, common
        seed = 7
    """)
    assert cfg.channel == "single" and cfg.p1 == [1.0, 2.5]
    assert len(cfg.snr) == 10 and cfg.snr[0] == pytest.approx(0.1)
    assert cfg.n == pytest.approx([0.1, 1.0, 10.0])
    assert cfg.presets == ["plain", "common"] and cfg.seed == 7
    cfg.validate()


@pytest.mark.parametrize("text", [
    "p1 = 1\nbogus = 2",
    "p1 = -1",
    "channel = triply",
    "presets = nope",
    "samples = 10",
    "k = 1",
    "p1 =",
    "just a line",
    "alphas = x",
])
def test_invalid_configs_raise(text):
    with pytest.raises(ConfigError):
        cli.parse_config(text).validate()


def test_invalid_config_exit_code(tmp_path):
    code, _ = run(tmp_path, "gaps", "p1 = -3\n")
    assert code == cli.EXIT_CONFIG
    assert cli.main(["gaps", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG


def test_simulate_needs_seed(tmp_path):
    code, _ = run(tmp_path, "simulate", "presets = plain\nsamples = 100000\n")
    assert code == cli.EXIT_CONFIG


def test_regions_single_dirty(tmp_path):
    code, out = run(tmp_path, "regions", "channel = single\np1 = 3\np2 = 1\nn = 1\nalphas = 101\n")
    assert code == cli.EXIT_OK
    index = read_csv(out / "regions_index.csv")
    labels = {r["label"] for r in index}
    assert labels == {"single_dirty_inner", "outer_single"}
    rows = read_csv(out / "outer_single_000.csv")
    corner = [r for r in rows if r["row_type"] == "point" and r["label"] == "corner"]
    assert len(corner) == 1
    assert float(corner[0]["r1"]) == pytest.approx(0.5)
    assert any(r["row_type"] == "vertex" and float(r["r1"]) == pytest.approx(0.5) for r in rows)


def test_regions_doubly_and_common(tmp_path):
    code, out = run(tmp_path, "regions", "channel = doubly\np1 = 1\np2 = 4\nn = 0.5\n")
    assert code == cli.EXIT_OK
    cons = [r for r in read_csv(out / "outer_doubly_000.csv") if r["row_type"] == "constraint"]
    assert len(cons) == 1 and float(cons[0]["coef1"]) == float(cons[0]["coef2"]) == 1.0
    code, out = run(tmp_path, "regions", "channel = common\np1 = 1\np2 = 1\nn = 1\n")
    assert code == cli.EXIT_OK
    rows = read_csv(out / "common_000.csv")
    assert sum(r["row_type"] == "vertex" for r in rows) == 5
    assert sum(r["row_type"] == "point" for r in rows) == 2


def test_regions_k_user(tmp_path):
    code, out = run(tmp_path, "regions", "channel = k_user\np1 = 10\nn = 1\nk = 2, 4\n")
    assert code == cli.EXIT_OK
    assert len(read_csv(out / "regions_index.csv")) == 4


def test_gaps_peaks(tmp_path):
    code, out = run(tmp_path, "gaps", "snr = linspace(0.005, 10, 2000)\n")
    assert code == cli.EXIT_OK
    rows = read_csv(out / "gaps.csv")
    zeta = max(rows, key=lambda r: float(r["zeta"]))
    eta = max(rows, key=lambda r: float(r["eta"]))
    assert float(zeta["zeta"]) == pytest.approx(0.167, abs=1e-3)
    assert float(zeta["snr"]) == pytest.approx(1.155, abs=0.01)
    assert float(eta["eta"]) == pytest.approx(0.085, abs=1e-3)
    assert float(eta["snr"]) == pytest.approx(0.5, abs=0.01)
    for r in rows:
        assert float(r["inner_doubly"]) <= float(r["outer_doubly"]) + 1e-9


def test_gaps_zero_in_full_rate_regime(tmp_path):
    # P2 = 9 P1: the full-rate condition reads N <= 2 P1, i.e. P1/N >= 0.5
    code, out = run(tmp_path, "gaps", "snr = 0.5, 1, 3, 10\np2_over_p1 = 9\n")
    assert code == cli.EXIT_OK
    assert all(float(r["zeta"]) == 0.0 for r in read_csv(out / "gaps.csv"))


def test_roots_report(tmp_path, capsys):
    assert cli.main(["roots"]) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert "x*" in text and "u*" in text and "quoted" in text
    assert cli.main(["roots", "--out", str(tmp_path)]) == cli.EXIT_OK
    rows = {r["quantity"]: r for r in read_csv(tmp_path / "roots.csv")}
    assert float(rows["x_star"]["value"]) == pytest.approx(1.655, abs=1e-3)
    assert float(rows["x_star"]["residual"]) < 1e-9


@pytest.mark.parametrize("family", ["symmetric", "one_dim", "helper", "k_user"])
def test_envelope(tmp_path, family):
    code, out = run(tmp_path, "envelope", f"family = {family}\nsnr = linspace(0.01, 6, 300)\nk = 2, 8\n")
    assert code == cli.EXIT_OK
    rows = read_csv(out / f"envelope_{family}.csv")
    for r in rows:
        assert float(r["raw"]) <= float(r["hull"]) + 1e-12
        assert float(r["hull"]) <= float(r["outer"]) + 1e-9
    if family == "symmetric":
        # past the tangent point the grid hull is the raw curve; below it the grid
        # chord starts at the first grid point instead of the origin
        for r in rows:
            h, a = float(r["hull"]), float(r["analytic"])
            if float(r["snr"]) > 1.66:
                assert h == pytest.approx(a, abs=1e-9)
            else:
                assert a - 0.34 * 0.01 - 1e-6 <= h <= a + 1e-9


def test_envelope_needs_grid(tmp_path):
    code, _ = run(tmp_path, "envelope", "snr = 1, 2\n")
    assert code == cli.EXIT_CONFIG


SIM_CFG = "presets = plain, nested_helper\np1 = 1\np2 = 1\nn = 1\nsamples = 100000\nbins = 4096\n"


def test_simulate_smoke_and_reproducible(tmp_path):
    code, out = run(tmp_path, "simulate", SIM_CFG, "--seed", "5")
    assert code == cli.EXIT_OK
    first = (out / "simulate.csv").read_bytes()
    rows = read_csv(out / "simulate.csv")
    assert list(rows[0]) == cli.SIM_HEADER
    valid = [r for r in rows if r["status"] == "valid"]
    invalid = [r for r in rows if r["status"].startswith("invalid")]
    assert len(valid) == 1 and len(invalid) == 1
    assert float(valid[0]["numeric"]) >= float(valid[0]["lower_bound_1d"]) - 1e-6
    assert float(valid[0]["invariance_rate"]) < 1e-3
    code, out = run(tmp_path, "simulate", SIM_CFG, "--seed", "5")
    assert code == cli.EXIT_OK
    assert (out / "simulate.csv").read_bytes() == first


def test_simulate_invariant_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "MC_TOL", 0.0)
    code, out = run(tmp_path, "simulate", "presets = plain\np1 = 1\np2 = 1\nn = 1\nsamples = 100000\n",
                    "--seed", "1")
    assert code == cli.EXIT_INVARIANT
    assert read_csv(out / "simulate.csv")[0]["ok"] == "false"


def test_gaps_byte_identical(tmp_path):
    _, out = run(tmp_path, "gaps", "snr = linspace(0.1, 5, 50)\nn = 1, 2\n")
    a = (out / "gaps.csv").read_bytes()
    _, out = run(tmp_path, "gaps", "snr = linspace(0.1, 5, 50)\nn = 1, 2\n")
    assert (out / "gaps.csv").read_bytes() == a
