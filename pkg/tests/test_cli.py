import math

import pytest

from liouville_lab.cli import (ConfigError, RunConfig, build_parser, load_config,
                               main, parse_config_text, read_csv)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_config_text():
    text = """
    # comment
    dimension = 3
    k = 4.5   # trailing comment
    radii.ratio = 2
    mode = slab
    """
    assert parse_config_text(text) == {"dimension": 3, "k": 4.5, "radii_ratio": 2.0,
                                       "mode": "slab"}


@pytest.mark.parametrize("text", ["bogus = 1", "dimension 3", "k = abc"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dimension = 3\nk = 4\nseed = 1\n")
    c = load_config(str(cfg), {"seed": 9, "k": None})
    assert (c.dimension, c.k, c.seed) == (3, 4.0, 9)


@pytest.mark.parametrize("kwargs", [dict(dimension=0), dict(dimension=9), dict(k=2.0),
                                    dict(mode="ball", dimension=4), dict(mode="cube"),
                                    dict(radii_min=2.0, radii_max=1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs).validate()


def test_auto_mode():
    assert RunConfig(dimension=3).resolved_mode == "ball"
    assert RunConfig(dimension=4).resolved_mode == "slab"


def test_parser_lists_commands():
    help_text = build_parser().format_help()
    for cmd in ("construct", "growth", "energy", "stability", "report"):
        assert cmd in help_text


def test_construct_k3(tmp_path, capsys):
    code, out, _ = run(capsys, "construct", "--k", "3", "--out", str(tmp_path))
    assert code == 0 and "A* =" in out
    comments, rows = read_csv(tmp_path / "profile.csv")
    assert (tmp_path / "profile.csv").read_text().startswith("# schema=1\n")
    assert set(rows[0]) == {"t", "g", "g_prime"}


def test_construct_k2_rejected(tmp_path, capsys):
    code, _, err = run(capsys, "construct", "--k", "2", "--out", str(tmp_path))
    assert code == 2 and "k > 2" in err


def test_construct_prints_C1(tmp_path, capsys):
    _, out, _ = run(capsys, "construct", "--k", "4", "--dimension", "3", "--out", str(tmp_path))
    line = next(ln for ln in out.splitlines() if ln.startswith("C1"))
    assert line.endswith("= 1.0")


def test_growth_default(tmp_path, capsys):
    code, out, _ = run(capsys, "growth", "--dimension", "2", "--k", "3", "--out", str(tmp_path))
    assert code == 0
    comments, rows = read_csv(tmp_path / "growth.csv")
    assert "mode=ball" in comments[1]
    assert {"R", "value", "bound", "local_slope"} <= set(rows[0])
    _, verdicts = read_csv(tmp_path / "verdicts_growth.csv")
    slope = float(next(v for v in verdicts if v["claim"] == "contrapositive")["figure"])
    assert 2.95 <= slope <= 3.05


def test_growth_high_dimension_uses_slab(tmp_path, capsys):
    code, _, _ = run(capsys, "growth", "--dimension", "5", "--out", str(tmp_path))
    comments, _ = read_csv(tmp_path / "growth.csv")
    assert code == 0 and "mode=slab" in comments[1]


def test_growth_small_radii_rejected(tmp_path, capsys):
    code, _, err = run(capsys, "growth", "--radii-min", "0.5", "--out", str(tmp_path))
    assert code == 2 and "radii.min" in err


def test_growth_ball_mode_cap(tmp_path, capsys):
    code, _, _ = run(capsys, "growth", "--dimension", "4", "--mode", "ball",
                     "--out", str(tmp_path))
    assert code == 2


def test_growth_hard_divergence(tmp_path, capsys):
    code, out, _ = run(capsys, "growth", "--dimension", "1", "--hard-divergence",
                       "--out", str(tmp_path))
    assert code == 0 and "divergence_order" in out


def test_energy_one_dimension(tmp_path, capsys):
    code, _, _ = run(capsys, "energy", "--dimension", "1", "--radii-max", "20",
                     "--out", str(tmp_path))
    assert code == 0
    _, rows = read_csv(tmp_path / "energy.csv")
    phis = [float(r["phi_R"]) for r in rows]
    assert all(b >= a for a, b in zip(phis, phis[1:]))
    assert abs(phis[-1] - 2 * math.sqrt(2) / 3) <= 1e-6


def test_energy_small_radius(tmp_path, capsys):
    code, out, _ = run(capsys, "energy", "--dimension", "3", "--radii-max", "2",
                       "--out", str(tmp_path))
    assert code == 0 and "FAIL" not in out


def test_energy_dimension_cap(tmp_path, capsys):
    code, _, _ = run(capsys, "energy", "--dimension", "4", "--out", str(tmp_path))
    assert code == 2


def test_stability_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "stability", "--dimension", "1", "--seed", "42", "--out", str(a))[0] == 0
    assert run(capsys, "stability", "--dimension", "1", "--seed", "42", "--out", str(b))[0] == 0
    assert (a / "stability.csv").read_bytes() == (b / "stability.csv").read_bytes()
    _, rows = read_csv(a / "stability.csv")
    assert len(rows) == 20
    assert max(float(r["gap_kink"]) for r in rows) <= 1e-6


def test_stability_mutation_fails(tmp_path, capsys):
    code, _, _ = run(capsys, "stability", "--dimension", "1", "--mutate-rhs",
                     "--corpus-size", "3", "--out", str(tmp_path))
    assert code == 1


def test_stability_dimension_cap(tmp_path, capsys):
    assert run(capsys, "stability", "--dimension", "3", "--out", str(tmp_path))[0] == 2


def test_report_missing_inputs(tmp_path, capsys):
    run(capsys, "energy", "--dimension", "1", "--out", str(tmp_path))
    code, _, err = run(capsys, "report", "--out", str(tmp_path))
    assert code == 2 and "growth.csv" in err and "energy.csv" not in err


def test_full_pipeline_report(tmp_path, capsys):
    for cmd in ("construct", "growth", "energy", "stability"):
        assert run(capsys, cmd, "--dimension", "1", "--corpus-size", "5",
                   "--out", str(tmp_path))[0] == 0
    code, out, _ = run(capsys, "report", "--out", str(tmp_path))
    assert code == 0
    _, rows = read_csv(tmp_path / "report.csv")
    assert len(rows) == 8 and all(r["status"] == "PASS" for r in rows)
    assert "fitted slope > 2" in out


def test_config_file_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("dimension = 1\nk = 4\nradii.max = 32\n")
    code, _, _ = run(capsys, "growth", "--config", str(cfg), "--out", str(tmp_path))
    comments, rows = read_csv(tmp_path / "growth.csv")
    assert code == 0 and "k=4.0" in comments[1] and float(rows[-1]["R"]) <= 32


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(capsys, "construct", "--config", str(tmp_path / "nope.cfg"),
                       "--out", str(tmp_path))
    assert code == 2 and "nope.cfg" in err
