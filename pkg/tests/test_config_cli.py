import json
import re

import pytest

from minkmembrane.cli import main
from minkmembrane.config import load_config, parse_config
from minkmembrane.diagnostics import NORM_CSV_HEADER
from minkmembrane.errors import ConfigError

SIM = {
    "dimension": 1,
    "grid": {"extent": 15.0, "points": 301},
    "time": {"t_end": 6.0},
    "initial_data": {"epsilon": 1e-3, "profile": "gaussian", "width": 1.0},
    "diagnostics": {"gamma_order": 1, "sample_dt": 0.5, "fit_window_start": 1.0},
}

BREAK = {
    "dimension": 1,
    "grid": {"extent": 6.0, "points": 241},
    "time": {"t_end": 2.0},
    "initial_data": {"epsilon": 3.0, "profile": "gaussian", "width": 0.5},
}


def _config_file(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------- config


def test_parse_minimal_defaults():
    cfg = parse_config('{"dimension": 2}')
    assert cfg.dimension == 2
    assert cfg.grid is None and cfg.time is None and cfg.sweep is None
    assert cfg.formulation == "geometric"
    assert cfg.seed == 0
    assert cfg.diagnostics.gamma_order == 2
    assert cfg.conformal.base_direct_points == 801
    assert cfg.verify.count == 40


def test_parse_rejects_invalid_json():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config("{oops")


def test_parse_rejects_unknown_keys_with_path():
    with pytest.raises(ConfigError, match="unknown key grd"):
        parse_config('{"dimension": 1, "grd": {}}')
    with pytest.raises(ConfigError, match=r"unknown key grid\.wdth"):
        parse_config('{"dimension": 1, "grid": {"extent": 1, "points": 11, "wdth": 2}}')
    with pytest.raises(ConfigError, match=r"unknown key time\.dt"):
        parse_config('{"dimension": 1, "time": {"t_end": 1, "dt": 0.1}}')


@pytest.mark.parametrize("doc,pattern", [
    ('{"dimension": 4}', "dimension"),
    ('{}', "dimension"),
    ('{"dimension": 1, "grid": {"extent": 1, "points": 10}}', "odd"),
    ('{"dimension": 1, "grid": {"extent": 1, "points": 7}}', ">= 9"),
    ('{"dimension": 1, "grid": {"extent": 0, "points": 11}}', "exceed"),
    ('{"dimension": 1, "time": {"t_end": 1, "cfl": 1.5}}', "cfl"),
    ('{"dimension": 1, "time": {"t_end": 0}}', "t_end"),
    ('{"dimension": 1, "initial_data": {"epsilon": -1}}', "epsilon"),
    ('{"dimension": 1, "initial_data": {"epsilon": 1, "profile": "saw"}}', "profile"),
    ('{"dimension": 1, "formulation": "magic"}', "formulation"),
    ('{"dimension": 1, "diagnostics": {"gamma_order": 4}}', "gamma_order"),
    ('{"dimension": 1, "diagnostics": {"sample_dt": 0}}', "sample_dt"),
    ('{"dimension": 1, "sweep": {"epsilons": []}}', "non-empty"),
    ('{"dimension": 1, "sweep": {"epsilons": [0.1, 0.1]}}', "increasing"),
    ('{"dimension": 1, "sweep": {"epsilons": [0.2, 0.1]}}', "increasing"),
    ('{"dimension": 1, "sweep": {"epsilons": [-0.1, 0.2]}}', "epsilons"),
    ('{"dimension": 1, "seed": -1}', "seed"),
    ('{"dimension": 1, "conformal": {"a": 2.0, "t_direct": 1.5}}', "t_direct"),
    ('{"dimension": 1, "grid": {"extent": "wide", "points": 11}}', "number"),
    ('{"dimension": 1.5}', "integer"),
])
def test_parse_rejects_bad_values(doc, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(doc)


def test_config_hash_is_stable_and_sensitive():
    a = parse_config(json.dumps(SIM))
    b = parse_config(json.dumps(SIM))
    assert a.config_hash == b.config_hash
    assert re.fullmatch(r"[0-9a-f]{12}", a.config_hash)
    doc = dict(SIM, seed=5)
    assert parse_config(json.dumps(doc)).config_hash != a.config_hash


def test_require_names_missing_section():
    cfg = parse_config('{"dimension": 1}')
    with pytest.raises(ConfigError, match="requires the 'grid' config section"):
        cfg.require("grid")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(str(tmp_path / "absent.json"))


# ------------------------------------------------------------------- cli


def test_cli_usage_errors_exit_one():
    assert main([]) == 1
    assert main(["simulate"]) == 1
    assert main(["conjure", "--config", "x.json"]) == 1


def test_cli_missing_config_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_config_section_error(tmp_path, capsys):
    path = _config_file(tmp_path, {"dimension": 1})
    assert main(["simulate", "--config", path]) == 1
    assert "requires the 'grid' config section" in capsys.readouterr().err


def test_simulate_writes_norm_csv_and_field_dump(tmp_path, capsys):
    path = _config_file(tmp_path, SIM)
    out = tmp_path / "norms.csv"
    dump = tmp_path / "field.csv"
    code = main(["simulate", "--config", path, "--out", str(out),
                 "--dump-field", str(dump)])
    assert code == 0
    assert "reached t = 6" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert re.fullmatch(r"# config_hash=[0-9a-f]{12} version=\d+\.\d+\.\d+",
                        lines[0])
    assert lines[1] == NORM_CSV_HEADER
    assert len(lines) >= 10
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == pytest.approx(6.0, abs=0.5)
    assert all(v >= 0.0 for v in last[1:])
    dump_lines = dump.read_text().splitlines()
    assert dump_lines[0].startswith("# config_hash=")
    assert dump_lines[1].startswith("index,")
    assert len(dump_lines) == 2 + SIM["grid"]["points"]


def test_simulate_breakdown_exits_two_with_report(tmp_path, capsys):
    path = _config_file(tmp_path, BREAK)
    out = tmp_path / "norms.csv"
    assert main(["simulate", "--config", path, "--out", str(out)]) == 2
    assert "breakdown at t" in capsys.readouterr().out
    report = json.loads((tmp_path / "norms.csv.breakdown.json").read_text())
    assert report["termination"] == "breakdown"
    assert report["t"] > 0.0
    assert report["q_value"] >= 0.9
    assert isinstance(report["node"], int)
    assert len(report["node_coords"]) == 1


def test_simulate_support_guard_is_an_error(tmp_path, capsys):
    doc = dict(SIM, grid={"extent": 7.0, "points": 141}, time={"t_end": 3.0})
    path = _config_file(tmp_path, doc)
    assert main(["simulate", "--config", path,
                 "--out", str(tmp_path / "n.csv")]) == 1
    assert "guard band" in capsys.readouterr().err


def test_decay_fit_roundtrip(tmp_path, capsys):
    path = _config_file(tmp_path, SIM)
    csv = tmp_path / "norms.csv"
    assert main(["simulate", "--config", path, "--out", str(csv)]) == 0
    out = tmp_path / "fit.csv"
    code = main(["decay-fit", "--config", path, "--csv", str(csv),
                 "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "sup_dphi: exponent" in printed
    assert "sup_q00: exponent" in printed
    lines = out.read_text().splitlines()
    assert lines[1] == "column,exponent,prefactor,rms_residual"
    assert lines[2].startswith("sup_dphi,")
    assert lines[3].startswith("sup_q00,")


def test_decay_fit_requires_csv(tmp_path, capsys):
    path = _config_file(tmp_path, SIM)
    assert main(["decay-fit", "--config", path]) == 1
    assert "requires --csv" in capsys.readouterr().err


def test_decay_fit_rejects_short_series(tmp_path, capsys):
    path = _config_file(tmp_path, SIM)
    csv = tmp_path / "short.csv"
    csv.write_text("# config_hash=abc version=0\nt,sup_dphi,sup_q00\n"
                   "1.0,0.5,0.1\n2.0,0.4,0.05\n")
    assert main(["decay-fit", "--config", path, "--csv", str(csv)]) == 1
    assert "at least 8 samples" in capsys.readouterr().err


def test_sweep_reports_both_outcomes_and_exits_two(tmp_path, capsys):
    doc = {
        "dimension": 1,
        "grid": {"extent": 12.0, "points": 241},
        "time": {"t_end": 4.0},
        "initial_data": {"epsilon": 1e-3, "profile": "gaussian", "width": 0.5},
        "diagnostics": {"gamma_order": 1, "sample_dt": 0.5},
        "sweep": {"epsilons": [1e-3, 3.0]},
    }
    path = _config_file(tmp_path, doc)
    out = tmp_path / "sweep.csv"
    assert main(["sweep-epsilon", "--config", path, "--out", str(out)]) == 2
    printed = capsys.readouterr().out
    assert "epsilon = 0.001: Global" in printed
    assert "Breakdown at t" in printed
    lines = out.read_text().splitlines()
    assert lines[1] == "epsilon,outcome,breakdown_t,decay_exponent"
    rows = [ln.split(",") for ln in lines[2:]]
    assert [r[1] for r in rows] == ["Global", "Breakdown"]
    assert rows[1][2] != ""  # breakdown time recorded
    assert float(rows[1][2]) > 0.0


def test_sweep_all_global_exits_zero(tmp_path):
    doc = {
        "dimension": 1,
        "grid": {"extent": 12.0, "points": 241},
        "time": {"t_end": 4.0},
        "initial_data": {"epsilon": 1e-3, "profile": "gaussian", "width": 0.5},
        "diagnostics": {"gamma_order": 1, "sample_dt": 0.5},
        "sweep": {"epsilons": [1e-4, 1e-3]},
    }
    path = _config_file(tmp_path, doc)
    assert main(["sweep-epsilon", "--config", path,
                 "--out", str(tmp_path / "s.csv")]) == 0


def test_verify_command_passes(tmp_path, capsys):
    path = _config_file(tmp_path, {"dimension": 1, "verify": {"count": 4}})
    out = tmp_path / "verify.csv"
    assert main(["verify", "--config", path, "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    for identity in ("formulation_geometric_nullform",
                     "formulation_divergence_geometric",
                     "box_commutator", "gamma_q_commutation"):
        assert f"{identity}: max defect" in printed
        assert "[PASS]" in printed
    lines = out.read_text().splitlines()
    assert lines[1] == "identity,function,point,defect"
    assert len(lines) > 10


def test_verify_conformal_command_passes(tmp_path, capsys):
    path = _config_file(tmp_path, {"dimension": 1, "verify": {"count": 6}})
    out = tmp_path / "conformal.csv"
    assert main(["verify-conformal", "--config", path, "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "q00_scaling: max defect" in printed
    assert "halving order" in printed
    assert "FAIL" not in printed
    lines = out.read_text().splitlines()
    assert lines[1] == "identity,function,point,defect"
    assert len(lines) > 20


def test_verify_conformal_corrupt_constants_fail(tmp_path, capsys):
    import importlib.resources as resources

    good = (resources.files("minkmembrane")
            / "fixtures" / "conformal_constants_n1.txt").read_text()
    corrupted = []
    for line in good.splitlines():
        parts = line.split()
        if parts[:2] == ["numerator", "su_q00"]:
            parts[2] = repr(float(parts[2]) * 2.0)
            line = " ".join(parts)
        corrupted.append(line)
    bad = tmp_path / "constants.txt"
    bad.write_text("\n".join(corrupted) + "\n")
    doc = {"dimension": 1,
           "verify": {"count": 4, "conformal_constants": str(bad)}}
    path = _config_file(tmp_path, doc)
    assert main(["verify-conformal", "--config", path,
                 "--out", str(tmp_path / "c.csv")]) == 1
    assert "FAILED" in capsys.readouterr().err


def test_compactified_compare_two_levels(tmp_path, capsys):
    doc = {
        "dimension": 1,
        "initial_data": {"epsilon": 1e-3, "profile": "bump", "width": 1.0},
        "conformal": {"levels": 2},
    }
    path = _config_file(tmp_path, doc)
    out = tmp_path / "pipeline.csv"
    assert main(["compactified-compare", "--config", path,
                 "--out", str(out)]) == 0
    assert "convergence trend holds" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert len(lines) == 4  # comment, header, two levels
    first = lines[2].split(",")
    second = lines[3].split(",")
    assert int(first[1]) == 801 and int(second[1]) == 1601
    assert float(second[8]) <= float(first[8]) / 3.0


def test_gaussian_data_swapped_for_compact_profile(tmp_path, capsys):
    doc = {
        "dimension": 1,
        "initial_data": {"epsilon": 1e-3, "profile": "gaussian", "width": 1.0},
        "conformal": {"levels": 1},
    }
    path = _config_file(tmp_path, doc)
    assert main(["compactified-compare", "--config", path,
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert "using the bump profile" in capsys.readouterr().out


def test_simulate_rerun_is_bit_identical(tmp_path):
    path = _config_file(tmp_path, SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", path, "--out", str(a)]) == 0
    assert main(["simulate", "--config", path, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_thread_count_invariance(tmp_path, monkeypatch):
    path = _config_file(tmp_path, SIM)
    monkeypatch.setenv("MINKMEMBRANE_THREADS", "1")
    one = tmp_path / "t1.csv"
    assert main(["simulate", "--config", path, "--out", str(one)]) == 0
    monkeypatch.setenv("MINKMEMBRANE_THREADS", "4")
    four = tmp_path / "t4.csv"
    assert main(["simulate", "--config", path, "--out", str(four)]) == 0
    assert one.read_bytes() == four.read_bytes()


def test_seed_override_changes_stamp(tmp_path):
    path = _config_file(tmp_path, {"dimension": 1, "verify": {"count": 2}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["verify", "--config", path, "--out", str(a)]) == 0
    assert main(["verify", "--config", path, "--out", str(b), "--seed", "9"]) == 0
    hash_a = a.read_text().splitlines()[0]
    hash_b = b.read_text().splitlines()[0]
    assert hash_a != hash_b
