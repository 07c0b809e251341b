import csv
import json

import pytest
from hypothesis import given, settings, strategies as st

from fsoqkd.cli import ConfigDocument, load_config, main, manifest_path
from fsoqkd.config import canonical_json, digest, from_dict
from fsoqkd.errors import ConfigError


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_defaults_round_trip(capsys):
    assert main(["defaults"]) == 0
    data = json.loads(capsys.readouterr().out)
    doc = from_dict(ConfigDocument, data)
    assert canonical_json(doc) == canonical_json(data)


@settings(max_examples=40, deadline=None)
@given(
    cn2=st.floats(min_value=0, max_value=1e-12),
    L=st.floats(min_value=1, max_value=1e5),
    seed=st.integers(min_value=0, max_value=2**63),
    tracked=st.booleans(),
)
def test_config_round_trip(cn2, L, seed, tracked):
    data = {"scenario": {"turbulence": {"cn2": cn2}, "link": {"range_m": L}, "master_seed": seed}}
    if tracked:
        data["scenario"]["tracking"] = {"pid": {"kp": 1, "ki": 2.5, "kd": 0}}
    doc = from_dict(ConfigDocument, data)
    text = canonical_json(doc)
    again = from_dict(ConfigDocument, json.loads(text))
    assert canonical_json(again) == text


def test_digest_ignores_key_order_and_int_float_spelling():
    a = from_dict(ConfigDocument, {"scenario": {"link": {"range_m": 300, "focal_length_m": 2}}})
    b = from_dict(ConfigDocument, {"scenario": {"link": {"focal_length_m": 2.0, "range_m": 300.0}}})
    assert digest(a) == digest(b)


@pytest.mark.parametrize(
    "data, field",
    [
        ({"scenario": {"turbulence": {"cn2": -1e-15}}}, "scenario.turbulence.cn2"),
        ({"scenario": {"link": {"focal_lenght_m": 2.0}}}, "scenario.link"),
        ({"plan": {"cn2": [1e-15, -1.0]}}, "plan.cn2.1"),
        ({"scenario": {"n_slots": 1.5}}, "scenario.n_slots"),
        ({"scenario": {"tracking": {"mode": "Sideways"}}}, "scenario.tracking.mode"),
        ({"bogus": 1}, None),
    ],
)
def test_config_errors_name_field(tmp_path, data, field):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, data))
    assert exc.value.field == field


def test_plan_default(tmp_path, capsys):
    out = tmp_path / "plan.csv"
    assert main(["plan", write_cfg(tmp_path, {}), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "cn2=1e-15: ReceiverCompensation" in text
    header, rows = read_csv(out)
    assert header[:5] == ["cn2", "range_m", "strategy", "aperture_ratio", "boundary_m"]
    bounds = {float(r[0]): float(r[4]) for r in rows}
    assert bounds[1e-15] == pytest.approx(2450, rel=0.1)
    assert bounds[1e-14] == pytest.approx(1650, rel=0.1)
    assert manifest_path(out).exists()


def test_plan_bad_cn2_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"scenario": {"turbulence": {"cn2": -1}}})
    assert main(["plan", cfg]) == 2
    assert "scenario.turbulence.cn2" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["plan", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["plan", str(bad)]) == 2


def test_interrupt_csv(tmp_path):
    out = tmp_path / "i.csv"
    cfg = write_cfg(tmp_path, {"interrupt": {"distances_m": [500, 1000, 1650, 3000, 5000],
                                             "cn2": [0.0, 1e-15, 1e-14, 1e-13]}})
    assert main(["interrupt", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["distance_m", "cn2=0.0", "cn2=1e-15", "cn2=1e-14", "cn2=1e-13"]
    cols = list(zip(*[[float(x) for x in r] for r in rows]))
    assert all(v == 0.0 for v in cols[1])
    for c in cols[1:]:
        assert all(a <= b for a, b in zip(c, c[1:]))
    assert cols[3][2] == pytest.approx(0.0184053018764356443, rel=1e-12)


def test_interrupt_unwritable(tmp_path):
    assert main(["interrupt", write_cfg(tmp_path, {}), "--out", str(tmp_path / "no" / "x.csv")]) == 1


TRACK_CFG = {
    "scenario": {"duration_s": 0.05, "link": {"range_m": 1500.0}, "turbulence": {"cn2": 1e-14}},
}


def test_track_zero_gain(tmp_path):
    cfg = dict(TRACK_CFG)
    cfg["scenario"] = dict(cfg["scenario"], tracking={"pid": {"kp": 0, "ki": 0, "kd": 0}})
    out = tmp_path / "t.csv"
    assert main(["track", write_cfg(tmp_path, cfg), "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["t", "wander_x", "wander_y", "residual_x", "residual_y"]
    assert len(rows) == 500
    assert all(r[1] == r[3] and r[2] == r[4] for r in rows)


def test_track_default_rejects_and_is_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, TRACK_CFG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["track", cfg, "--out", str(a), "--seed", "3"]) == 0
    assert main(["track", cfg, "--out", str(b), "--seed", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    summary = json.loads(manifest_path(a).read_text())["summary"]
    assert summary["rejection_db"] > 0
    assert 0 <= summary["saturation_fraction"] <= 1


def test_run_and_manifest(tmp_path):
    out = tmp_path / "run.csv"
    cfg = write_cfg(tmp_path, {})
    assert main(["run", cfg, "--out", str(out), "--slots", "300000", "--seed", "4"]) == 0
    header, rows = read_csv(out)
    assert header[:7] == ["label", "qber", "sifted_rate_bps", "secret_key_rate_bps",
                          "availability", "background_rate_hz", "abort"]
    assert float(rows[0][3]) > 1e6 and rows[0][6] == "false"
    m = json.loads(manifest_path(out).read_text())
    assert m["resolved_config"]["scenario"]["n_slots"] == 300000
    assert m["resolved_config"]["scenario"]["master_seed"] == 4
    assert m["scenario_digest"] == digest(from_dict(ConfigDocument, m["resolved_config"]).scenario)
    assert m["outputs"] == [str(out)] and m["assumption_flags"]


def test_sweep_background(tmp_path):
    out = tmp_path / "s.csv"
    cfg = write_cfg(tmp_path, {"sweep": {"parameter": "background.sky_radiance",
                                         "values": [0.0, 0.05, 0.2, 0.5, 1.0]}})
    assert main(["sweep", cfg, "--out", str(out), "--slots", "300000"]) == 0
    header, rows = read_csv(out)
    assert header[0] == "background.sky_radiance"
    q = [float(r[1]) for r in rows]
    assert all(a <= b for a, b in zip(q, q[1:]))
    for r in rows:
        if float(r[1]) > 0.08:
            assert r[6] == "true" and float(r[3]) == 0.0
    assert rows[-1][6] == "true"


def test_sweep_analytic(tmp_path):
    out = tmp_path / "a.csv"
    cfg = write_cfg(tmp_path, {"sweep": {"parameter": "link.range_m", "values": [500, 2000, 3000]}})
    assert main(["sweep", cfg, "--out", str(out), "--analytic-only"]) == 0
    header, rows = read_csv(out)
    assert "aperture_ratio" in header and "interruption_fraction" in header
    strat = header.index("strategy")
    assert [r[strat] for r in rows] == ["ReceiverCompensation", "ReceiverCompensation",
                                        "EmitterPreCompensation"]


def test_sweep_unknown_parameter(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"sweep": {"parameter": "link.nope", "values": [1]}})
    assert main(["sweep", cfg, "--out", str(tmp_path / "x.csv"), "--analytic-only"]) == 2
    assert "valid paths" in capsys.readouterr().err


def test_csv_floats_round_trip(tmp_path):
    out = tmp_path / "i.csv"
    cfg = write_cfg(tmp_path, {"interrupt": {"distances_m": [1234.5678901234567], "cn2": [1e-14]}})
    main(["interrupt", cfg, "--out", str(out)])
    _, rows = read_csv(out)
    assert float(rows[0][0]) == 1234.5678901234567
    assert "," not in rows[0][1].replace(".", "")
