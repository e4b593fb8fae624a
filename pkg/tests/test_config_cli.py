import dataclasses
import json
import math

import numpy as np
import pytest

from speedmeter import cli, oracle
from speedmeter.config import ConfigError, ScenarioConfig, parse_band, parse_config
from speedmeter.quadrature import QuadratureError
from speedmeter.response import REFERENCE
from speedmeter.scenarios import CSV_COLUMNS, SNR_COLUMNS, dark_matter_flyby, gas_collision

FULL = """
# detector
m = 1e-3
omega_m = 1.0
gamma = 1e-4
kappa = 1e7
T = 0.01
t_d = 1e-5
L = 1e-4
coupling = opt
position_tau = 1e-6
delta = -1e7
omega_sig = 1e5
delta_prime = matched
signal = gravitational
m_chi = 1e-5
b = 1e-3
v = 2.2e5
band = 10:1e6
points_per_decade = 20
variants = position,velocity,velocity_detuned
taus = 1e-8,1e-6
seed = 5
"""


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


# -- config ------------------------------------------------------------------


def test_defaults_are_reference():
    cfg = parse_config("")
    assert cfg.detector == REFERENCE
    assert cfg.frequency_unit == "rad_s"


def test_full_config_parses():
    cfg = parse_config(FULL)
    assert cfg.detuning["delta_prime"] == "matched"
    assert cfg.signal == {"kind": "gravitational", "m_chi": 1e-5, "b": 1e-3, "v": 2.2e5}
    assert cfg.band == (10.0, 1e6)
    assert cfg.taus == (1e-8, 1e-6)
    assert cfg.seed == 5


@pytest.mark.parametrize("text,line", [
    ("m = 1e-3\nbogus = 1\n", 2),
    ("m = 1e-3\n\nkappa = fast\n", 3),
    ("m = 1e-3\nm = 2e-3\n", 2),
    ("# c\nno equals sign\n", 2),
    ("kappa = -5\n", 1),
    ("band = 1:2:3\n", 1),
    ("\n\n\nsignal = laser\n", 4),
    ("variants = position,sideways\n", 1),
    ("frequency_unit = furlongs\n", 1),
    ("seed = 1.5\n", 1),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_round_trip():
    cfg = parse_config(FULL)
    assert parse_config(cfg.to_text()) == cfg


def test_round_trip_from_hz():
    cfg = parse_config("frequency_unit = hz\nomega_m = 2\nband = 1:100\n")
    back = parse_config(cfg.to_text())
    assert back == dataclasses.replace(cfg, frequency_unit="rad_s")


def test_hz_equivalence():
    hz = parse_config("kappa = 1e6\nomega_m = 3\nband = 10:1e5\n", frequency_unit="hz")
    rad = parse_config(f"kappa = {2e6 * math.pi!r}\nomega_m = {6 * math.pi!r}\nband = {20 * math.pi!r}:{2e5 * math.pi!r}\n")
    assert hz.detector.kappa == pytest.approx(rad.detector.kappa, rel=1e-15)
    assert hz.detector.omega_m == pytest.approx(rad.detector.omega_m, rel=1e-15)
    assert hz.band == pytest.approx(rad.band, rel=1e-15)


def test_parse_band_infinite():
    assert parse_band("0:inf") == (0.0, math.inf)


def test_overrides():
    cfg = parse_config("seed = 1\n", overrides={"seed": 9})
    assert cfg.seed == 9
    with pytest.raises(ConfigError):
        parse_config("", overrides={"nope": 1})


# -- psd ------------------------------------------------------------------------


def test_psd_csv_schema(capsys):
    code, out, _ = run(capsys, "psd", "--band", "10:1e6", "--variants", "position,velocity")
    assert code == 0
    assert out.startswith("# config: {")
    json.loads(out.splitlines()[0][len("# config: "):])
    body = csv_body(out)
    assert body[0].split(",") == list(CSV_COLUMNS)
    variants = {row.split(",")[6] for row in body[1:]}
    assert variants == {"position", "velocity"}


def test_psd_spikes_flagged(capsys):
    code, out, _ = run(capsys, "psd", "--band", "6e5:6.1e5", "--variants", "velocity")
    rows = [r.split(",") for r in csv_body(out)[1:]]
    spikes = [r for r in rows if r[7] == "1"]
    assert len(spikes) == 1
    assert float(spikes[0][0]) == pytest.approx(604264.60005657, rel=1e-9)
    assert spikes[0][1] == "inf"


def test_velocity_below_position_in_csv(capsys):
    code, out, _ = run(capsys, "psd", "--band", "10:4e5", "--variants", "position,velocity")
    rows = [r.split(",") for r in csv_body(out)[1:]]
    pos = {r[0]: float(r[4]) for r in rows if r[6] == "position"}
    vel = {r[0]: float(r[4]) for r in rows if r[6] == "velocity"}
    common = set(pos) & set(vel)
    assert len(common) > 100
    assert all(vel[k] < pos[k] for k in common)


def test_empty_band_header_only(capsys):
    code, out, _ = run(capsys, "psd", "--band", "5:5")
    assert code == 0
    assert csv_body(out) == [",".join(CSV_COLUMNS)]


def test_psd_bit_identical(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(FULL)
    out = tmp_path / "psd.csv"
    assert run(capsys, "psd", "--config", str(cfg), "--out", str(out))[0] == 0
    first = out.read_bytes()
    assert run(capsys, "psd", "--config", str(cfg), "--out", str(out))[0] == 0
    assert out.read_bytes() == first
    assert b"velocity_detuned" in first


def test_psd_hz_equivalence(tmp_path, capsys):
    rad = run(capsys, "psd", "--band", f"{2e3 * math.pi!r}:{2e5 * math.pi!r}", "--variants", "velocity")[1]
    hz = run(capsys, "psd", "--freq-unit", "hz", "--band", "1e3:1e5", "--variants", "velocity")[1]
    a = np.array([[float(x) for x in r.split(",")[:5]] for r in csv_body(rad)[1:]])
    b = np.array([[float(x) for x in r.split(",")[:5]] for r in csv_body(hz)[1:]])
    assert a.shape == b.shape
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("m = 1e-3\nwat = 2\n")
    code, _, err = run(capsys, "psd", "--config", str(cfg))
    assert code == 2
    assert "line 2" in err
    assert run(capsys, "psd", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_unwritable_output(tmp_path, capsys):
    code, _, err = run(capsys, "psd", "--band", "10:100", "--out", str(tmp_path / "no" / "such" / "f.csv"))
    assert code == 2


def test_numeric_failure_exit_code(monkeypatch, capsys):
    import speedmeter.scenarios as sc

    def boom(*a, **k):
        raise QuadratureError("no convergence", {"segments": 1})

    monkeypatch.setattr(sc, "snr_sweep", boom)
    assert run(capsys, "snr", "--taus", "1e-6")[0] == 3


# -- snr ---------------------------------------------------------------------------


def test_snr_single_tau(capsys):
    code, out, _ = run(capsys, "snr", "--taus", "1e-8")
    assert code == 0
    body = csv_body(out)
    assert body[0].split(",") == list(SNR_COLUMNS)
    assert len(body) == 2
    row = [float(x) for x in body[1].split(",")]
    assert 1e-3 / 3 <= row[1] <= 3e-3
    assert row[5] == pytest.approx(1.0, abs=0.01)
    assert row[4] > 100
    assert sum(1 for line in out.splitlines() if line.startswith("# diagnostic")) == 3


# -- scenarios -------------------------------------------------------------------


def test_dark_matter_report(capsys):
    code, out, _ = run(capsys, "scenario", "dark-matter-flyby")
    assert code == 0
    report = json.loads(out[out.index("{"):])
    assert 1e-3 / 3 <= report["snr_estimate"] <= 3e-3
    assert report["eta"] == pytest.approx(2.585e5, rel=1e-3)
    assert "ratio_estimate_to_reference" in report


def test_dark_matter_source_mass_scaling():
    a = dark_matter_flyby({})
    b = dark_matter_flyby({"m_s": 4e-3})
    for key in ("snr_estimate", "snr_closed_form", "snr_numeric"):
        assert b[key] == pytest.approx(2 * a[key], rel=1e-6)


def test_gas_report(tmp_path, capsys):
    out_path = tmp_path / "gas.json"
    code, out, _ = run(capsys, "scenario", "gas-collision", "--out", str(out_path))
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report["snr_closed_form"] == pytest.approx(16.457, rel=1e-3)
    assert report["reference_snr"] == 1
    assert gas_collision({"L": 16e-4})["snr_closed_form"] == pytest.approx(report["snr_closed_form"] / 2, rel=1e-12)


def test_unknown_scenario(capsys):
    assert run(capsys, "scenario", "tea-party")[0] == 2
    assert run(capsys, "scenario", "gas-collision", "--set", "L")[0] == 2
    assert run(capsys, "scenario", "gas-collision", "--set", "L=abc")[0] == 2


# -- oracle ------------------------------------------------------------------------


def test_oracle_negative_control():
    report = oracle.run_oracle(seed=0, segments=128, trajectories=200, models={"single": oracle.corrupted(1.5)})
    assert not report.passed
    assert report.text().endswith("MISMATCH\n")
    failed = [c.name for c in report.checks if not c.passed]
    assert "single-sided force PSD" in failed


def test_oracle_cli_mismatch_exit(monkeypatch, capsys):
    monkeypatch.setitem(oracle.DEFAULT_MODELS, "double", oracle.corrupted(2.0))
    code, out, _ = run(capsys, "oracle", "--segments", "64", "--trajectories", "200")
    assert code == 4
    assert "MISMATCH" in out


def test_oracle_step_budget(capsys):
    assert run(capsys, "oracle", "--segments", "100000")[0] == 2


@pytest.mark.slow
def test_oracle_default_passes_and_is_deterministic(tmp_path, capsys):
    path = tmp_path / "oracle.txt"
    code_a, out, _ = run(capsys, "oracle", "--seed", "3", "--out", str(path))
    first = path.read_bytes()
    code_b, _, _ = run(capsys, "oracle", "--seed", "3", "--out", str(path))
    assert code_a == code_b == 0
    assert out.strip().endswith("ALL PASS")
    assert path.read_bytes() == first
