import json

import pytest

from dfmix.cli import main
from dfmix.quantum_scheme import fig1b_fields
from dfmix.scenario import ConfigError, build_scenario, load_scenario, parse_frequency


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else None), err


# -- scenario files -----------------------------------------------------------

@pytest.mark.parametrize("text,mhz", [("2GHz", 2000.0), ("500 MHz", 500.0), ("750kHz", 0.75),
                                      (12.5, 12.5), ("-3e2MHz", -300.0)])
def test_parse_frequency(text, mhz):
    assert parse_frequency(text) == pytest.approx(mhz)


def test_parse_frequency_rejects():
    with pytest.raises(ConfigError, match="run.omega1_span"):
        parse_frequency("two GHz", "run.omega1_span")


def test_preset_reference_matches_module(scheme):
    sc = build_scenario({"scheme": "na2", "fields": "fig1b"})
    assert sc.fields == fig1b_fields(scheme)


def test_override_recomputes_generated_wave():
    sc = build_scenario({"scheme": {"preset": "na2", "transitions": {"03": {"wavelength": 480.0}}},
                         "fields": {"preset": "fig1c", "E3minus": {"rabi": 700.0}}})
    assert sc.fields.g23m == 700.0
    assert sc.fields.E4.inv_wavelength == pytest.approx(sc.scheme.generated_inv_wavelength)
    assert sc.scheme.wavelength("03") == 480.0


@pytest.mark.parametrize("data,key", [
    ({"fields": "fig1b", "extra": 1}, "extra"),
    ({"fields": {"preset": "fig1b", "E3minus": {"rabbi": 1.0}}}, "fields.E3minus.rabbi"),
    ({"fields": {"preset": "fig1b", "E2": {"direction": 2}}}, "fields.E2.direction"),
    ({"fields": {"preset": "fig1b", "E2": {"rabi": "strong"}}}, "fields.E2.rabi"),
    ({"scheme": {"transitions": {"01": {"gamma": 1.0}}}, "fields": "fig1b"}, "scheme.transitions.01"),
    ({"scheme": {"transitions": {k: {"wavelength": 600.0, "gamma": 1.0} for k in ("01", "12", "23", "03")}},
      "fields": "fig1b"}, "scheme.u"),
    ({"fields": "fig9"}, "fields.preset"),
    ({"fields": "fig1b", "run": {"spam": 1}}, "run.spam"),
])
def test_config_errors_name_key(data, key):
    with pytest.raises(ConfigError) as exc:
        build_scenario(data)
    assert exc.value.key == key


def test_toml_and_json_agree(tmp_path):
    toml = tmp_path / "s.toml"
    toml.write_text('fields = "fig1c"\n[run]\npoints = 50\n[scheme]\npreset = "na2"\n')
    js = tmp_path / "s.json"
    js.write_text(json.dumps({"scheme": {"preset": "na2"}, "fields": "fig1c", "run": {"points": 50}}))
    a, b = load_scenario(toml), load_scenario(js)
    assert a.fields == b.fields and a.scheme == b.scheme and a.run == b.run == {"points": 50}


# -- CLI ------------------------------------------------------------------------

def test_spectrum_fig1b(tmp_path, capsys):
    code, summary, _ = run(capsys, "spectrum", "--preset", "fig1b", "--omega1-span", "2GHz",
                           "--points", "500", "--out", str(tmp_path))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["spectrum_averaged.csv", "spectrum_surface.csv"]
    lines = (tmp_path / "spectrum_averaged.csv").read_text().splitlines()
    assert lines[0].startswith("# {") and len(lines) == 502
    assert lines[1].startswith("detuning_MHz,")
    assert summary["span_MHz"] == 2000.0
    assert summary["chi4nl_coherent_abs2"]["hwhm_MHz"] > 0


def test_spectrum_no_control_is_broader(tmp_path, capsys):
    args = ["spectrum", "--preset", "fig1b", "--omega1-span", "2GHz", "--points", "500"]
    _, on, _ = run(capsys, *args, "--out", str(tmp_path / "on"))
    _, off, _ = run(capsys, *args, "--no-control", "--out", str(tmp_path / "off"))
    assert off["control_rabi_MHz"] == 0
    w_on = on["chi4nl_coherent_abs2"]["hwhm_MHz"]
    w_off = off["chi4nl_coherent_abs2"]["hwhm_MHz"]
    assert w_off >= 5 * w_on


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('fields = "fig1b"\n[run]\nomega1_spam = "2GHz"\n')
    code, _, err = run(capsys, "spectrum", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2 and "run.omega1_spam" in err
    broken = tmp_path / "broken.toml"
    broken.write_text("fields = [\n")
    code, _, err = run(capsys, "design", "--config", str(broken), "--out", str(tmp_path))
    assert code == 2 and "parse error" in err


@pytest.mark.parametrize("preset,target", [("fig1b", 25.2e3), ("fig1c", 635.8)])
def test_design(tmp_path, capsys, preset, target):
    code, rep, _ = run(capsys, "design", "--preset", preset, "--out", str(tmp_path))
    assert code == 0
    assert rep["solved_rabi"] == pytest.approx(target, rel=0.2)
    saved = json.loads((tmp_path / "design.json").read_text())
    assert saved["report"]["solved_rabi"] == rep["solved_rabi"]


def test_design_co_propagating_exit_4(tmp_path, capsys):
    code, _, err = run(capsys, "design", "--preset", "fig1b", "--co-propagating", "--out", str(tmp_path))
    assert code == 4 and "no compensation geometry" in err


def test_convert_compare_off(tmp_path, capsys):
    code, s, _ = run(capsys, "convert", "--preset", "fig1b", "--zmax", "5", "--compare-off",
                     "--out", str(tmp_path))
    assert code == 0
    assert s["enhancement_ratio"] > 1
    assert {p.name for p in tmp_path.iterdir()} == {"convert.csv", "convert_off.csv"}


def test_convert_zero_thickness(tmp_path, capsys):
    code, s, _ = run(capsys, "convert", "--preset", "fig1c", "--zmax", "0", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "convert.csv").read_text().splitlines()
    assert len(lines) == 3
    row = lines[2].split(",")
    assert float(row[0]) == 0 and float(row[1]) == 0 and float(row[2]) == 0


def test_convert_rerun_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "convert", "--preset", "fig1c", "--nz", "21", "--out", str(tmp_path / d))[0] == 0
    assert (tmp_path / "a" / "convert.csv").read_bytes() == (tmp_path / "b" / "convert.csv").read_bytes()


def test_bad_run_value_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "convert", "--preset", "fig1c", "--zmax", "-1", "--out", str(tmp_path))
    assert code == 2 and "run.zmax" in err
