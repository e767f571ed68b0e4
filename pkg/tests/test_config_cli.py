import subprocess
import sys

import pytest

from upclocksim.cli import build_parser, main
from upclocksim.config import SCHEMA, bundled_config, impairment_model, read_config, rx_config, sweep_spec
from upclocksim.impairments import CfoMode, PsdAnchor
from upclocksim.phy import ConfigError
from upclocksim.rx import CfoCorrection


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_defaults_parse():
    v = read_config()
    assert v["psdu_length"] == 4096
    assert v["snr_grid"][0] == 0 and v["snr_grid"][-1] == 30 and len(v["snr_grid"]) == 13
    assert v["mcs_list"] == (0, 1, 4)
    assert v["cfo_mode"] is CfoMode.FIXED
    assert v["pn_anchor"] is PsdAnchor.DC


def test_bundled_paper_config_lists_every_key():
    path = bundled_config("paper.cfg")
    text = path.read_text()
    for key in SCHEMA:
        assert f"\n{key.name} = " in text, key.name
    v = read_config("paper.cfg")
    assert v["include_ideal"] is True
    assert v["carrier_freq"] == 73.44e9
    assert v["cfo_ppm_total"] == 40
    assert (v["pn_pole_freq"], v["pn_zero_freq"], v["pn_psd0_dbc"]) == (1e6, 100e6, -93.0)
    assert v["pa_obo_db"] == 8.0
    spec = sweep_spec(v)
    assert [imp.name for imp in spec.impairments] == ["full", "ideal"]
    assert spec.factors == (4, 8, 16)


def test_overrides_and_models(tmp_path):
    path = _write(tmp_path, "[impairments]\npa_obo_db = 6  # comment\ncfo = false\n[rx]\ncfo_correction = genie\n")
    v = read_config(path, {"pa_smoothness": "2", "snr_grid": "1, 2,3"})
    imp = impairment_model(v)
    assert imp.pa.obo == 6 and imp.pa.smoothness_p == 2
    assert imp.cfo is None
    assert rx_config(v).cfo_correction is CfoCorrection.GENIE
    assert v["snr_grid"] == (1.0, 2.0, 3.0)


@pytest.mark.parametrize(
    "text, needle",
    [
        ("[sweep]\nbogus = 1\n", "bogus"),
        ("[nowhere]\nx = 1\n", "nowhere"),
        ("[rx]\npsdu_length = 5\n", "psdu_length"),
        ("[sweep]\nmcs_list = 0, 7\n", "mcs_list"),
        ("[sweep]\nfactors = 2\n", "factors"),
        ("[impairments]\npa_obo_db = loud\n", "pa_obo_db"),
        ("[impairments]\ncfo_mode = sometimes\n", "cfo_mode"),
        ("[ppdu]\ngenie_signaling = false\n", "genie_signaling"),
        ("[impairments]\ncfo_fixed_offset = 4e6\n", "cfo_fixed_offset"),
        ("no section header\n", "malformed"),
    ],
)
def test_config_errors_name_the_key(tmp_path, text, needle):
    path = _write(tmp_path, text)
    with pytest.raises(ConfigError, match=needle):
        sweep_spec(read_config(path))


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        read_config("/nonexistent/x.cfg")


def test_every_key_has_a_flag():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices["sweep"]
    flags = {opt for action in sub._actions for opt in action.option_strings}
    for key in SCHEMA:
        assert "--" + key.name.replace("_", "-") in flags


def test_no_args_prints_usage(capsys):
    assert main([]) != 0
    assert "usage" in capsys.readouterr().err


def test_bad_override_exits_nonzero(capsys):
    assert main(["trial", "--pa-obo-db", "abc"]) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "pa_obo_db" in err[0]


def test_unknown_config_key_exits_nonzero(tmp_path, capsys):
    path = _write(tmp_path, "[sweep]\nspeed = 11\n")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "r.csv")]) != 0
    assert "speed" in capsys.readouterr().err


def test_trial_command(capsys):
    assert main(["trial", "--mcs", "0", "--psdu-length", "100", "--snr", "20"]) == 0
    out = capsys.readouterr().out
    assert "cfo: coarse=" in out and "packet_error=False" in out


def test_constellation_command(tmp_path, capsys):
    out = tmp_path / "c.txt"
    assert main(["constellation", "--psdu-length", "200", "--out", str(out)]) == 0
    assert out.read_text().startswith("re,im,symbol_index,tone_index\n")
    assert "evm=" in capsys.readouterr().out


def test_sweep_command_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "r.csv"
    args = ["sweep", "--out", str(out), "--psdu-length", "40", "--snr-grid", "10", "--mcs-list", "0",
            "--factors", "8", "--min-trials", "3", "--max-trials", "3", "--target-errors", "1"]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "mcs,factor,impairments,snr_db,trials,errors,per,ci_low,ci_high"
    assert lines[1].startswith("0,8,full,10,3,")
    manifest = (tmp_path / "r.csv.manifest.txt").read_text()
    assert "config_hash = " in manifest and "master_seed = 20240101" in manifest


def test_validate_command(capsys):
    assert main(["validate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "upclocksim.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "upclocksim" in res.stdout
