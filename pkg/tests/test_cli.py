import json
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fluxq.cli import main
from fluxq.landscape import FluxMap


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestFreq:
    def test_json_output(self, capsys):
        code, out, _ = run(capsys, "freq", "--device", "sample_A", "--phi-t", 0, "--phi-b", 0.5, "--json")
        assert code == 0
        d = json.loads(out)
        assert 12.7 <= d["f01_ghz"] <= 12.8
        assert d["levels_ghz"] == sorted(d["levels_ghz"]) and len(d["levels_ghz"]) == 5

    def test_barrier_flux_parity(self, capsys):
        _, a, _ = run(capsys, "freq", "--phi-b", "0.25", "--json")
        _, b, _ = run(capsys, "freq", "--phi-b", "-0.25", "--json")
        da, db = json.loads(a), json.loads(b)
        assert da["f01_ghz"] == db["f01_ghz"] and da["levels_ghz"] == db["levels_ghz"]

    def test_text_output(self, capsys):
        code, out, _ = run(capsys, "freq", "--phi-b", "0.5")
        assert code == 0 and "f01 = 12.74343" in out

    @pytest.mark.parametrize("argv", [["freq", "--phi-t", "abc"], ["freq", "--bogus"], ["nosuch"],
                                      ["sweep", "--phi-t", "0:1"], ["freq", "--device", "sample_Z"]])
    def test_usage_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and err

    def test_computation_failure(self, capsys, tmp_path):
        cfg = write_config(tmp_path, "[solve]\nf01_rel_tol = 1e-15\ninitial_cutoff = 2\nmax_cutoff = 4\n")
        code, _, err = run(capsys, "freq", "--config", cfg, "--phi-b", "0.5")
        assert code == 1 and "not converged" in err

    def test_config_errors(self, capsys, tmp_path):
        for text in ("[solve]\nwarp = 1\n", "[nonsense]\n", "seed = 'x'\n", "[output]\nformats = []\n",
                     "not toml ="):
            code, _, err = run(capsys, "freq", "--config", write_config(tmp_path, text))
            assert code == 2, text
        code, _, _ = run(capsys, "freq", "--config", tmp_path / "missing.toml")
        assert code == 2

    def test_environment_config_and_flag_precedence(self, capsys, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, '[device]\npreset = "sample_B"\n')
        monkeypatch.setenv("FLUXQ_CONFIG", str(cfg))
        _, out, _ = run(capsys, "freq", "--json")
        assert json.loads(out)["device"] == "sample_B"
        _, out, _ = run(capsys, "freq", "--json", "--device", "sample_A")
        assert json.loads(out)["device"] == "sample_A"

    def test_inline_device_override(self, capsys, tmp_path):
        cfg = write_config(tmp_path, '[device]\npreset = "sample_A"\nej_ghz = 100.0\n')
        _, out, _ = run(capsys, "freq", "--config", cfg, "--phi-b", "0.5", "--json")
        assert json.loads(out)["f01_ghz"] == pytest.approx(np.sqrt(100.0), rel=0.03)

    def test_installed_entry_point(self):
        exe = shutil.which("fluxq")
        cmd = [exe] if exe else [sys.executable, "-m", "fluxq.cli"]
        res = subprocess.run(cmd + ["freq", "--phi-b", "0.5", "--json"], capture_output=True, text=True)
        assert res.returncode == 0 and json.loads(res.stdout)["f01_ghz"] == pytest.approx(12.7434, abs=1e-4)
        res = subprocess.run(cmd + ["freq", "--what"], capture_output=True, text=True)
        assert res.returncode == 2 and "usage" in res.stderr


class TestSweep:
    def test_full_grid_contract(self, capsys, tmp_path):
        a = tmp_path / "a"
        code, out, err = run(capsys, "sweep", "--out", a, "--json")
        assert code == 0 and "row 101/101" in err
        lines = (a / "sweep.csv").read_text().splitlines()
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body[0] == "phi_b,phi_t,f01_ghz" and len(body) == 1 + 10201
        summary = json.loads(out)
        assert summary["min_f01_ghz"] <= 0.01 and summary["max_f01_ghz"] == pytest.approx(21.0, rel=0.15)
        assert not (a / "sweep.rows").exists()
        first = (a / "sweep.csv").read_bytes()
        code, _, _ = run(capsys, "sweep", "--out", a, "--json", "--threads", "1")
        assert code == 0 and (a / "sweep.csv").read_bytes() == first

    def test_metadata_embeds_config(self, tmp_path, capsys):
        run(capsys, "sweep", "--out", tmp_path, "--phi-t=-0.1:0.1:3", "--phi-b", "0:1:3", "-q", "--seed", 7)
        meta = FluxMap.load(tmp_path / "sweep.json").metadata
        assert meta["config"]["device"]["name"] == "sample_A" and meta["config"]["seed"] == 7
        assert "timestamp" not in meta and "fluxq_version" in meta
        run(capsys, "sweep", "--out", tmp_path, "--phi-t=-0.1:0.1:3", "--phi-b", "0:1:3", "-q", "--timestamp")
        assert "timestamp" in FluxMap.load(tmp_path / "sweep.json").metadata

    def test_resume_from_checkpoints(self, capsys, tmp_path):
        args = ["sweep", "--out", tmp_path, "--phi-t=-0.2:0.2:5", "--phi-b", "0.4:0.6:4", "--keep-checkpoints"]
        assert run(capsys, *args)[0] == 0
        rows = tmp_path / "sweep.rows"
        assert len(list(rows.glob("row_*.json"))) == 4
        row = json.loads((rows / "row_00002.json").read_text())
        row["values"] = [1.5] * 5
        (rows / "row_00002.json").write_text(json.dumps(row))
        code, _, err = run(capsys, *args)
        m = FluxMap.load(tmp_path / "sweep.csv")
        np.testing.assert_array_equal(m.values[2], 1.5)
        assert "row 3/4" not in err
        # a different configuration ignores the stale rows
        run(capsys, *args[:-1], "--device", "sample_B")
        assert FluxMap.load(tmp_path / "sweep.csv").values[2, 0] != 1.5

    def test_svg(self, capsys, tmp_path):
        run(capsys, "sweep", "--out", tmp_path, "--phi-t=-0.1:0.1:3", "--phi-b", "0:1:3", "-q", "--svg", "--log")
        root = ET.parse(tmp_path / "sweep.svg").getroot()
        assert root.tag.endswith("svg")


class TestOtherCommands:
    def test_potential(self, capsys, tmp_path):
        code, _, _ = run(capsys, "potential", "--out", tmp_path, "--svg", "--points", 101)
        assert code == 0
        d = json.loads((tmp_path / "potential.json").read_text())
        assert len(d["phase"]) == 101 and len(d["psi"]) == 2
        assert (tmp_path / "potential.csv").read_text().startswith("# fluxq-potential v1")
        ET.parse(tmp_path / "potential.svg")

    def test_t1_schema(self, capsys, tmp_path):
        code, _, _ = run(capsys, "t1", "--out", tmp_path, "--svg")
        assert code == 0
        lines = (tmp_path / "t1.csv").read_text().splitlines()
        header = lines[2].split(",")
        assert header[:5] == ["f01_ghz", "t1_purcell_s", "t1_charge_s", "t1_total_s", "q_total"]
        f = [float(ln.split(",")[0]) for ln in lines[3:]]
        assert len(f) == 41 and np.all(np.diff(f) > 0)
        ET.parse(tmp_path / "t1.svg")

    def test_t1_numeric_json(self, capsys, tmp_path):
        code, out, _ = run(capsys, "t1", "--out", tmp_path, "--f01", "4:6:3", "--numeric", "--json")
        d = json.loads(out)
        assert code == 0 and d["metadata"]["matrix_element"] == "numeric" and len(d["rows"]) == 3

    def test_probe_map_and_calibrate(self, capsys, tmp_path):
        truth = write_config(tmp_path, "[crosstalk]\nm = [[1.1, 0.2], [-0.1, 0.9]]\noffset = [0.05, -0.03]\n",
                             "truth.toml")
        guess = write_config(tmp_path, "[crosstalk]\nm = [[1.1, 0.0], [0.0, 0.9]]\n", "guess.toml")
        code, _, _ = run(capsys, "probe-map", "--config", truth, "--out", tmp_path, "--i-t=-0.9:0.9:33",
                         "--i-b", "0.1:2.1:33")
        assert code == 0
        code, out, _ = run(capsys, "calibrate", tmp_path / "probe_map.csv", "--config", guess,
                           "--out", tmp_path, "--json")
        assert code == 0
        d = json.loads(out)
        m = np.array(d["crosstalk"]["m"])
        truth_m = np.array([[1.1, 0.2], [-0.1, 0.9]])
        assert np.max(np.abs(m - truth_m) / np.abs(truth_m)) < 0.01
        assert json.loads((tmp_path / "crosstalk.json").read_text())["format"] == "fluxq-crosstalk"

    def test_calibrate_failures(self, capsys, tmp_path):
        code, _, _ = run(capsys, "calibrate", tmp_path / "absent.csv")
        assert code == 2
        flat = tmp_path / "flat.csv"
        from fluxq.landscape import Axis
        FluxMap(Axis("i_b", 0, 1, 5), Axis("i_t", 0, 1, 5), np.ones((5, 5))).save(flat)
        code, _, err = run(capsys, "calibrate", flat)
        assert code == 1 and "degenerate" in err

    def test_tls_determinism(self, capsys, tmp_path):
        outputs = []
        for _ in range(2):
            code, out, _ = run(capsys, "tls", "--seed", 42, "--out", tmp_path, "--svg", "--json")
            assert code == 0
            outputs.append([(tmp_path / n).read_bytes() for n in ("tls_spectrum.svg", "tls_ensemble.json")])
        assert outputs[0] == outputs[1]
        ens = json.loads(outputs[0][1])
        assert ens["seed"] == 42 and len(ens["defects"]) == json.loads(out)["n_defects"]
        run(capsys, "tls", "--seed", 43, "--out", tmp_path, "--svg")
        assert (tmp_path / "tls_spectrum.svg").read_bytes() != outputs[0][0]

    def test_bad_threads(self, capsys):
        assert run(capsys, "freq", "--threads", 0)[0] == 2
