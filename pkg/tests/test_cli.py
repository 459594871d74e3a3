import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from polarpipe.cli import main
from polarpipe.code_model import FLOAT, ChannelConfig, PolarCodeSpec, simulate_frames


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.txt"
    path.write_text("0 1 2 4\n")
    return path


def read_csv(path):
    return [row for row in csv.reader(path.read_text().splitlines()) if row and not row[0].startswith("#")]


class TestConstruct:
    def test_construct(self, tmp_path, capsys):
        assert main(["construct", "--n", "8", "--k", "4", "--design-snr", "0", "--out", str(tmp_path)]) == 0
        text = (tmp_path / "frozen.txt").read_text()
        body = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert sorted(int(t) for t in " ".join(body).split()) == [0, 1, 2, 4]
        assert "K=4" in capsys.readouterr().out

    def test_load(self, tmp_path, toy_file, capsys):
        assert main(["construct", "--n", "8", "--load", str(toy_file), "--out", str(tmp_path / "o")]) == 0
        assert "R=1/2" in capsys.readouterr().out

    def test_roundtrip_header_supplies_n(self, tmp_path):
        main(["construct", "--n", "16", "--k", "5", "--out", str(tmp_path)])
        assert main(["construct", "--load", str(tmp_path / "frozen.txt"), "--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "frozen.txt").read_text() == (tmp_path / "b" / "frozen.txt").read_text()

    def test_non_power_of_two(self, tmp_path):
        assert main(["construct", "--n", "7", "--k", "3", "--out", str(tmp_path)]) == 2

    def test_missing_flags(self, tmp_path):
        assert main(["construct", "--n", "8", "--out", str(tmp_path)]) == 2

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "dup.txt"
        bad.write_text("0 0")
        assert main(["construct", "--n", "4", "--load", str(bad), "--out", str(tmp_path)]) == 2

    def test_unknown_command(self):
        assert main(["nope"]) == 2


class TestCompile:
    def test_toy(self, tmp_path, toy_file):
        out = tmp_path / "c"
        assert main(["compile", "--frozen", str(toy_file), "--n", "8", "--freq-mhz", "231", "--out", str(out)]) == 0
        for name in ("program.json", "netlist.json", "netlist.dot", "tree.dot", "report.json"):
            assert (out / name).is_file()
        rep = json.loads((out / "report.json").read_text())
        assert rep["report"]["latency_cycles"] == 5
        assert rep["report"]["throughput_model"]["info_bps"] == 924e6
        labels = [f"{i['op']}{i['span']}" for i in json.loads((out / "program.json").read_text())["instructions"]]
        assert labels == ["F8", "Rep4", "G8", "SPC4", "Combine8"]

    def test_1024(self, tmp_path):
        out = tmp_path / "c"
        assert main(["compile", "--n", "1024", "--k", "512", "--freq-mhz", "231", "--out", str(out)]) == 0
        tp = json.loads((out / "report.json").read_text())["report"]["throughput_model"]
        assert abs(tp["info_bps"] / 118.5e9 - 1) < 3e-3

    def test_missing_file(self, tmp_path):
        assert main(["compile", "--frozen", str(tmp_path / "none.txt"), "--n", "8", "--out", str(tmp_path)]) == 2

    def test_bad_cap(self, tmp_path, toy_file):
        assert main(["compile", "--frozen", str(toy_file), "--cap-repspc", "3", "--out", str(tmp_path)]) == 2

    def test_bad_quant(self, tmp_path, toy_file):
        assert main(["compile", "--frozen", str(toy_file), "--n", "8", "--quant", "fixed:x", "--out", str(tmp_path)]) == 2

    def test_deterministic(self, tmp_path):
        args = ["compile", "--n", "256", "--k", "128"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        for name in ("program.json", "netlist.json", "netlist.dot", "report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestBer:
    def run_ber(self, tmp_path, decoder, *extra):
        out = tmp_path / decoder
        args = ["ber", "--n", "64", "--k", "32", "--ebno-list", "1,3", "--max-frames", "3000",
                "--seed", "9", "--decoder", decoder, "--out", str(out), *extra]
        code = main(args)
        return code, (out / "ber.csv").read_bytes()

    def test_sc_vs_pipeline(self, tmp_path):
        code_a, a = self.run_ber(tmp_path, "sc")
        code_b, b = self.run_ber(tmp_path, "pipeline")
        assert code_a == code_b == 0
        assert a == b
        assert a.decode().splitlines()[0] == "ebno_db,frames,bit_errors,frame_errors,BER,FER"

    def test_check(self, tmp_path):
        code, _ = self.run_ber(tmp_path, "fastssc", "--check")
        assert code == 0

    def test_rerun_identical(self, tmp_path):
        _, a = self.run_ber(tmp_path, "fastssc")
        _, b = self.run_ber(tmp_path / "again", "fastssc")
        assert a == b

    def test_empty_ebno(self, tmp_path):
        assert main(["ber", "--n", "8", "--k", "4", "--out", str(tmp_path)]) == 2
        assert main(["ber", "--n", "8", "--k", "4", "--ebno-list", "", "--out", str(tmp_path)]) == 2

    def test_rate1_fer_is_raw(self, tmp_path):
        assert main(["ber", "--n", "16", "--k", "16", "--ebno-list", "2", "--max-frames", "2000",
                     "--min-frame-errors", "100000", "--seed", "4", "--quant", "float", "--out", str(tmp_path)]) == 0
        row = read_csv(tmp_path / "ber.csv")[1]
        # float LLRs, so no zero-LLR ties and the decoder reduces to sign decisions
        fb = simulate_frames(PolarCodeSpec(16, ()), ChannelConfig(2.0, 4), FLOAT, 0, 2000)
        raw = ((fb.llrs < 0).astype(np.uint8) != fb.codewords).any(axis=1).sum()
        assert int(row[3]) == raw

    @pytest.mark.slow
    def test_toy_ber_decreasing(self, tmp_path, toy_file):
        assert main(["ber", "--frozen", str(toy_file), "--n", "8", "--ebno-list", "0,2,4,6",
                     "--min-frame-errors", "1000000", "--max-frames", "100000", "--batch", "10000",
                     "--seed", "1", "--out", str(tmp_path)]) == 0
        bers = [float(r[4]) for r in read_csv(tmp_path / "ber.csv")[1:]]
        assert all(a > b for a, b in zip(bers, bers[1:]))


class TestSweep:
    def test_fit(self, tmp_path):
        assert main(["sweep", "--n-list", "64,128,256,512,1024", "--out", str(tmp_path)]) == 0
        text = (tmp_path / "sweep.csv").read_text()
        footer = [ln for ln in text.splitlines() if ln.startswith("#")]
        assert len(footer) == 1
        assert 1.7 <= float(footer[0].rsplit(":", 1)[1]) <= 2.3
        lat = [int(r[1]) for r in read_csv(tmp_path / "sweep.csv")[1:]]
        assert lat == sorted(lat)

    def test_single_row(self, tmp_path):
        assert main(["sweep", "--n-list", "8", "--out", str(tmp_path)]) == 0
        text = (tmp_path / "sweep.csv").read_text()
        assert "#" not in text
        assert len(read_csv(tmp_path / "sweep.csv")) == 2

    def test_missing_list(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path)]) == 2


class TestSimulateAndAgree:
    def test_simulate_toy(self, tmp_path, toy_file):
        assert main(["simulate", "--frozen", str(toy_file), "--n", "8", "--frames", "3", "--trace",
                     "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "simulate.json").read_text())
        assert summary["timing_passed"] and summary["latency_cycles"] == 5
        assert summary["mismatches_vs_fastssc"] == 0
        assert (tmp_path / "trace.csv").read_text().startswith("cycle,stage_index,frame_id,opcode")

    def test_agree(self, tmp_path):
        assert main(["agree", "--n", "64", "--k", "32", "--frames", "2000", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "mismatches.jsonl").read_text() == ""


class TestConfig:
    def test_config_defaults(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep settings\nn-list = 64,128\nrate = 0.25\n")
        assert main(["--config", str(cfg), "sweep", "--out", str(tmp_path / "o")]) == 0
        rows = read_csv(tmp_path / "o" / "sweep.csv")
        assert [r[0] for r in rows[1:]] == ["64", "128"]

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_list = 64,128\n")
        assert main(["--config", str(cfg), "sweep", "--n-list", "32", "--out", str(tmp_path)]) == 0
        assert [r[0] for r in read_csv(tmp_path / "sweep.csv")[1:]] == ["32"]

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        assert main(["--config", str(cfg), "sweep", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "polarpipe", "construct", "--n", "4", "--k", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "N=4 K=2" in proc.stdout
