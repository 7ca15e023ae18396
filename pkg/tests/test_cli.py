import json
import os

import numpy as np
import pytest

from hbatlas.cli import main


def run(args):
    return main(args)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


SMALL = ["--mu", "1", "--L", "10", "--nx", "6", "--ny", "4"]


class TestRateMap:
    def test_writes_all_outputs(self, tmp_path):
        out = str(tmp_path / "o")
        assert run(["rate-map", *SMALL, "--out", out]) == 0
        for name in ("rate.csv", "rate.json", "rate.svg", "rate.png"):
            assert os.path.exists(os.path.join(out, name))
        rows = [l for l in read(os.path.join(out, "rate.csv")).decode()
                .strip().split("\n") if not l.startswith("#")]
        assert len(rows) == 1 + 6 * 4

    def test_rerun_byte_identical(self, tmp_path):
        o1, o2 = str(tmp_path / "a"), str(tmp_path / "b")
        run(["rate-map", *SMALL, "--out", o1])
        run(["rate-map", *SMALL, "--out", o2])
        assert read(os.path.join(o1, "rate.csv")) == \
            read(os.path.join(o2, "rate.csv"))

    def test_beta_zero_row_equals_gd_rates(self, tmp_path):
        out = str(tmp_path / "o")
        # bounds chosen so one row of centers sits exactly at beta = 0
        run(["rate-map", "--mu", "1", "--L", "10", "--nx", "4", "--ny", "2",
             "--beta-min", "-0.1", "--beta-max", "0.3", "--out", out])
        rows = [l.split(",") for l in
                read(os.path.join(out, "rate.csv")).decode().strip().split("\n")
                if not l.startswith("#")][1:]
        checked = 0
        for gam, bet, _, rho, _, _ in rows:
            if float(bet) != 0.0:
                continue
            g = float(gam)
            expected = max(abs(1 - g * 1.0), abs(1 - g * 10.0))
            assert float(rho) == expected
            checked += 1
        assert checked == 4


class TestClassify:
    def test_single_point_lyapunov(self, capsys, tmp_path):
        code = run(["classify", "--mu", "1", "--L", "10",
                    "--gamma", "0.1", "--beta", "0.0",
                    "--out", str(tmp_path)])
        assert code == 0
        assert capsys.readouterr().out.strip() == "lyapunov"

    def test_single_point_cycle(self, capsys, tmp_path):
        code = run(["classify", "--mu", "1", "--L", "25",
                    "--gamma", str(4.0 / 36.0), "--beta", str(4.0 / 9.0),
                    "--out", str(tmp_path)])
        assert code == 0
        assert capsys.readouterr().out.strip() == "cycle"

    def test_sweep_writes_files(self, tmp_path):
        out = str(tmp_path / "o")
        code = run(["classify", "--mu", "1", "--L", "10", "--nx", "4",
                    "--ny", "3", "--kmax", "4", "--out", out])
        assert code == 0
        assert os.path.exists(os.path.join(out, "classify.csv"))
        assert os.path.exists(os.path.join(out, "classify.svg"))


class TestVerifyCycle:
    def _make_cert(self, tmp_path):
        out = str(tmp_path / "o")
        run(["cycle-map", "--mu", "1", "--L", "10",
             "--gamma-min", "0.3", "--gamma-max", "0.4",
             "--beta-min", "0.0", "--beta-max", "0.2",
             "--nx", "2", "--ny", "2", "--kmax", "4", "--out", out])
        certdir = os.path.join(out, "certs")
        names = sorted(os.listdir(certdir))
        assert names, "expected at least one emitted certificate"
        return os.path.join(certdir, names[0])

    def test_valid_certificate_exits_zero(self, tmp_path):
        cert = self._make_cert(tmp_path)
        assert run(["verify-cycle", cert, "--out", str(tmp_path)]) == 0

    def test_tampered_certificate_exits_two(self, tmp_path):
        cert_path = self._make_cert(tmp_path)
        doc = json.loads(read(cert_path).decode())
        doc["G"][0] += 1e-3
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run(["verify-cycle", str(bad), "--out", str(tmp_path)]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert run(["verify-cycle", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path)]) == 2


class TestPermutationAtlas:
    def test_k4_census_files(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        code = run(["permutation-atlas", "--mu", "1", "--L", "10",
                    "--nx", "5", "--ny", "5", "--kmax", "4", "--out", out])
        assert code == 0
        svgs = [n for n in os.listdir(out) if n.endswith(".svg")]
        assert len(svgs) == 4  # reduced permutations at K=4
        text = capsys.readouterr().out
        assert "(conjectured)" in text
        assert "of 4 permutations have nonempty regions" in text


class TestConfigAndErrors:
    def test_usage_error_exit_code(self, capsys):
        assert run(["classify", "--mode", "everything"]) == 1

    def test_invalid_class_exit_code(self):
        assert run(["rate-map", "--mu", "10", "--L", "1"]) == 1

    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mu = 1\nL = 10\nnx = 3\nny = 3\n")
        out = str(tmp_path / "o")
        assert run(["rate-map", "--config", str(cfg), "--out", out]) == 0
        rows = [l for l in read(os.path.join(out, "rate.csv")).decode()
                .strip().split("\n") if not l.startswith("#")]
        assert len(rows) == 1 + 9

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nx = 3\nny = 3\n")
        out = str(tmp_path / "o")
        assert run(["rate-map", "--config", str(cfg), "--nx", "5",
                    "--out", out]) == 0
        rows = [l for l in read(os.path.join(out, "rate.csv")).decode()
                .strip().split("\n") if not l.startswith("#")]
        assert len(rows) == 1 + 15

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("turbo = yes\n")
        assert run(["rate-map", "--config", str(cfg)]) == 1

    def test_provenance_embedded(self, tmp_path):
        out = str(tmp_path / "o")
        run(["rate-map", *SMALL, "--out", out])
        text = read(os.path.join(out, "rate.csv")).decode()
        assert "# provenance:" in text
        assert '"command": "rate-map"' in text
        with open(os.path.join(out, "rate.json")) as fh:
            doc = json.load(fh)
        assert doc["provenance"]["run_config"]["nx"] == 6
        assert "threads" not in doc["provenance"]["run_config"]
