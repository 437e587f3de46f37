import json

import pytest

from logchaos.cli import (ConfigError, _validate_only, load_config, main,
                          run_id_of, sha256_file, write_csv)

PHASE_CFG = {"kind": "phase-scan", "d": 1,
             "alpha_range": [-2.0, 2.0, 9], "beta_range": [-2.0, 2.0, 9]}

# distance2 of the same coupled pair is exactly zero at gamma = 0, so this
# run is deterministic down to the bytes and cheap to replay
MOM0_CFG = {"kind": "moment-check", "gammas": [0], "estimands": ["distance2"],
            "eps": 0.0625, "eps_prime": 0.03125, "grid_n": 128,
            "replicas": 60, "seed": 3, "f": {"center": 0.5, "radius": 0.2}}

FS_CFG = {"kind": "field-stats", "grid_n": 128, "eps": 0.0625,
          "eps_prime": 0.03125, "var_levels": [2, 4], "probes": 3,
          "replicas": 300, "seed": 1, "f": {"center": 0.5, "radius": 0.2}}

# near-equal rungs leave the last cell at the same height as the first,
# which the trend rule rejects regardless of seed
CAUCHY_FAIL_CFG = {"kind": "cauchy", "gamma": 0.5, "grid_n": 64,
                   "eps_ladder": [0.125, 0.124, 0.123], "replicas": 100,
                   "seed": 0, "f": {"center": 0.5, "radius": 0.2}}


def cfg_file(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.json"))

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{kind: phase-scan}")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_non_object(self, tmp_path):
        p = tmp_path / "arr.json"
        p.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(cfg_file(tmp_path, {"kind": "bogus"}))

    def test_roundtrip(self, tmp_path):
        cfg = load_config(cfg_file(tmp_path, PHASE_CFG))
        assert cfg == PHASE_CFG


class TestRunId:
    def test_shape(self):
        rid = run_id_of(PHASE_CFG)
        assert len(rid) == 12
        assert all(c in "0123456789abcdef" for c in rid)

    def test_key_order_invariant(self):
        a = {"kind": "tail-check", "sigmas": [1.0]}
        b = {"sigmas": [1.0], "kind": "tail-check"}
        assert run_id_of(a) == run_id_of(b)

    def test_value_sensitive(self):
        a = dict(MOM0_CFG)
        b = dict(MOM0_CFG, seed=4)
        assert run_id_of(a) != run_id_of(b)


class TestWriteCsv:
    def test_crlf_and_hash(self, tmp_path):
        p = tmp_path / "t.csv"
        digest = write_csv(p, ["a", "b"], [[1, "x"], [2, "y"]])
        raw = p.read_bytes()
        assert raw == b"a,b\r\n1,x\r\n2,y\r\n"
        assert digest == sha256_file(p)


class TestValidateOnly:
    MINIMAL = [
        {"kind": "phase-scan"},
        {"kind": "kernel-check"},
        {"kind": "field-stats"},
        {"kind": "moment-check"},
        {"kind": "cauchy"},
        {"kind": "mollifier-independence"},
        {"kind": "tail-check"},
        {"kind": "sup-prob"},
        {"kind": "tilt-check"},
        {"kind": "sobolev"},
    ]

    def test_minimal_defaults_all_pass(self):
        for cfg in self.MINIMAL:
            _validate_only(dict(cfg))

    @pytest.mark.parametrize("cfg", [
        {"kind": "kernel-check", "grid_n": 64},
        {"kind": "kernel-check", "check": "everything"},
        {"kind": "moment-check", "estimands": ["variance"]},
        {"kind": "moment-check", "gammas": [[1.2, 0.5]]},
        {"kind": "moment-check", "gammas": [[0.5, 1.2]]},
        {"kind": "sobolev", "u": 0.4},
        {"kind": "sup-prob", "lam": 1.2},
        {"kind": "tilt-check", "alpha": 1.2, "beta": 0.5},
        {"kind": "tilt-check", "separations": [0.1, 0.05, 0.02]},
        {"kind": "cauchy", "eps_ladder": [0.1, 0.2]},
        {"kind": "cauchy", "eps_ladder": [1.5, 0.5]},
        {"kind": "cauchy", "d": 2},
        {"kind": "field-stats", "grid_n": 16},
        {"kind": "tail-check", "sigmas": [-1.0]},
        {"kind": "bogus"},
    ])
    def test_rejections(self, cfg):
        with pytest.raises(ConfigError):
            _validate_only(cfg)


class TestMainValidate:
    def test_good_config(self, tmp_path, capsys):
        assert main(["validate", cfg_file(tmp_path, PHASE_CFG)]) == 0
        assert "config valid: kind=phase-scan" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        code = main(["validate", str(tmp_path / "nope.json")])
        assert code == 2
        assert "validation error:" in capsys.readouterr().err

    def test_phase_violation_detected(self, tmp_path, capsys):
        cfg = dict(MOM0_CFG, gammas=[[1.2, 0.5]])
        assert main(["validate", cfg_file(tmp_path, cfg)]) == 2
        assert "phase precondition" in capsys.readouterr().err


class TestMainRun:
    def test_phase_scan_artifacts(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", cfg_file(tmp_path, PHASE_CFG),
                     "--out", str(out)])
        assert code == 0
        assert "all_points_labeled: pass" in capsys.readouterr().out

        raw = (out / "phase_scan.csv").read_bytes()
        assert raw.endswith(b"\r\n")
        lines = raw.decode().split("\r\n")
        assert lines[0] == "alpha,beta,label,run_id"
        assert len([ln for ln in lines if ln]) == 1 + 81

        rid = run_id_of(PHASE_CFG)
        assert all(ln.endswith("," + rid) for ln in lines[1:] if ln)

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool"] == "logchaos"
        assert manifest["run_id"] == rid
        assert manifest["config"] == PHASE_CFG
        assert manifest["csv_sha256"]["phase_scan.csv"] == sha256_file(
            out / "phase_scan.csv")
        assert manifest["svg_files"] == ["phase_scan.svg"]
        assert (out / "phase_scan.svg").read_text().lstrip().startswith("<svg")

        verdicts = json.loads((out / "verdicts.json").read_text())
        assert verdicts == {"run_id": rid,
                            "verdicts": {"all_points_labeled": True},
                            "pass": True}

    def test_default_out_dir(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = {"kind": "tail-check", "sigmas": [1.0],
               "u_over_sigma": [0, 1, 2, 3]}
        assert main(["run", cfg_file(tmp_path, cfg)]) == 0
        assert (tmp_path / "runs" / "tail-check" / "tail_bound.csv").exists()

    def test_config_out_key(self, tmp_path, capsys):
        cfg = {"kind": "tail-check", "out": str(tmp_path / "somewhere")}
        assert main(["run", cfg_file(tmp_path, cfg)]) == 0
        assert (tmp_path / "somewhere" / "tail_bound.csv").exists()

    def test_exact_zero_moment_run(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", cfg_file(tmp_path, MOM0_CFG), "--out", str(out)])
        assert code == 0
        lines = (out / "moments.csv").read_bytes().decode().split("\r\n")
        header = lines[0].split(",")
        row = lines[1].split(",")
        cells = dict(zip(header, row))
        assert cells["estimate_re"] == "0.0"
        assert cells["se_re"] == "0.0"
        assert cells["z_re"] == "0.0"

    def test_verdict_failure_exit_code(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", cfg_file(tmp_path, CAUCHY_FAIL_CFG),
                     "--out", str(out)])
        assert code == 1
        assert "trend_decreasing: FAIL" in capsys.readouterr().out
        # artifacts are still written for a failed verdict
        assert (out / "verdicts.json").exists()
        assert not json.loads((out / "verdicts.json").read_text())["pass"]

    def test_bad_estimand_exit_code(self, tmp_path, capsys):
        cfg = dict(MOM0_CFG, estimands=["variance"])
        code = main(["run", cfg_file(tmp_path, cfg), "--out",
                     str(tmp_path / "o")])
        assert code == 2
        assert "validation error:" in capsys.readouterr().err


class TestWorkersDeterminism:
    def test_flag_and_env(self, tmp_path, capsys, monkeypatch):
        p = cfg_file(tmp_path, FS_CFG)
        hashes = {}
        for name, argv in [("w1", ["--workers", "1"]),
                           ("w3", ["--workers", "3"])]:
            out = tmp_path / name
            assert main(argv + ["run", p, "--out", str(out)]) == 0
            m = json.loads((out / "manifest.json").read_text())
            hashes[name] = m["csv_sha256"]
        monkeypatch.setenv("LOGCHAOS_WORKERS", "4")
        out = tmp_path / "env4"
        assert main(["run", p, "--out", str(out)]) == 0
        hashes["env4"] = json.loads(
            (out / "manifest.json").read_text())["csv_sha256"]
        assert hashes["w1"] == hashes["w3"] == hashes["env4"]


class TestReplay:
    def run_once(self, tmp_path, capsys):
        out = tmp_path / "orig"
        assert main(["run", cfg_file(tmp_path, MOM0_CFG),
                     "--out", str(out)]) == 0
        capsys.readouterr()
        return out / "manifest.json"

    def test_verified(self, tmp_path, capsys):
        manifest = self.run_once(tmp_path, capsys)
        code = main(["replay", str(manifest)])
        assert code == 0
        text = capsys.readouterr().out
        assert "replay verified: 1 CSV file(s) byte-identical" in text
        assert (tmp_path / "orig-replay" / "moments.csv").exists()

    def test_tampered_config(self, tmp_path, capsys):
        manifest = self.run_once(tmp_path, capsys)
        doc = json.loads(manifest.read_text())
        doc["config"]["seed"] = 99
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(doc))
        code = main(["replay", str(tampered), "--out",
                     str(tmp_path / "r2")])
        assert code == 1
        assert "config differs" in capsys.readouterr().out

    def test_tampered_hash(self, tmp_path, capsys):
        manifest = self.run_once(tmp_path, capsys)
        doc = json.loads(manifest.read_text())
        doc["csv_sha256"]["moments.csv"] = "0" * 64
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(doc))
        code = main(["replay", str(tampered), "--out",
                     str(tmp_path / "r3")])
        assert code == 1
        assert "CSV outputs differ: moments.csv" in capsys.readouterr().out

    def test_version_refusal(self, tmp_path, capsys):
        manifest = self.run_once(tmp_path, capsys)
        doc = json.loads(manifest.read_text())
        doc["version"] = "0.0.0"
        tampered = tmp_path / "oldver.json"
        tampered.write_text(json.dumps(doc))
        code = main(["replay", str(tampered)])
        assert code == 2
        assert "refusing to replay" in capsys.readouterr().out

    def test_not_a_manifest(self, tmp_path, capsys):
        p = tmp_path / "other.json"
        p.write_text(json.dumps({"tool": "other", "config": {}}))
        assert main(["replay", str(p)]) == 2
        assert "not a logchaos run manifest" in capsys.readouterr().err
