"""Driver, report, and CLI contract tests."""

import json
import os
import subprocess
import sys

import pytest

from qotp_lab.harness import (ExperimentReport, canonical_json, emit_report,
                              run_experiment)


class TestCanonicalJson:
    def test_sorted_keys_and_fixed_floats(self):
        text = canonical_json({"b": 0.5, "a": [1, 2.0, True, None]})
        assert text == '{"a":[1,2.0,true,null],"b":0.5}\n'

    def test_seventeen_significant_digits(self):
        text = canonical_json({"x": 1 / 3})
        assert "0.33333333333333331" in text

    def test_round_trip(self):
        data = {"a": [1.5, -2, "s"], "b": {"c": False}}
        assert json.loads(canonical_json(data)) == data

    def test_same_report_twice_identical(self):
        r = ExperimentReport("demo", {"seed": 1})
        r.add_check("x", 0.1, 0.2, True)
        assert r.to_canonical() == r.to_canonical()


class TestReports:
    def test_emit_and_reload(self, tmp_path):
        r = ExperimentReport("demo", {"seed": 3})
        r.add_check("value", 1.0, 2.0, True)
        r.wall_clock = 1.23
        paths = emit_report(r, str(tmp_path))
        with open(paths["report"]) as fh:
            data = json.load(fh)
        assert data["all_pass"] is True
        assert "wall_clock" not in data  # timing lives in the meta file
        with open(paths["meta"]) as fh:
            assert "wall_clock_seconds" in json.load(fh)

    def test_checks_carry_bounds(self):
        report, _ = run_experiment("twirl-check",
                                   {"seed": 5, "unitaries": 3})
        for check in report.checks:
            assert "bound" in check and "value" in check
            assert isinstance(check["pass"], bool)


class TestDeterminism:
    @pytest.mark.parametrize("command,config", [
        ("twirl-check", {"seed": 9, "unitaries": 4}),
        ("trap-security", {"seed": 9, "attacks": 3, "samples": 500}),
        ("brotp-check", {"seed": 9}),
        ("qotp-run", {"seed": 9, "channel": [["Y", 0]], "n_b": 1,
                      "backend": "tab"}),
    ])
    def test_same_seed_byte_identical(self, command, config):
        r1, c1 = run_experiment(command, dict(config))
        r2, c2 = run_experiment(command, dict(config))
        assert r1.to_canonical() == r2.to_canonical()
        assert c1 == c2


class TestCli:
    def _run(self, *args):
        env = dict(os.environ)
        return subprocess.run(
            [sys.executable, "-m", "qotp_lab.cli", *args],
            capture_output=True, text=True, env=env)

    def test_pass_exit_zero(self, tmp_path):
        res = self._run("twirl-check", "--seed", "3",
                        "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        assert "[PASS]" in res.stdout

    def test_bad_config_exit_two(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        res = self._run("twirl-check", "--config", str(cfg))
        assert res.returncode == 2

    def test_unknown_command_exit_two(self):
        res = self._run("no-such-command")
        assert res.returncode == 2

    def test_report_replay_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"unitaries": 4}))
        for out in (out1, out2):
            res = self._run("twirl-check", "--config", str(cfg),
                            "--seed", "11", "--out", str(out))
            assert res.returncode == 0
        a = (out1 / "twirl-check.report.json").read_bytes()
        b = (out2 / "twirl-check.report.json").read_bytes()
        assert a == b
