"""Command-line interface: dispatch, envelopes, exit codes."""

import json

import pytest

from infcone.cli import main

PROBLEM = {
    "sets": {
        "Half": {"dim": 2, "where": "v1 >= v2", "unbounded": True},
        "Left": {"dim": 2, "where": "v1 <= 0"},
    },
    "functions": {"Square": {"n": 1, "value": "v1^2"}},
    "mappings": {"Id": {"n": 1, "m": 1, "graph": "v2 == v1"}},
    "cones": {"Pos": {"generators": [[1.0]], "interior_point": [1.0]}},
    "config": {"shells": 6, "samples_per_shell": 400,
               "probes_per_level": 60},
}


@pytest.fixture(scope="module")
def problem_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "prob.json"
    p.write_text(json.dumps(PROBLEM))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBasics:
    def test_validate(self, problem_file, capsys):
        code, out, _ = run(capsys, "validate", "--problem", problem_file)
        assert code == 0
        env = json.loads(out)
        assert env["command"] == "validate"
        assert env["result"]["sets"] == ["Half", "Left"]
        assert env["config"]["shells"] == 6  # problem config echoed

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "validate", "--problem", "/no/such.json")
        assert code == 2
        assert "error" in err

    def test_parse_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"sets": {')
        code, _, err = run(capsys, "validate", "--problem", str(bad))
        assert code == 2
        assert "E_SYNTAX" in err

    def test_unknown_set_exit_2(self, problem_file, capsys):
        code, _, err = run(capsys, "project", "--problem", problem_file,
                           "--set", "Nope", "--point", "1 0")
        assert code == 2

    def test_missing_point_exit_2(self, problem_file, capsys):
        code, _, _ = run(capsys, "normal-cone", "--problem", problem_file,
                         "--set", "Left")
        assert code == 2

    def test_usage_error(self, capsys):
        assert main(["no-such-command"]) == 2


class TestCommands:
    def test_project(self, problem_file, capsys):
        code, out, _ = run(capsys, "project", "--problem", problem_file,
                           "--set", "Left", "--point", "3,1")
        assert code == 0
        env = json.loads(out)
        assert env["result"]["dist"] == pytest.approx(3.0, abs=1e-6)

    def test_sample_set_csv(self, problem_file, tmp_path, capsys):
        csv = tmp_path / "pts.csv"
        code, out, _ = run(capsys, "sample-set", "--problem", problem_file,
                           "--set", "Half", "--r-lo", "5", "--r-hi", "10",
                           "--count", "50", "--csv", str(csv))
        assert code == 0
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "idx,coord0,coord1"
        assert len(lines) > 10

    def test_normal_cone_point(self, problem_file, capsys):
        code, out, _ = run(capsys, "normal-cone", "--problem", problem_file,
                           "--set", "Left", "--x", "0 1")
        assert code == 0
        cone = json.loads(out)["result"]["cone"]
        assert cone["status"] == "rays"

    def test_coderivative_point_slice(self, problem_file, capsys):
        code, out, _ = run(capsys, "coderivative", "--problem", problem_file,
                           "--map", "Id", "--x", "1", "--y", "1",
                           "--v", "1")
        assert code == 0
        env = json.loads(out)
        sl = env["result"]["slices"][0]["slice"]
        assert any(abs(p[0] - 1.0) <= 0.05 for p in sl["points"])

    def test_subdiff_point(self, problem_file, capsys):
        code, out, _ = run(capsys, "subdiff", "--problem", problem_file,
                           "--function", "Square", "--x", "1")
        assert code == 0
        env = json.loads(out)
        assert any(abs(p[0] - 2.0) <= 0.05
                   for p in env["result"]["basic"]["points"])

    def test_out_file(self, problem_file, tmp_path, capsys):
        dst = tmp_path / "report.json"
        code, out, _ = run(capsys, "validate", "--problem", problem_file,
                           "--out", str(dst))
        assert code == 0
        assert out == ""
        env = json.loads(dst.read_text())
        assert env["command"] == "validate"

    def test_seed_override(self, problem_file, capsys):
        code, out, _ = run(capsys, "validate", "--problem", problem_file,
                           "--seed", "7")
        assert json.loads(out)["config"]["seed"] == 7


class TestVerify:
    def test_single_case(self, capsys, monkeypatch):
        monkeypatch.setenv("INFCONE_THREADS", "1")
        code, out, err = run(capsys, "verify", "--case", "ex-halfplane")
        assert code == 0
        summary = json.loads(out)
        assert summary["counts"]["fail"] == 0
        names = [c["name"] for c in summary["cases"]]
        assert names and all(n.startswith("ex-halfplane") for n in names)

    def test_empty_filter_warns(self, capsys):
        code, out, err = run(capsys, "verify", "--case", "zzz-no-match")
        assert code == 0
        assert "no case matches" in err
