import json

import pytest

from ksim.cli import main
from ksim.files import (ParseError, load_configuration, load_hst, load_metric,
                        load_requests)
from ksim.verify import CheckReport


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "tree.txt").write_text("# two levels\nmu 3\nbranching 3 4\n")
    (tmp_path / "uniform3.txt").write_text("3\n1 1\n1\n")
    (tmp_path / "reqs.txt").write_text("0 1 0 1\n")
    (tmp_path / "init.txt").write_text("0\n")
    return tmp_path


class TestParsers:
    def test_metric_roundtrip(self, workdir):
        m = load_metric(str(workdir / "uniform3.txt"))
        assert m.n == 3
        assert m.distance(0, 2) == 1

    def test_metric_bad_count(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("3\n1 1\n")
        with pytest.raises(ParseError, match="expected 3 distances"):
            load_metric(str(p))

    def test_metric_triangle_violation_diagnosed(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("3\n1 5\n1\n")
        with pytest.raises(ParseError, match="triangle"):
            load_metric(str(p))

    def test_metric_bad_token_line_number(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("3\n1 1\nx\n")
        with pytest.raises(ParseError, match=r"m\.txt:3"):
            load_metric(str(p))

    def test_hst_roundtrip(self, workdir):
        s = load_hst(str(workdir / "tree.txt"))
        assert s.branching == (3, 4)
        assert s.mu == 3

    def test_hst_rational_mu(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("mu 5/2\nbranching 2 2\n")
        s = load_hst(str(p))
        assert s.leaf_metric.distance(0, 2) == 7

    def test_hst_rejections(self, tmp_path):
        cases = {
            "mu 1\nbranching 2\n": "mu must be > 1",
            "branching 2\n": "missing mu",
            "mu 2\n": "missing branching",
            "mu 2\nbranching 0\n": ">= 1",
            "mu x\nbranching 2\n": "bad mu",
            "mu 2\nbranching 2\nweird 1\n": "unknown field",
        }
        for text, match in cases.items():
            p = tmp_path / "bad.txt"
            p.write_text(text)
            with pytest.raises(ParseError, match=match):
                load_hst(str(p))

    def test_requests_range_checked(self, tmp_path):
        p = tmp_path / "r.txt"
        p.write_text("0 1 7\n")
        with pytest.raises(ParseError, match="out of range"):
            load_requests(str(p), 3)

    def test_configuration_distinct(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("0 0\n")
        with pytest.raises(ParseError, match="distinct"):
            load_configuration(str(p), 3)


class TestCli:
    def test_opt(self, workdir, capsys):
        rc = main(["opt", "--metric", str(workdir / "uniform3.txt"),
                   "--servers", "1", "--requests", str(workdir / "reqs.txt")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "cost 3" in out

    def test_opt_with_initial(self, workdir, capsys):
        rc = main(["opt", "--metric", str(workdir / "uniform3.txt"),
                   "--servers", "1", "--requests", str(workdir / "reqs.txt"),
                   "--initial", str(workdir / "init.txt")])
        assert rc == 0
        assert "cost 3" in capsys.readouterr().out

    def test_demand(self, workdir, capsys):
        rc = main(["demand", "--metric", str(workdir / "uniform3.txt"),
                   "--delta", "2", "--requests", str(workdir / "reqs.txt")])
        assert rc == 0
        assert "demand 2" in capsys.readouterr().out

    def test_run(self, workdir, capsys):
        rc = main(["run", "--hst", str(workdir / "tree.txt"), "--k", "3",
                   "--gen", "block_sweep:width=3", "--length", "30", "--seed", "4"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "total" in out and "phases" in out

    def test_run_with_events_replays(self, workdir, capsys):
        ev1 = workdir / "ev1.log"
        ev2 = workdir / "ev2.log"
        for path in (ev1, ev2):
            rc = main(["run", "--hst", str(workdir / "tree.txt"), "--k", "3",
                       "--algo", "algox", "--gen", "block_sweep:width=3",
                       "--length", "30", "--seed", "4", "--events", str(path)])
            assert rc == 0
        assert ev1.read_bytes() == ev2.read_bytes()
        assert b"jump" in ev1.read_bytes()

    def test_bench_reproducible(self, workdir, capsys):
        out1 = workdir / "a.csv"
        out2 = workdir / "b.csv"
        for out in (out1, out2):
            rc = main(["bench", "--hst", str(workdir / "tree.txt"), "--k", "3",
                       "--gen", "uniform_random", "--trials", "5",
                       "--length", "25", "--seed", "9", "--out", str(out)])
            assert rc == 0
        assert out1.read_bytes() == out2.read_bytes()
        header = out1.read_text().splitlines()[0]
        assert header == "seed,total,inner,jump,opt,ratio,phases,m_sum"

    def test_probe_demand(self, capsys):
        rc = main(["probe-demand", "--points", "3", "--delta", "2", "--max-len", "3"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "decreases" in out

    def test_usage_error_exit_one(self, capsys):
        assert main(["opt", "--metric", "nope.txt", "--servers", "1",
                     "--requests", "nope.txt"]) == 1
        assert main(["run", "--hst", "missing.txt", "--k", "2", "--gen", "x"]) == 1
        assert main(["demand", "--metric", "x"]) == 1  # missing required flags

    def test_check_failure_exit_two(self, workdir, capsys, monkeypatch):
        failing = CheckReport(name="stub", phase=1, lhs=2, rhs=1, passed=False,
                              context={"seed": 0})
        monkeypatch.setattr("ksim.cli.run_lower_bound_suite",
                            lambda **kw: ([failing], False))
        rc = main(["verify", "--suite", "lower", "--runs", "1"])
        assert rc == 2

    def test_verify_lower_passes(self, workdir, tmp_path, capsys):
        out = tmp_path / "checks.csv"
        rc = main(["verify", "--suite", "lower", "--runs", "2", "--out", str(out)])
        assert rc == 0
        assert out.read_text().startswith("name,phase,lhs,rhs,margin,passed,seed")

    def test_config_file_defaults_and_flag_priority(self, workdir, capsys):
        cfg = workdir / "cfg.json"
        cfg.write_text(json.dumps({"delta": "10", "metric": str(workdir / "uniform3.txt")}))
        rc = main(["--config", str(cfg), "demand",
                   "--metric", str(workdir / "uniform3.txt"),
                   "--requests", str(workdir / "reqs.txt")])
        assert rc == 0
        assert "demand 1" in capsys.readouterr().out  # delta 10 from config
        rc = main(["--config", str(cfg), "demand",
                   "--metric", str(workdir / "uniform3.txt"),
                   "--delta", "2",
                   "--requests", str(workdir / "reqs.txt")])
        assert rc == 0
        assert "demand 2" in capsys.readouterr().out  # explicit flag wins
