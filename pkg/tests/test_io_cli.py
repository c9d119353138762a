import json

import numpy as np
import pytest

from hicrp import DataError, DomainError
from hicrp.cli import main
from hicrp.interaction import InteractionSet, isomorphic
from hicrp.io import (FIXTURE_EXPECTED, fixture_path, ingest_edges, make_fixture,
                      parse_timestamp, timestamp_coagulate)
from hicrp.inference import read_traces


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestIngest:
    def test_two_lines(self, tmp_path):
        t = ingest_edges(write(tmp_path, "e.txt", "a b\nb c\n"))
        assert t.iset.n_labels == 3 and len(t.iset) == 2 and t.timestamps is None

    def test_comments_header_and_csv(self, tmp_path):
        t = ingest_edges(write(tmp_path, "e.csv", "# c\nsrc,dst,time\na,b,1\nb,a,2.5\n"))
        assert len(t.iset) == 2 and list(t.timestamps) == [1.0, 2.5]

    def test_malformed_line_named(self, tmp_path):
        p = write(tmp_path, "e.txt", "a b\nb c\nlonely\n")
        with pytest.raises(DataError, match="line 3"):
            ingest_edges(p)

    def test_no_rows(self, tmp_path):
        with pytest.raises(DataError):
            ingest_edges(write(tmp_path, "e.txt", "# nothing\n\n"))

    def test_iso_timestamps(self):
        assert parse_timestamp("1970-01-01 00:01:00") == 60.0


class TestTimestampCoagulate:
    iset = InteractionSet.from_tokens([("a", "b"), ("b", "c"), ("c", "d")])
    ts = np.array([0.0, 5.0, 10.0])

    def test_one_bin(self):
        coarse, pm = timestamp_coagulate(self.iset, self.ts, 1)
        assert coarse.n_labels == 1 and len(coarse) == 3

    def test_bad_bins(self):
        with pytest.raises(DomainError):
            timestamp_coagulate(self.iset, self.ts, 0)

    def test_distinct_representatives(self):
        iset = InteractionSet.from_tokens([("a", "b"), ("c", "d")])
        coarse, _ = timestamp_coagulate(iset, np.array([0.0, 10.0]), 1000)
        # a,b share time 0 and c,d time 10, so only those pairs merge
        assert coarse.n_labels == 2
        iset = InteractionSet.from_tokens([("a", "a"), ("b", "b"), ("c", "c")])
        coarse, _ = timestamp_coagulate(iset, np.array([0.0, 3.0, 10.0]), 1000)
        assert isomorphic(coarse, iset)

    def test_representative_is_latest(self):
        coarse, pm = timestamp_coagulate(self.iset, self.ts, 2)
        # latest times: a 0, b 5, c 10, d 10; bins [0,5) and [5,10]
        names = {self.iset.labels[f]: coarse.labels[c] for f, c in pm.mapping.items()}
        assert names["a"] != names["b"] and names["b"] == names["c"] == names["d"]

    def test_fixture_counts(self, tmp_path):
        table = ingest_edges(fixture_path())
        assert table.iset.n_labels == FIXTURE_EXPECTED["labels"]
        assert len(table.iset) == FIXTURE_EXPECTED["interactions"]
        for bins, k in FIXTURE_EXPECTED["coarse_labels"].items():
            coarse, _ = timestamp_coagulate(table.iset, table.timestamps, bins)
            assert coarse.n_labels == k and len(coarse) == len(table.iset)
        make_fixture(tmp_path / "again.txt")
        assert (tmp_path / "again.txt").read_text() == fixture_path().read_text()


def run(*argv):
    return main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestCli:
    def test_verify_duality(self, tmp_path, capsys):
        out = tmp_path / "d"
        assert run("verify-duality", "--n", 4, "--alpha", 0.6, "--beta", 0.3, "--theta", 1,
                   "--m", 2, "--out", out) == 0
        report = json.loads((out / "duality.json").read_text())
        assert report["passed"] and max(v for k, v in report.items()
                                        if k.startswith("tv")) < 1e-10
        assert manifest(out)["command"] == "verify-duality"

    def test_seed_required(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            run("simulate", "--out", tmp_path)
        assert e.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as e:
            run("fly")
        assert e.value.code == 2

    def test_unknown_config_key(self, tmp_path):
        cfg = write(tmp_path, "c.json", json.dumps({"wings": 2}))
        with pytest.raises(SystemExit) as e:
            run("simulate", "--config", cfg, "--seed", 1, "--out", tmp_path)
        assert e.value.code == 2

    def test_runtime_error_reported(self, tmp_path, capsys):
        bad = write(tmp_path, "bad.txt", "x\n")
        assert run("coagulate", "--input", bad, "--input-format", "tsv", "--out", tmp_path) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "DataError" and "line 1" in err["message"]

    def test_flags_override_config(self, tmp_path):
        cfg = write(tmp_path, "c.json", json.dumps({"alpha": 0.3, "theta": 5.0,
                                                    "nu_table": "2:20", "seed": 3}))
        out = tmp_path / "s"
        assert run("simulate", "--config", cfg, "--theta", 7, "--out", out) == 0
        m = manifest(out)
        assert m["config"]["alpha"] == 0.3 and m["config"]["theta"] == 7.0
        assert m["seed"] == 3

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HICRP_OUTPUT_DIR", str(tmp_path / "env"))
        assert run("simulate", "--seed", 1, "--nu-table", "2:10") == 0
        assert (tmp_path / "env" / "manifest.json").exists()

    def test_pipeline(self, tmp_path):
        sim = tmp_path / "sim"
        assert run("simulate", "--model", "hicrp", "--alpha", 0.7, "--beta", 0.2, "--theta", 5,
                   "--m", 2, "--nu-table", "2:30", "--expected-counts", "--seed", 4,
                   "--out", sim) == 0
        assert {"fine.txt", "coarse.txt", "parents.tsv"} <= {p.name for p in sim.iterdir()}
        inf = tmp_path / "inf"
        assert run("infer-hicrp", "--fine", sim / "fine.txt", "--coarse", sim / "coarse.txt",
                   "--iters", 40, "--burnin", 20, "--chains", 2, "--S", 10, "--seed", 5,
                   "--out", inf) == 0
        traces = read_traces(inf / "trace.csv")
        assert [len(t) for t in traces] == [40, 40]
        ppc = tmp_path / "ppc"
        assert run("ppc", "--trace", inf / "trace.csv", "--fine", sim / "fine.txt",
                   "--coarse", sim / "coarse.txt", "--draws", 10, "--seed", 6,
                   "--out", ppc) == 0
        assert (ppc / "index.json").exists() and (ppc / "children_ccdf.csv").exists()
        diag = tmp_path / "diag"
        assert run("diagnose", "--trace", inf / "trace.csv", "--out", diag) == 0
        report = json.loads((diag / "diagnostics.json").read_text())
        assert {"alpha", "beta", "theta", "m"} == set(report)

    def test_coagulate_fixture(self, tmp_path):
        out = tmp_path / "c"
        assert run("coagulate", "--input", fixture_path(), "--bins", 10, "--out", out) == 0
        counts = manifest(out)["counts"]
        assert counts["coarse_labels"] == 8 and counts["coarse_interactions"] == 50

    def test_coagulate_pdgm(self, tmp_path):
        src = write(tmp_path, "f.txt", "a b\nb c\nc d\nd a\n")
        out = tmp_path / "p"
        assert run("coagulate", "--mode", "pdgm", "--input", src, "--input-format",
                   "interactions", "--m", 2, "--seed", 1, "--out", out) == 0
        assert manifest(out)["counts"]["coarse_interactions"] == 4

    def test_trace_rows_and_determinism(self, tmp_path):
        src = write(tmp_path, "f.txt", "".join(f"u{i} u{(3 * i) % 7}\n" for i in range(10)))
        outs = []
        for n_jobs in (1, 2, 1):
            out = tmp_path / f"r{len(outs)}"
            assert run("infer-sicrp", "--input", src, "--iters", 100, "--thin", 10,
                       "--chains", 2, "--n-jobs", n_jobs, "--seed", 11, "--out", out) == 0
            outs.append((out / "trace.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]
        assert [len(t) for t in read_traces(tmp_path / "r0" / "trace.csv")] == [10, 10]
