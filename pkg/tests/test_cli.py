"""End-to-end checks of the command-line frontend."""

import json
import math

import pytest

from qcond import cli
from qcond.exactthermo import THERMO_CSV_COLUMNS

GROVER_CFG = """\
# fully connected marked-state model
model = grover
n = 4
j = 1.0
gamma = 0.6
"""

ISING_CFG = """\
model = ising
n = 5
j = 1.0
gamma = 0.5
k = 0
"""


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
    (tmp_path / "grover.cfg").write_text(GROVER_CFG)
    (tmp_path / "ising.cfg").write_text(ISING_CFG)
    return tmp_path


def run(workdir, *argv):
    argv = [a.replace("@", str(workdir)) for a in argv]
    return cli.main(argv)


class TestGridParsing:
    def test_range_is_inclusive_with_exact_endpoint(self):
        grid = cli.parse_grid("0:1:0.05")
        assert len(grid) == 21
        assert grid[0] == 0.0 and grid[-1] == 1.0

    def test_comma_list(self):
        assert cli.parse_grid("0.5,1,2") == [0.5, 1.0, 2.0]

    def test_single_value(self):
        assert cli.parse_grid("2.5") == [2.5]

    def test_malformed(self):
        with pytest.raises(ValueError):
            cli.parse_grid("0:1")
        with pytest.raises(ValueError):
            cli.parse_grid("0:1:-0.1")
        with pytest.raises(ValueError):
            cli.parse_grid("2:1:0.5")


class TestPhaseCommand:
    def test_closed_form_grid_endpoints(self, workdir):
        assert run(workdir, "phase", "--model", "@/grover.cfg",
                   "--sweep", "gamma", "0:1:0.05", "--closed-form") == 0
        lines = (workdir / "phase.csv").read_text().splitlines()
        assert lines[0] == "sweep_value,critical_value,residual,method,N"
        assert len(lines) == 22
        first = lines[1].split(",")
        last = lines[-1].split(",")
        assert float(first[0]) == 0.0
        assert abs(float(first[1]) - 1.0 / math.log(2.0)) <= 1e-8
        assert float(last[0]) == 1.0
        assert float(last[1]) == 0.0

    def test_spectral_route(self, workdir):
        assert run(workdir, "phase", "--model", "@/grover.cfg", "--N", "6",
                   "--sweep", "gamma", "0.5,0.7", "--spectral") == 0
        rows = (workdir / "phase.csv").read_text().splitlines()[1:]
        assert all(r.endswith("spectral_finite_size,6") for r in rows)

    def test_bad_axis_is_config_error(self, workdir, capsys):
        assert run(workdir, "phase", "--model", "@/grover.cfg",
                   "--sweep", "beta", "0:1:0.5") == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "config"

    def test_ising_model_rejected(self, workdir, capsys):
        assert run(workdir, "phase", "--model", "@/ising.cfg",
                   "--sweep", "gamma", "0:1:0.5") == 1
        assert json.loads(capsys.readouterr().err)["error"]["code"] == "config"


class TestMcCommand:
    def test_report_schema(self, workdir):
        assert run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
                   "--samples", "2000", "--seed", "7") == 0
        d = json.loads((workdir / "mc.json").read_text())
        assert set(d) == {"estimate", "std_error", "n_samples", "seed", "t",
                          "model", "constraint"}
        assert d["constraint"] is None
        assert d["model"]["model"] == "grover"
        assert d["n_samples"] == 2000 and d["seed"] == 7

    def test_byte_identical_across_worker_counts(self, workdir):
        run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
            "--samples", "20000", "--seed", "7", "--workers", "1",
            "--out", "w1.json")
        run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
            "--samples", "20000", "--seed", "7", "--workers", "4",
            "--out", "w4.json")
        assert (workdir / "w1.json").read_bytes() == (workdir / "w4.json").read_bytes()

    def test_rerun_identical_artifact_and_manifest_modulo_timestamp(self, workdir):
        for name in ("a.json", "b.json"):
            run(workdir, "mc", "--model", "@/grover.cfg", "--t", "0.5",
                "--samples", "1000", "--seed", "3", "--out", name)
        assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()
        ma = json.loads((workdir / "a.json.manifest.json").read_text())
        mb = json.loads((workdir / "b.json.manifest.json").read_text())
        ma.pop("created"), mb.pop("created")
        assert ma == mb

    def test_constrained_needs_partition_side(self, workdir, capsys):
        assert run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
                   "--samples", "100", "--seed", "1", "--constraint", "k_t=0",
                   "--start", "15") == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "wrong_side"
        assert err["error"]["module"] == "eprmc"

    def test_constrained_run_writes_constraint(self, workdir):
        assert run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
                   "--samples", "1000", "--seed", "1", "--constraint", "k_t=0",
                   "--start", "0") == 0
        d = json.loads((workdir / "mc.json").read_text())
        assert d["constraint"] == "k_t=0"

    def test_start_out_of_range(self, workdir, capsys):
        assert run(workdir, "mc", "--model", "@/grover.cfg", "--t", "1",
                   "--samples", "100", "--seed", "1", "--start", "16") == 1
        assert json.loads(capsys.readouterr().err)["error"]["code"] == "config"


class TestThermoCommand:
    def test_table_layout(self, workdir):
        assert run(workdir, "thermo", "--model", "@/grover.cfg",
                   "--beta", "0.5,1,2") == 0
        lines = (workdir / "thermo.csv").read_text().splitlines()
        assert lines[0] == ",".join(THERMO_CSV_COLUMNS)
        assert len(lines) == 4
        row = dict(zip(THERMO_CSV_COLUMNS, lines[1].split(",")))
        assert float(row["beta"]) == 0.5 and float(row["T"]) == 2.0
        assert float(row["F_cond"]) == -4.0
        assert 0.0 <= float(row["p_cond"]) <= 1.0

    def test_rerun_byte_identical(self, workdir):
        for name in ("t1.csv", "t2.csv"):
            run(workdir, "thermo", "--model", "@/grover.cfg",
                "--beta", "1:2:0.5", "--out", name)
        assert (workdir / "t1.csv").read_bytes() == (workdir / "t2.csv").read_bytes()

    def test_threshold_partition(self, workdir):
        assert run(workdir, "thermo", "--model", "@/ising.cfg",
                   "--beta", "1", "--threshold", "-4.9") == 0
        manifest = json.loads((workdir / "thermo.csv.manifest.json").read_text())
        assert manifest["config"]["partition"]["source"] == "threshold"


class TestGraphCommand:
    def test_marked_state_statistics(self, workdir):
        assert run(workdir, "graph", "--model", "@/grover.cfg") == 0
        d = json.loads((workdir / "graph.json").read_text())
        stats = d["stats"]
        assert stats["a_out_max_cond"] == 4
        assert stats["a_out_mean_cond"] == [4, 1]
        assert stats["a_out_mean_norm"] == [1, 1]
        assert stats["cross_links"] == 4
        assert stats["identity_holds"] is True

    def test_partition_file_source(self, workdir):
        from qcond.configspace import Partition

        part = Partition(4, [0, 1])
        (workdir / "part.json").write_text(part.to_json())
        assert run(workdir, "graph", "--model", "@/grover.cfg",
                   "--partition-file", "@/part.json") == 0
        d = json.loads((workdir / "graph.json").read_text())
        assert d["partition"]["source"] == "file"
        assert d["partition"]["dim_cond"] == 2

    def test_partition_size_mismatch(self, workdir, capsys):
        from qcond.configspace import Partition

        (workdir / "bad.json").write_text(Partition(3, [0]).to_json())
        assert run(workdir, "graph", "--model", "@/grover.cfg",
                   "--partition-file", "@/bad.json") == 1
        assert json.loads(capsys.readouterr().err)["error"]["code"] == "config"


class TestT0Command:
    def test_grover_crossing_near_j(self, workdir):
        assert run(workdir, "t0", "--model", "@/grover.cfg", "--N", "8") == 0
        d = json.loads((workdir / "t0.json").read_text())
        assert abs(d["gamma_c"] - 1.0) <= 8 / 2**8
        assert not d["degenerate"]

    def test_ising_generic_route(self, workdir):
        assert run(workdir, "t0", "--model", "@/ising.cfg",
                   "--bracket", "0.1:3") == 0
        d = json.loads((workdir / "t0.json").read_text())
        assert 0.0 < d["gamma_c"] < 3.0


class TestVerifyCommand:
    def test_all_bounds_pass(self, workdir):
        assert run(workdir, "verify", "--model", "@/grover.cfg", "--N", "6",
                   "--beta", "0.5,1,2", "--samples", "4000") == 0
        d = json.loads((workdir / "verify.json").read_text())
        assert d["all_pass"] is True
        assert len(d["matrix_ratio"]) == 3
        assert len(d["free_energy_bounds"]) == 3
        assert {c["side"] for c in d["crossing_bounds"]} == {"norm", "cond"}
        for m in d["matrix_ratio"]:
            assert m["log_r_min"] >= -1e-8


class TestErrorHandling:
    def test_missing_model_file(self, workdir, capsys):
        assert run(workdir, "graph", "--model", "@/nope.cfg") == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "config"
        assert err["error"]["module"] == "cli"

    def test_module_error_carries_qualified_code(self, workdir, capsys):
        (workdir / "badising.cfg").write_text(
            "model = ising\nn = 5\nj = 1\ngamma = 0.5\nk = 9\n")
        assert run(workdir, "graph", "--model", "@/badising.cfg") == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "out_of_range"
        assert err["error"]["module"] == "models"

    def test_absolute_out_ignores_outdir(self, workdir, tmp_path):
        target = tmp_path / "sub" / "x.json"
        assert run(workdir, "t0", "--model", "@/grover.cfg",
                   "--out", str(target)) == 0
        assert target.exists()
        assert (tmp_path / "sub" / "x.json.manifest.json").exists()
