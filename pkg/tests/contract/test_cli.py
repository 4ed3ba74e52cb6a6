"""Contract tests for the peerfx command line: JSON envelopes, exit codes and reproducibility"""

import json

import pytest

from peerfx import __version__
from peerfx.main import main
from peerfx.oracle.suite import CheckResult, OracleReport

ENVELOPE_KEYS = {"peerfx_version", "command", "config", "attribute_labels", "peer_sets",
                 "group_sets", "result", "diagnostics"}

BALANCED = [
    ("u1", 1, "g1", 1.0), ("u2", 1, "g1", 2.0), ("u3", 1, "g2", 3.0), ("u4", 1, "g3", 4.0),
    ("u5", 2, "g2", 5.0), ("u6", 2, "g3", 6.0), ("u7", 2, "g4", 7.0), ("u8", 2, "g4", 8.0),
]

ROOMS = [
    ("s1", "gaokao", "A", 71), ("s2", "gaokao", "A", 64), ("s3", "gaokao", "A", 80),
    ("s4", "gaokao", "B", 58), ("s5", "gaokao", "B", 66), ("s6", "recommended", "A", 75),
    ("s7", "recommended", "B", 69), ("s8", "recommended", "B", 90),
]


@pytest.fixture(autouse=True)
def isolated_user_config(tmp_path, monkeypatch):
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))


@pytest.fixture
def balanced_csv(write_csv):
    return str(write_csv("balanced.csv", BALANCED))


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    document = json.loads(out)
    assert set(document) == ENVELOPE_KEYS
    return document


class TestCommands:
    def test_enumerate(self, capsys):
        document = run_json(capsys, "enumerate", "--attributes", "2", "--peers", "3")
        assert document['command'] == "enumerate"
        assert document['peerfx_version'] == __version__
        assert [p['members'] for p in document['peer_sets']] == ["1,1,1", "1,1,2", "1,2,2", "2,2,2"]
        assert len(document['group_sets']) == 5
        assert document['result']['group_set_count'] == 5

    def test_estimate(self, capsys, balanced_csv):
        document = run_json(capsys, "estimate", balanced_csv, "--emit-plot-data")
        result = document['result']
        assert result['estimates']['subgroup_effects'][0]['estimate'] == -2.0
        assert result['joint']['blocks'][0]['theta_hat'] == [-1.0, 1.0]
        assert len(result['plot_data']) == 4
        assert document['config']['emit_plot_data'] is True
        assert document['diagnostics'][0]['category'] == "design"

    def test_estimate_with_labels_and_target(self, capsys, write_csv):
        path = str(write_csv("rooms.csv", ROOMS))
        document = run_json(capsys, "estimate", path, "--target", "gaokao")
        assert document['attribute_labels'] == {"1": "gaokao", "2": "recommended"}
        assert document['result']['target']['attribute'] == "gaokao"
        assert document['result']['joint'] is None

    def test_assign_writes_csv(self, capsys, balanced_csv):
        code, out, _ = run(capsys, "assign", balanced_csv, "--peers", "1", "--seed", "5")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "unit_id,group_id"
        assert [line.split(",")[0] for line in lines[1:]] == [f"u{i}" for i in range(1, 9)]

    def test_probs_from_counts(self, capsys):
        document = run_json(capsys, "probs", "--counts", "2,2", "--peers", "1")
        assert document['result']['pi'] == [[1 / 3, 2 / 3], [2 / 3, 1 / 3]]

    def test_single_randomization_test(self, capsys, balanced_csv):
        document = run_json(capsys, "test", balanced_csv, "--null", "1", "--statistic", "F_a")
        test = document['result']['test']
        assert test['null'] == "H0[1]"
        assert test['method'] == "exhaustive"

    def test_subgroup_statistic_with_attribute(self, capsys, balanced_csv):
        document = run_json(capsys, "test", balanced_csv, "--statistic", "T_a", "--attribute", "2")
        assert document['result']['test']['statistic'] == "T_a"

    def test_optimize(self, capsys, balanced_csv):
        document = run_json(capsys, "optimize", balanced_csv, "--new-counts", "2,2")
        assert document['result']['optimum']['objective'] == 18.0

    def test_fiducial(self, capsys, balanced_csv):
        document = run_json(capsys, "fiducial", balanced_csv, "--new-counts", "2,2", "--draws", "100")
        rows = document['result']['fiducial']['rows']
        assert sum(row['probability'] for row in rows) == pytest.approx(1.0)

    def test_quick_oracle(self, capsys):
        document = run_json(capsys, "oracle-check", "--suite", "quick")
        assert document['result']['passed'] is True


class TestExitCodes:
    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "estimate", str(tmp_path / "absent.csv"))
        assert code == 1
        assert out == ""
        assert err.startswith("peerfx estimate:")

    def test_invalid_configuration(self, capsys, balanced_csv):
        code, _, err = run(capsys, "estimate", balanced_csv, "--alpha", "2")
        assert code == 1
        assert "alpha" in err

    def test_unknown_attribute(self, capsys, balanced_csv):
        code, _, _ = run(capsys, "estimate", balanced_csv, "--target", "nobody")
        assert code == 1

    @pytest.mark.parametrize("extra", [("--statistic", "F"), ("--null", "sharp"), ()])
    def test_attribute_without_subgroup_statistic(self, capsys, balanced_csv, extra):
        code, out, err = run(capsys, "test", balanced_csv, *extra, "--attribute", "1")
        assert code == 1
        assert out == ""
        assert "--attribute" in err

    def test_bad_config_file(self, capsys, balanced_csv, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text("draws: [1\n")
        code, _, _ = run(capsys, "--config", str(config), "estimate", balanced_csv)
        assert code == 1

    def test_computation_error(self, capsys, write_csv):
        # Every unit has a peer of the other attribute, so joint inference is undefined
        path = str(write_csv("toy.csv", [("u1", 1, "g1", 1), ("u2", 1, "g2", 2),
                                         ("u3", 2, "g1", 3), ("u4", 2, "g2", 4)]))
        code, out, _ = run(capsys, "fiducial", path, "--new-counts", "2,2")
        assert code == 2
        assert out == ""

    def test_oracle_failure(self, capsys, monkeypatch):
        failing = OracleReport('quick', [CheckResult('n=4', 'rp', None, 'ensemble_size', 1.0, 0.0)])
        monkeypatch.setattr("peerfx.app_context.run_oracle_suite", lambda *args, **kwargs: failing)
        code, out, _ = run(capsys, "oracle-check", "--suite", "quick")
        assert code == 3
        assert json.loads(out)['result']['failure_count'] == 1

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestReproducibility:
    def test_identical_bytes_across_runs(self, capsys, balanced_csv):
        argv = ("test", balanced_csv, "--draws", "200", "--seed", "11")
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        # stderr carries timestamps
        assert first[:2] == second[:2]

    def test_monte_carlo_independent_of_workers(self, capsys, balanced_csv, tmp_path):
        config = tmp_path / "mc.yaml"
        config.write_text("enumeration_limit: 0\n")
        base = ("--config", str(config), "test", balanced_csv, "--draws", "600", "--seed", "3")
        outputs = []
        for workers in ("1", "4"):
            code, out, _ = run(capsys, *base, "--workers", workers)
            assert code == 0
            assert json.loads(out)['result']['table'][0]['tests']['F']['method'] == "monte_carlo"
            outputs.append(out)
        assert outputs[0] == outputs[1]
        assert 'workers' not in json.loads(outputs[0])['config']
