import io
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcsizer import (
    HOUR,
    MS,
    SEC,
    US,
    Analytic,
    Leaf,
    ScenarioId,
    Stage,
    System,
    builtin_system,
    homogeneous_cluster,
    with_priorities,
)
from tcsizer.cli import (
    Options,
    ParseError,
    emit_system_spec,
    format_duration,
    parse_duration,
    parse_system_spec,
    run_command,
)


def invoke(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def table_vi_gp(tmp_path):
    system = with_priorities(builtin_system(ScenarioId.TABLE_VI),
                             {"TC1": 1, "TC2": 1})
    path = tmp_path / "table-vi-gp.json"
    path.write_text(emit_system_spec(system, homogeneous_cluster(1)))
    return path


@pytest.fixture
def table_vi_tc(tmp_path):
    path = tmp_path / "table-vi-tc.json"
    path.write_text(emit_system_spec(builtin_system(ScenarioId.TABLE_VI),
                                     homogeneous_cluster(1)))
    return path


@pytest.fixture
def microblog(tmp_path):
    system = builtin_system(ScenarioId.MICROBLOG_ONLINE, frequency_hz=1)
    path = tmp_path / "microblog.json"
    path.write_text(emit_system_spec(system, homogeneous_cluster(8)))
    return path


class TestDurations:
    @pytest.mark.parametrize("text, ns", [
        ("0ns", 0),
        ("127us", 127 * US),
        ("1.5ms", 1_500_000),
        ("2h", 2 * HOUR),
        ("1s", SEC),
        ("10min", 600 * SEC),
        ("0.25us", 250),
    ])
    def test_parse(self, text, ns):
        assert parse_duration(text) == ns

    def test_inf_only_for_inter_arrival(self):
        from tcsizer import INFINITE
        assert parse_duration("inf", allow_inf=True) is INFINITE
        with pytest.raises(ParseError):
            parse_duration("inf")

    @pytest.mark.parametrize("bad", ["", "12", "1.5.2ms", "-4us", "3 weeks",
                                     "0.3ns", "1.0000001us"])
    def test_rejects_naming_token(self, bad):
        with pytest.raises(ParseError) as exc:
            parse_duration(bad, path="/x")
        assert exc.value.path == "/x"

    @given(st.integers(0, 10**15))
    @settings(max_examples=200)
    def test_roundtrip(self, ns):
        assert parse_duration(format_duration(ns)) == ns


class TestSpecRoundTrip:
    def test_priority_pair_round_trip(self):
        system = with_priorities(builtin_system(ScenarioId.TABLE_VI),
                                 {"TC1": 3, "TC2": 7})
        cluster = homogeneous_cluster(2)
        text = emit_system_spec(system, cluster)
        parsed_system, parsed_cluster, _ = parse_system_spec(text)
        assert parsed_system == system
        assert parsed_cluster == cluster

    def test_round_trip_with_everything(self):
        system = builtin_system(ScenarioId.MICROBLOG_ONLINE,
                                frequency_hz=1000, splitter_hint=2,
                                blocking=20 * US)
        cluster = homogeneous_cluster(3, platform_blocking=5 * US)
        options = Options()
        options.frequencies_hz = [1, 4000][:]
        options.horizon = 2 * SEC
        options.seed = 11
        text = emit_system_spec(system, cluster, options)
        system2, cluster2, options2 = parse_system_spec(text)
        assert system2 == system
        assert cluster2 == cluster
        assert options2.frequencies_hz == [1, 4000]
        assert options2.horizon == 2 * SEC
        assert options2.seed == 11
        # emit is stable under a second round trip
        assert emit_system_spec(system2, cluster2, options2) == text

    def test_missing_required_field_pointer(self):
        doc = {
            "analytics": [{
                "id": "a", "end_to_end_deadline": "1s",
                "stages": [{"id": "s", "cost": "1ms",
                            "inter_arrival": "10ms"}],
                "topology": "s",
            }],
            "cluster": {"cores": [{"id": "c0"}]},
        }
        with pytest.raises(ParseError) as exc:
            parse_system_spec(json.dumps(doc))
        assert exc.value.path == "/analytics/0/stages/0/deadline"

    def test_unknown_keys_rejected(self):
        doc = {
            "analytics": [],
            "cluster": {"cores": [{"id": "c0"}]},
            "extra": 1,
        }
        with pytest.raises(ParseError) as exc:
            parse_system_spec(json.dumps(doc))
        assert exc.value.path == "/extra"

    def test_bad_duration_names_token(self):
        doc = {
            "analytics": [{
                "id": "a", "end_to_end_deadline": "1s",
                "stages": [{"id": "s", "cost": "1 parsec",
                            "inter_arrival": "10ms", "deadline": "10ms"}],
                "topology": "s",
            }],
            "cluster": {"cores": [{"id": "c0"}]},
        }
        with pytest.raises(ParseError) as exc:
            parse_system_spec(json.dumps(doc))
        assert "1 parsec" in str(exc.value)
        assert exc.value.path == "/analytics/0/stages/0/cost"

    def test_priorities_and_allocation_validated(self):
        system = builtin_system(ScenarioId.TABLE_VI)
        text = emit_system_spec(system, homogeneous_cluster(1))
        doc = json.loads(text)
        doc["priorities"] = {"nope": 1}
        with pytest.raises(ParseError) as exc:
            parse_system_spec(json.dumps(doc))
        assert exc.value.path == "/priorities/nope"
        doc = json.loads(text)
        doc["allocation"] = {"TC1": "ghost"}
        with pytest.raises(ParseError):
            parse_system_spec(json.dumps(doc))

    def test_capacity_as_decimal_is_exact(self):
        doc = {
            "analytics": [],
            "cluster": {"cores": [{"id": "c0", "capacity": 0.69}]},
        }
        _, cluster, _ = parse_system_spec(json.dumps(doc))
        assert cluster.cores[0].capacity == Fraction(69, 100)

    @pytest.mark.parametrize("capacity", [
        Fraction(1), Fraction(69, 100), Fraction(1, 3), Fraction(7, 11)])
    def test_odd_capacities_round_trip(self, capacity):
        from tcsizer import Cluster, Core
        cluster = Cluster((Core("c0", capacity),))
        text = emit_system_spec(System(()), cluster)
        _, parsed, _ = parse_system_spec(text)
        assert parsed.cores[0].capacity == capacity


class TestAnalyzeCommand:
    def test_gp_configuration_infeasible(self, table_vi_gp):
        code, out, _ = invoke(["analyze", str(table_vi_gp)])
        assert code == 2
        doc = json.loads(out)
        assert doc["per_stage"] == {"TC1": 2 * HOUR, "TC2": 2 * HOUR}
        assert doc["per_analytic"]["TC2"]["feasible"] is False
        assert doc["system_feasible"] is False

    def test_tc_configuration_feasible(self, table_vi_tc):
        code, out, _ = invoke(["analyze", str(table_vi_tc)])
        assert code == 0
        doc = json.loads(out)
        assert doc["per_stage"] == {"TC1": 2 * HOUR, "TC2": HOUR}
        assert doc["system_feasible"] is True

    def test_missing_file_is_usage_error(self):
        code, _, err = invoke(["analyze", "/nonexistent.json"])
        assert code == 1
        assert "error:" in err

    def test_invalid_system_is_usage_error(self, tmp_path):
        s = Stage(id="s", cost=2 * SEC, inter_arrival=10 * SEC,
                  deadline=1 * SEC)
        system = System((Analytic("a", (s,), Leaf("s"), SEC),))
        path = tmp_path / "bad.json"
        path.write_text(emit_system_spec(system, homogeneous_cluster(1)))
        code, _, err = invoke(["analyze", str(path)])
        assert code == 1
        assert "cost exceeds deadline" in err

    def test_partial_priorities_rejected(self, tmp_path):
        system = with_priorities(builtin_system(ScenarioId.TABLE_VI),
                                 {"TC1": 1})
        path = tmp_path / "partial.json"
        path.write_text(emit_system_spec(system, homogeneous_cluster(1)))
        code, _, err = invoke(["analyze", str(path)])
        assert code == 1
        assert "priorities" in err

    def test_usage_error_is_exit_1_not_2(self):
        code, _, err = invoke(["analyze"])
        assert code == 1


class TestSizeCommand:
    def test_csv_output(self, microblog):
        code, out, _ = invoke(["size", str(microblog),
                               "--freqs", "1,4000", "--umax", "1"])
        assert code == 0
        assert out.splitlines() == [
            "frequency_hz,total_utilization,min_cores",
            "1,0.001145,1",
            "4000,4.58,6",
        ]

    def test_umax_fraction(self, microblog):
        code, out, _ = invoke(["size", str(microblog),
                               "--freqs", "4000", "--umax", "69/100"])
        assert code == 0
        assert out.splitlines()[1].split(",")[2] == "8"

    def test_bad_freqs(self, microblog):
        code, _, err = invoke(["size", str(microblog), "--freqs", "1,zap"])
        assert code == 1

    def test_options_fallback(self, tmp_path):
        system = builtin_system(ScenarioId.MICROBLOG_ONLINE, frequency_hz=1)
        options = Options()
        options.frequencies_hz = [Fraction(1), Fraction(4000)]
        options.factors = [1, 10]
        options.input_frequency_hz = Fraction(1000)
        path = tmp_path / "with-options.json"
        path.write_text(emit_system_spec(system, homogeneous_cluster(8),
                                         options))
        code, out, _ = invoke(["size", str(path)])
        assert code == 0
        assert out.splitlines()[2] == "4000,4.58,6"
        code, out, _ = invoke(["decimate", str(path)])
        assert code == 0
        assert out.splitlines()[1].startswith("1,1145000,")


class TestDecimateCommand:
    def test_csv_output(self, microblog):
        code, out, _ = invoke(["decimate", str(microblog),
                               "--factors", "1,10,100,1000",
                               "--freq", "1000"])
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "factor,end_to_end_ns,aggregator_utilization,cores_saved"
        assert lines[1] == "1,1145000,0.511,0"
        assert lines[4].startswith("1000,1000145000,0.000511,")

    def test_requires_frequency(self, microblog):
        code, _, err = invoke(["decimate", str(microblog), "--factors", "1"])
        assert code == 1
        assert "frequency" in err


class TestSimulateCommand:
    def test_trace_and_report(self, microblog, tmp_path):
        trace_path = tmp_path / "trace.csv"
        code, out, _ = invoke([
            "simulate", str(microblog), "--seed", "5", "--horizon", "3s",
            "--trace", str(trace_path)])
        assert code == 0
        doc = json.loads(out)
        assert doc["conservative"] is True
        assert doc["violations"] == []
        assert doc["system_feasible"] is True
        assert doc["per_analytic_observed"]["microblog"] <= 1906 * US
        lines = trace_path.read_text().splitlines()
        assert lines[0] == "time_ns,core,kind,stage,job"

    def test_env_seed_overrides_default(self, microblog, tmp_path,
                                        monkeypatch):
        monkeypatch.setenv("TC_SIZER_SEED", "123")
        trace_path = tmp_path / "t.csv"
        code, out, _ = invoke([
            "simulate", str(microblog), "--horizon", "3s",
            "--release", "JITTERED", "--trace", str(trace_path)])
        assert code == 0
        baseline = trace_path.read_text()
        # explicit --seed beats the environment
        code, _, _ = invoke([
            "simulate", str(microblog), "--horizon", "3s", "--seed", "123",
            "--release", "JITTERED", "--trace", str(trace_path)])
        assert trace_path.read_text() == baseline

    def test_infeasible_system_exits_2(self, table_vi_gp, tmp_path):
        code, out, _ = invoke([
            "simulate", str(table_vi_gp), "--horizon", "9h",
            "--trace", str(tmp_path / "t.csv")])
        assert code == 2
        assert json.loads(out)["system_feasible"] is False


class TestCompareCommand:
    def test_json_output(self, microblog):
        code, out, _ = invoke(["compare", str(microblog), "--umax", "1"])
        assert code == 0
        assert json.loads(out) == {"ours": 1, "baseline": 1}

    def test_regime_violation_is_input_error(self, tmp_path):
        s = Stage(id="s", cost=MS, inter_arrival=10 * MS, deadline=9 * MS,
                  priority=1)
        system = System((Analytic("s", (s,), Leaf("s"), 9 * MS),))
        path = tmp_path / "bad.json"
        path.write_text(emit_system_spec(system, homogeneous_cluster(1)))
        code, _, err = invoke(["compare", str(path)])
        assert code == 1


class TestDeterministicOutput:
    def test_commands_are_byte_stable(self, microblog, table_vi_gp, tmp_path):
        commands = [
            ["analyze", str(table_vi_gp)],
            ["size", str(microblog), "--freqs", "1,100,4000", "--umax", "1"],
            ["decimate", str(microblog), "--factors", "1,10", "--freq", "500"],
            ["compare", str(microblog)],
            ["simulate", str(microblog), "--seed", "9", "--horizon", "2s",
             "--trace", str(tmp_path / "trace.csv")],
        ]
        for argv in commands:
            code1, out1, _ = invoke(argv)
            artifact1 = (tmp_path / "trace.csv").read_text() \
                if argv[0] == "simulate" else None
            code2, out2, _ = invoke(argv)
            artifact2 = (tmp_path / "trace.csv").read_text() \
                if argv[0] == "simulate" else None
            assert (code1, out1, artifact1) == (code2, out2, artifact2)
