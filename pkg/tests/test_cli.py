import json
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

import study_fixtures
from nonresponse_lab import fileio
from nonresponse_lab.cli import SEED_ENV, difficulty_table, main
from nonresponse_lab.study import Decision, Difficulty, ResponseRecord, SourceLabel

DIFF, SAME = SourceLabel.DIFFERENT, SourceLabel.SAME


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def records_file(tmp_path, records, name="records.csv"):
    return write(tmp_path / name, fileio.records_csv(records))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---- rates -------------------------------------------------------------------

def test_rates_published_fixture(tmp_path, capsys):
    path = records_file(tmp_path, study_fixtures.fbi_ames_observed())
    code, out, _ = run(capsys, "rates", path)
    assert code == 0
    fp = next(l for l in out.splitlines() if l.startswith("false_positive"))
    assert "20/2842" in fp and fp.endswith("0.7 (0.4, 1.1)")


def test_rates_writes_csv_and_json(tmp_path, capsys):
    path = records_file(tmp_path, study_fixtures.fbi_ames_observed())
    code, _, _ = run(capsys, "rates", path, "--out-dir", tmp_path / "out")
    assert code == 0
    body = json.loads((tmp_path / "out" / "rates.json").read_text())
    assert body["manifest"]["command"] == "rates"
    assert body["false_positive"]["numerator"] == 20
    lines = (tmp_path / "out" / "rates.csv").read_text().splitlines()
    assert lines[0] == "measure,numerator,denominator,point,ci_low,ci_high"


def test_rates_empty_different_source_is_undefined(tmp_path, capsys):
    recs = [ResponseRecord("e1", "s1", SAME, Decision.IDENTIFICATION)]
    code, out, _ = run(capsys, "rates", records_file(tmp_path, recs))
    assert code == 0
    assert next(l for l in out.splitlines() if l.startswith("false_positive")).endswith("undefined")
    code, out, _ = run(capsys, "rates", records_file(tmp_path, recs), "--format", "csv")
    assert "false_positive,0,0,undefined" in out


def test_rates_inconclusive_as_error(tmp_path, capsys):
    recs = [ResponseRecord("e1", f"d{j}", DIFF, d) for j, d in enumerate(
        [Decision.EXCLUSION] * 5 + [Decision.IDENTIFICATION, Decision.INCONCLUSIVE, Decision.INCONCLUSIVE_B])]
    path = records_file(tmp_path, recs)
    counts = []
    for mode in ("correct", "error"):
        code, out, _ = run(capsys, "rates", path, "--inconclusive", mode, "--format", "json")
        counts.append(json.loads(out)["false_positive"]["numerator"])
    assert counts[1] - counts[0] == 2


def test_rates_rejects_duplicates(tmp_path, capsys):
    r = ResponseRecord("e1", "d1", DIFF, Decision.EXCLUSION)
    code, _, err = run(capsys, "rates", records_file(tmp_path, [r, r]))
    assert code == 3 and err.startswith("nonresponse-lab: error[data_error]")


# ---- sweep -------------------------------------------------------------------

def sweep_lines(path):
    return (path / "sweep.csv").read_text().splitlines()


def test_sweep_default_grid_rows(tmp_path, capsys):
    code, _, _ = run(capsys, "sweep", "--out", tmp_path)
    assert code == 0
    lines = sweep_lines(tmp_path)
    assert lines[0].split(",")[:3] == ["pi", "dataset", "point"]
    assert len(lines) - 1 == 202
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["failed_cells"] == [] and len(man["config_digest"]) == 64


def test_sweep_singleton_grid(tmp_path, capsys):
    code, _, _ = run(capsys, "sweep", "--out", tmp_path, "--grid", "0:0:1")
    assert code == 0
    assert len(sweep_lines(tmp_path)) == 3


def test_sweep_rerun_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps({"seed": 17, "grid": "0:1:11"}))
    for name, workers in (("a", 1), ("b", 1), ("c", 4)):
        assert run(capsys, "sweep", cfg, "--out", tmp_path / name, "--workers", workers)[0] == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes() == (tmp_path / "c" / "sweep.csv").read_bytes()


def test_seed_precedence(tmp_path, capsys, monkeypatch):
    cfg = write(tmp_path / "cfg.json", json.dumps({"seed": 5, "grid": "0:0:1"}))

    def seed_of(name, *extra):
        run(capsys, "sweep", cfg, "--out", tmp_path / name, *extra)
        return json.loads((tmp_path / name / "manifest.json").read_text())["base_seed"]

    assert seed_of("cfg") == 5
    monkeypatch.setenv(SEED_ENV, "8")
    assert seed_of("env") == 8
    assert seed_of("flag", "--seed", "9") == 9
    monkeypatch.setenv(SEED_ENV, "eight")
    code, _, err = run(capsys, "sweep", cfg, "--out", tmp_path / "bad")
    assert code == 2 and SEED_ENV in err


def test_config_errors_name_the_field(tmp_path, capsys):
    cases = {
        "unknown.json": ({"sede": 1}, "sede"),
        "mech.json": ({"mechanism": {"kind": "mar"}}, "mechanism.kind"),
        "grid.json": ({"grid": [0.5, 0.1]}, "grid"),
        "nested.json": ({"mechanism": {"pie": 0.3}}, "mechanism.pie"),
    }
    for name, (obj, field) in cases.items():
        code, out, err = run(capsys, "sweep", write(tmp_path / name, json.dumps(obj)), "--out", tmp_path / "o")
        assert code == 2, name
        assert err.count("\n") == 1 and field in err and out == ""
    code, _, err = run(capsys, "sweep", write(tmp_path / "bad.json", "{"), "--out", tmp_path / "o")
    assert code == 2 and err.startswith("nonresponse-lab: error[config_error]")


def test_numeric_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", json.dumps({"mechanism": {"pi": 1.0, "clamp_theta": False}}))
    code, _, err = run(capsys, "simulate", cfg, "--out-dir", tmp_path / "o")
    assert code == 4 and "numeric_error" in err


# ---- simulate round trip -----------------------------------------------------

def test_simulate_round_trip(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--seed", 4, "--pi", 0.87, "--out-dir", tmp_path)
    assert code == 0
    from nonresponse_lab.simulate import MissingnessConfig, NMARTwoGroup, PopulationSpec, generate
    ds = generate(PopulationSpec(), MissingnessConfig(NMARTwoGroup(0.87)), 4)
    assert fileio.read_records(tmp_path / "records.csv") == ds.to_records()
    design = fileio.read_design(tmp_path / "design.csv")
    assert design == ds.design()
    side = json.loads((tmp_path / "dataset.json").read_text())
    assert side["seed"] == 4 and side["realized_missing"] == pytest.approx(ds.realized_missing)
    # the exported pair passes validation through the nonresponse command
    code, out, _ = run(capsys, "nonresponse", "--design", tmp_path / "design.csv",
                       "--records", tmp_path / "records.csv", "--answered", "comparison", "--format", "json")
    assert code == 0
    all_scope = json.loads(out)["ledgers"][0]
    assert all_scope["total_assigned"] == 3460
    assert all_scope["overall_rate"] == pytest.approx(ds.realized_missing)


record_st = st.builds(
    ResponseRecord,
    st.sampled_from(["e1", "e2", "x_9"]),
    st.text("abc123", min_size=1, max_size=4),
    st.sampled_from(list(SourceLabel)),
    st.one_of(st.none(), st.sampled_from(list(Decision))),
    st.one_of(st.none(), st.sampled_from(list(Difficulty))),
)


@settings(max_examples=50)
@given(st.lists(record_st, max_size=20))
def test_records_csv_round_trip(tmp_path_factory, recs):
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    path.write_text(fileio.records_csv(recs), encoding="utf-8")
    assert fileio.read_records(path) == recs


def test_malformed_row_reports_line(tmp_path, capsys):
    path = write(tmp_path / "r.csv", "examiner_id,item_id,truth,decision,difficulty\ne1,d1,different,exclusion,\ne1,d2,maybe,id,\n")
    code, _, err = run(capsys, "rates", path)
    assert code == 3 and "r.csv:3:" in err


# ---- nonresponse / permtest / cv-audit -----------------------------------------

def test_nonresponse_command(tmp_path, capsys):
    design, records = study_fixtures.edc_fp_scope()
    d = write(tmp_path / "design.csv", fileio.design_csv(design))
    r = records_file(tmp_path, records)
    code, out, _ = run(capsys, "nonresponse", "--design", d, "--records", r, "--enrolled", 328,
                       "--answered", "comparison", "--out-dir", tmp_path / "o")
    assert code == 0
    body = json.loads((tmp_path / "o" / "nonresponse.json").read_text())
    diff = next(l for l in body["ledgers"] if l["scope"] == "different")
    assert (diff["enrolled"], diff["active_responders"]) == (328, 185)
    assert round(100 * diff["unit_rate"], 1) == 43.6
    assert round(100 * diff["item_rate"], 1) == 37.1
    assert (tmp_path / "o" / "flags.csv").read_text().startswith("examiner_id,high_nonresponse\n")


def test_permtest_command(tmp_path, capsys):
    design, records, attrs = study_fixtures.edc_flags_fixture()
    d = write(tmp_path / "design.csv", fileio.design_csv(design))
    r = records_file(tmp_path, records)
    a = write(tmp_path / "attrs.csv", "examiner_id,non_us_employer,unaccredited_lab\n" + "".join(
        f"{x.examiner_id},{int(x.flags['non_us_employer'])},{int(x.flags['unaccredited_lab'])}\n" for x in attrs))
    code, out, _ = run(capsys, "permtest", "--attributes", a, "--design", d, "--records", r,
                       "--characteristics", "non_us_employer", "--n-perm", 5000)
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "characteristic,N,K,n,k,exact_p,mc_p,mc_low,mc_high"
    f = row.split(",")
    assert f[:5] == ["non_us_employer", "197", "38", "49", "14"]
    assert 0.047 <= float(f[5]) <= 0.051
    code, _, err = run(capsys, "permtest", "--attributes", a, "--design", d, "--records", r, "--characteristics", "nope")
    assert code == 2 and "nope" in err


def test_cv_audit_command(tmp_path, capsys):
    path = write(tmp_path / "cv.csv", "expert_id,afte_member,employment\n" + "".join(
        f"{c.expert_id},{'' if c.afte_member is None else int(c.afte_member)},{c.employment.value}\n"
        for c in study_fixtures.cv_records()))
    code, out, _ = run(capsys, "cv-audit", path, "--out-dir", tmp_path / "o")
    assert code == 0
    assert "current_afte_member,38,60,63.3" in out
    assert "public_employer,39,60,65.0" in out
    assert "afte_member_and_public_employer,23,60,38.3" in out
    assert "total_experts,60" in out and "total_resumes,131" in out


# ---- difficulty --------------------------------------------------------------

def difficulty_fixture():
    levels = list(Difficulty)
    recs = []
    for e in range(12):
        for j in range(10):
            dec = Decision.EXCLUSION if (e * 10 + j) % 17 else None
            recs.append(ResponseRecord(f"e{e}", f"i{j}", DIFF, dec, levels[(e + j) % 5] if j < 9 else None))
    return recs


def test_difficulty_seven_rated_nonresponses(tmp_path, capsys):
    recs = difficulty_fixture()
    assert sum(r.difficulty is not None and r.decision is None for r in recs) == 7
    table, total = difficulty_table(recs)
    assert total == 7
    code, out, _ = run(capsys, "difficulty", records_file(tmp_path, recs))
    assert code == 0 and out.strip().splitlines()[-1].endswith(",7")


def test_difficulty_all_zero_without_ratings():
    recs = [ResponseRecord("e", f"i{j}", SAME, Decision.IDENTIFICATION) for j in range(5)]
    table, total = difficulty_table(recs)
    assert total == 0 and set(table.values()) == {(0, 0)} and len(table) == 5


@given(st.lists(record_st, max_size=40))
def test_difficulty_matches_brute_tally(recs):
    table, total = difficulty_table(recs)
    for d in Difficulty:
        answered = sum(1 for r in recs if r.difficulty == d and r.decision is not None)
        unanswered = sum(1 for r in recs if r.difficulty == d and r.decision is None)
        assert table[d] == (answered, unanswered)
    assert total == sum(u for _, u in table.values())


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nonresponse_lab", "rates", str(tmp_path / "missing.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert proc.stderr.count("\n") == 1 and proc.stderr.startswith("nonresponse-lab: error[data_error]")
