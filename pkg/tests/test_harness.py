"""Tests for harness.py and the sigcomp command line: bound reports on the named
constructions, rendering, sweeps, and exit codes.

Run from repo root:  python tests/test_harness.py
"""

import contextlib
import csv
import io
import json
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO))

import sigcomp  # noqa: E402
from harness import (  # noqa: E402
    CSV_COLUMNS,
    exhaustive_instances,
    random_instances,
    render_csv,
    render_json,
    render_table,
    run_ratio_experiment,
    sweep,
)
from instances import (  # noqa: E402
    Instance,
    all_ones,
    crowded_good,
    identity,
    parse_instance,
    stacked_identity,
)
from rationals import FAIL, PASS, SKIP  # noqa: E402

FIXTURES = REPO / "tests" / "fixtures"
_TMP = Path(tempfile.gettempdir()) / "sigcomp_harness_test"


def _verdicts(report):
    return {v.name: v for v in report.verdicts}


def _run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = sigcomp.main(list(argv))
    return code, out.getvalue(), err.getvalue()


# ---- named constructions hit their bounds ----

def test_crowded_good_reaches_the_worst_monopoly_ceiling():
    for S in (2, 3, 4):
        report = run_ratio_experiment(crowded_good(S))
        assert report.spe_sw_max == Fraction(S + 1, 2 * S)
        assert report.monopoly.worst_sw == Fraction(1, 2) and report.monopoly.best_sw == 1
        assert report.ratio_max == 1 + Fraction(1, S)
        v = _verdicts(report)
        assert v["ceiling-attained-worst"].status == PASS
        assert v["spe-vs-worst-monopoly-ceiling"].slack == 0
        assert report.passed, [x.describe() for x in report.failures()]


def test_stacked_identity_reaches_the_floor():
    for G in (2, 3, 4):
        report = run_ratio_experiment(stacked_identity(G))
        assert report.spe_sw_min == Fraction(1, G)
        assert report.opt == 1 and report.monopoly.best_sw == 1
        assert report.ratio_min == Fraction(1, G)
        v = _verdicts(report)
        assert v["floor-attained"].status == PASS
        assert v["spe-opt-floor"].slack == 0
        assert report.passed, [x.describe() for x in report.failures()]


def test_all_ones_reaches_the_best_monopoly_ceiling():
    for S in (2, 3):
        report = run_ratio_experiment(all_ones(S, S))
        assert report.spe_sw_max == 1 and report.ratio_best == 1
        assert _verdicts(report)["ceiling-attained-best"].status == PASS
        assert report.passed


def test_identity_monopolies_hit_their_floors():
    third = _verdicts(run_ratio_experiment(identity(3)))
    assert third["third-opt-attained"].status == PASS
    assert third["half-opt-attained"].status == SKIP
    half = _verdicts(run_ratio_experiment(identity(2)))
    assert half["half-opt-attained"].status == PASS
    assert half["opt-competition-cap"].note == "needs S >= 2"


def test_unlabelled_instances_skip_tightness():
    report = run_ratio_experiment(Instance(2, crowded_good(2).valuation))
    assert report.label == "S2-B3-G2"
    for name in ("third-opt-attained", "half-opt-attained", "ceiling-attained-worst",
                 "ceiling-attained-best", "floor-attained"):
        v = _verdicts(report)[name]
        assert v.status == SKIP and v.note == "not a matching named construction", v.describe()


def test_borrowed_label_does_not_claim_tightness():
    doc = "label: identity:3\nsellers: 1\nbuyers: 3\ngoods: 3\nmatrix:\n1 1 1\n1 1 1\n1 1 1\n"
    report = run_ratio_experiment(parse_instance(doc))
    v = _verdicts(report)["third-opt-attained"]
    assert v.status == SKIP and v.note == "not a matching named construction", v.describe()
    assert report.passed, [x.describe() for x in report.failures()]

    reseated = run_ratio_experiment(Instance(3, crowded_good(2).valuation, "crowded-good:2"))
    assert _verdicts(reseated)["ceiling-attained-worst"].status == SKIP

    path = _TMP / "borrowed_label.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(doc, encoding="utf-8")
    try:
        code, out, _ = _run_cli("ratio", str(path))
        assert code == 0, out
    finally:
        path.unlink()


def test_budget_overrun_becomes_skips():
    report = run_ratio_experiment(crowded_good(2), budget_profiles=1)
    assert not report.spe_searched and report.spe == ()
    v = _verdicts(report)
    assert v["spe-opt-floor"].status == SKIP and "budget" in v["spe-opt-floor"].note
    assert v["monopoly-best-half-opt"].status == PASS
    assert report.opt == Fraction(3, 4)
    assert report.passed


# ---- rendering ----

def test_csv_columns_and_values():
    text = render_csv([run_ratio_experiment(crowded_good(2))])
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    row = next(csv.DictReader(io.StringIO(text)))
    assert row["label"] == "crowded-good:2"
    assert (row["S"], row["B"], row["G"]) == ("2", "3", "2")
    assert (row["p1"], row["p2"], row["c1"]) == ("2", "1", "1")
    assert row["opt"] == "3/4" and row["monop_rev"] == "1/2"
    assert row["spe_sw_max"] == "3/4" and row["ratio_max"] == "3/2"
    assert "ceiling-attained-worst=pass" in row["verdicts"].split(";")


def test_json_and_table_output():
    report = run_ratio_experiment(crowded_good(2))
    doc = json.loads(render_json([report]))[0]
    assert doc["ratio_max"] == "3/2" and doc["passed"] is True
    assert doc["monopoly"]["worst_witness"] == "0,1"
    assert all(set(v) >= {"name", "status", "slack"} for v in doc["verdicts"])
    table = render_table([report])
    assert table.startswith("== crowded-good:2  (S=2, B=3, G=2)")
    assert "FAIL" not in table


# ---- sweeps ----

def _assert_no_failures(reports):
    bad = [(r.label, v.describe()) for r in reports for v in r.verdicts if v.status == FAIL]
    assert not bad, bad[:5]


def test_exhaustive_sweep_up_to_six_cells():
    instances = list(exhaustive_instances([2, 3], max_cells=6, max_buyers=5, max_goods=4))
    assert len(instances) == 2 * ((2 + 4 + 8 + 16) + (4 + 16 + 64) + (8 + 64) + 16 + 32)
    reports = sweep(instances, workers=1)
    _assert_no_failures(reports)
    assert all(r.spe_searched for r in reports)


def test_seeded_random_sweep():
    instances = list(random_instances([2, 3], 500, 4, seed=2024))
    assert len(instances) == 500
    _assert_no_failures(sweep(instances, workers=1))


def test_parallel_sweep_matches_serial():
    instances = list(exhaustive_instances([2], max_cells=3, max_buyers=3, max_goods=3))
    serial = [r.to_dict() for r in sweep(instances, workers=1)]
    parallel = [r.to_dict() for r in sweep(instances, workers=2)]
    assert serial == parallel


def test_random_instances_are_reproducible():
    a = list(random_instances([2, 3], 6, 4, seed=99))
    b = list(random_instances([2, 3], 6, 4, seed=99))
    assert a == b
    assert all(i.label.startswith("random:") for i in a)
    assert all(any(row) for row in a[0].valuation.rows()), "even-indexed draws need positive demand"


# ---- command line ----

def test_cli_ratio_passes():
    code, out, _ = _run_cli("ratio", "@crowded-good:2", "--format", "csv")
    assert code == 0, out
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_cli_input_error():
    code, _, err = _run_cli("ratio", str(FIXTURES / "bad_value.txt"))
    assert code == 2 and "[ERROR]" in err and "line 6" in err
    code, _, _ = _run_cli("ratio", "@no-such-thing:1")
    assert code == 2


def test_cli_budget_exceeded():
    code, _, err = _run_cli("find-spe", "@stacked-identity:3", "--budget-profiles", "10")
    assert code == 3, err


def test_cli_find_spe_then_verify():
    cert = _TMP / "crowded.json"
    code, out, _ = _run_cli("find-spe", str(FIXTURES / "crowded_good_2.txt"), "--cert-out", str(cert))
    try:
        assert code == 0 and "verified" in out
        code, out, _ = _run_cli("verify-cert", "@crowded-good:2", str(cert))
        assert code == 0 and out.startswith("PASS"), out
        code, _, err = _run_cli("verify-cert", "@crowded-good:3", str(cert))
        assert code == 2 and "fingerprint" in err
    finally:
        if cert.exists():
            cert.unlink()


def test_cli_monopoly_and_opt():
    code, out, _ = _run_cli("monopoly", str(FIXTURES / "three_buyer_cycle.txt"))
    assert code == 0 and "max revenue 1/1" in out
    code, out, _ = _run_cli("opt", "@crowded-good:2")
    assert code == 0 and out.startswith("opt 3/4")


def test_cli_subgame():
    code, out, _ = _run_cli("solve-subgame", "@stacked-identity:3", "--profile", "0|1|2 / 0|1|2", "--all")
    assert code == 0
    assert "assignment  1 1 1 0 0 0  (steps=3, nash=yes)" in out
    assert "SW          1/1" in out


def test_cli_gen_and_named_emit_parseable_documents():
    code, out, _ = _run_cli("gen", "--buyers", "3", "--goods", "4", "--density", "1/3", "--seed", "5")
    assert code == 0
    inst = parse_instance(out)
    assert (inst.num_buyers, inst.num_goods, inst.seed) == (3, 4, 5)
    code, out, _ = _run_cli("named", "stacked-identity:2")
    assert code == 0 and parse_instance(out) == stacked_identity(2)
    code, out, _ = _run_cli("named", "crowded-good:3", "--certificate")
    assert code == 0 and json.loads(out)["on_path"] == ["0|1", "0|1", "0|1"]


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
                print(f"PASS {name}")
            except AssertionError as e:
                failures += 1
                print(f"FAIL {name}: {e}")
            except Exception as e:
                failures += 1
                print(f"ERROR {name}: {type(e).__name__}: {e}")
    print(f"\n{'ALL PASSED' if not failures else f'{failures} FAILED'}")
    sys.exit(1 if failures else 0)
