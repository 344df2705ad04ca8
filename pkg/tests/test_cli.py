import csv
import io
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from effortscore import lp as lp_mod
from effortscore.cli import main
from effortscore.errors import SolverError
from effortscore.instances import load_instance, save_instance
from effortscore.multi_dim import MeanElicitInstance, random_distribution

DATA = Path(__file__).resolve().parent.parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def quantities(text):
    return {r["quantity"]: float(r["value"]) for r in csv.DictReader(io.StringIO(text))}


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def write(tmp_path, doc, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_optimize_intro_closed_form(capsys):
    code, out, _ = run(capsys, "optimize", DATA / "intro_signal_model.json", "--closed-form")
    assert code == 0
    q = quantities(out)
    assert q["opt_value"] == pytest.approx(1 / 60, abs=1e-4)
    assert q["quadratic_objective"] == pytest.approx(1 / 900, abs=1e-4)
    assert q["slope_right"] - q["slope_left"] == pytest.approx(1 / 0.8)


def test_optimize_uniform_lp(capsys):
    code, out, _ = run(capsys, "optimize", DATA / "uniform01_mean.json", "--lp")
    assert code == 0
    q = quantities(out)
    assert q["opt_value"] == pytest.approx(0.5, abs=1e-12)
    assert q["ic_residual"] <= 1e-9 and q["bound_residual"] <= 1e-9


def test_optimize_point_mass(capsys):
    for flag in ("--closed-form", "--lp"):
        code, out, _ = run(capsys, "optimize", DATA / "point_mass_mean.json", flag)
        assert code == 0
        assert quantities(out)["opt_value"] == pytest.approx(0.0, abs=1e-12)


def test_optimize_backends_agree(capsys):
    _, a, _ = run(capsys, "optimize", DATA / "sep_gap_n2.json", "--backend", "simplex")
    _, b, _ = run(capsys, "optimize", DATA / "sep_gap_n2.json", "--backend", "highs")
    assert quantities(a)["opt_value"] == pytest.approx(quantities(b)["opt_value"], abs=1e-9)


def test_evaluate_intro_quadratic(capsys):
    code, out, _ = run(capsys, "evaluate", DATA / "intro_signal_model.json", "--rule", "quadratic", "zero")
    assert code == 0
    quad, zero = rows(out)
    assert float(quad["prior_report_score"]) == pytest.approx(0.986667, abs=1e-4)
    assert quad["proper"] == "1"
    assert float(zero["objective"]) == 0.0


def test_evaluate_gap_instance(capsys):
    code, out, _ = run(
        capsys, "evaluate", DATA / "sep_gap_n2.json", "--rule", "separate", "max-over-separate", "lp", "zero"
    )
    assert code == 0
    res = {r["rule"]: r for r in rows(out)}
    assert float(res["separate"]["objective"]) == pytest.approx(0.25, abs=1e-12)
    assert float(res["max-over-separate"]["objective"]) == pytest.approx(0.375, abs=1e-12)
    assert float(res["lp"]["objective"]) >= 0.375 - 1e-9
    assert float(res["zero"]["objective"]) == 0.0
    assert all(r["proper"] == "1" for r in res.values())
    assert all(-1e-9 <= float(r["score_min"]) and float(r["score_max"]) <= 1 + 1e-9 for r in res.values())


def test_evaluate_dimension_mismatch(capsys):
    code, _, err = run(capsys, "evaluate", DATA / "sep_gap_n2.json", "--rule", "quadratic")
    assert code == 2 and "error" in err


def test_closed_form_needs_one_dimension(capsys):
    code, _, _ = run(capsys, "optimize", DATA / "sep_gap_n2.json", "--closed-form")
    assert code == 2


def test_schema_errors_name_the_field(capsys, tmp_path):
    doc = json.loads((DATA / "uniform01_mean.json").read_text())
    del doc["states"]
    code, _, err = run(capsys, "optimize", write(tmp_path, doc))
    assert code == 2 and "states" in err

    doc = json.loads((DATA / "uniform01_mean.json").read_text())
    doc["means"][0]["prob"] = 0.7
    code, _, err = run(capsys, "optimize", write(tmp_path, doc))
    assert code == 2 and "means" in err

    code, _, err = run(capsys, "optimize", write(tmp_path, {"kind": "nope"}))
    assert code == 2 and "kind" in err

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "optimize", bad)
    assert code == 2 and "invalid JSON" in err


def test_mean_outside_hull_is_infeasible(capsys, tmp_path):
    doc = json.loads((DATA / "uniform01_mean.json").read_text())
    doc["means"][1]["point"] = [1.5]
    code, _, err = run(capsys, "optimize", write(tmp_path, doc), "--lp")
    assert code == 3 and "infeasible" in err


def test_solver_failure_exit_code(capsys, monkeypatch):
    def broken(lp):
        raise SolverError("boom")

    monkeypatch.setitem(lp_mod.BACKENDS, "simplex", broken)
    code, _, err = run(capsys, "optimize", DATA / "uniform01_mean.json", "--lp")
    assert code == 4 and "boom" in err


def test_usage_errors(capsys):
    assert run(capsys, "experiment", "full-gap", "--eps", "0.7")[0] == 2
    assert run(capsys, "experiment", "sampling", "--delta", "1.5")[0] == 2
    assert run(capsys, "experiment", "sep-gap", "--n", "0")[0] == 2
    assert run(capsys, "experiment", "sep-gap", "--jobs", "0")[0] == 2
    assert run(capsys, "optimize", DATA / "uniform01_mean.json", "--bound", "-1")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "no-such"])
    assert exc.value.code == 2


def test_renormalization_warning(capsys, tmp_path, caplog):
    doc = json.loads((DATA / "uniform01_mean.json").read_text())
    doc["means"][0]["prob"] = 0.5 + 1e-10
    with caplog.at_level(logging.WARNING):
        code, out, _ = run(capsys, "optimize", write(tmp_path, doc), "--lp")
    assert code == 0
    assert "renormalizing" in caplog.text
    assert quantities(out)["opt_value"] == pytest.approx(0.5, abs=1e-9)


def test_round_trip(capsys, tmp_path):
    rng = np.random.default_rng(7)
    inst = MeanElicitInstance.on_box(random_distribution(rng, 2, 4))
    first = tmp_path / "a.json"
    save_instance(first, inst)
    second = tmp_path / "b.json"
    save_instance(second, load_instance(first))
    assert first.read_text() == second.read_text()
    _, a, _ = run(capsys, "optimize", first)
    _, b, _ = run(capsys, "optimize", second)
    assert a == b
    _, a, _ = run(capsys, "evaluate", first, "--rule", "max-over-separate", "lp")
    _, b, _ = run(capsys, "evaluate", second, "--rule", "max-over-separate", "lp")
    assert a == b


@pytest.mark.parametrize("name", ["robustness", "pi-adversary", "sampling"])
def test_seeded_output_is_byte_identical(capsys, name):
    extra = {"robustness": ["--pairs", "10"], "pi-adversary": ["--utilities", "2"], "sampling": ["--trials", "40"]}[
        name
    ]
    outs = [run(capsys, "experiment", name, "--seed", "3", "--jobs", j, *extra)[1] for j in ("1", "1", "2")]
    assert outs[0] == outs[1] == outs[2]
    if name == "robustness":
        assert run(capsys, "experiment", name, "--seed", "4", *extra)[1] != outs[0]


def test_experiment_sep_gap(capsys):
    code, out, _ = run(capsys, "experiment", "sep-gap", "--n", "10")
    assert code == 0
    (row,) = rows(out)
    assert float(row["separate"]) == pytest.approx(0.05, abs=1e-12)
    assert float(row["mos"]) == pytest.approx(0.325661, abs=1e-6)
    assert float(row["ratio"]) == pytest.approx(6.5132, abs=1e-4)
    assert float(row["abs_dev"]) <= 1e-9


def test_experiment_quad_worstcase(capsys):
    code, out, _ = run(capsys, "experiment", "quad-worstcase", "--c", "0.25")
    assert code == 0
    (row,) = rows(out)
    assert float(row["min_quadratic"]) == pytest.approx(0.0625, abs=2e-3)


def test_experiment_sampling(capsys):
    code, out, _ = run(capsys, "experiment", "sampling", "--eps", "0.1", "--delta", "0.05", "--n", "4")
    assert code == 0
    (row,) = rows(out)
    assert int(row["samples"]) == 439
    assert float(row["failure_rate"]) <= 0.05


def test_experiment_full_gap(capsys):
    code, out, _ = run(capsys, "experiment", "full-gap", "--eps", "0.1")
    assert code == 0
    (row,) = rows(out)
    assert float(row["mean_opt"]) == pytest.approx(0.14, abs=1e-12)
    assert float(row["full_lower"]) == 0.5
    assert float(row["full_lp"]) >= 0.25


def test_bayes_dump(capsys):
    code, out, _ = run(capsys, "bayes", DATA / "intro_signal_model.json")
    assert code == 0
    (lo, hi) = rows(out)
    assert float(lo["prob"]) == pytest.approx(0.2)
    assert float(hi["mean[0]"]) == pytest.approx(49 / 60, abs=1e-3)
    assert run(capsys, "bayes", DATA / "uniform01_mean.json")[0] == 2


def test_out_and_lp_dump(capsys, tmp_path):
    out, dump = tmp_path / "res.txt", tmp_path / "prog.lp"
    code, stdout, _ = run(
        capsys, "optimize", DATA / "uniform01_mean.json", "--lp", "--format", "table", "--out", out, "--lp-dump", dump
    )
    assert code == 0 and stdout == ""
    assert "opt_value" in out.read_text()
    assert dump.read_text().startswith("Maximize")
