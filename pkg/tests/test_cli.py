import json
import os
from pathlib import Path

import pytest

from gibbslab.cli import main

CERTIFY_SPEC = {"model": {"model": "ising", "beta": 0.15, "d": 2}}
GCB_SPEC = {"model": {"model": "ising", "beta": 0.2, "d": 1},
            "window": {"n": 2, "boundary": "plus"},
            "function": {"type": "magnetization", "radius": 2},
            "D": "certified"}
RATES_SPEC = {"model": {"model": "ising", "beta": 0.0, "d": 1},
              "boundary": "free",
              "windows": [{"n": 1}, {"n": 2}],
              "function": {"type": "spin"},
              "epsilon": 0.6, "D": "product", "expect": "floor"}
FREQ_SPEC = {"d": 1, "alphabet": 2, "n": 2, "k": 1, "pairs": "all"}


def run(tmp_path, scenario, spec, *extra, seed=0, name="spec.json"):
    spec_path = tmp_path / name
    spec_path.write_text(json.dumps(spec))
    out = tmp_path / f"out-{scenario}-{seed}-{len(extra)}"
    code = main([scenario, "--spec", str(spec_path), "--seed", str(seed),
                 "--out", str(out), *extra])
    return code, out


def load_report(out):
    return json.loads((out / "report.json").read_text())


def test_certify_outputs(tmp_path):
    code, out = run(tmp_path, "certify", CERTIFY_SPEC)
    assert code == 0
    report = load_report(out)
    assert report["body"]["certificate"]["satisfied"] is True
    assert report["body"]["certificate"]["D"] is not None
    assert (out / "certify.csv").read_text().splitlines()[0] == "offset,value"
    assert (out / "certify.png").stat().st_size > 0
    assert report["header"]["defaults"]["defaults_version"] == 1


def test_gcb_scenario_passes(tmp_path):
    code, out = run(tmp_path, "gcb-test", GCB_SPEC)
    assert code == 0
    report = load_report(out)
    assert report["body"]["report"]["verdict"] == "pass"
    header = (out / "gcb-test.csv").read_text().splitlines()[0]
    assert header == "lambda,lhs,stderr,rhs,verdict"


def test_deviation_rates_scenario(tmp_path):
    code, out = run(tmp_path, "deviation-rates", RATES_SPEC)
    assert code == 0
    header = (out / "deviation-rates.csv").read_text().splitlines()[0]
    assert header == ("sides,volume,epsilon,threshold,block_mean,probability,"
                      "rate,floor,interval_probability,interval_rate")


def test_frequency_scenario_and_csv_schema(tmp_path):
    code, out = run(tmp_path, "frequency-lemma", FREQ_SPEC)
    assert code == 0
    header = (out / "frequency-lemma.csv").read_text().splitlines()[0]
    assert header == "hamming,count,max_tv,bound"


def test_no_figures_flag(tmp_path):
    code, out = run(tmp_path, "certify", CERTIFY_SPEC, "--no-figures")
    assert code == 0
    assert not (out / "certify.png").exists()
    assert load_report(out)["header"]["figure"] is None


def test_unsatisfied_certificate_is_inconclusive(tmp_path):
    spec = {"model": {"model": "ising", "beta": 0.6, "d": 2},
            "window": {"n": 1, "boundary": "plus"},
            "D": "certified"}
    code, _ = run(tmp_path, "gcb-test", spec)
    assert code == 2


def test_usage_errors(tmp_path):
    # unknown scenario
    assert main(["frobnicate", "--spec", "x.json"]) == 3
    # missing spec file
    assert main(["certify", "--spec", str(tmp_path / "nope.json")]) == 3
    # malformed spec
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["certify", "--spec", str(bad)]) == 3
    # spec missing required keys
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert main(["gcb-test", "--spec", str(empty)]) == 3


def test_cap_violation_is_usage_error(tmp_path):
    spec = {"model": {"model": "ising", "beta": 0.1, "d": 1},
            "window": {"n": 14, "boundary": "free"},
            "D": "product", "mode": "exact"}
    code, _ = run(tmp_path, "gcb-test", spec)
    assert code == 3


def test_report_body_is_deterministic(tmp_path):
    _, out1 = run(tmp_path, "gcb-test", GCB_SPEC, seed=5)
    _, out2 = run(tmp_path, "gcb-test", GCB_SPEC, seed=5, name="spec2.json")
    r1, r2 = load_report(out1), load_report(out2)
    assert json.dumps(r1["body"], sort_keys=True) == \
        json.dumps(r2["body"], sort_keys=True)
    assert (out1 / "gcb-test.csv").read_bytes() == \
        (out2 / "gcb-test.csv").read_bytes()
    # timestamp is isolated in the header
    h1 = {k: v for k, v in r1["header"].items() if k != "created_at"}
    h2 = {k: v for k, v in r2["header"].items() if k != "created_at"}
    assert json.dumps(h1, sort_keys=True) == json.dumps(h2, sort_keys=True)


def test_sweep_monotone_dobrushin_column(tmp_path):
    spec_path = tmp_path / "certify.json"
    spec_path.write_text(json.dumps(CERTIFY_SPEC))
    out = tmp_path / "sweep-out"
    code = main(["sweep", "certify", "--spec", str(spec_path),
                 "--parameter", "beta", "--grid", "0.05,0.1,0.15,0.2",
                 "--out", str(out)])
    assert code == 0
    body = load_report(out)["body"]
    values = body["headline"]
    assert all(b > a for a, b in zip(values, values[1:]))
    header = (out / "sweep.csv").read_text().splitlines()[0]
    assert header == "beta,offset,value"


def test_sweep_reproducible_across_thread_counts(tmp_path):
    spec_path = tmp_path / "certify.json"
    spec_path.write_text(json.dumps(CERTIFY_SPEC))
    bodies = []
    for threads in ("1", "4"):
        out = tmp_path / f"sweep-{threads}"
        os.environ["LAB_THREADS"] = threads
        try:
            code = main(["sweep", "certify", "--spec", str(spec_path),
                         "--parameter", "beta", "--grid", "0.1,0.2,0.3",
                         "--seed", "3", "--out", str(out)])
        finally:
            os.environ.pop("LAB_THREADS", None)
        assert code == 0
        bodies.append(json.dumps(load_report(out)["body"], sort_keys=True))
    assert bodies[0] == bodies[1]


def test_entropy_probe_scenario(tmp_path):
    spec = {"model_nu": {"model": "ising", "beta": 0.4, "d": 1},
            "boundary_nu": "minus", "boundary_mu": "plus",
            "windows": [{"n": 1}, {"n": 2}, {"n": 3}],
            "expect": "decreasing"}
    code, out = run(tmp_path, "entropy-probe", spec)
    assert code == 0
    header = (out / "entropy-probe.csv").read_text().splitlines()[0]
    assert header == "sides,volume,entropy,per_site"


def test_blowup_scenario(tmp_path):
    spec = {"model": {"model": "ising", "beta": 0.2, "d": 1},
            "window": {"n": 2, "boundary": "plus"},
            "D": "certified", "trials": 5, "epsilon_grid": [0.5, 0.9]}
    code, out = run(tmp_path, "blowup", spec)
    assert code == 0
    header = (out / "blowup.csv").read_text().splitlines()[0]
    assert header == ("trial,epsilon,mass_set,mass_blowup,threshold,"
                      "applicable,bound,ok")
