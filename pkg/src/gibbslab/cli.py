"""Scenario runner: `lab <scenario> --spec file.json [--seed N] [--out dir]`.

Binds the library modules into reproducible experiments.  Every run
writes a JSON report (deterministic body, timestamp isolated in the
header), a CSV table, and a rendered figure into the output directory.

Exit codes: 0 all assertions passed, 1 falsification detected,
2 inconclusive, 3 usage or resource error.  The environment variable
LAB_THREADS caps parallelism across sweep grid points.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import constants, figures
from .concentration import (blowup_bound_check, deviation_rate_scan, gcb_test,
                            default_lambda_grid)
from .dobrushin import gcb_certificate
from .entropy import AbsoluteContinuityError, per_site_entropy_sequence
from .lattice import FIXED, FREE, TORUS, Configuration, Window, box_sites
from .observables import LocalFunction, shields_bound_check
from .potential import (DYSON, build_potential, dyson_truncation_tail,
                        model_params_from_json, summability_norm)
from .sampler import (ChainConfig, ResourceCapError, batch_means_stderr,
                      effective_sample_size, run_chain_series, run_chains)
from .specification import EnumerationCapError, gibbs_kernel

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3

SCENARIOS = ("certify", "gcb-test", "blowup", "frequency-lemma",
             "entropy-probe", "critical-variance", "phase-coexistence",
             "deviation-rates")

# Inverse temperature above which sampling defaults switch to the
# long (low-temperature) burn-in.
LOW_TEMPERATURE_BETA = 0.4


class SpecError(ValueError):
    """Malformed scenario spec."""


def lab_threads() -> int:
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# spec resolution helpers
# ---------------------------------------------------------------------------

_BOUNDARY_ALIASES = {"plus": (FIXED, 1), "minus": (FIXED, 0),
                     "free": (FREE, None), "periodic": (TORUS, None)}


def resolve_window(doc: dict, d: int, alphabet: int) -> tuple[Window, int | None]:
    """Window doc: {"n": r | "sides": [..], "boundary": plus|minus|free|periodic|<symbol>}."""
    bnd = doc.get("boundary", "free")
    if isinstance(bnd, bool) or not isinstance(bnd, (int, str)):
        raise SpecError(f"bad boundary {bnd!r}")
    if isinstance(bnd, int):
        geometry, boundary = FIXED, bnd
    else:
        try:
            geometry, boundary = _BOUNDARY_ALIASES[bnd]
        except KeyError:
            raise SpecError(f"unknown boundary {bnd!r}")
    if "n" in doc:
        window = Window.cube(d, int(doc["n"]), geometry, alphabet)
    elif "sides" in doc:
        window = Window(d=d, sides=tuple(int(s) for s in doc["sides"]),
                        geometry=geometry, alphabet_size=alphabet)
    else:
        raise SpecError("window needs 'n' or 'sides'")
    return window, boundary


def resolve_function(doc: dict | None, d: int, alphabet: int) -> LocalFunction:
    doc = doc or {"type": "spin"}
    kind = doc.get("type", "spin")
    if kind == "spin":
        f = LocalFunction.spin((0,) * d, d=d)
    elif kind == "magnetization":
        f = LocalFunction.magnetization(box_sites(d, int(doc.get("radius", 1))),
                                        d=d)
    elif kind == "pair":
        offset = tuple(int(c) for c in doc.get("offset", (1,) + (0,) * (d - 1)))
        f = LocalFunction.spin_product((0,) * d, offset, d=d)
    else:
        raise SpecError(f"unknown function type {kind!r}")
    scale = float(doc.get("scale", 1.0))
    return f if scale == 1.0 else f.scaled(scale)


def resolve_sampling(doc: dict | None, seed: int, beta: float) -> dict:
    doc = doc or {}
    low = beta > LOW_TEMPERATURE_BETA
    default_burnin = constants.BURNIN_LOW_TEMPERATURE if low \
        else constants.BURNIN_HIGH_TEMPERATURE
    return dict(
        kernel=doc.get("kernel", "heat-bath"),
        sweeps_burnin=int(doc.get("burnin", default_burnin)),
        sweeps_between_samples=int(doc.get("thin", 1)),
        n_samples=int(doc.get("samples", 2000)),
        n_chains=int(doc.get("chains", 4)),
        seed=seed,
    )


def resolve_d_constant(spec_d, pot) -> tuple[float | None, dict]:
    """D spec: "certified" | "product" | number."""
    if spec_d == "certified":
        cert = gcb_certificate(pot)
        return cert.d_constant, {"source": "certified",
                                 "certificate": cert.to_json_dict()}
    if spec_d == "product":
        return constants.PRODUCT_MEASURE_D, {"source": "product"}
    if isinstance(spec_d, (int, float)) and not isinstance(spec_d, bool):
        return float(spec_d), {"source": "explicit"}
    raise SpecError(f"bad D spec {spec_d!r}")


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,))
               .generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# scenarios: each returns (exit_code, body, csv_header, csv_rows)
# ---------------------------------------------------------------------------

def _scenario_certify(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    cert = gcb_certificate(pot)
    body = {
        "model": params.to_json_dict(),
        "summability_norm": summability_norm(pot),
        "certificate": cert.to_json_dict(),
    }
    if params.model == DYSON:
        body["truncation_tail"] = dyson_truncation_tail(params.alpha,
                                                        params.r_max)
    header = ["offset", "value"]
    rows = [[",".join(str(c) for c in e["y"]), e["value"]]
            for e in body["certificate"]["row"]]
    return EXIT_PASS, body, header, rows


def _verdict_exit(verdict: str) -> int:
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL,
            "inconclusive": EXIT_INCONCLUSIVE}[verdict]


def _scenario_gcb_test(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    window, boundary = resolve_window(spec["window"], params.d,
                                      pot.alphabet_size)
    f = resolve_function(spec.get("function"), params.d, pot.alphabet_size)
    d_constant, d_info = resolve_d_constant(spec.get("D", "certified"), pot)
    body = {"model": params.to_json_dict(), "d_info": d_info}
    if d_constant is None:
        body["report"] = None
        body["note"] = "no certificate: c >= 1, nothing to test against"
        return EXIT_INCONCLUSIVE, body, ["lambda", "lhs", "stderr", "rhs",
                                         "verdict"], []
    grid = spec.get("lambda_grid")
    if grid is not None:
        grid = tuple(float(g) for g in grid)
    mode = spec.get("mode", "auto")
    if mode == "auto":
        mode = "exact" if window.n_states <= constants.DENSE_TABLE_MAX \
            else "sampled"
    if mode == "exact":
        source = gibbs_kernel(pot, window, boundary)
    else:
        cfg = ChainConfig(window=window, potential=pot, boundary=boundary,
                          **resolve_sampling(spec.get("sampling"), seed,
                                             params.beta))
        source = run_chains(cfg)
    report = gcb_test(source, f, d_constant, grid)
    body["report"] = report.to_json_dict()
    header = ["lambda", "lhs", "stderr", "rhs", "verdict"]
    rows = [[r.lam, r.lhs, r.stderr if r.stderr is not None else "",
             r.rhs, r.verdict] for r in report.rows]
    return _verdict_exit(report.verdict), body, header, rows


def _scenario_blowup(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    window, boundary = resolve_window(spec["window"], params.d,
                                      pot.alphabet_size)
    d_constant, d_info = resolve_d_constant(spec.get("D", "certified"), pot)
    if d_constant is None:
        return EXIT_INCONCLUSIVE, {"d_info": d_info, "checks": []}, [], []
    trials = int(spec.get("trials", 20))
    eps_grid = [float(e) for e in spec.get("epsilon_grid",
                                           (0.3, 0.5, 0.7, 0.9))]
    fraction = float(spec.get("set_fraction", 0.5))
    min_mass = float(spec.get("min_mass", 0.05))
    rng = np.random.default_rng(seed)
    measure = gibbs_kernel(pot, window, boundary)
    n_states = window.n_states
    checks = []
    n_violations = 0
    for trial in range(trials):
        size = max(1, int(fraction * n_states))
        c_codes = rng.choice(n_states, size=size, replace=False)
        if float(measure.probs[c_codes].sum()) < min_mass:
            continue
        for eps in eps_grid:
            rep = blowup_bound_check(measure, c_codes, eps, d_constant)
            doc = rep.to_json_dict()
            doc["trial"] = trial
            checks.append(doc)
            if rep.applicable and not rep.ok:
                n_violations += 1
    body = {"model": params.to_json_dict(), "d_info": d_info,
            "checks": checks, "n_checks": len(checks),
            "n_violations": n_violations}
    header = ["trial", "epsilon", "mass_set", "mass_blowup", "threshold",
              "applicable", "bound", "ok"]
    rows = [[c["trial"], c["epsilon"], c["mass_set"], c["mass_blowup"],
             c["threshold"], c["applicable"], c["bound"], c["ok"]]
            for c in checks]
    code = EXIT_PASS if n_violations == 0 else EXIT_FAIL
    return code, body, header, rows


def _scenario_frequency_lemma(spec: dict, seed: int):
    d = int(spec.get("d", 1))
    alphabet = int(spec.get("alphabet", 2))
    n = int(spec["n"])
    k = int(spec["k"])
    epsilon = spec.get("epsilon")
    window = Window.cube(d, n, FREE, alphabet)
    pairs_spec = spec.get("pairs", "all")
    rng = np.random.default_rng(seed)
    if pairs_spec == "all":
        codes = np.arange(window.n_states, dtype=np.int64)
        pairs = [(int(a), int(b)) for a in codes for b in codes]
    else:
        count = int(pairs_spec)
        pairs = [(int(rng.integers(window.n_states)),
                  int(rng.integers(window.n_states))) for _ in range(count)]
    ratio = (2 * k + 1) ** d / (2 * (n - k) + 1) ** d
    by_hamming: dict[int, dict] = {}
    n_violations = 0
    n_refined_violations = 0
    configs = {}

    def cfg_for(code):
        if code not in configs:
            configs[code] = Configuration.from_code(window, code)
        return configs[code]

    for a, b in pairs:
        check = shields_bound_check(cfg_for(a), cfg_for(b), k, epsilon=epsilon)
        if not check.ok:
            n_violations += 1
        if check.conclusion_ok is False:
            n_refined_violations += 1
        agg = by_hamming.setdefault(check.hamming,
                                    {"hamming": check.hamming, "count": 0,
                                     "max_tv": 0.0,
                                     "bound": ratio * check.hamming})
        agg["count"] += 1
        agg["max_tv"] = max(agg["max_tv"], check.tv)
    rows_by_h = [by_hamming[h] for h in sorted(by_hamming)]
    body = {"d": d, "alphabet": alphabet, "n": n, "k": k,
            "epsilon": epsilon, "volume_ratio": ratio,
            "n_pairs": len(pairs), "n_violations": n_violations,
            "n_refined_violations": n_refined_violations,
            "by_hamming": rows_by_h}
    header = ["hamming", "count", "max_tv", "bound"]
    rows = [[r["hamming"], r["count"], r["max_tv"], r["bound"]]
            for r in rows_by_h]
    ok = n_violations == 0 and n_refined_violations == 0
    return (EXIT_PASS if ok else EXIT_FAIL), body, header, rows


def _scenario_entropy_probe(spec: dict, seed: int):
    params_nu = model_params_from_json(spec["model_nu"])
    params_mu = model_params_from_json(spec.get("model_mu", spec["model_nu"]))
    pot_nu = build_potential(params_nu)
    pot_mu = build_potential(params_mu)
    windows = []
    bnd_nu = bnd_mu = None
    for wdoc in spec["windows"]:
        w_nu, bnd_nu = resolve_window({**wdoc,
                                       "boundary": spec.get("boundary_nu",
                                                            "free")},
                                      params_nu.d, pot_nu.alphabet_size)
        _, bnd_mu = resolve_window({**wdoc,
                                    "boundary": spec.get("boundary_mu",
                                                         "free")},
                                   params_mu.d, pot_mu.alphabet_size)
        windows.append(w_nu)
    report = per_site_entropy_sequence(pot_nu, pot_mu, windows, bnd_nu, bnd_mu)
    body = {"model_nu": params_nu.to_json_dict(),
            "model_mu": params_mu.to_json_dict(),
            "boundary_nu": spec.get("boundary_nu", "free"),
            "boundary_mu": spec.get("boundary_mu", "free"),
            "report": report.to_json_dict(),
            "note": ("finite-volume surrogate sequence; the report states "
                     "trends, never infinite-volume limits")}
    header = ["sides", "volume", "entropy", "per_site"]
    rows = [["x".join(str(s) for s in r.sides), r.volume, r.entropy,
             r.per_site] for r in report.rows]
    expect = spec.get("expect")
    code = EXIT_PASS
    if expect == "decreasing" and not report.monotone_decreasing:
        code = EXIT_INCONCLUSIVE
    return code, body, header, rows


def _variance_by_chain(series: np.ndarray) -> tuple[float, float]:
    per_chain = series.var(axis=1, ddof=1)
    mean = float(per_chain.mean())
    if per_chain.size < 2:
        return mean, float("inf")
    return mean, float(per_chain.std(ddof=1) / math.sqrt(per_chain.size))


def _scenario_critical_variance(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    expect = spec.get("expect", "increasing")
    d_constant = None
    d_info = {}
    if spec.get("D") is not None:
        d_constant, d_info = resolve_d_constant(spec["D"], pot)
    base_sampling = spec.get("sampling") or {}
    by_n = spec.get("sampling_by_n", {})
    rows = []
    for i, n in enumerate(spec.get("n_list", (4, 8, 16, 32))):
        window = Window.cube(params.d, int(n), TORUS, pot.alphabet_size)
        doc = {**base_sampling, **by_n.get(str(n), {})}
        sampling = resolve_sampling(doc, _derived_seed(seed, i), params.beta)
        cfg = ChainConfig(window=window, potential=pot, boundary=None,
                          **sampling)
        series = run_chain_series(cfg, lambda m: (2.0 * m - 1.0).sum(axis=1))
        var, stderr = _variance_by_chain(series)
        rows.append({"n": int(n), "volume": window.n_sites,
                     "var_per_site": var / window.n_sites,
                     "stderr": stderr / window.n_sites,
                     "ess": effective_sample_size(series)})
    steps_ok = []
    for a, b in zip(rows, rows[1:]):
        gap = b["var_per_site"] - a["var_per_site"]
        sigma = math.hypot(a["stderr"], b["stderr"])
        if expect == "increasing":
            steps_ok.append(gap > 3 * sigma)
        else:
            steps_ok.append(abs(gap) < 3 * sigma)
    ceiling = None
    ceiling_ok = None
    if d_constant is not None:
        ceiling = 8.0 * d_constant
        ceiling_ok = all(r["var_per_site"] <= ceiling for r in rows)
    all_ok = all(steps_ok) and (ceiling_ok is not False)
    if all_ok:
        outcome, code = "confirmed", EXIT_PASS
    else:
        decisive_contradiction = expect == "increasing" and any(
            b["var_per_site"] - a["var_per_site"] <
            -3 * math.hypot(a["stderr"], b["stderr"])
            for a, b in zip(rows, rows[1:]))
        if decisive_contradiction or ceiling_ok is False:
            outcome, code = "contradicted", EXIT_FAIL
        else:
            outcome, code = "inconclusive", EXIT_INCONCLUSIVE
    body = {"model": params.to_json_dict(), "expect": expect,
            "rows": rows, "steps_ok": steps_ok, "ceiling": ceiling,
            "ceiling_ok": ceiling_ok, "outcome": outcome, "d_info": d_info}
    header = ["n", "volume", "var_per_site", "stderr", "ess"]
    csv_rows = [[r["n"], r["volume"], r["var_per_site"], r["stderr"],
                 r["ess"]] for r in rows]
    return code, body, header, csv_rows


def _scenario_phase_coexistence(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    side = int(spec.get("side", 16))
    window = Window(d=params.d, sides=(side,) * params.d, geometry=FIXED,
                    alphabet_size=pot.alphabet_size)
    sampling = resolve_sampling(spec.get("magnetization_sampling"), seed,
                                params.beta)
    mag = {}
    for label, boundary, seed_index in (("plus", 1, 0), ("minus", 0, 1)):
        cfg = ChainConfig(window=window, potential=pot, boundary=boundary,
                          **{**sampling,
                             "seed": _derived_seed(seed, seed_index)})
        series = run_chain_series(
            cfg, lambda m: (2.0 * m - 1.0).mean(axis=1))
        mag[label] = {"mean": float(series.mean()),
                      "stderr": batch_means_stderr(series),
                      "ess": effective_sample_size(series)}
    sep_sigma = math.hypot(mag["plus"]["stderr"], mag["minus"]["stderr"])
    separation = mag["plus"]["mean"] - mag["minus"]["mean"]
    mag_ok = (mag["plus"]["mean"] > 0.5 and mag["minus"]["mean"] < -0.5
              and separation > 6 * sep_sigma)

    entropy_windows = [resolve_window({**wdoc, "boundary": "minus"}, params.d,
                                      pot.alphabet_size)[0]
                       for wdoc in spec.get("entropy_windows",
                                            ({"n": 1}, {"sides": [4, 4]}))]
    entropy_report = per_site_entropy_sequence(pot, pot, entropy_windows,
                                               boundary_nu=0, boundary_mu=1)
    entropy_ok = entropy_report.monotone_decreasing

    rate_windows = [resolve_window({**wdoc, "boundary": "plus"}, params.d,
                                   pot.alphabet_size)[0]
                    for wdoc in spec.get("rates_windows",
                                         ({"n": 1}, {"sides": [4, 4]}))]
    f = LocalFunction.spin((0,) * params.d, d=params.d).scaled(-1.0)
    scan = deviation_rate_scan(pot, rate_windows, 1, f,
                               threshold=float(spec.get("rates_threshold",
                                                        0.0)))
    rates_ok = scan.rates_decreasing()

    all_ok = mag_ok and entropy_ok and rates_ok
    decisive = (mag["plus"]["mean"] < mag["minus"]["mean"] + 6 * sep_sigma
                and not mag_ok)
    outcome = "confirmed" if all_ok else \
        ("contradicted" if decisive else "inconclusive")
    body = {
        "model": params.to_json_dict(), "side": side,
        "magnetization": {**mag, "separation": separation,
                          "separation_sigma": sep_sigma, "ok": mag_ok},
        "entropy": {**entropy_report.to_json_dict(), "ok": entropy_ok},
        "rates": {**scan.to_json_dict(), "ok": rates_ok},
        "outcome": outcome,
        "note": ("finite-volume trend signatures of phase coexistence; "
                 "infinite-volume statements are not desk-reproducible and "
                 "are not claimed"),
    }
    header = ["section", "key", "value"]
    rows = [["magnetization", "plus_mean", mag["plus"]["mean"]],
            ["magnetization", "minus_mean", mag["minus"]["mean"]],
            ["magnetization", "separation", separation],
            ["magnetization", "separation_sigma", sep_sigma]]
    rows += [["entropy", "x".join(str(s) for s in r.sides), r.per_site]
             for r in entropy_report.rows]
    rows += [["rates", "x".join(str(s) for s in r.sides), r.rate]
             for r in scan.rows]
    code = EXIT_PASS if all_ok else \
        (EXIT_FAIL if outcome == "contradicted" else EXIT_INCONCLUSIVE)
    return code, body, header, rows


def _scenario_deviation_rates(spec: dict, seed: int):
    params = model_params_from_json(spec["model"])
    pot = build_potential(params)
    boundary_token = spec.get("boundary", "free")
    windows = []
    boundary = None
    for wdoc in spec["windows"]:
        w, boundary = resolve_window({**wdoc, "boundary": boundary_token},
                                     params.d, pot.alphabet_size)
        windows.append(w)
    f = resolve_function(spec.get("function"), params.d, pot.alphabet_size)
    d_constant = None
    d_info = {}
    if spec.get("D") is not None:
        d_constant, d_info = resolve_d_constant(spec["D"], pot)
    sampling = None
    if spec.get("mode", "exact") == "sampled":
        sampling = resolve_sampling(spec.get("sampling"), seed, params.beta)
    scan = deviation_rate_scan(pot, windows, boundary, f,
                               epsilon=spec.get("epsilon"),
                               threshold=spec.get("threshold"),
                               d_constant=d_constant, sampling=sampling)
    expect = spec.get("expect")
    code = EXIT_PASS
    if expect == "floor":
        oks = [r.floor_ok for r in scan.rows]
        if any(ok is False for ok in oks):
            code = EXIT_FAIL if scan.mode == "exact" else EXIT_INCONCLUSIVE
        elif any(ok is None for ok in oks):
            code = EXIT_INCONCLUSIVE
    elif expect == "decreasing" and not scan.rates_decreasing():
        code = EXIT_INCONCLUSIVE
    body = {"model": params.to_json_dict(), "boundary": boundary_token,
            "d_info": d_info, "expect": expect, "scan": scan.to_json_dict()}
    header = ["sides", "volume", "epsilon", "threshold", "block_mean",
              "probability", "rate", "floor", "interval_probability",
              "interval_rate"]
    rows = [["x".join(str(s) for s in r.sides), r.volume, r.epsilon,
             r.threshold, r.block_mean, r.probability, r.rate,
             r.floor if r.floor is not None else "",
             r.interval_probability, r.interval_rate]
            for r in scan.rows]
    return code, body, header, rows


_SCENARIO_FNS = {
    "certify": _scenario_certify,
    "gcb-test": _scenario_gcb_test,
    "blowup": _scenario_blowup,
    "frequency-lemma": _scenario_frequency_lemma,
    "entropy-probe": _scenario_entropy_probe,
    "critical-variance": _scenario_critical_variance,
    "phase-coexistence": _scenario_phase_coexistence,
    "deviation-rates": _scenario_deviation_rates,
}


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

_SWEEP_SETTERS = {
    "beta": lambda spec, v: spec["model"].__setitem__("beta", float(v)),
    "n": lambda spec, v: spec["window"].__setitem__("n", int(v)),
    "epsilon": lambda spec, v: spec.__setitem__("epsilon", float(v)),
    "lambda": lambda spec, v: spec.__setitem__(
        "lambda_grid", [-abs(float(v)), abs(float(v))]),
}

_HEADLINES = {
    "certify": ("dobrushin_c", lambda b: b["certificate"]["c"]),
    "gcb-test": ("max_lhs_minus_rhs",
                 lambda b: max((r["lhs"] - r["rhs"]
                                for r in b["report"]["rows"]), default=0.0)),
    "blowup": ("min_margin",
               lambda b: min((c["mass_blowup"] - c["bound"]
                              for c in b["checks"] if c["applicable"]),
                             default=float("nan"))),
    "frequency-lemma": ("n_violations", lambda b: b["n_violations"]),
    "entropy-probe": ("last_per_site",
                      lambda b: b["report"]["rows"][-1]["per_site"]),
    "critical-variance": ("last_var_per_site",
                          lambda b: b["rows"][-1]["var_per_site"]),
    "phase-coexistence": ("separation",
                          lambda b: b["magnetization"]["separation"]),
    "deviation-rates": ("last_rate", lambda b: b["scan"]["rows"][-1]["rate"]),
}


def run_sweep(scenario: str, spec: dict, parameter: str, grid: list,
              seed: int):
    if parameter not in _SWEEP_SETTERS:
        raise SpecError(f"sweep parameter must be one of "
                        f"{sorted(_SWEEP_SETTERS)}, got {parameter!r}")
    setter = _SWEEP_SETTERS[parameter]
    fn = _SCENARIO_FNS[scenario]

    def run_point(i_value):
        i, value = i_value
        point_spec = json.loads(json.dumps(spec))
        setter(point_spec, value)
        return fn(point_spec, _derived_seed(seed, i))

    points = list(enumerate(grid))
    workers = lab_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, points))
    else:
        results = [run_point(p) for p in points]
    label, extract = _HEADLINES[scenario]
    headline = [extract(body) for _, body, _, _ in results]
    body = {"scenario": scenario, "parameter": parameter,
            "grid": [g for g in grid], "headline": headline,
            "headline_label": label,
            "points": [b for _, b, _, _ in results]}
    point_header = results[0][2]
    header = [parameter] + point_header
    rows = []
    for value, (_, _, _, point_rows) in zip(grid, results):
        rows.extend([[value] + r for r in point_rows])
    codes = [c for c, _, _, _ in results]
    if EXIT_USAGE in codes:
        code = EXIT_USAGE
    elif EXIT_FAIL in codes:
        code = EXIT_FAIL
    elif EXIT_INCONCLUSIVE in codes:
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_PASS
    return code, body, header, rows


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

def write_outputs(out_dir: Path, scenario: str, spec: dict, seed: int,
                  exit_code: int, body: dict, csv_header, csv_rows,
                  with_figures: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    figure_name = f"{scenario}.png" if with_figures else None
    header = {
        "tool": "gibbslab",
        "version": "0.1.0",
        "scenario": scenario,
        "seed": seed,
        "spec": spec,
        "defaults": constants.as_dict(),
        "exit_code": exit_code,
        "created_at": datetime.datetime.now(datetime.timezone.utc)
        .isoformat(),
        "figure": figure_name,
    }
    report = {"header": header, "body": body}
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2, allow_nan=True) + "\n")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header)
    writer.writerows(csv_rows)
    (out_dir / f"{scenario}.csv").write_text(buf.getvalue())
    if with_figures:
        try:
            figures.render_figure(scenario, body, out_dir / figure_name)
        except Exception as exc:  # figures never break the report path
            sys.stderr.write(f"figure rendering failed: {exc}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Gibbs-measure concentration laboratory scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--spec", required=True, help="scenario spec JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="lab-out")
        p.add_argument("--no-figures", action="store_true")
    p = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--spec", required=True)
    p.add_argument("--parameter", required=True,
                   choices=sorted(_SWEEP_SETTERS))
    p.add_argument("--grid", required=True,
                   help="comma-separated parameter values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="lab-out")
    p.add_argument("--no-figures", action="store_true")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2; the contract reserves 3
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"cannot read spec: {exc}\n")
        return EXIT_USAGE
    out_dir = Path(args.out)
    try:
        if args.command == "sweep":
            grid_raw = [g for g in args.grid.split(",") if g]
            grid = [int(g) if args.parameter == "n" else float(g)
                    for g in grid_raw]
            code, body, header, rows = run_sweep(args.scenario, spec,
                                                 args.parameter, grid,
                                                 args.seed)
            scenario_name = "sweep"
        else:
            scenario_name = args.command
            code, body, header, rows = _SCENARIO_FNS[scenario_name](spec,
                                                                    args.seed)
    except (SpecError, KeyError, ValueError, EnumerationCapError,
            ResourceCapError, AbsoluteContinuityError) as exc:
        sys.stderr.write(f"error: {exc!r}\n")
        return EXIT_USAGE
    write_outputs(out_dir, scenario_name, spec, args.seed, code, body,
                  header, rows, not args.no_figures)
    summary = {"scenario": scenario_name, "exit_code": code,
               "out": str(out_dir)}
    sys.stdout.write(json.dumps(summary) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
