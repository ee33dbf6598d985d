"""Figure rendering for scenario reports.

One PNG per run, derived purely from the report body, written next to
the delimited output.  Figures are presentation only: the JSON/CSV
reports carry the contract, and nothing here feeds back into them.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _fig_certify(body):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    row = body["certificate"]["row"]
    labels = [",".join(str(c) for c in e["y"]) for e in row]
    ax.bar(range(len(row)), [e["value"] for e in row], color="#4878d0")
    ax.set_xticks(range(len(row)))
    ax.set_xticklabels(labels, rotation=45, fontsize=7)
    ax.set_xlabel("offset y")
    ax.set_ylabel("C(0, y)")
    c = body["certificate"]["c"]
    d = body["certificate"]["D"]
    title = f"c = {c:.4f}"
    title += f", D = {d:.4f}" if d is not None else "  (no certificate)"
    ax.set_title(title, fontsize=10)
    return fig


def _fig_gcb(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = body["report"]["rows"]
    lams = [r["lambda"] for r in rows]
    lhs = [r["lhs"] for r in rows]
    rhs = [r["rhs"] for r in rows]
    err = [3 * r["stderr"] if r["stderr"] else 0.0 for r in rows]
    ax.errorbar(lams, lhs, yerr=err, fmt="o", label="log E exp(lam (F - EF))",
                color="#4878d0", markersize=4)
    order = sorted(range(len(lams)), key=lambda i: lams[i])
    ax.plot([lams[i] for i in order], [rhs[i] for i in order], "-",
            color="#d65f5f", label="D lam^2 ||dF||_2^2")
    ax.set_xlabel("lambda")
    ax.set_ylabel("log moment")
    ax.legend(fontsize=8)
    ax.set_title(f"verdict: {body['report']['verdict']}", fontsize=10)
    return fig


def _fig_blowup(body):
    fig, ax = plt.subplots(figsize=(5, 5))
    rows = [r for r in body["checks"] if r["applicable"]]
    ax.scatter([r["bound"] for r in rows], [r["mass_blowup"] for r in rows],
               s=12, color="#4878d0", label="applicable checks")
    ax.plot([0, 1], [0, 1], "--", color="gray", linewidth=1)
    ax.set_xlabel("guaranteed lower bound")
    ax.set_ylabel("blow-up mass")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    ax.set_title(f"violations: {body['n_violations']}", fontsize=10)
    return fig


def _fig_frequency(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = body["by_hamming"]
    ax.plot([r["hamming"] for r in rows], [r["max_tv"] for r in rows], "o-",
            color="#4878d0", label="max TV at distance")
    ax.plot([r["hamming"] for r in rows], [r["bound"] for r in rows], "--",
            color="#d65f5f", label="(2k+1)^d d / (2(n-k)+1)^d")
    ax.set_xlabel("Hamming distance")
    ax.set_ylabel("TV between pattern frequencies")
    ax.legend(fontsize=8)
    ax.set_title(f"pairs checked: {body['n_pairs']}, "
                 f"violations: {body['n_violations']}", fontsize=10)
    return fig


def _fig_entropy(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = body["report"]["rows"]
    ax.plot([r["volume"] for r in rows], [r["per_site"] for r in rows], "o-",
            color="#4878d0")
    ax.set_xlabel("window volume")
    ax.set_ylabel("relative entropy per site")
    ax.set_title("monotone decreasing: "
                 f"{body['report']['monotone_decreasing']}", fontsize=10)
    return fig


def _fig_variance(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = body["rows"]
    ns = [r["n"] for r in rows]
    ax.errorbar(ns, [r["var_per_site"] for r in rows],
                yerr=[3 * r["stderr"] for r in rows], fmt="o-",
                color="#4878d0", label="Var(sum spins)/|L|")
    if body.get("ceiling") is not None:
        ax.axhline(body["ceiling"], linestyle="--", color="#d65f5f",
                   label="8 D ceiling")
    ax.set_xlabel("window radius n")
    ax.set_ylabel("variance per site")
    ax.legend(fontsize=8)
    ax.set_title(f"expectation: {body['expect']} -> {body['outcome']}",
                 fontsize=10)
    return fig


def _fig_phase(body):
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    mag = body["magnetization"]
    axes[0].errorbar([0, 1],
                     [mag["plus"]["mean"], mag["minus"]["mean"]],
                     yerr=[3 * mag["plus"]["stderr"],
                           3 * mag["minus"]["stderr"]],
                     fmt="o", color="#4878d0")
    axes[0].axhline(0.0, color="gray", linewidth=1)
    axes[0].set_xticks([0, 1])
    axes[0].set_xticklabels(["+ boundary", "- boundary"])
    axes[0].set_ylabel("mean magnetization per site")

    erows = body["entropy"]["rows"]
    axes[1].plot([r["volume"] for r in erows],
                 [r["per_site"] for r in erows], "o-", color="#4878d0")
    axes[1].set_xlabel("interior volume")
    axes[1].set_ylabel("entropy per site (- vs +)")

    rrows = body["rates"]["rows"]
    axes[2].plot([r["volume"] for r in rrows], [r["rate"] for r in rrows],
                 "o-", color="#4878d0")
    axes[2].set_xlabel("interior volume")
    axes[2].set_ylabel("deviation rate per site")
    fig.suptitle(f"coexistence signatures: {body['outcome']}", fontsize=10)
    return fig


def _fig_rates(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    rows = body["scan"]["rows"]
    vols = [r["volume"] for r in rows]
    rates = [r["rate"] if math.isfinite(r["rate"]) else float("nan")
             for r in rows]
    ax.plot(vols, rates, "o-", color="#4878d0", label="-log p / |L|")
    floors = [r["floor"] for r in rows if r["floor"] is not None]
    if floors:
        ax.axhline(floors[0], linestyle="--", color="#d65f5f",
                   label="eps^2 / (36 D ||df||_1^2)")
    ax.set_xlabel("window volume")
    ax.set_ylabel("per-site rate")
    ax.legend(fontsize=8)
    return fig


def _fig_sweep(body):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(body["grid"], body["headline"], "o-", color="#4878d0")
    ax.set_xlabel(body["parameter"])
    ax.set_ylabel(body["headline_label"])
    ax.set_title("parameter sweep", fontsize=10)
    return fig


_RENDERERS = {
    "certify": _fig_certify,
    "gcb-test": _fig_gcb,
    "blowup": _fig_blowup,
    "frequency-lemma": _fig_frequency,
    "entropy-probe": _fig_entropy,
    "critical-variance": _fig_variance,
    "phase-coexistence": _fig_phase,
    "deviation-rates": _fig_rates,
    "sweep": _fig_sweep,
}


def render_figure(scenario: str, body: dict, path) -> None:
    renderer = _RENDERERS.get(scenario)
    if renderer is None:
        return
    _save(renderer(body), path)
