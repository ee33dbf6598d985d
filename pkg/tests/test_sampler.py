import itertools
import math

import numpy as np
import pytest

from gibbslab import sampler as smp
from gibbslab.lattice import FIXED, FREE, TORUS, Configuration, Window
from gibbslab.observables import PatternDistribution, empirical_frequency, tv_distance
from gibbslab.potential import ising_potential, potts_potential
from gibbslab.sampler import (ChainConfig, SampleSet, SiteSystem,
                              chain_generators, estimate_event_probability,
                              heat_bath_sweep, metropolis_sweep, run_chains,
                              run_chain_series)
from gibbslab.specification import exact_marginal, gibbs_kernel


def small_cfg(**kw):
    defaults = dict(window=Window.cube(1, 1, TORUS),
                    potential=ising_potential(0.4, d=1),
                    sweeps_burnin=20, n_samples=50, n_chains=2, seed=123)
    defaults.update(kw)
    return ChainConfig(**defaults)


def test_same_seed_bit_identical():
    cfg = small_cfg()
    a, b = run_chains(cfg), run_chains(cfg)
    assert np.array_equal(a.spins, b.spins)
    assert np.array_equal(a.chain_index, b.chain_index)


def test_different_seed_differs():
    a = run_chains(small_cfg(seed=1))
    b = run_chains(small_cfg(seed=2))
    assert not np.array_equal(a.spins, b.spins)


def test_chain_seeds_distinct():
    cfg = small_cfg(n_chains=4, n_samples=200)
    s = run_chains(cfg)
    rows = s.spins.reshape(4, 200, -1)
    for i, j in itertools.combinations(range(4), 2):
        assert not np.array_equal(rows[i], rows[j])


def test_fast_path_equals_generic_kernel():
    pot = ising_potential(0.35, h=0.1, d=2)
    for geometry, bnd in [(TORUS, None), (FIXED, 1), (FREE, None)]:
        w = Window(d=2, sides=(4, 4), geometry=geometry) if geometry != FREE \
            else Window(d=2, sides=(3, 5), geometry=FREE)
        cfg = ChainConfig(window=w, potential=pot, boundary=bnd,
                          sweeps_burnin=30, n_samples=30, n_chains=2, seed=9)
        fast = run_chains(cfg)
        orig = smp._ising_fast_path_ok
        smp._ising_fast_path_ok = lambda c: False
        try:
            generic = run_chains(cfg)
        finally:
            smp._ising_fast_path_ok = orig
        assert np.array_equal(fast.spins, generic.spins)


def test_single_site_law_matches_exact_kernel():
    # the conditional distribution used by heat bath equals the exact
    # single-site Gibbs kernel on every neighbor configuration
    pot = ising_potential(0.7, h=0.3, d=1)
    w = Window.cube(1, 1, FIXED)
    system = SiteSystem(pot, w, 1)
    for code in range(w.n_states):
        spins = Configuration.from_code(w, code, boundary=1).spins.copy()
        for idx, site in enumerate(w.sites):
            sub = Window.cube(1, 0, FIXED)
            bmap = {}
            for off in (-1, 1):
                nb = (site[0] + off,)
                if w.contains(nb):
                    bmap[(off,)] = int(spins[w.site_index(nb)])
                else:
                    bmap[(off,)] = 1
            mu = gibbs_kernel(pot, sub, bmap)
            dist = system.conditional_distribution(spins, idx)
            assert np.allclose(dist, mu.probs, atol=1e-13)


def test_single_site_window_sweeps_sample_the_kernel():
    beta = 0.7
    pot = ising_potential(beta, d=1)
    w = Window.cube(1, 0, FIXED)
    mu = gibbs_kernel(pot, w, 1)
    cfg = ChainConfig(window=w, potential=pot, boundary=1, sweeps_burnin=0,
                      n_samples=100_000, n_chains=1, seed=5)
    samples = run_chains(cfg)
    p_hat = samples.spins.mean()
    p = mu.probs[1]
    sigma = math.sqrt(p * (1 - p) / samples.n_total)
    assert abs(p_hat - p) < 3 * sigma


def test_infinite_temperature_uniformity():
    cfg = small_cfg(potential=ising_potential(0.0, d=1),
                    window=Window.cube(1, 1, FREE), sweeps_burnin=1,
                    n_samples=4000, n_chains=2, seed=77)
    samples = run_chains(cfg)
    mean = (2.0 * samples.spins - 1.0).mean()
    sigma = 1.0 / math.sqrt(samples.n_total * 3)
    assert abs(mean) < 3 * sigma


def test_single_site_update_detailed_balance():
    # the elementary heat-bath update is reversible for the exact measure:
    # start from exact samples, update one site, compare symmetrized flows
    rng = np.random.default_rng(3)
    pot = ising_potential(0.5, d=1)
    w = Window(d=1, sides=(2,), geometry=FREE)
    mu = gibbs_kernel(pot, w)
    system = SiteSystem(pot, w, None)
    n = 200_000
    starts = rng.choice(w.n_states, size=n, p=mu.probs)
    flows = np.zeros((w.n_states, w.n_states))
    for a in range(w.n_states):
        count = int((starts == a).sum())
        if count == 0:
            continue
        spins = Configuration.from_code(w, a).spins.copy()
        dist = system.conditional_distribution(spins, 0)
        moves = rng.multinomial(count, dist)
        for s0, c in enumerate(moves):
            b = s0 * 2 + (a & 1)
            flows[a, b] += c
    flows /= n
    asym = np.abs(flows - flows.T)
    scale = math.sqrt(1.0 / n)
    assert asym.max() < 5 * scale


def test_sweep_preserves_exact_distribution():
    # chi-square: draw starts from the exact table, apply one full sweep,
    # compare the end-state histogram to the table
    rng = np.random.default_rng(4)
    pot = ising_potential(0.6, d=1)
    w = Window.cube(1, 1, FIXED)
    mu = gibbs_kernel(pot, w, 1)
    system = SiteSystem(pot, w, 1)
    n = 100_000
    starts = rng.choice(w.n_states, size=n, p=mu.probs)
    counts = np.zeros(w.n_states)
    start_vals, start_counts = np.unique(starts, return_counts=True)
    for a, c in zip(start_vals, start_counts):
        spins0 = Configuration.from_code(w, int(a), boundary=1).spins
        u = rng.random((int(c), w.n_sites))
        for row in u:
            spins = spins0.copy()
            smp._heat_bath_pass(spins, system, row)
            counts[int(Configuration(w, spins, boundary=1).code())] += 1
    expected = n * mu.probs
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 7 dof; 3-sigma-ish threshold
    assert chi2 < 30.0


def test_metropolis_preserves_exact_distribution():
    rng = np.random.default_rng(8)
    pot = potts_potential(0.8, 3, d=1)
    w = Window(d=1, sides=(2,), geometry=TORUS, alphabet_size=3)
    mu = gibbs_kernel(pot, w)
    system = SiteSystem(pot, w, None)
    n = 60_000
    starts = rng.choice(w.n_states, size=n, p=mu.probs)
    counts = np.zeros(w.n_states)
    for a in range(w.n_states):
        c = int((starts == a).sum())
        spins0 = Configuration.from_code(w, a).spins
        for _ in range(c):
            spins = spins0.copy()
            smp._metropolis_pass(spins, system, rng.random(2), rng.random(2))
            counts[int(Configuration(w, spins).code())] += 1
    expected = n * mu.probs
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 40.0  # 8 dof


def test_public_sweep_ops_are_pure():
    pot = ising_potential(0.4, d=1)
    w = Window.cube(1, 1, TORUS)
    cfg = Configuration(w, np.array([1, 0, 1], dtype=np.uint8))
    rng = np.random.default_rng(0)
    out = heat_bath_sweep(cfg, pot, rng)
    assert out.window == w
    assert cfg.spins.flags.writeable is False
    out2 = metropolis_sweep(cfg, pot, np.random.default_rng(1))
    assert out2.window == w


def test_torus_marginal_matches_exact_oracle():
    # sampled single-site statistics on an 8x8 torus against the exact
    # marginal of an enumerable 4x4 torus (short correlation length)
    beta, h = 0.2, 0.3
    pot = ising_potential(beta, h=h, d=2)
    exact = gibbs_kernel(pot, Window(d=2, sides=(4, 4), geometry=TORUS))
    marg = exact_marginal(exact, 0)
    cfg = ChainConfig(window=Window(d=2, sides=(8, 8), geometry=TORUS),
                      potential=pot, sweeps_burnin=500,
                      sweeps_between_samples=2, n_samples=2000, n_chains=8,
                      seed=21)
    series = run_chain_series(cfg, lambda m: m.mean(axis=1))
    p_plus = float(series.mean())
    sampled = PatternDistribution.exact(2, 0, 2,
                                        np.array([1 - p_plus, p_plus]))
    assert tv_distance(sampled, marg) < 0.02


def test_estimate_event_probability_trivial():
    cfg = small_cfg(n_samples=100)
    est = estimate_event_probability(cfg, lambda c: True)
    assert est.p_hat == 1.0
    assert est.stderr == 0.0 or est.stderr != est.stderr  # zero or nan-free
    est0 = estimate_event_probability(cfg, lambda c: False)
    assert est0.p_hat == 0.0
    assert est0.upper95 == pytest.approx(3.0 / est0.n_total)


def test_estimate_event_probability_fair_spin():
    cfg = small_cfg(potential=ising_potential(0.0, d=1),
                    window=Window.cube(1, 1, FREE), sweeps_burnin=1,
                    n_samples=4000, n_chains=2, seed=10)
    w = cfg.window
    center = w.site_index((0,))
    est = estimate_event_probability(
        cfg, lambda c: c.spins[center] == 1,
        batch_event=lambda m: m[:, center] == 1)
    assert abs(est.p_hat - 0.5) < 4 * est.stderr


def test_estimate_event_matches_exact_oracle():
    # interior block magnetization <= 0 under a plus boundary
    beta = 0.5
    pot = ising_potential(beta, d=2)
    w = Window.cube(2, 1, FIXED)
    mu = gibbs_kernel(pot, w, 1)
    phys = 2.0 * np.arange(2) - 1.0
    exact_p = 0.0
    for code in range(w.n_states):
        spins = Configuration.from_code(w, code, boundary=1).spins
        if phys[spins].sum() <= 0:
            exact_p += mu.probs[code]
    cfg = ChainConfig(window=w, potential=pot, boundary=1, sweeps_burnin=500,
                      sweeps_between_samples=2, n_samples=4000, n_chains=4,
                      seed=33)
    est = estimate_event_probability(
        cfg, lambda c: (2.0 * c.spins - 1.0).sum() <= 0,
        batch_event=lambda m: (2.0 * m - 1.0).sum(axis=1) <= 0)
    assert abs(est.p_hat - exact_p) < 3 * est.stderr


def test_effective_sample_size_iid():
    rng = np.random.default_rng(6)
    series = rng.normal(size=(4, 2000))
    ess = smp.effective_sample_size(series)
    assert 0.5 * series.size < ess <= series.size


def test_sample_set_text_roundtrip():
    cfg = small_cfg(n_samples=5, n_chains=2)
    s = run_chains(cfg)
    header, rows = SampleSet.rows_from_text(s.to_text())
    assert header["seed"] == cfg.seed
    assert np.array_equal(rows, s.spins)


def test_resource_caps():
    with pytest.raises(smp.ResourceCapError):
        run_chains(small_cfg(n_samples=10 ** 9))
