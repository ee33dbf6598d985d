import math

import numpy as np
import pytest

from gibbslab.lattice import FIXED, FREE, TORUS, Configuration, Window
from gibbslab.observables import marginalize, tv_distance
from gibbslab.potential import hamiltonian, ising_potential, potts_potential
from gibbslab.specification import (CollarError, EnumerationCapError,
                                    FiniteGibbsMeasure, config_energies,
                                    dlr_check, exact_marginal, gibbs_kernel,
                                    measure_from_text, measure_to_text,
                                    partition_function)


def test_log_z_infinite_temperature():
    for w, bnd in [(Window.cube(1, 2, FREE), None),
                   (Window.cube(1, 1, FIXED), 1),
                   (Window.cube(2, 1, TORUS), None)]:
        pot = ising_potential(0.0, d=w.d)
        assert partition_function(pot, w, bnd) == pytest.approx(
            w.n_sites * math.log(2), abs=1e-12)


def test_log_z_single_site_plus_neighbors():
    # one site, both frozen neighbors +: energies -/+ 2 beta
    pot = ising_potential(1.0, d=1)
    w = Window.cube(1, 0, FIXED)
    assert partition_function(pot, w, 1) == pytest.approx(
        math.log(math.exp(2) + math.exp(-2)), abs=1e-12)


def test_log_z_flip_invariance():
    pot = ising_potential(0.6, d=1)
    w = Window.cube(1, 2, FIXED)
    assert partition_function(pot, w, 1) == pytest.approx(
        partition_function(pot, w, 0), abs=1e-12)


def test_uniform_kernel_at_beta_zero():
    mu = gibbs_kernel(ising_potential(0.0, d=1), Window.cube(1, 2, FREE))
    assert np.allclose(mu.probs, 1 / 32, atol=1e-15)


def test_single_site_kernel_law():
    beta = 0.8
    mu = gibbs_kernel(ising_potential(beta, d=1), Window.cube(1, 0, FIXED), 1)
    p_plus = math.exp(2 * beta) / (math.exp(2 * beta) + math.exp(-2 * beta))
    assert mu.probs[1] == pytest.approx(p_plus, abs=1e-14)


def test_energies_match_scalar_hamiltonian():
    pot = potts_potential(0.7, 3, d=1)
    w = Window.cube(1, 1, FIXED, alphabet_size=3)
    energies = config_energies(pot, w, 2)
    for code in range(w.n_states):
        cfg = Configuration.from_code(w, code, boundary=2)
        assert energies[code] == pytest.approx(hamiltonian(pot, cfg), abs=1e-12)


def test_dlr_beta_zero_product():
    mu = gibbs_kernel(ising_potential(0.0, d=1), Window.cube(1, 2, FREE))
    assert dlr_check(mu, 1) <= 1e-14


def test_dlr_ising_chain():
    mu = gibbs_kernel(ising_potential(0.7, d=1), Window.cube(1, 3, FIXED), 1)
    assert dlr_check(mu, 1) <= 1e-10


def test_dlr_detects_corruption():
    mu = gibbs_kernel(ising_potential(0.7, d=1), Window.cube(1, 3, FIXED), 1)
    probs = mu.probs.copy()
    probs[5] += 1e-3
    probs /= probs.sum()
    corrupted = FiniteGibbsMeasure(window=mu.window, boundary=mu.boundary,
                                   potential=mu.potential, probs=probs,
                                   log_z=mu.log_z)
    assert dlr_check(corrupted, 1) > 1e-5


def test_dlr_collar_too_thin():
    mu = gibbs_kernel(ising_potential(0.3, d=1), Window.cube(1, 1, FIXED), 1)
    with pytest.raises(CollarError):
        dlr_check(mu, 1)


def test_dlr_on_torus():
    mu = gibbs_kernel(ising_potential(0.5, d=1), Window.cube(1, 3, TORUS))
    assert dlr_check(mu, 1) <= 1e-10


def test_marginal_full_window_is_identity():
    mu = gibbs_kernel(ising_potential(0.4, d=1), Window.cube(1, 2, FIXED), 1)
    marg = exact_marginal(mu, 2)
    assert np.allclose(marg.dense, mu.probs, atol=1e-15)


def test_marginal_beta_zero_uniform():
    mu = gibbs_kernel(ising_potential(0.0, d=1), Window.cube(1, 2, FREE))
    marg = exact_marginal(mu, 1)
    assert np.allclose(marg.dense, 1 / 8, atol=1e-15)


def test_marginal_against_conditional_sum_oracle():
    # independent oracle: scalar hamiltonian + direct python summation
    beta = 0.5
    pot = ising_potential(beta, d=1)
    w = Window.cube(1, 2, FIXED)
    mu = gibbs_kernel(pot, w, 1)
    weights = np.array([
        math.exp(-hamiltonian(pot, Configuration.from_code(w, code, boundary=1)))
        for code in range(w.n_states)])
    weights /= weights.sum()
    center = w.site_index((0,))
    p_plus = sum(weights[code] for code in range(w.n_states)
                 if (code >> (w.n_sites - 1 - center)) & 1)
    marg = exact_marginal(mu, 0)
    assert marg.dense[1] == pytest.approx(p_plus, abs=1e-12)


def test_marginals_are_projective():
    mu = gibbs_kernel(ising_potential(0.45, d=1), Window.cube(1, 3, FIXED), 1)
    via_table = exact_marginal(mu, 1)
    via_bigger = marginalize(exact_marginal(mu, 2), 1)
    assert tv_distance(via_table, via_bigger) <= 1e-12


def test_spin_flip_covariance():
    pot = ising_potential(0.6, d=1)
    w = Window.cube(1, 2, FIXED)
    mu_plus = gibbs_kernel(pot, w, 1)
    mu_minus = gibbs_kernel(pot, w, 0)
    flipped = mu_minus.probs[::-1]  # symbol complement reverses the code order
    assert np.allclose(mu_plus.probs, flipped, atol=1e-14)


def test_measure_table_invariants():
    mu = gibbs_kernel(ising_potential(1.2, d=2), Window.cube(2, 1, FIXED), 1)
    assert abs(mu.probs.sum() - 1.0) <= 1e-12
    assert mu.probs.min() > 0.0
    # probs[p] = exp(-H - logZ) up to rounding
    energies = config_energies(mu.potential, mu.window, 1)
    assert np.allclose(mu.probs, np.exp(-energies - mu.log_z), rtol=1e-10)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        partition_function(ising_potential(0.1, d=1), Window.cube(1, 14, FREE))


def test_measure_text_roundtrip_bit_exact():
    mu = gibbs_kernel(ising_potential(0.9, d=1), Window.cube(1, 2, FIXED), 1)
    header, table = measure_from_text(measure_to_text(mu))
    assert header["model"] == "ising"
    assert header["boundary"] == 1
    assert header["sides"] == [5]
    assert table.shape == mu.probs.shape
    assert np.array_equal(table, mu.probs)  # bit-exact
