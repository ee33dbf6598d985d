import itertools

import numpy as np
import pytest

from gibbslab.lattice import (FIXED, FREE, TORUS, Configuration, Pattern,
                              Window, box_sites, hamming_distance,
                              pattern_decode, shift_window,
                              OutOfWindowError, WindowMismatchError)


def test_box_sites_examples():
    assert box_sites(1, 0) == ((0,),)
    assert box_sites(1, 1) == ((-1,), (0,), (1,))
    sites = box_sites(2, 1)
    assert len(sites) == 9
    assert sites[0] == (-1, -1)
    assert sites[-1] == (1, 1)


def test_box_sites_lexicographic():
    sites = box_sites(2, 2)
    assert list(sites) == sorted(sites)


def test_window_site_count():
    for d, n in [(1, 0), (1, 3), (2, 1), (3, 1)]:
        w = Window.cube(d, n)
        assert w.n_sites == (2 * n + 1) ** d
        assert len(w.sites) == w.n_sites
        assert w.radius == n


def test_window_even_sides():
    w = Window(d=2, sides=(4, 4), geometry=TORUS)
    assert w.n_sites == 16
    assert w.radius is None
    assert w.lo == (-2, -2) and w.hi == (1, 1)


def test_site_index_roundtrip():
    w = Window.cube(2, 2)
    for i, s in enumerate(w.sites):
        assert w.site_index(s) == i


def test_shift_window_reads():
    w = Window.cube(1, 1, FREE, alphabet_size=3)
    omega = Configuration(w, np.array([0, 1, 2], dtype=np.uint8))
    assert shift_window(omega, (0,), 0).symbols == (1,)
    assert shift_window(omega, (1,), 0).symbols == (2,)
    with pytest.raises(OutOfWindowError):
        shift_window(omega, (2,), 0)


def test_shift_window_torus_wraps():
    w = Window.cube(1, 1, TORUS, alphabet_size=3)
    omega = Configuration(w, np.array([0, 1, 2], dtype=np.uint8))
    assert shift_window(omega, (2,), 0).symbols == (0,)
    # shifting by the full period is the identity
    for x in [(3,), (-3,)]:
        assert shift_window(omega, x, 1).symbols == \
            shift_window(omega, (0,), 1).symbols


def test_torus_period_identity_2d():
    w = Window.cube(2, 1, TORUS)
    rng = np.random.default_rng(0)
    omega = Configuration(w, rng.integers(0, 2, w.n_sites).astype(np.uint8))
    base = shift_window(omega, (0, 0), 1).symbols
    assert shift_window(omega, (3, 0), 1).symbols == base
    assert shift_window(omega, (0, -3), 1).symbols == base


def test_hamming_examples():
    w = Window.cube(1, 1)
    a = Configuration(w, np.array([1, 1, 1], dtype=np.uint8))
    b = Configuration(w, np.array([0, 0, 0], dtype=np.uint8))
    assert hamming_distance(a, a) == 0
    assert hamming_distance(a, b) == 3

    w2 = Window.cube(2, 1)
    base = np.zeros(9, dtype=np.uint8)
    corners = base.copy()
    for corner in [(-1, -1), (-1, 1), (1, -1), (1, 1)]:
        corners[w2.site_index(corner)] = 1
    assert hamming_distance(Configuration(w2, base),
                            Configuration(w2, corners)) == 4


def test_hamming_window_mismatch():
    a = Configuration(Window.cube(1, 1), np.zeros(3, dtype=np.uint8))
    b = Configuration(Window.cube(1, 2), np.zeros(5, dtype=np.uint8))
    with pytest.raises(WindowMismatchError):
        hamming_distance(a, b)


def test_hamming_is_a_metric_exhaustive():
    # all configuration pairs/triples for d=1, n <= 2, |S| = 2
    for n in (1, 2):
        w = Window.cube(1, n)
        configs = [Configuration.from_code(w, c) for c in range(w.n_states)]
        for a, b in itertools.product(configs, repeat=2):
            dab = hamming_distance(a, b)
            assert dab == hamming_distance(b, a)
            assert (dab == 0) == (a == b)
        if n == 1:
            for a, b, c in itertools.product(configs, repeat=3):
                assert hamming_distance(a, c) <= \
                    hamming_distance(a, b) + hamming_distance(b, c)


def test_pattern_code_examples():
    assert Pattern(d=1, k=0, alphabet_size=2, symbols=(1,)).code == 1
    assert Pattern(d=1, k=1, alphabet_size=2, symbols=(1, 0, 1)).code == 5


@pytest.mark.parametrize("alphabet,d,k", [(2, 1, 1), (2, 1, 3), (3, 1, 1),
                                          (2, 2, 1), (3, 2, 1)])
def test_pattern_code_bijection(alphabet, d, k):
    n_patterns = alphabet ** ((2 * k + 1) ** d)
    seen = set()
    for code in range(n_patterns):
        p = pattern_decode(code, k, alphabet, d)
        assert p.code == code
        seen.add(p.symbols)
    assert len(seen) == n_patterns


def test_pattern_code_out_of_range():
    with pytest.raises(ValueError):
        pattern_decode(8, 1, 2, 1)


def test_configuration_validation():
    w = Window.cube(1, 1, FIXED)
    with pytest.raises(ValueError):
        Configuration(w, np.zeros(3, dtype=np.uint8))  # missing boundary
    with pytest.raises(ValueError):
        Configuration(Window.cube(1, 1), np.zeros(2, dtype=np.uint8))
    with pytest.raises(ValueError):
        Configuration(Window.cube(1, 1), np.array([0, 2, 0], dtype=np.uint8))


def test_configuration_code_roundtrip():
    w = Window.cube(2, 1, alphabet_size=3)
    for code in [0, 1, 3 ** 9 - 1, 12345]:
        assert Configuration.from_code(w, code).code() == code


def test_text_roundtrip_free():
    w = Window.cube(1, 2, FREE)
    cfg = Configuration(w, np.array([1, 0, 1, 1, 0], dtype=np.uint8))
    assert Configuration.from_text(cfg.to_text()) == cfg


def test_text_roundtrip_fixed_boundary():
    w = Window.cube(2, 1, FIXED)
    cfg = Configuration(w, np.arange(9, dtype=np.uint8) % 2, boundary=1)
    back = Configuration.from_text(cfg.to_text())
    assert back == cfg
    assert back.boundary == 1


def test_text_roundtrip_even_sides():
    w = Window(d=2, sides=(4, 4), geometry=TORUS)
    cfg = Configuration(w, (np.arange(16) % 2).astype(np.uint8))
    assert Configuration.from_text(cfg.to_text()) == cfg


def test_boundary_reads():
    w = Window.cube(1, 1, FIXED)
    cfg = Configuration.constant(w, 0, boundary=1)
    assert cfg.symbol((2,)) == 1
    assert cfg.symbol((0,)) == 0
    free = Configuration.constant(Window.cube(1, 1, FREE), 0)
    with pytest.raises(OutOfWindowError):
        free.symbol((2,))
