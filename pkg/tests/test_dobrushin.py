import json
import math

import numpy as np
import pytest

from gibbslab.dobrushin import (certified_constant, dobrushin_constant,
                                gcb_certificate, interdependence_row)
from gibbslab.potential import (dyson_truncated_potential, ising_potential,
                                potts_potential)


def test_zero_coupling_zero_row():
    row = interdependence_row(ising_potential(0.0, d=2))
    assert all(v == 0.0 for v in row.values())
    assert dobrushin_constant(ising_potential(0.0, d=1)) == 0.0


def _analytic_chain_coefficient(beta):
    # kernel P(+ | left sigma, right tau) = (1 + tanh(beta(sigma+tau)))/2;
    # TV over the flip of one neighbor, maximized over the other.
    best = 0.0
    for sigma in (-1, 1):
        tv = 0.5 * abs(math.tanh(beta * (sigma + 1))
                       - math.tanh(beta * (sigma - 1)))
        best = max(best, tv)
    return best


@pytest.mark.parametrize("beta", [0.1, 0.3, 0.5, 0.9])
def test_chain_coefficient_matches_analytic_oracle(beta):
    row = interdependence_row(ising_potential(beta, d=1))
    assert row[(1,)] == pytest.approx(_analytic_chain_coefficient(beta),
                                      abs=1e-12)
    # and the closed form of the maximization
    assert row[(1,)] == pytest.approx(math.tanh(2 * beta) / 2, abs=1e-12)


def test_row_reflection_symmetry():
    for pot in [ising_potential(0.4, d=2),
                dyson_truncated_potential(0.3, 1.5, 3),
                potts_potential(0.8, 3, d=1)]:
        row = interdependence_row(pot)
        for y, v in row.items():
            neg = tuple(-c for c in y)
            assert v == pytest.approx(row[neg], abs=1e-12)


def test_row_entries_in_unit_interval():
    for pot in [ising_potential(1.5, d=2), dyson_truncated_potential(2.0, 1.2, 4)]:
        for v in interdependence_row(pot).values():
            assert 0.0 <= v <= 1.0


def test_constant_monotone_in_beta():
    grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
    values = [dobrushin_constant(ising_potential(b, d=2)) for b in grid]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_chain_unique_for_all_tested_beta():
    # one-dimensional nearest-neighbor chains never hit the threshold
    for beta in np.linspace(0.1, 1.0, 10):
        assert dobrushin_constant(ising_potential(float(beta), d=1)) < 1.0


def test_certified_constant_anchors():
    assert certified_constant(0.0) == 0.5
    assert certified_constant(0.5) == 2.0
    with pytest.raises(ValueError):
        certified_constant(1.0)


def test_certificate_at_zero_coupling():
    rep = gcb_certificate(ising_potential(0.0, d=2))
    assert rep.c == 0.0
    assert rep.satisfied
    assert rep.d_constant == 0.5


def test_certificate_denied_at_low_temperature():
    rep = gcb_certificate(ising_potential(0.6, d=2))
    assert not rep.satisfied
    assert rep.d_constant is None
    assert rep.c >= 1.0


def test_certificate_d2_small_beta():
    rep = gcb_certificate(ising_potential(0.15, d=2))
    assert rep.satisfied
    # c = 2 tanh(2 beta) for the two-dimensional chain kernel
    assert rep.c == pytest.approx(2 * math.tanh(0.3), abs=1e-12)
    assert rep.d_constant == pytest.approx(certified_constant(rep.c), abs=0)


def test_report_json_shape():
    rep = gcb_certificate(ising_potential(0.1, d=1))
    doc = json.loads(rep.to_json())
    assert set(doc) == {"c", "satisfied", "D", "row"}
    assert all(set(entry) == {"y", "value"} for entry in doc["row"])
    assert doc["satisfied"] is True
