"""Dobrushin interdependence row, uniqueness constant, certified bound.

The interdependence coefficient C(0, y) is the worst-case total-variation
sensitivity of the single-site kernel at the origin to a flip of the
boundary spin at y, maximized by brute force over all neighborhood
assignments.  Shift invariance collapses the usual sup over rows to the
origin row, so the uniqueness constant is c = sum over y of C(0, y).
When c < 1 the measure carries a certified moment bound with constant
D = 1 / (2 (1 - c)^2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import Site
from .potential import Potential
from .specification import EnumerationCapError
from . import constants


@dataclass(frozen=True)
class DobrushinReport:
    """Uniqueness certificate for a potential."""

    c: float
    row: dict[Site, float]
    satisfied: bool
    d_constant: float | None

    def to_json_dict(self) -> dict:
        return {
            "c": self.c,
            "satisfied": self.satisfied,
            "D": self.d_constant,
            "row": [{"y": list(y), "value": v}
                    for y, v in sorted(self.row.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _origin_terms(pot: Potential):
    """Translated shapes containing the origin, with the origin's position."""
    origin = (0,) * pot.d
    out = []
    for shape_index, sites in pot.shapes_through_origin():
        out.append((pot.shapes[shape_index], sites, sites.index(origin)))
    return out


def origin_neighborhood(pot: Potential) -> tuple[Site, ...]:
    """Sites other than the origin read by the origin's single-site kernel."""
    origin = (0,) * pot.d
    nbhd: set[Site] = set()
    for _, sites, _ in _origin_terms(pot):
        nbhd.update(sites)
    nbhd.discard(origin)
    return tuple(sorted(nbhd))


def _origin_kernel_table(pot: Potential) -> tuple[np.ndarray, tuple[Site, ...]]:
    """P(s | assignment) for all assignments of the interaction neighborhood.

    Returns an array of shape (S, S, ..., S) with one leading axis for the
    origin symbol and one axis per neighborhood site in lex order.
    """
    s_size = pot.alphabet_size
    nbhd = origin_neighborhood(pot)
    m = len(nbhd)
    if s_size ** m > constants.ENUMERATION_CAP:
        raise EnumerationCapError("origin neighborhood too large to enumerate")
    pos = {site: i for i, site in enumerate(nbhd)}
    n_assign = s_size ** m
    place = np.array([s_size ** (m - 1 - i) for i in range(m)], dtype=np.int64)
    assigns = np.arange(n_assign, dtype=np.int64)
    energies = np.zeros((s_size, n_assign))
    for shape, sites, origin_pos in _origin_terms(pot):
        m_t = shape.size
        flat_nbhd = np.zeros(n_assign, dtype=np.int64)
        for j, site in enumerate(sites):
            if j == origin_pos:
                continue
            flat_nbhd += ((assigns // place[pos[site]]) % s_size) \
                * s_size ** (m_t - 1 - j)
        own_place = s_size ** (m_t - 1 - origin_pos)
        table = shape.table.reshape(-1)
        for s in range(s_size):
            energies[s] += table[flat_nbhd + s * own_place]
    weights = np.exp(-(energies - energies.min(axis=0, keepdims=True)))
    probs = weights / weights.sum(axis=0, keepdims=True)
    return probs.reshape((s_size,) + (s_size,) * m), nbhd


def interdependence_row(pot: Potential) -> dict[Site, float]:
    """C(0, y) for every y != 0 in the interaction cube |y|_inf <= range.

    For y in the kernel's neighborhood the value is the exhaustive
    maximum, over boundary pairs agreeing off y, of the total-variation
    distance between the two single-site kernels; sites of the cube the
    kernel never reads get an exact zero.
    """
    probs, nbhd = _origin_kernel_table(pot)
    s_size = pot.alphabet_size
    row: dict[Site, float] = {}
    r = pot.interaction_range
    import itertools as _it
    cube = [y for y in _it.product(range(-r, r + 1), repeat=pot.d)
            if any(c != 0 for c in y)]
    for y in cube:
        row[y] = 0.0
    for i, y in enumerate(nbhd):
        moved = np.moveaxis(probs, 1 + i, 1)
        flat = moved.reshape(s_size, s_size, -1)
        diff = 0.5 * np.abs(flat[:, :, None, :] - flat[:, None, :, :]).sum(axis=0)
        row[y] = float(diff.max())
    return row


def dobrushin_constant(pot: Potential) -> float:
    """c = sum over y of C(0, y); c < 1 certifies uniqueness."""
    return float(sum(interdependence_row(pot).values()))


def certified_constant(c: float) -> float:
    """The certified moment-bound constant 1 / (2 (1 - c)^2), for c < 1."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"no certificate for c = {c}")
    return 1.0 / (2.0 * (1.0 - c) ** 2)


def gcb_certificate(pot: Potential) -> DobrushinReport:
    """Certificate carrying D = 1/(2(1-c)^2) whenever c < 1."""
    row = interdependence_row(pot)
    c = float(sum(row.values()))
    satisfied = c < 1.0
    d_constant = certified_constant(c) if satisfied else None
    return DobrushinReport(c=c, row=row, satisfied=satisfied,
                           d_constant=d_constant)
