"""Exact finite-volume Gibbs machinery by enumeration.

Gibbs kernels gamma_L(.|eta) = exp(-H_L(.|eta)) / Z_L(eta) as exact
probability tables over all |S|^|L| configurations, log partition
functions with max-shifted accumulation, exact marginals, and the
consistency (DLR) check over all cylinder events of a sub-window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import constants
from .lattice import (FIXED, TORUS, Configuration, Site, Window, box_sites)
from .observables import LocalFunction, PatternDistribution
from .potential import Potential, Term, window_terms

_CHUNK = 1 << 20


class EnumerationCapError(ValueError):
    """State space too large for exact enumeration."""


class CollarError(ValueError):
    """Sub-window too close to the window edge for the interaction range."""


def _check_cap(window: Window, cap: int = constants.ENUMERATION_CAP) -> int:
    n_states = window.n_states
    if n_states > cap:
        raise EnumerationCapError(
            f"{window.alphabet_size}^{window.n_sites} states exceed the "
            f"enumeration cap {cap}")
    return n_states


@dataclass(frozen=True)
class _CompiledTerm:
    """One interaction term prepared for vectorized evaluation over codes."""

    table_flat: np.ndarray
    const: int                      # flat-index part from frozen exterior spins
    code_places: tuple[int, ...]    # divisor per interior read site
    flat_places: tuple[int, ...]    # multiplier per interior read site


def _compile_terms(pot: Potential, window: Window,
                   boundary) -> list[_CompiledTerm]:
    s_size = window.alphabet_size
    n = window.n_sites
    compiled = []
    for term in window_terms(pot, window):
        shape = pot.shapes[term.shape_index]
        m = shape.size
        const = 0
        code_places = []
        flat_places = []
        for j, site in enumerate(term.read_sites):
            flat_place = s_size ** (m - 1 - j)
            if window.geometry != TORUS and not window.contains(site):
                # fixed geometry: frozen exterior spin (free never gets here)
                sym = boundary if isinstance(boundary, int) else boundary[site]
                const += flat_place * int(sym)
            else:
                idx = window.site_index(site)
                code_places.append(s_size ** (n - 1 - idx))
                flat_places.append(flat_place)
        compiled.append(_CompiledTerm(
            table_flat=shape.table.reshape(-1), const=const,
            code_places=tuple(code_places), flat_places=tuple(flat_places)))
    return compiled


def config_energies(pot: Potential, window: Window, boundary=None,
                    codes: np.ndarray | None = None) -> np.ndarray:
    """Hamiltonian of every configuration code (or of the given codes)."""
    compiled = _compile_terms(pot, window, boundary)
    if codes is None:
        _check_cap(window)
        codes = np.arange(window.n_states, dtype=np.int64)
    s_size = window.alphabet_size
    energies = np.zeros(codes.shape, dtype=np.float64)
    for term in compiled:
        flat = np.full(codes.shape, term.const, dtype=np.int64)
        for code_place, flat_place in zip(term.code_places, term.flat_places):
            flat += ((codes // code_place) % s_size) * flat_place
        energies += term.table_flat[flat]
    return energies


def partition_function(pot: Potential, window: Window,
                       boundary=None) -> float:
    """log Z = log sum over configurations of exp(-H), max-shifted.

    Streams over code chunks so the full energy table is never held.
    """
    n_states = _check_cap(window)
    running_max = -np.inf
    running_sum = 0.0
    for start in range(0, n_states, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, n_states), dtype=np.int64)
        a = -config_energies(pot, window, boundary, codes)
        m = float(a.max())
        if m > running_max:
            running_sum *= np.exp(running_max - m)
            running_max = m
        running_sum += float(np.exp(a - running_max).sum())
    return running_max + float(np.log(running_sum))


@dataclass(eq=False)
class FiniteGibbsMeasure:
    """Exact probability table of a finite-volume Gibbs kernel.

    ``probs[code] = exp(-H(code | boundary) - log_z)`` up to float
    rounding; the table is renormalized so it sums to one exactly at
    working precision.
    """

    window: Window
    boundary: int | None
    potential: Potential
    probs: np.ndarray
    log_z: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.window.n_states,):
            raise ValueError("probability table has the wrong size")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probability table does not sum to 1")
        if float(probs.min()) <= 0.0:
            raise ValueError("finite energies force strictly positive probabilities")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def configurations(self) -> Iterator[Configuration]:
        bnd = self.boundary if self.window.geometry == FIXED else None
        for code in range(self.window.n_states):
            yield Configuration.from_code(self.window, code, bnd)

    def expectation(self, f: LocalFunction) -> float:
        bnd = self.boundary if self.window.geometry == FIXED else None
        values = f.values_over_window(self.window, bnd)
        return float(np.dot(self.probs, values))

    def variance(self, f: LocalFunction) -> float:
        bnd = self.boundary if self.window.geometry == FIXED else None
        values = f.values_over_window(self.window, bnd)
        mean = float(np.dot(self.probs, values))
        return float(np.dot(self.probs, (values - mean) ** 2))


def gibbs_kernel(pot: Potential, window: Window,
                 boundary=None) -> FiniteGibbsMeasure:
    """Exact finite-volume Gibbs measure gamma_L(.|boundary)."""
    _check_cap(window)
    if window.geometry == FIXED and boundary is None:
        raise ValueError("fixed geometry requires a boundary condition")
    energies = config_energies(pot, window, boundary)
    neg = -energies
    m = float(neg.max())
    weights = np.exp(neg - m)
    total = float(weights.sum())
    log_z = m + float(np.log(total))
    probs = weights / total
    return FiniteGibbsMeasure(window=window, boundary=boundary,
                              potential=pot, probs=probs, log_z=log_z)


def exact_marginal(measure: FiniteGibbsMeasure, k: int) -> PatternDistribution:
    """Projection of the exact table onto the centered sub-cube Lambda_k."""
    w = measure.window
    sub_idx = w.sub_cube_indices(k)
    s_size = w.alphabet_size
    n = w.n_sites
    code_places = np.array([s_size ** (n - 1 - int(i)) for i in sub_idx],
                           dtype=np.int64)
    m = len(sub_idx)
    flat_places = np.array([s_size ** (m - 1 - j) for j in range(m)],
                           dtype=np.int64)
    n_sub = s_size ** m
    out = np.zeros(n_sub)
    n_states = w.n_states
    for start in range(0, n_states, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, n_states), dtype=np.int64)
        sub = ((codes[:, None] // code_places[None, :]) % s_size) @ flat_places
        out += np.bincount(sub, weights=measure.probs[codes], minlength=n_sub)
    return PatternDistribution.exact(w.d, k, s_size, out)


def _sub_window_collar_ok(window: Window, k: int, interaction_range: int) -> bool:
    if window.geometry == TORUS:
        return all(2 * k + 1 + 2 * interaction_range <= s for s in window.sides)
    return all(lo <= -(k + interaction_range) and hi >= k + interaction_range
               for lo, hi in zip(window.lo, window.hi))


def dlr_check(measure: FiniteGibbsMeasure, k: int) -> float:
    """Max consistency violation over all cylinder events of Lambda_k.

    For every pattern p on the sub-cube, compares the exact marginal
    mu([p]) against the conditional reconstruction
    sum over exterior patterns of mu(exterior) * gamma_{Lambda_k}(p | exterior).
    The sub-cube must keep a collar of width >= interaction range inside
    the window so the sub-kernel conditions only on interior spins.
    """
    w = measure.window
    pot = measure.potential
    s_size = w.alphabet_size
    if not _sub_window_collar_ok(w, k, pot.interaction_range):
        raise CollarError(
            f"Lambda_{k} needs a collar of width {pot.interaction_range} "
            f"inside the window")
    sub_idx = w.sub_cube_indices(k)
    sub_set = {int(i) for i in sub_idx}
    ext_idx = np.array([i for i in range(w.n_sites) if i not in sub_set],
                       dtype=np.int64)
    n = w.n_sites
    m_sub = len(sub_idx)
    m_ext = len(ext_idx)
    n_sub = s_size ** m_sub
    n_ext = s_size ** m_ext

    sub_pos = {int(widx): j for j, widx in enumerate(sub_idx)}
    ext_pos = {int(widx): j for j, widx in enumerate(ext_idx)}
    sub_place = np.array([s_size ** (n - 1 - int(i)) for i in sub_idx],
                         dtype=np.int64)
    sub_flat = np.array([s_size ** (m_sub - 1 - j) for j in range(m_sub)],
                        dtype=np.int64)
    ext_place = np.array([s_size ** (n - 1 - int(i)) for i in ext_idx],
                         dtype=np.int64)
    ext_flat = np.array([s_size ** (m_ext - 1 - j) for j in range(m_ext)],
                        dtype=np.int64)

    codes = np.arange(w.n_states, dtype=np.int64)
    digits_sub = (codes[:, None] // sub_place[None, :]) % s_size
    digits_ext = (codes[:, None] // ext_place[None, :]) % s_size
    marg_sub = np.bincount(digits_sub @ sub_flat, weights=measure.probs,
                           minlength=n_sub)
    weight_ext = np.bincount(digits_ext @ ext_flat, weights=measure.probs,
                             minlength=n_ext)

    # Interaction terms meeting the sub-cube; the collar guarantees every
    # read site is an interior window site.
    sub_sites = {w.sites[i] for i in sub_set}
    subcodes = np.arange(n_sub, dtype=np.int64)
    term_parts = []
    for term in window_terms(pot, w):
        if not any(site in sub_sites for site in term.read_sites):
            continue
        shape = measure.potential.shapes[term.shape_index]
        m_t = shape.size
        flat_from_sub = np.zeros(n_sub, dtype=np.int64)
        ext_reads = []
        for j, site in enumerate(term.read_sites):
            widx = w.site_index(site)
            flat_place = s_size ** (m_t - 1 - j)
            if widx in sub_pos:
                p = sub_pos[widx]
                flat_from_sub += ((subcodes // sub_flat[p]) % s_size) * flat_place
            else:
                ext_reads.append((ext_pos[widx], flat_place))
        term_parts.append((shape.table.reshape(-1), flat_from_sub, ext_reads))

    reconstructed = np.zeros(n_sub)
    ext_codes = np.arange(n_ext, dtype=np.int64)
    ext_digits = (ext_codes[:, None] // ext_flat[None, :]) % s_size
    for e in range(n_ext):
        if weight_ext[e] == 0.0:
            continue
        energy = np.zeros(n_sub)
        row = ext_digits[e]
        for table_flat, flat_from_sub, ext_reads in term_parts:
            offset = sum(int(row[p]) * fp for p, fp in ext_reads)
            energy += table_flat[flat_from_sub + offset]
        neg = -energy
        kernel = np.exp(neg - neg.max())
        kernel /= kernel.sum()
        reconstructed += weight_ext[e] * kernel
    return float(np.abs(marg_sub - reconstructed).max())


# -- text export ------------------------------------------------------------

def measure_to_text(measure: FiniteGibbsMeasure) -> str:
    """Two-column (code, probability) table with a parameter-echo header.

    Probabilities are written with round-trip float repr, so re-parsing
    reproduces the table bit-exactly.
    """
    w = measure.window
    header = {
        "d": w.d,
        "sides": list(w.sides),
        "geometry": w.geometry,
        "alphabet_size": w.alphabet_size,
        "boundary": measure.boundary,
        "model": measure.potential.name,
        "params": dict(measure.potential.params),
        "log_z": repr(measure.log_z),
    }
    lines = ["# gibbslab exact measure", "# " + json.dumps(header, sort_keys=True)]
    lines.extend(f"{code} {float(prob)!r}" for code, prob in enumerate(measure.probs))
    return "\n".join(lines) + "\n"


def measure_from_text(text: str) -> tuple[dict, np.ndarray]:
    """Parse the export format back into (header, probability table)."""
    header = None
    codes = []
    probs = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            payload = line.lstrip("# ")
            if payload.startswith("{"):
                header = json.loads(payload)
            continue
        code_tok, prob_tok = line.split()
        codes.append(int(code_tok))
        probs.append(float(prob_tok))
    if header is None:
        raise ValueError("missing header line")
    table = np.empty(len(probs))
    table[np.array(codes, dtype=np.int64)] = probs
    return header, table
