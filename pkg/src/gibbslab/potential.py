"""Shift-invariant finite-range interaction potentials and Hamiltonians.

A potential is a finite family of *base shapes*: finite sets of offsets,
anchored so the lexicographically smallest offset is the origin, each
carrying a dense energy table over the restricted spin assignments.
Every interaction term of the infinite family is a translate of exactly
one base shape, which makes term enumeration and summability exact.

Inverse temperature is factored into the potential: constructors take
beta explicitly so parameter sweeps are first-class.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import zeta

from .lattice import (FIXED, FREE, TORUS, Configuration, Site, Window,
                      add_sites, negate_site)

ISING = "ising"
POTTS = "potts"
DYSON = "dyson"
FIELD = "field"


def spin_value(symbol: int) -> int:
    """Two-symbol alphabet presentation: symbol 0 -> -1, symbol 1 -> +1."""
    return 2 * symbol - 1


@dataclass(frozen=True, eq=False)
class TermShape:
    """One base interaction shape: lex-sorted offsets anchored at the origin."""

    offsets: tuple[Site, ...]
    table: np.ndarray  # energy, shape (S,) * len(offsets)

    def __post_init__(self):
        if tuple(sorted(self.offsets)) != self.offsets:
            raise ValueError("offsets must be lexicographically sorted")
        if any(c != 0 for c in self.offsets[0]):
            raise ValueError("base shape must be anchored at the origin")
        if len(set(self.offsets)) != len(self.offsets):
            raise ValueError("offsets must be distinct")
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != len(self.offsets):
            raise ValueError("table rank must equal number of offsets")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @property
    def size(self) -> int:
        return len(self.offsets)

    def energy(self, symbols: Sequence[int]) -> float:
        return float(self.table[tuple(int(s) for s in symbols)])

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.table).max())


@dataclass(frozen=True, eq=False)
class Potential:
    """Finite-range shift-invariant interaction."""

    name: str
    d: int
    alphabet_size: int
    interaction_range: int
    shapes: tuple[TermShape, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for shape in self.shapes:
            for off in shape.offsets:
                if len(off) != self.d:
                    raise ValueError("offset dimension mismatch")
                if any(abs(c) > 2 * self.interaction_range for c in off):
                    raise ValueError("shape exceeds declared interaction range")

    def shapes_through_origin(self) -> list[tuple[int, tuple[Site, ...]]]:
        """All distinct translated shapes containing the origin.

        Yields (shape_index, absolute sites) pairs; each base shape B
        contributes |B| translates B - b, one per element b of B.
        """
        out = []
        for i, shape in enumerate(self.shapes):
            for b in shape.offsets:
                out.append((i, tuple(add_sites(o, negate_site(b))
                                     for o in shape.offsets)))
        return out


def _pair_table(energy, alphabet_size: int) -> np.ndarray:
    t = np.empty((alphabet_size, alphabet_size))
    for a in range(alphabet_size):
        for b in range(alphabet_size):
            t[a, b] = energy(a, b)
    return t


def _singleton_table(energy, alphabet_size: int) -> np.ndarray:
    return np.array([energy(a) for a in range(alphabet_size)])


def _unit(d: int, axis: int) -> Site:
    return tuple(1 if i == axis else 0 for i in range(d))


def ising_potential(beta: float, h: float = 0.0, *, d: int) -> Potential:
    """Nearest-neighbor +/-1 ferromagnet on Z^d.

    Pair energy -beta * s_x * s_y for ||x - y||_1 = 1, plus the singleton
    field energy -beta * h * s_x when h != 0.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    origin = (0,) * d
    shapes = [TermShape(
        offsets=(origin, _unit(d, axis)),
        table=_pair_table(lambda a, b: -beta * spin_value(a) * spin_value(b), 2))
        for axis in range(d)]
    if h != 0.0:
        shapes.append(TermShape(
            offsets=(origin,),
            table=_singleton_table(lambda a: -beta * h * spin_value(a), 2)))
    return Potential(name=ISING, d=d, alphabet_size=2, interaction_range=1,
                     shapes=tuple(shapes), params={"beta": beta, "h": h})


def potts_potential(beta: float, n_colors: int, *, d: int) -> Potential:
    """Nearest-neighbor ferromagnetic Potts model with N colors.

    Pair energy -beta * 1{s_x == s_y}.  With N = 2 the single-site Gibbs
    kernels coincide with the +/-1 pair model after the reparametrization
    1{a==b} = (1 + s_a s_b)/2, i.e. beta_potts = 2 beta_pair.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if n_colors < 2:
        raise ValueError("number of colors must be >= 2")
    origin = (0,) * d
    shapes = tuple(TermShape(
        offsets=(origin, _unit(d, axis)),
        table=_pair_table(lambda a, b: -beta * (1.0 if a == b else 0.0), n_colors))
        for axis in range(d))
    return Potential(name=POTTS, d=d, alphabet_size=n_colors,
                     interaction_range=1, shapes=shapes,
                     params={"beta": beta, "n_colors": n_colors})


def dyson_truncated_potential(beta: float, alpha: float, r_max: int) -> Potential:
    """Polynomially decaying +/-1 pair interaction on Z, truncated at r_max.

    Pair energy -beta * s_x * s_y / |x-y|^alpha for 1 <= |x-y| <= r_max and
    zero beyond.  The dropped tail sum_{r > r_max} r^-alpha is reported by
    :func:`dyson_truncation_tail` and should accompany any result.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if alpha <= 1:
        raise ValueError("decay exponent must be > 1")
    if r_max < 1:
        raise ValueError("truncation radius must be >= 1")
    shapes = tuple(TermShape(
        offsets=((0,), (r,)),
        table=_pair_table(
            lambda a, b, r=r: -beta * spin_value(a) * spin_value(b) / r ** alpha, 2))
        for r in range(1, r_max + 1))
    return Potential(name=DYSON, d=1, alphabet_size=2, interaction_range=r_max,
                     shapes=shapes,
                     params={"beta": beta, "alpha": alpha, "r_max": r_max})


def dyson_truncation_tail(alpha: float, r_max: int) -> float:
    """sum_{r > r_max} r^-alpha, via the Hurwitz zeta function."""
    return float(zeta(alpha, r_max + 1))


def single_site_field_potential(field_strength: float, *, d: int) -> Potential:
    """Independent-spin surrogate: singleton energy -a * s_x, no coupling.

    The resulting Gibbs measure is i.i.d. with P(+1) = e^a / (e^a + e^-a);
    used as the product-measure reference in entropy probes.
    """
    origin = (0,) * d
    shape = TermShape(
        offsets=(origin,),
        table=_singleton_table(lambda a: -field_strength * spin_value(a), 2))
    return Potential(name=FIELD, d=d, alphabet_size=2, interaction_range=1,
                     shapes=(shape,), params={"field": field_strength})


def summability_norm(pot: Potential) -> float:
    """sum over terms containing the origin of the sup-norm of the term energy.

    Each base shape B contributes |B| distinct translates through the
    origin, all with the same (brute-force, dense-table) sup.
    """
    return float(sum(shape.size * shape.sup_norm for shape in pot.shapes))


@dataclass(frozen=True)
class Term:
    """A concrete interaction term inside a window.

    ``read_sites`` are where the symbols are read, in the shape's offset
    order; torus terms store wrapped (canonical) coordinates.
    """

    shape_index: int
    anchor: Site
    read_sites: tuple[Site, ...]


def window_terms(pot: Potential, window: Window) -> list[Term]:
    """Every interaction term that contributes to the window's Hamiltonian.

    fixed:  all translates meeting the window (exterior sites read the
            boundary condition);
    free:   only translates fully inside the window;
    torus:  one translate per window site per base shape, coordinates
            wrapped.
    """
    if pot.d != window.d:
        raise ValueError("potential and window dimension mismatch")
    if pot.alphabet_size != window.alphabet_size:
        raise ValueError("potential and window alphabet mismatch")
    terms: list[Term] = []
    if window.geometry == TORUS:
        for x in window.sites:
            for i, shape in enumerate(pot.shapes):
                terms.append(Term(i, x, tuple(
                    window.wrap(add_sites(o, x)) for o in shape.offsets)))
        return terms
    for i, shape in enumerate(pot.shapes):
        anchors: set[Site] = set()
        for o in shape.offsets:
            neg = negate_site(o)
            anchors.update(add_sites(s, neg) for s in window.sites)
        for x in sorted(anchors):
            sites = tuple(add_sites(o, x) for o in shape.offsets)
            inside = [window.contains(s) for s in sites]
            if window.geometry == FREE and not all(inside):
                continue
            terms.append(Term(i, x, sites))
    return terms


def hamiltonian(pot: Potential, config: Configuration) -> float:
    """Total energy of the configuration: sum of all terms meeting the window.

    Exterior spins come from the configuration's boundary condition
    (fixed), wrap around (torus), or the crossing terms are dropped
    (free).  Missing boundary spins within the interaction range raise
    :class:`~gibbslab.lattice.BoundaryError`.
    """
    total = 0.0
    for term in window_terms(pot, config.window):
        shape = pot.shapes[term.shape_index]
        symbols = tuple(config.symbol(s) for s in term.read_sites)
        total += shape.energy(symbols)
    return total


# -- model descriptors ------------------------------------------------------

_MODEL_KEYS = {"model", "beta", "h", "N", "alpha", "R", "d"}


@dataclass(frozen=True)
class ModelParams:
    """Parsed model descriptor; see :func:`model_params_from_json`."""

    model: str
    d: int
    beta: float
    h: float = 0.0
    n_colors: int | None = None
    alpha: float | None = None
    r_max: int | None = None

    def __post_init__(self):
        if self.model not in (ISING, POTTS, DYSON):
            raise ValueError(f"unknown model {self.model!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.model == POTTS and (self.n_colors is None or self.n_colors < 2):
            raise ValueError("potts requires N >= 2")
        if self.model == DYSON:
            if self.alpha is None or self.alpha <= 1:
                raise ValueError("dyson requires alpha > 1")
            if self.r_max is None or self.r_max < 1:
                raise ValueError("dyson requires truncation radius R >= 1")
            if self.d != 1:
                raise ValueError("dyson is one-dimensional")

    def to_json_dict(self) -> dict:
        doc: dict = {"model": self.model, "beta": self.beta, "d": self.d}
        if self.h:
            doc["h"] = self.h
        if self.n_colors is not None:
            doc["N"] = self.n_colors
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        if self.r_max is not None:
            doc["R"] = self.r_max
        return doc


def model_params_from_json(doc: Mapping) -> ModelParams:
    """Parse ``{model, beta, h, N, alpha, R, d}``; unknown keys are rejected."""
    unknown = set(doc) - _MODEL_KEYS
    if unknown:
        raise ValueError(f"unknown model config keys: {sorted(unknown)}")
    if "model" not in doc:
        raise ValueError("model config requires a 'model' key")
    return ModelParams(
        model=str(doc["model"]),
        d=int(doc.get("d", 2)),
        beta=float(doc.get("beta", 0.0)),
        h=float(doc.get("h", 0.0)),
        n_colors=int(doc["N"]) if "N" in doc else None,
        alpha=float(doc["alpha"]) if "alpha" in doc else None,
        r_max=int(doc["R"]) if "R" in doc else None,
    )


def build_potential(params: ModelParams) -> Potential:
    if params.model == ISING:
        return ising_potential(params.beta, params.h, d=params.d)
    if params.model == POTTS:
        return potts_potential(params.beta, params.n_colors, d=params.d)
    return dyson_truncated_potential(params.beta, params.alpha, params.r_max)


def potential_from_config(text_or_doc) -> Potential:
    """Build a potential from a JSON document or its parsed dict."""
    doc = json.loads(text_or_doc) if isinstance(text_or_doc, str) else text_or_doc
    return build_potential(model_params_from_json(doc))
