"""Local functions, oscillation vectors, pattern statistics.

The raw material of every inequality in the laboratory: real functions
with an explicit finite dependence set (dense value tables, so sups and
oscillations are exact brute force), block sums over windows, empirical
pattern frequencies, and total-variation distances between pattern
distributions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from . import constants
from .lattice import (FIXED, TORUS, Configuration, Pattern, Site, Window,
                      add_sites, box_sites, hamming_distance)


class DependenceSizeError(ValueError):
    """Dependence set too large for exact dense-table treatment."""


# ---------------------------------------------------------------------------
# pattern distributions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PatternDistribution:
    """Probability table over the patterns of Lambda_k.

    Dense (ndarray over all codes) below ``constants.DENSE_TABLE_MAX``
    patterns, sparse (dict code -> prob) above.  Empirical tables keep
    their integer counts so same-denominator comparisons stay exact.
    """

    d: int
    k: int
    alphabet_size: int
    kind: str                              # "exact" | "empirical"
    dense: np.ndarray | None = None
    sparse: dict[int, float] | None = None
    counts: dict[int, int] | None = None   # empirical only
    n_observations: int | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "empirical"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if (self.dense is None) == (self.sparse is None):
            raise ValueError("exactly one of dense/sparse must be set")
        total = self.total_mass
        tol = 1e-9 if self.kind == "exact" else 1e-12
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @property
    def n_patterns(self) -> int:
        return self.alphabet_size ** ((2 * self.k + 1) ** self.d)

    @property
    def total_mass(self) -> float:
        if self.dense is not None:
            return float(self.dense.sum())
        return float(sum(self.sparse.values()))

    def prob(self, code: int) -> float:
        if self.dense is not None:
            return float(self.dense[code])
        return float(self.sparse.get(code, 0.0))

    def support(self) -> Iterable[int]:
        if self.dense is not None:
            return np.flatnonzero(self.dense)
        return self.sparse.keys()

    def same_shape(self, other: "PatternDistribution") -> bool:
        return (self.d, self.k, self.alphabet_size) == \
               (other.d, other.k, other.alphabet_size)

    @classmethod
    def exact(cls, d: int, k: int, alphabet_size: int,
              probs) -> "PatternDistribution":
        n_patterns = alphabet_size ** ((2 * k + 1) ** d)
        if isinstance(probs, dict):
            return cls(d, k, alphabet_size, "exact", sparse=dict(probs))
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (n_patterns,):
            raise ValueError("dense table has the wrong number of patterns")
        if n_patterns > constants.DENSE_TABLE_MAX:
            return cls(d, k, alphabet_size, "exact",
                       sparse={int(c): float(p) for c, p in enumerate(probs) if p})
        return cls(d, k, alphabet_size, "exact", dense=probs)

    @classmethod
    def empirical(cls, d: int, k: int, alphabet_size: int,
                  counts: Mapping[int, int], n_observations: int
                  ) -> "PatternDistribution":
        if n_observations <= 0:
            raise ValueError("empirical table needs observations")
        if sum(counts.values()) != n_observations:
            raise ValueError("counts do not sum to the observation count")
        counts = {int(c): int(v) for c, v in counts.items() if v}
        n_patterns = alphabet_size ** ((2 * k + 1) ** d)
        if n_patterns <= constants.DENSE_TABLE_MAX:
            dense = np.zeros(n_patterns)
            for c, v in counts.items():
                dense[c] = v / n_observations
            return cls(d, k, alphabet_size, "empirical", dense=dense,
                       counts=counts, n_observations=n_observations)
        sparse = {c: v / n_observations for c, v in counts.items()}
        return cls(d, k, alphabet_size, "empirical", sparse=sparse,
                   counts=counts, n_observations=n_observations)


def tv_distance(p: PatternDistribution, q: PatternDistribution) -> float:
    """(1/2) sum over all patterns of |p - q|, in [0, 1].

    When both tables are empirical with the same denominator the sum is
    done in integer counts, so the result is exact up to one division.
    """
    if not p.same_shape(q):
        raise ValueError("pattern distributions have different shapes")
    if (p.counts is not None and q.counts is not None
            and p.n_observations == q.n_observations):
        keys = set(p.counts) | set(q.counts)
        diff = sum(abs(p.counts.get(c, 0) - q.counts.get(c, 0)) for c in keys)
        return diff / (2 * p.n_observations)
    if p.dense is not None and q.dense is not None:
        return float(0.5 * np.abs(p.dense - q.dense).sum())
    keys = set(p.support()) | set(q.support())
    return 0.5 * sum(abs(p.prob(c) - q.prob(c)) for c in keys)


def marginalize(dist: PatternDistribution, k2: int) -> PatternDistribution:
    """Project a pattern distribution on Lambda_k down to Lambda_k2 <= k."""
    if k2 > dist.k:
        raise ValueError("cannot marginalize to a larger cube")
    if k2 == dist.k:
        return dist
    outer = box_sites(dist.d, dist.k)
    inner = box_sites(dist.d, k2)
    positions = [outer.index(s) for s in inner]
    s_size = dist.alphabet_size
    m_out = len(outer)
    place_out = np.array([s_size ** (m_out - 1 - i) for i in positions],
                         dtype=np.int64)
    place_in = np.array([s_size ** (len(inner) - 1 - j)
                         for j in range(len(inner))], dtype=np.int64)

    def subcode(codes: np.ndarray) -> np.ndarray:
        digits = (codes[:, None] // place_out[None, :]) % s_size
        return digits @ place_in

    n_sub = s_size ** len(inner)
    if dist.counts is not None:
        codes = np.fromiter(dist.counts.keys(), dtype=np.int64,
                            count=len(dist.counts))
        vals = np.fromiter(dist.counts.values(), dtype=np.int64,
                           count=len(dist.counts))
        sub = subcode(codes)
        agg: dict[int, int] = {}
        for c, v in zip(sub, vals):
            agg[int(c)] = agg.get(int(c), 0) + int(v)
        return PatternDistribution.empirical(dist.d, k2, s_size, agg,
                                             dist.n_observations)
    if dist.dense is not None:
        codes = np.arange(dist.dense.size, dtype=np.int64)
        out = np.bincount(subcode(codes), weights=dist.dense, minlength=n_sub)
        return PatternDistribution.exact(dist.d, k2, s_size, out)
    agg_f: dict[int, float] = {}
    for c, pr in dist.sparse.items():
        sc = int(subcode(np.array([c], dtype=np.int64))[0])
        agg_f[sc] = agg_f.get(sc, 0.0) + pr
    return PatternDistribution.exact(dist.d, k2, s_size, agg_f)


# ---------------------------------------------------------------------------
# local functions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LocalFunction:
    """Real function of finitely many spins, stored as a dense value table.

    ``sites`` is the lex-sorted dependence set; ``table`` has one axis of
    length |S| per site, in the same order.  Dense storage keeps every
    sup exact, so dependence sets are capped (``MAX_DEPENDENCE_SITES``).
    """

    d: int
    alphabet_size: int
    sites: tuple[Site, ...]
    table: np.ndarray
    name: str = ""

    def __post_init__(self):
        if tuple(sorted(self.sites)) != self.sites:
            raise ValueError("dependence sites must be lex-sorted")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("dependence sites must be distinct")
        m = len(self.sites)
        if m > constants.MAX_DEPENDENCE_SITES:
            raise DependenceSizeError(
                f"dependence set has {m} sites, cap is "
                f"{constants.MAX_DEPENDENCE_SITES}")
        if self.alphabet_size ** m > constants.DENSE_TABLE_MAX:
            raise DependenceSizeError("dense value table would exceed the cap")
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (self.alphabet_size,) * m:
            raise ValueError("table shape must be (|S|,) * #sites")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @classmethod
    def from_callable(cls, sites: Iterable[Site], fn: Callable[..., float], *,
                      d: int, alphabet_size: int = 2,
                      name: str = "") -> "LocalFunction":
        """Tabulate ``fn(symbols)`` over all assignments of the dependence set."""
        sites = tuple(sorted(tuple(s) for s in sites))
        m = len(sites)
        table = np.empty((alphabet_size,) * m)
        for symbols in itertools.product(range(alphabet_size), repeat=m):
            table[symbols] = fn(symbols)
        return cls(d=d, alphabet_size=alphabet_size, sites=sites,
                   table=table, name=name)

    @classmethod
    def constant(cls, value: float, *, d: int,
                 alphabet_size: int = 2) -> "LocalFunction":
        return cls(d=d, alphabet_size=alphabet_size, sites=(),
                   table=np.array(value), name=f"const({value})")

    @classmethod
    def spin(cls, site: Site | None = None, *, d: int = 1) -> "LocalFunction":
        """Physical spin value (+/-1) at one site of a two-symbol alphabet."""
        site = site if site is not None else (0,) * d
        return cls(d=d, alphabet_size=2, sites=(tuple(site),),
                   table=np.array([-1.0, 1.0]), name=f"spin{site}")

    @classmethod
    def spin_product(cls, x: Site, y: Site, *, d: int) -> "LocalFunction":
        return cls.from_callable(
            [x, y], lambda s: float(np.prod([2 * v - 1 for v in s])),
            d=d, alphabet_size=2, name=f"spin{x}*spin{y}")

    @classmethod
    def magnetization(cls, sites: Iterable[Site], *, d: int) -> "LocalFunction":
        """Sum of physical spins over the given block."""
        sites = tuple(sorted(tuple(s) for s in sites))
        return cls.from_callable(
            sites, lambda s: float(sum(2 * v - 1 for v in s)),
            d=d, alphabet_size=2, name=f"magnetization[{len(sites)}]")

    @classmethod
    def pattern_indicator(cls, pattern: Pattern) -> "LocalFunction":
        sites = box_sites(pattern.d, pattern.k)
        want = np.array(pattern.symbols)
        table = np.zeros((pattern.alphabet_size,) * len(sites))
        table[tuple(want)] = 1.0
        return cls(d=pattern.d, alphabet_size=pattern.alphabet_size,
                   sites=sites, table=table, name=f"1[{pattern.code}]")

    def scaled(self, factor: float) -> "LocalFunction":
        return LocalFunction(d=self.d, alphabet_size=self.alphabet_size,
                             sites=self.sites, table=factor * self.table,
                             name=f"{factor}*{self.name}")

    def evaluate(self, config: Configuration) -> float:
        symbols = tuple(config.symbol(s) for s in self.sites)
        return float(self.table[symbols])

    def _site_places(self, window: Window, boundary=None):
        """Split dependence sites into (window-index, code-place) pairs and a
        constant contribution from frozen exterior spins."""
        m = len(self.sites)
        s_size = self.alphabet_size
        n = window.n_sites
        flat_places = [s_size ** (m - 1 - j) for j in range(m)]
        gathered = []
        const = 0
        for j, site in enumerate(self.sites):
            if window.geometry == TORUS:
                idx = window.site_index(window.wrap(site))
            elif window.contains(site):
                idx = window.site_index(site)
            elif window.geometry == FIXED:
                sym = boundary if isinstance(boundary, int) else boundary[site]
                const += flat_places[j] * int(sym)
                continue
            else:
                raise ValueError(f"dependence site {site} outside free window")
            code_place = s_size ** (n - 1 - idx)
            gathered.append((code_place, flat_places[j]))
        return gathered, const

    def values_for_codes(self, window: Window, codes: np.ndarray,
                         boundary=None) -> np.ndarray:
        """Vectorized evaluation over configuration codes of a window."""
        gathered, const = self._site_places(window, boundary)
        flat = np.full(codes.shape, const, dtype=np.int64)
        for code_place, flat_place in gathered:
            flat += ((codes // code_place) % self.alphabet_size) * flat_place
        return self.table.reshape(-1)[flat]

    def values_over_window(self, window: Window, boundary=None) -> np.ndarray:
        codes = np.arange(window.n_states, dtype=np.int64)
        return self.values_for_codes(window, codes, boundary)

    def evaluate_samples(self, spins: np.ndarray, window: Window,
                         boundary=None) -> np.ndarray:
        """Vectorized evaluation over rows of a (n_samples, n_sites) array."""
        m = len(self.sites)
        s_size = self.alphabet_size
        flat = np.zeros(spins.shape[0], dtype=np.int64)
        for j, site in enumerate(self.sites):
            place = s_size ** (m - 1 - j)
            if window.geometry == TORUS:
                idx = window.site_index(window.wrap(site))
                col = spins[:, idx].astype(np.int64)
            elif window.contains(site):
                col = spins[:, window.site_index(site)].astype(np.int64)
            elif window.geometry == FIXED:
                sym = boundary if isinstance(boundary, int) else boundary[site]
                col = int(sym)
            else:
                raise ValueError(f"dependence site {site} outside free window")
            flat = flat + col * place
        return self.table.reshape(-1)[flat]


@dataclass(frozen=True)
class OscillationVector:
    """Per-site oscillations delta_x(F) with their l1 and squared-l2 norms."""

    entries: dict[Site, float]

    @property
    def l1(self) -> float:
        return float(sum(self.entries.values()))

    @property
    def l2sq(self) -> float:
        return float(sum(v * v for v in self.entries.values()))

    def get(self, site: Site) -> float:
        return self.entries.get(site, 0.0)


def oscillation_vector(f: LocalFunction) -> OscillationVector:
    """Exact sup of |F(w) - F(w')| over pairs differing only at each site.

    Brute force over the dense table: along the axis of site x this is
    max over the remaining assignments of (max - min) over the symbol.
    """
    entries: dict[Site, float] = {}
    for axis, site in enumerate(f.sites):
        spread = f.table.max(axis=axis) - f.table.min(axis=axis)
        delta = float(np.max(spread)) if np.size(spread) else float(spread)
        if delta != 0.0:
            entries[site] = delta
    return OscillationVector(entries)


def block_sum(f: LocalFunction, window: Window) -> LocalFunction:
    """The translate sum S_L f = sum over window sites x of f read at x.

    The translate at x reads the pattern on (dependence set of f) + x, so
    the dependence set of the sum is the Minkowski sum of the window and
    the dependence set of f.  On a torus the translates wrap; the wrapped
    dependence sites must stay distinct.
    """
    torus = window.geometry == TORUS

    def moved(site: Site, x: Site) -> Site:
        s = add_sites(site, x)
        return window.wrap(s) if torus else s

    dep = sorted({moved(s, x) for x in window.sites for s in f.sites})
    dep_t = tuple(dep)
    m = len(dep_t)
    if m > constants.MAX_DEPENDENCE_SITES:
        raise DependenceSizeError(
            f"block sum would depend on {m} sites, cap is "
            f"{constants.MAX_DEPENDENCE_SITES}")
    if f.alphabet_size ** m > constants.DENSE_TABLE_MAX:
        raise DependenceSizeError("block-sum table would exceed the dense cap")
    pos = {s: i for i, s in enumerate(dep_t)}
    total = np.zeros((f.alphabet_size,) * m)
    for x in window.sites:
        targets = [pos[moved(s, x)] for s in f.sites]
        if len(set(targets)) != len(targets):
            raise ValueError("translated dependence set wraps onto itself")
        order = np.argsort(targets)
        t = np.transpose(f.table, axes=order) if f.sites else f.table
        shape = [1] * m
        for tgt in sorted(targets):
            shape[tgt] = f.alphabet_size
        total = total + t.reshape(shape)
    return LocalFunction(d=f.d, alphabet_size=f.alphabet_size, sites=dep_t,
                         table=total, name=f"S[{f.name}]")


@dataclass(frozen=True)
class YoungCheck:
    lhs: float   # ||delta(S_L f)||_2^2, exact
    rhs: float   # |L| * ||delta(f)||_1^2
    ok: bool


def young_bound_check(f: LocalFunction, window: Window) -> YoungCheck:
    """Convolution bound on block-sum oscillations.

    Checks ||delta(S_L f)||_2^2 <= |L| ||delta(f)||_1^2 with both sides
    computed exactly from dense tables.
    """
    lhs = oscillation_vector(block_sum(f, window)).l2sq
    rhs = window.n_sites * oscillation_vector(f).l1 ** 2
    return YoungCheck(lhs=lhs, rhs=rhs, ok=lhs <= rhs * (1 + 1e-12))


# ---------------------------------------------------------------------------
# empirical frequencies
# ---------------------------------------------------------------------------

def empirical_frequency(config: Configuration, k: int) -> PatternDistribution:
    """Frequency of each Lambda_k pattern among the anchors Lambda_{n-k}.

    The anchor set is the centered cube of radius n-k regardless of the
    window geometry (no periodic wrapping), so every read stays inside
    the window and the frequency-stability constants apply verbatim.
    """
    w = config.window
    n = w.radius
    if n is None:
        raise ValueError("empirical frequencies need an odd cubic window")
    if k >= n:
        raise ValueError(f"need k < n, got k={k}, n={n}")
    anchors = box_sites(w.d, n - k)
    pattern_sites = box_sites(w.d, k)
    m = len(pattern_sites)
    idx = np.array([[w.site_index(add_sites(x, y)) for y in pattern_sites]
                    for x in anchors], dtype=np.int64)
    place = np.array([w.alphabet_size ** (m - 1 - j) for j in range(m)],
                     dtype=np.int64)
    codes = config.spins[idx].astype(np.int64) @ place
    values, cnts = np.unique(codes, return_counts=True)
    counts = {int(c): int(v) for c, v in zip(values, cnts)}
    return PatternDistribution.empirical(w.d, k, w.alphabet_size, counts,
                                         len(anchors))


def frequency_stability_radius(k: int, d: int) -> int:
    """Smallest n > k with ((2n+1)/(2(n-k)+1))^d <= 5/4."""
    n = k + 1
    while ((2 * n + 1) / (2 * (n - k) + 1)) ** d > constants.FREQUENCY_VOLUME_RATIO:
        n += 1
    return n


@dataclass(frozen=True)
class FrequencyBoundCheck:
    """Frequency-stability inequality between two configurations."""

    n: int
    k: int
    hamming: int
    tv: float
    bound: float           # (2k+1)^d / (2(n-k)+1)^d * hamming
    ok: bool
    epsilon: float | None = None
    rho: float | None = None
    stability_radius: int | None = None
    premise: bool | None = None        # n >= radius and hamming <= rho |L_n|
    conclusion_ok: bool | None = None  # tv <= eps/2 whenever the premise holds


def shields_bound_check(omega: Configuration, eta: Configuration, k: int,
                        epsilon: float | None = None) -> FrequencyBoundCheck:
    """TV distance between pattern frequencies against the Hamming bound.

    The unconditional inequality
        TV(f_{n,k}(omega), f_{n,k}(eta)) <= (2k+1)^d / (2(n-k)+1)^d * d(omega, eta)
    is checked in integer arithmetic (both sides share the anchor-count
    denominator).  With ``epsilon`` given, additionally evaluates the
    quantitative statement: for n at least the stability radius and
    d(omega, eta) <= rho (2n+1)^d with rho = (2/5) eps / (2k+1)^d, the TV
    is at most eps/2.
    """
    if omega.window != eta.window:
        raise ValueError("configurations live on different windows")
    w = omega.window
    n = w.radius
    if n is None or k >= n:
        raise ValueError("need an odd cubic window with k < n")
    dist = hamming_distance(omega, eta)
    f_o = empirical_frequency(omega, k)
    f_e = empirical_frequency(eta, k)
    anchors = (2 * (n - k) + 1) ** w.d
    pattern_volume = (2 * k + 1) ** w.d
    keys = set(f_o.counts) | set(f_e.counts)
    diff = sum(abs(f_o.counts.get(c, 0) - f_e.counts.get(c, 0)) for c in keys)
    tv = diff / (2 * anchors)
    bound = pattern_volume * dist / anchors
    ok = diff <= 2 * pattern_volume * dist   # integer comparison, exact
    if epsilon is None:
        return FrequencyBoundCheck(n=n, k=k, hamming=dist, tv=tv,
                                   bound=bound, ok=ok)
    rho = constants.FREQUENCY_RHO_FACTOR * epsilon / pattern_volume
    radius = frequency_stability_radius(k, w.d)
    premise = n >= radius and dist <= rho * (2 * n + 1) ** w.d
    conclusion = (not premise) or tv <= epsilon / 2 + 1e-12
    return FrequencyBoundCheck(n=n, k=k, hamming=dist, tv=tv, bound=bound,
                               ok=ok, epsilon=epsilon, rho=rho,
                               stability_radius=radius, premise=premise,
                               conclusion_ok=conclusion)
