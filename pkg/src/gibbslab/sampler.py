"""Reproducible single-site Markov chain sampling of finite-volume measures.

Heat-bath resamples each site from its exact single-site Gibbs kernel in
a deterministic lexicographic pass; Metropolis proposes a uniform
different symbol.  Chains draw from independent counter-based Philox
streams derived from (seed, chain index), and every kernel consumes one
uniform array per sweep in site order, so results are byte-identical
across runs, thread counts, and execution strategies.

A compiled fast path covers the two-dimensional nearest-neighbor +/-1
model (same lexicographic order and update rule as the generic kernel);
everything else runs through the generic per-site system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from numba import njit

from .lattice import (FIXED, FREE, TORUS, Configuration, Window)
from .potential import ISING, Potential, window_terms

SAMPLE_STORAGE_CAP = 2 ** 28     # stored spins (entries)
SWEEP_BUDGET_CAP = 2 ** 38       # site updates per run


class ResourceCapError(ValueError):
    """Requested run exceeds the sampling resource caps."""


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Fully determines a sampling run (including all randomness)."""

    window: Window
    potential: Potential
    boundary: int | None = None
    kernel: str = "heat-bath"            # "heat-bath" | "metropolis"
    sweeps_burnin: int = 1_000
    sweeps_between_samples: int = 1
    n_samples: int = 1_000
    n_chains: int = 1
    seed: int = 0
    init: str | int = "auto"

    def __post_init__(self):
        if self.kernel not in ("heat-bath", "metropolis"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if min(self.sweeps_burnin, self.sweeps_between_samples) < 0 or \
                min(self.n_samples, self.n_chains) < 1:
            raise ValueError("sweep and sample counts must be positive")
        if self.window.geometry == FIXED and not isinstance(self.boundary, int):
            raise ValueError("sampling fixed windows needs a uniform boundary symbol")

    def total_sweeps(self) -> int:
        return self.n_chains * (self.sweeps_burnin
                                + self.n_samples * self.sweeps_between_samples)

    def describe(self) -> dict:
        return {
            "window": {"d": self.window.d, "sides": list(self.window.sides),
                       "geometry": self.window.geometry,
                       "alphabet_size": self.window.alphabet_size},
            "boundary": self.boundary,
            "model": self.potential.name,
            "params": dict(self.potential.params),
            "kernel": self.kernel,
            "sweeps_burnin": self.sweeps_burnin,
            "sweeps_between_samples": self.sweeps_between_samples,
            "n_samples": self.n_samples,
            "n_chains": self.n_chains,
            "seed": self.seed,
            "init": self.init,
        }


def chain_generators(cfg: ChainConfig) -> list[np.random.Generator]:
    """Independent Philox streams, one per chain, derived from (seed, chain)."""
    root = np.random.SeedSequence(cfg.seed)
    return [np.random.Generator(np.random.Philox(child))
            for child in root.spawn(cfg.n_chains)]


# ---------------------------------------------------------------------------
# generic per-site conditional system
# ---------------------------------------------------------------------------

class SiteSystem:
    """Precomputed single-site conditional energies for a (potential, window).

    For each site, the list of interaction terms containing it, each
    reduced to (flat energy table, frozen-exterior constant, own place,
    other interior sites and their places).  The conditional law built
    here is, by construction, the exact single-site Gibbs kernel.
    """

    def __init__(self, pot: Potential, window: Window, boundary=None):
        if window.geometry == FIXED and boundary is None:
            raise ValueError("fixed geometry requires a boundary condition")
        self.pot = pot
        self.window = window
        self.boundary = boundary
        self.s_size = window.alphabet_size
        n = window.n_sites
        self.site_entries: list[list] = [[] for _ in range(n)]
        for term in window_terms(pot, window):
            shape = pot.shapes[term.shape_index]
            m = shape.size
            interior = []
            const = 0
            for j, site in enumerate(term.read_sites):
                place = self.s_size ** (m - 1 - j)
                if window.geometry != TORUS and not window.contains(site):
                    sym = boundary if isinstance(boundary, int) else boundary[site]
                    const += place * int(sym)
                else:
                    interior.append((window.site_index(site), place))
            table_flat = shape.table.reshape(-1)
            for j, (idx, own_place) in enumerate(interior):
                others = [pair for jj, pair in enumerate(interior) if jj != j]
                other_idx = np.array([p[0] for p in others], dtype=np.int64)
                other_place = np.array([p[1] for p in others], dtype=np.int64)
                self.site_entries[idx].append(
                    (table_flat, const, own_place, other_idx, other_place))
        self._own_range = np.arange(self.s_size, dtype=np.int64)

    def conditional_energies(self, spins: np.ndarray, idx: int) -> np.ndarray:
        """Energy of each candidate symbol at one site, rest of spins frozen."""
        energies = np.zeros(self.s_size)
        for table_flat, const, own_place, other_idx, other_place in \
                self.site_entries[idx]:
            base = const + int(spins[other_idx].astype(np.int64) @ other_place)
            energies += table_flat[base + own_place * self._own_range]
        return energies

    def conditional_distribution(self, spins: np.ndarray, idx: int) -> np.ndarray:
        energies = self.conditional_energies(spins, idx)
        weights = np.exp(-(energies - energies.min()))
        return weights / weights.sum()


def _heat_bath_pass(spins: np.ndarray, system: SiteSystem,
                    u: np.ndarray) -> None:
    for idx in range(spins.size):
        cdf = np.cumsum(system.conditional_distribution(spins, idx))
        s = int(np.searchsorted(cdf, u[idx], side="right"))
        spins[idx] = min(s, system.s_size - 1)


def _metropolis_pass(spins: np.ndarray, system: SiteSystem,
                     u_accept: np.ndarray, u_prop: np.ndarray) -> None:
    s_size = system.s_size
    for idx in range(spins.size):
        energies = system.conditional_energies(spins, idx)
        cur = int(spins[idx])
        step = 1 + int(u_prop[idx] * (s_size - 1))
        prop = (cur + min(step, s_size - 1)) % s_size
        delta = energies[prop] - energies[cur]
        if delta <= 0.0 or u_accept[idx] < math.exp(-delta):
            spins[idx] = prop


def heat_bath_sweep(config: Configuration, pot: Potential,
                    rng: np.random.Generator) -> Configuration:
    """One deterministic lexicographic heat-bath pass over all sites."""
    system = SiteSystem(pot, config.window, config.boundary)
    spins = config.spins.copy()
    _heat_bath_pass(spins, system, rng.random(spins.size))
    return config.with_spins(spins)


def metropolis_sweep(config: Configuration, pot: Potential,
                     rng: np.random.Generator) -> Configuration:
    """One lexicographic Metropolis pass (uniform proposal over other symbols)."""
    system = SiteSystem(pot, config.window, config.boundary)
    spins = config.spins.copy()
    _metropolis_pass(spins, system, rng.random(spins.size),
                     rng.random(spins.size))
    return config.with_spins(spins)


# ---------------------------------------------------------------------------
# compiled fast path: 2D nearest-neighbor +/-1 heat bath
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _ising_sweep_stacked(spins, p_minus, u, torus, bnd):
    """Lexicographic heat-bath pass on stacked (chains, L0, L1) +/-1 arrays.

    p_minus[nn + 4] is the probability of -1 given the neighbor spin sum;
    the update draws symbol 0 (-1) when u < p_minus, matching the generic
    kernel's inverse-CDF convention.  Free geometry passes bnd = 0 so
    missing neighbors drop out.
    """
    m, height, width = spins.shape
    for c in range(m):
        k = 0
        for i in range(height):
            for j in range(width):
                if torus:
                    up = spins[c, i - 1 if i > 0 else height - 1, j]
                    down = spins[c, i + 1 if i < height - 1 else 0, j]
                    left = spins[c, i, j - 1 if j > 0 else width - 1]
                    right = spins[c, i, j + 1 if j < width - 1 else 0]
                else:
                    up = spins[c, i - 1, j] if i > 0 else bnd
                    down = spins[c, i + 1, j] if i < height - 1 else bnd
                    left = spins[c, i, j - 1] if j > 0 else bnd
                    right = spins[c, i, j + 1] if j < width - 1 else bnd
                nn = up + down + left + right
                if u[c, k] < p_minus[nn + 4]:
                    spins[c, i, j] = -1
                else:
                    spins[c, i, j] = 1
                k += 1


def _ising_fast_path_ok(cfg: ChainConfig) -> bool:
    pot = cfg.potential
    return (cfg.kernel == "heat-bath" and pot.name == ISING and pot.d == 2
            and cfg.window.d == 2
            and (cfg.window.geometry != FIXED or isinstance(cfg.boundary, int)))


def _ising_p_minus(pot: Potential) -> np.ndarray:
    """P(symbol 0 | neighbor sum), computed exactly like the generic kernel:
    min-shifted weights exp(-(E - Emin)) normalized."""
    beta = float(pot.params["beta"])
    h = float(pot.params.get("h", 0.0))
    out = np.empty(9)
    for pos, nn in enumerate(range(-4, 5)):
        energies = np.array([beta * nn + beta * h * 1.0,
                             -beta * nn - beta * h * 1.0])
        weights = np.exp(-(energies - energies.min()))
        out[pos] = weights[0] / weights.sum()
    return out


# ---------------------------------------------------------------------------
# chain runner
# ---------------------------------------------------------------------------

def _initial_spins(cfg: ChainConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.window.n_sites
    init = cfg.init
    if init == "auto":
        if cfg.window.geometry == FIXED and isinstance(cfg.boundary, int):
            return np.full(n, cfg.boundary, dtype=np.uint8)
        init = "random"
    if init == "random":
        return rng.integers(0, cfg.window.alphabet_size, size=n).astype(np.uint8)
    if isinstance(init, int):
        if not 0 <= init < cfg.window.alphabet_size:
            raise ValueError("initial symbol out of alphabet range")
        return np.full(n, init, dtype=np.uint8)
    raise ValueError(f"unknown init {init!r}")


def _run(cfg: ChainConfig,
         on_samples: Callable[[int, np.ndarray], None]) -> None:
    """Drive all chains; call on_samples(t, spins_matrix) per sample step.

    ``spins_matrix`` is (n_chains, n_sites) uint8 in symbol form, row c
    being chain c's current state.  Results do not depend on whether the
    chains are advanced stacked or one at a time because every chain
    owns its generator.
    """
    if cfg.total_sweeps() * cfg.window.n_sites > SWEEP_BUDGET_CAP:
        raise ResourceCapError("sweep budget exceeds the resource cap")
    gens = chain_generators(cfg)
    n_sites = cfg.window.n_sites
    if _ising_fast_path_ok(cfg):
        shape = (cfg.n_chains,) + cfg.window.sides
        states = np.empty(shape, dtype=np.int8)
        for c, g in enumerate(gens):
            states[c] = (2 * _initial_spins(cfg, g).astype(np.int8) - 1) \
                .reshape(cfg.window.sides)
        p_minus = _ising_p_minus(cfg.potential)
        torus = cfg.window.geometry == TORUS
        bnd = 0
        if cfg.window.geometry == FIXED:
            bnd = 2 * int(cfg.boundary) - 1

        def sweep_all():
            u = np.empty((cfg.n_chains, n_sites))
            for c, g in enumerate(gens):
                u[c] = g.random(n_sites)
            _ising_sweep_stacked(states, p_minus, u, torus, bnd)

        for _ in range(cfg.sweeps_burnin):
            sweep_all()
        for t in range(cfg.n_samples):
            for _ in range(cfg.sweeps_between_samples):
                sweep_all()
            symbols = ((states.reshape(cfg.n_chains, n_sites) + 1) // 2) \
                .astype(np.uint8)
            on_samples(t, symbols)
        return

    system = SiteSystem(cfg.potential, cfg.window, cfg.boundary)
    states2 = np.empty((cfg.n_chains, n_sites), dtype=np.uint8)
    for c, g in enumerate(gens):
        states2[c] = _initial_spins(cfg, g)

    def sweep_chain(c: int) -> None:
        g = gens[c]
        if cfg.kernel == "heat-bath":
            _heat_bath_pass(states2[c], system, g.random(n_sites))
        else:
            _metropolis_pass(states2[c], system, g.random(n_sites),
                             g.random(n_sites))

    for _ in range(cfg.sweeps_burnin):
        for c in range(cfg.n_chains):
            sweep_chain(c)
    for t in range(cfg.n_samples):
        for _ in range(cfg.sweeps_between_samples):
            for c in range(cfg.n_chains):
                sweep_chain(c)
        on_samples(t, states2)


@dataclass(eq=False)
class SampleSet:
    """Materialized samples: (n_chains * n_samples, n_sites) symbol rows.

    Row ``c * n_samples + t`` is sample t of chain c, so the merge order
    is deterministic whatever the execution schedule.
    """

    config: ChainConfig
    spins: np.ndarray
    chain_index: np.ndarray

    @property
    def n_total(self) -> int:
        return self.spins.shape[0]

    def configurations(self) -> Iterator[Configuration]:
        bnd = self.config.boundary if self.config.window.geometry == FIXED \
            else None
        for row in self.spins:
            yield Configuration(self.config.window, row, bnd)

    def to_text(self) -> str:
        """Header JSON line, then one sample (its spin array) per line."""
        lines = [json.dumps(self.config.describe(), sort_keys=True)]
        lines.extend(" ".join(str(int(s)) for s in row) for row in self.spins)
        return "\n".join(lines) + "\n"

    @classmethod
    def rows_from_text(cls, text: str) -> tuple[dict, np.ndarray]:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        spins = np.array([[int(tok) for tok in ln.split()]
                          for ln in lines[1:]], dtype=np.uint8)
        return header, spins


def run_chains(cfg: ChainConfig) -> SampleSet:
    """Run all chains and keep every sampled configuration."""
    total = cfg.n_chains * cfg.n_samples
    if total * cfg.window.n_sites > SAMPLE_STORAGE_CAP:
        raise ResourceCapError("sample storage exceeds the resource cap")
    out = np.empty((total, cfg.window.n_sites), dtype=np.uint8)

    def on_samples(t: int, matrix: np.ndarray) -> None:
        for c in range(cfg.n_chains):
            out[c * cfg.n_samples + t] = matrix[c]

    _run(cfg, on_samples)
    chain_index = np.repeat(np.arange(cfg.n_chains), cfg.n_samples)
    return SampleSet(config=cfg, spins=out, chain_index=chain_index)


def run_chain_series(cfg: ChainConfig,
                     fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Stream samples through fn((n_chains, n_sites) symbols) -> (n_chains,).

    Returns the (n_chains, n_samples) series without materializing the
    sampled configurations.
    """
    series = np.empty((cfg.n_chains, cfg.n_samples))

    def on_samples(t: int, matrix: np.ndarray) -> None:
        series[:, t] = fn(matrix)

    _run(cfg, on_samples)
    return series


def magnetization_series_fn(window: Window) -> Callable[[np.ndarray], np.ndarray]:
    """Total physical spin sum per sample row (two-symbol alphabets)."""
    def fn(matrix: np.ndarray) -> np.ndarray:
        return (2.0 * matrix - 1.0).sum(axis=1)
    return fn


# ---------------------------------------------------------------------------
# estimation helpers
# ---------------------------------------------------------------------------

def batch_means_stderr(series: np.ndarray) -> float:
    """Batch-means standard error of the overall mean of (chains, n) series."""
    series = np.atleast_2d(series)
    batch_means = []
    for chain in series:
        n = chain.size
        b = max(1, int(math.sqrt(n)))
        k = n // b
        if k >= 1:
            batch_means.extend(chain[:k * b].reshape(k, b).mean(axis=1))
    batch_means = np.asarray(batch_means)
    if batch_means.size < 2:
        return float("inf")
    return float(batch_means.std(ddof=1) / math.sqrt(batch_means.size))


def effective_sample_size(series: np.ndarray) -> float:
    """Batch-means effective sample size, summed over chains."""
    series = np.atleast_2d(series)
    total = 0.0
    for chain in series:
        n = chain.size
        s2 = float(chain.var(ddof=0))
        if s2 == 0.0 or n < 4:
            total += n
            continue
        b = max(1, int(math.sqrt(n)))
        k = n // b
        bm = chain[:k * b].reshape(k, b).mean(axis=1)
        long_var = b * float(bm.var(ddof=1))
        if long_var <= 0.0:
            total += n
            continue
        total += min(float(n), max(1.0, n * s2 / long_var))
    return total


@dataclass(frozen=True)
class EventEstimate:
    p_hat: float
    stderr: float
    ess: float
    n_total: int
    upper95: float   # one-sided 95% bound, 3/n when no hits were observed


def estimate_event_probability(source, event: Callable[[Configuration], bool],
                               batch_event: Callable[[np.ndarray], np.ndarray]
                               | None = None) -> EventEstimate:
    """Batched-mean probability of an event under sampled configurations.

    ``source`` is a ChainConfig (chains are run) or a SampleSet.  The
    event is a predicate on configurations; ``batch_event`` may supply a
    vectorized row-matrix version.  Zero observed hits return p_hat = 0
    with the one-sided 95% bound 3/n.
    """
    if isinstance(source, ChainConfig):
        cfg = source
        if batch_event is not None:
            series = run_chain_series(cfg, lambda m: batch_event(m).astype(float))
        else:
            bnd = cfg.boundary if cfg.window.geometry == FIXED else None

            def fn(matrix: np.ndarray) -> np.ndarray:
                return np.array([
                    float(event(Configuration(cfg.window, row, bnd)))
                    for row in matrix])
            series = run_chain_series(cfg, fn)
    else:
        sample_set = source
        cfg = sample_set.config
        if batch_event is not None:
            flags = batch_event(sample_set.spins).astype(float)
        else:
            flags = np.array([float(event(c))
                              for c in sample_set.configurations()])
        series = flags.reshape(cfg.n_chains, cfg.n_samples)
    n_total = series.size
    p_hat = float(series.mean())
    if p_hat == 0.0:
        return EventEstimate(p_hat=0.0, stderr=0.0,
                             ess=effective_sample_size(series),
                             n_total=n_total, upper95=3.0 / n_total)
    stderr = batch_means_stderr(series)
    return EventEstimate(p_hat=p_hat, stderr=stderr,
                         ess=effective_sample_size(series),
                         n_total=n_total,
                         upper95=p_hat + 1.6449 * stderr)
