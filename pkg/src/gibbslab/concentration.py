"""Verification of the Gaussian moment bound and its consequences.

The bound under test, for a probability measure mu and local F:

    E_mu[exp(F - E_mu F)] <= exp(D ||delta F||_2^2)

with D independent of F.  This module checks it on lambda-grids (exact
enumeration or sampled with batch-means errors), together with the
derived tail bound exp(-u^2 / (4 D ||dF||_2^2)), the variance bound
2 D ||dF||_2^2, the Hamming blow-up inequality for pattern sets, and
volume-order deviation rates for block averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import constants
from .lattice import FIXED, Window
from .observables import LocalFunction, oscillation_vector
from .sampler import (ChainConfig, SampleSet, batch_means_stderr,
                      effective_sample_size, run_chain_series, run_chains)
from .specification import FiniteGibbsMeasure, gibbs_kernel

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

_EXACT_SLACK = 1e-10


class ZeroMassError(ValueError):
    """The conditioning pattern set has zero (or unobserved) mass."""


def _measure_values(measure: FiniteGibbsMeasure, f: LocalFunction) -> np.ndarray:
    bnd = measure.boundary if measure.window.geometry == FIXED else None
    return f.values_over_window(measure.window, bnd)


def _sample_values(samples: SampleSet, f: LocalFunction) -> np.ndarray:
    cfg = samples.config
    bnd = cfg.boundary if cfg.window.geometry == FIXED else None
    return f.evaluate_samples(samples.spins, cfg.window, bnd)


def default_lambda_grid(f: LocalFunction) -> tuple[float, ...]:
    """The standard grid, scaled by 1/||dF||_2 and capped so the
    moment-generating function stays estimable (|lambda| ||dF||_1 <= 20)."""
    osc = oscillation_vector(f)
    l2 = math.sqrt(osc.l2sq)
    if l2 == 0.0:
        return ()
    lams = []
    for g in constants.LAMBDA_GRID:
        lam = g / l2
        if lam * osc.l1 <= constants.LAMBDA_L1_CAP:
            lams.extend((-lam, lam))
    return tuple(sorted(lams))


@dataclass(frozen=True)
class LambdaRow:
    lam: float
    lhs: float              # log E[exp(lam (F - E F))]
    rhs: float              # D lam^2 ||dF||_2^2
    stderr: float | None    # stderr of lhs in empirical mode
    verdict: str


@dataclass(eq=False)
class GcbTestReport:
    d_constant: float
    l2sq: float
    mode: str                       # "exact" | "empirical"
    rows: list[LambdaRow]
    verdict: str
    ess: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "D": self.d_constant,
            "oscillation_l2sq": self.l2sq,
            "mode": self.mode,
            "verdict": self.verdict,
            "ess": self.ess,
            "rows": [{"lambda": r.lam, "lhs": r.lhs, "rhs": r.rhs,
                      "stderr": r.stderr, "verdict": r.verdict}
                     for r in self.rows],
        }


def gcb_test(source, f: LocalFunction, d_constant: float,
             lambda_grid=None) -> GcbTestReport:
    """Test the moment bound applied to lam*F over a grid of lam values.

    Exact mode (a finite Gibbs measure) enumerates the moment-generating
    function; a verdict of fail there means the constant is wrong, full
    stop.  Empirical mode (a SampleSet) declares fail only when the
    excess survives three batch-means standard errors, and inconclusive
    when the noise swamps the gap.  Degenerate F (zero oscillation)
    passes trivially.
    """
    osc = oscillation_vector(f)
    l2sq = osc.l2sq
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(f)
    if l2sq == 0.0 or not lambda_grid:
        return GcbTestReport(d_constant=d_constant, l2sq=l2sq,
                             mode="exact" if isinstance(source, FiniteGibbsMeasure)
                             else "empirical",
                             rows=[], verdict=PASS)
    rows: list[LambdaRow] = []
    if isinstance(source, FiniteGibbsMeasure):
        values = _measure_values(source, f)
        log_p = np.log(source.probs)
        mean = float(np.dot(source.probs, values))
        centered = values - mean
        for lam in lambda_grid:
            lhs = float(logsumexp(log_p + lam * centered))
            rhs = d_constant * lam * lam * l2sq
            ok = lhs <= rhs + _EXACT_SLACK * max(1.0, abs(rhs))
            rows.append(LambdaRow(lam=lam, lhs=lhs, rhs=rhs, stderr=None,
                                  verdict=PASS if ok else FAIL))
        verdict = FAIL if any(r.verdict == FAIL for r in rows) else PASS
        return GcbTestReport(d_constant=d_constant, l2sq=l2sq, mode="exact",
                             rows=rows, verdict=verdict)

    samples: SampleSet = source
    values = _sample_values(samples, f)
    cfg = samples.config
    series = values.reshape(cfg.n_chains, cfg.n_samples)
    mean = float(values.mean())
    centered = values - mean
    ess = effective_sample_size(series)
    for lam in lambda_grid:
        y = np.exp(lam * centered)
        m_hat = float(y.mean())
        se = batch_means_stderr(y.reshape(cfg.n_chains, cfg.n_samples))
        lhs = math.log(m_hat)
        se_lhs = se / m_hat
        rhs = d_constant * lam * lam * l2sq
        if lhs - rhs > 3.0 * se_lhs:
            verdict = FAIL
        elif lhs <= rhs:
            verdict = PASS
        else:
            verdict = INCONCLUSIVE
        rows.append(LambdaRow(lam=lam, lhs=lhs, rhs=rhs, stderr=se_lhs,
                              verdict=verdict))
    if any(r.verdict == FAIL for r in rows):
        verdict = FAIL
    elif any(r.verdict == INCONCLUSIVE for r in rows):
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    return GcbTestReport(d_constant=d_constant, l2sq=l2sq, mode="empirical",
                         rows=rows, verdict=verdict, ess=ess)


def tail_bound(d_constant: float, u: float, f: LocalFunction,
               two_sided: bool = False) -> float:
    """exp(-u^2 / (4 D ||dF||_2^2)); doubled for the two-sided event."""
    if u <= 0:
        raise ValueError("deviation u must be positive")
    l2sq = oscillation_vector(f).l2sq
    if l2sq == 0.0:
        raise ValueError("zero oscillation: the tail bound needs ||dF||_2 > 0")
    bound = math.exp(-u * u / (constants.TAIL_BOUND_DENOMINATOR
                               * d_constant * l2sq))
    return 2.0 * bound if two_sided else bound


@dataclass(frozen=True)
class TailCheck:
    u: float
    probability: float
    bound: float
    ok: bool
    stderr: float | None = None


def tail_bound_check(source, f: LocalFunction, d_constant: float, u: float,
                     two_sided: bool = False) -> TailCheck:
    """Compare the exceedance probability of F - E F against the bound."""
    bound = tail_bound(d_constant, u, f, two_sided)
    if isinstance(source, FiniteGibbsMeasure):
        values = _measure_values(source, f)
        mean = float(np.dot(source.probs, values))
        dev = values - mean
        mask = np.abs(dev) >= u if two_sided else dev >= u
        p = float(source.probs[mask].sum())
        return TailCheck(u=u, probability=p, bound=bound,
                         ok=p <= bound + constants.EXACT_TOL)
    samples: SampleSet = source
    values = _sample_values(samples, f)
    mean = float(values.mean())
    dev = values - mean
    flags = (np.abs(dev) >= u if two_sided else dev >= u).astype(float)
    cfg = samples.config
    p = float(flags.mean())
    se = batch_means_stderr(flags.reshape(cfg.n_chains, cfg.n_samples))
    return TailCheck(u=u, probability=p, bound=bound,
                     ok=p <= bound + 3.0 * se, stderr=se)


@dataclass(frozen=True)
class VarianceCheck:
    variance: float
    bound: float               # 2 D ||dF||_2^2
    ok: bool
    stderr: float | None = None


def variance_bound_check(source, f: LocalFunction,
                         d_constant: float) -> VarianceCheck:
    """Var(F) against 2 D ||dF||_2^2, 3 sigma slack in empirical mode."""
    l2sq = oscillation_vector(f).l2sq
    bound = constants.VARIANCE_BOUND_FACTOR * d_constant * l2sq
    if isinstance(source, FiniteGibbsMeasure):
        var = source.variance(f)
        return VarianceCheck(variance=var, bound=bound,
                             ok=var <= bound + constants.EXACT_TOL)
    samples: SampleSet = source
    values = _sample_values(samples, f)
    var = float(values.var(ddof=0))
    sq = (values - values.mean()) ** 2
    cfg = samples.config
    se = batch_means_stderr(sq.reshape(cfg.n_chains, cfg.n_samples))
    return VarianceCheck(variance=var, bound=bound,
                         ok=var <= bound + 3.0 * se, stderr=se)


# ---------------------------------------------------------------------------
# Hamming blow-ups
# ---------------------------------------------------------------------------

def blowup_radius(epsilon: float, n_sites: int) -> int:
    """Largest integer Hamming distance allowed by d < eps * |L| (strict)."""
    return int(math.ceil(epsilon * n_sites)) - 1


def blowup_set(c_codes, epsilon: float, window: Window) -> np.ndarray:
    """Exact eps-blow-up of a pattern-code set by breadth-first expansion.

    Returns the sorted codes with Hamming distance to the set strictly
    below eps * |L|; eps = 0 gives the empty set.
    """
    c_codes = np.unique(np.asarray(c_codes, dtype=np.int64))
    if c_codes.size == 0:
        raise ValueError("blow-up of an empty set is undefined")
    n_states = window.n_states
    if n_states > constants.BLOWUP_EXACT_CAP:
        raise ValueError("state space exceeds the exact blow-up cap")
    radius = blowup_radius(epsilon, window.n_sites)
    if radius < 0:
        return np.empty(0, dtype=np.int64)
    s_size = window.alphabet_size
    n = window.n_sites
    places = np.array([s_size ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    visited = np.zeros(n_states, dtype=bool)
    visited[c_codes] = True
    frontier = c_codes
    for _ in range(radius):
        if frontier.size == 0:
            break
        neighbors = []
        for place in places:
            digits = (frontier // place) % s_size
            for delta in range(1, s_size):
                new_digit = (digits + delta) % s_size
                neighbors.append(frontier + (new_digit - digits) * place)
        cand = np.unique(np.concatenate(neighbors))
        cand = cand[~visited[cand]]
        visited[cand] = True
        frontier = cand
    return np.flatnonzero(visited)


def _hamming_to_set(rows: np.ndarray, c_matrix: np.ndarray) -> np.ndarray:
    """Min Hamming distance from each sample row to the decoded set rows."""
    out = np.empty(rows.shape[0], dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, c_matrix.shape[0] * c_matrix.shape[1]))
    for start in range(0, rows.shape[0], chunk):
        block = rows[start:start + chunk]
        d = (block[:, None, :] != c_matrix[None, :, :]).sum(axis=2)
        out[start:start + chunk] = d.min(axis=1)
    return out


@dataclass(eq=False)
class BlowupReport:
    epsilon: float
    n_set: int
    mass_set: float
    mass_blowup: float
    threshold: float        # applicability floor 2 sqrt(D log(1/mass) / |L|)
    applicable: bool
    bound: float            # guaranteed lower bound on the blow-up mass
    ok: bool
    mode: str
    stderr_set: float | None = None
    stderr_blowup: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "epsilon": self.epsilon, "n_set": self.n_set,
            "mass_set": self.mass_set, "mass_blowup": self.mass_blowup,
            "threshold": self.threshold, "applicable": self.applicable,
            "bound": self.bound, "ok": self.ok, "mode": self.mode,
            "stderr_set": self.stderr_set, "stderr_blowup": self.stderr_blowup,
        }


def blowup_bound_check(source, c_codes, epsilon: float,
                       d_constant: float) -> BlowupReport:
    """Check mu(<C>_eps) >= 1 - exp[-(|L|/4D)(eps - 2 sqrt(D log(1/mu([C])))/sqrt(|L|))^2].

    The inequality only applies for eps above the threshold
    2 sqrt(D log(1/mu([C])) / |L|); below it the report is marked not
    applicable and passes vacuously.
    """
    c_codes = np.unique(np.asarray(c_codes, dtype=np.int64))
    if isinstance(source, FiniteGibbsMeasure):
        window = source.window
        mass_set = float(source.probs[c_codes].sum())
        if mass_set <= 0.0:
            raise ZeroMassError("conditioning set has zero mass")
        members = blowup_set(c_codes, epsilon, window)
        mass_blow = float(source.probs[members].sum())
        se_set = se_blow = None
        mode = "exact"
        slack = constants.EXACT_TOL
        n_sites = window.n_sites
    else:
        samples: SampleSet = source
        window = samples.config.window
        if c_codes.size > constants.BLOWUP_SCAN_SET_CAP:
            raise ValueError("pattern set exceeds the sampled-mode scan cap")
        n_sites = window.n_sites
        s_size = window.alphabet_size
        c_matrix = np.empty((c_codes.size, n_sites), dtype=np.uint8)
        codes = c_codes.copy()
        for i in range(n_sites - 1, -1, -1):
            c_matrix[:, i] = codes % s_size
            codes //= s_size
        dists = _hamming_to_set(samples.spins, c_matrix)
        in_set = (dists == 0).astype(float)
        in_blow = (dists < epsilon * n_sites).astype(float)
        cfg = samples.config
        mass_set = float(in_set.mean())
        if mass_set <= 0.0:
            raise ZeroMassError("conditioning set was never observed")
        mass_blow = float(in_blow.mean())
        se_set = batch_means_stderr(in_set.reshape(cfg.n_chains, cfg.n_samples))
        se_blow = batch_means_stderr(in_blow.reshape(cfg.n_chains, cfg.n_samples))
        mode = "empirical"
        slack = 3.0 * se_blow
    log_inv = math.log(1.0 / mass_set)
    threshold = 2.0 * math.sqrt(d_constant * log_inv / n_sites)
    applicable = epsilon > threshold
    gap = epsilon - 2.0 * math.sqrt(d_constant * log_inv) / math.sqrt(n_sites)
    bound = 1.0 - math.exp(-(n_sites / (4.0 * d_constant)) * gap * gap)
    ok = (not applicable) or (mass_blow >= bound - slack)
    return BlowupReport(epsilon=epsilon, n_set=int(c_codes.size),
                        mass_set=mass_set, mass_blowup=mass_blow,
                        threshold=threshold, applicable=applicable,
                        bound=bound, ok=ok, mode=mode,
                        stderr_set=se_set, stderr_blowup=se_blow)


# ---------------------------------------------------------------------------
# volume-order deviation rates
# ---------------------------------------------------------------------------

def translate(f: LocalFunction, x) -> LocalFunction:
    """The translate of f reading its pattern at (dependence set) + x."""
    sites = tuple(tuple(a + b for a, b in zip(s, x)) for s in f.sites)
    return LocalFunction(d=f.d, alphabet_size=f.alphabet_size, sites=sites,
                         table=f.table, name=f.name)


def block_values_over_codes(f: LocalFunction, window: Window,
                            boundary=None) -> np.ndarray:
    """S_L f over all configuration codes: sum of f over window translates."""
    codes = np.arange(window.n_states, dtype=np.int64)
    total = np.zeros(codes.shape)
    for x in window.sites:
        total += translate(f, x).values_for_codes(window, codes, boundary)
    return total


def block_values_for_samples(f: LocalFunction, window: Window, spins: np.ndarray,
                             boundary=None) -> np.ndarray:
    total = np.zeros(spins.shape[0])
    for x in window.sites:
        total += translate(f, x).evaluate_samples(spins, window, boundary)
    return total


@dataclass(frozen=True)
class DeviationRateRow:
    sides: tuple[int, ...]
    volume: int
    epsilon: float
    threshold: float         # event is {S f / |L| >= threshold}
    block_mean: float        # E[S f] / |L|
    probability: float
    rate: float              # -log p / |L|; inf when the event is null
    floor: float | None      # eps^2 / (36 D ||df||_1^2), when D is given
    floor_ok: bool | None
    interval_probability: float
    interval_rate: float
    stderr: float | None = None


@dataclass(eq=False)
class DeviationRateScan:
    f_name: str
    l1: float
    mode: str
    rows: list[DeviationRateRow]

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.rows]

    def rates_decreasing(self) -> bool:
        finite = [r.rate for r in self.rows]
        return all(b < a for a, b in zip(finite, finite[1:]))

    def to_json_dict(self) -> dict:
        return {
            "f": self.f_name, "oscillation_l1": self.l1, "mode": self.mode,
            "rows": [{
                "sides": list(r.sides), "volume": r.volume,
                "epsilon": r.epsilon, "threshold": r.threshold,
                "block_mean": r.block_mean, "probability": r.probability,
                "rate": r.rate, "floor": r.floor, "floor_ok": r.floor_ok,
                "interval_probability": r.interval_probability,
                "interval_rate": r.interval_rate, "stderr": r.stderr,
            } for r in self.rows],
        }


def _rate(p: float, volume: int) -> float:
    return float("inf") if p <= 0.0 else -math.log(p) / volume


def deviation_rate_scan(pot, windows, boundary, f: LocalFunction,
                        epsilon: float | None = None,
                        threshold: float | None = None,
                        d_constant: float | None = None,
                        sampling: dict | None = None) -> DeviationRateScan:
    """Per-site decay rates of block-average deviation events across windows.

    The event on a window of volume V is {S f / V >= t} with
    t = (block mean) + eps/3 when ``epsilon`` is given, or t = threshold
    with eps = 3 (t - block mean) when ``threshold`` is given.  The
    companion interval event, centered at (block mean) + eps with the
    same eps/3 margin, is always a subset; both probabilities and their
    per-site rates are reported.  With a certified D, exact rows are
    checked against the floor eps^2 / (36 D ||df||_1^2).

    ``sampling`` switches to sampled mode: a dict of ChainConfig keyword
    arguments (burn-in, thinning, chains, samples, seed).
    """
    if (epsilon is None) == (threshold is None):
        raise ValueError("give exactly one of epsilon / threshold")
    l1 = oscillation_vector(f).l1
    rows: list[DeviationRateRow] = []
    mode = "empirical" if sampling else "exact"
    for window in windows:
        volume = window.n_sites
        bnd = boundary if window.geometry == FIXED else None
        if sampling:
            cfg = ChainConfig(window=window, potential=pot, boundary=bnd,
                              **sampling)
            series = run_chain_series(
                cfg, lambda m: block_values_for_samples(f, window, m, bnd))
            values = series.reshape(-1)
            weights = None
            block_mean = float(values.mean()) / volume
        else:
            measure = gibbs_kernel(pot, window, bnd)
            values = block_values_over_codes(f, window, bnd)
            weights = measure.probs
            block_mean = float(np.dot(weights, values)) / volume
        if epsilon is not None:
            eps_n = epsilon
            t = block_mean + eps_n / constants.EVENT_MARGIN_DIVISOR
        else:
            t = threshold
            eps_n = constants.EVENT_MARGIN_DIVISOR * (t - block_mean)
        means = values / volume
        event = means >= t
        center = block_mean + eps_n
        margin = eps_n / constants.EVENT_MARGIN_DIVISOR
        interval = (means > center - margin) & (means < center + margin)
        if eps_n > 0 and not np.all(event[interval]):
            raise AssertionError("interval event escaped the deviation event")
        stderr = None
        if weights is None:
            p = float(event.mean())
            p_int = float(interval.mean())
            n_chains = sampling.get("n_chains", 1)
            stderr = batch_means_stderr(
                event.astype(float).reshape(n_chains, -1))
        else:
            p = float(weights[event].sum())
            p_int = float(weights[interval].sum())
        floor = None
        floor_ok = None
        if d_constant is not None and l1 > 0 and eps_n > 0:
            floor = eps_n ** 2 / (constants.VOLUME_DEVIATION_DENOMINATOR
                                  * d_constant * l1 ** 2)
            rate = _rate(p, volume)
            if weights is None:
                floor_ok = None if p == 0.0 else \
                    rate >= floor - 3.0 * (stderr / max(p, 1e-300)) / volume
            else:
                floor_ok = rate >= floor - constants.EXACT_TOL
        rows.append(DeviationRateRow(
            sides=window.sides, volume=volume, epsilon=eps_n, threshold=t,
            block_mean=block_mean, probability=p, rate=_rate(p, volume),
            floor=floor, floor_ok=floor_ok, interval_probability=p_int,
            interval_rate=_rate(p_int, volume), stderr=stderr))
    return DeviationRateScan(f_name=f.name, l1=l1, mode=mode, rows=rows)
