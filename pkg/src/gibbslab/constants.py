"""Frozen numerical defaults shared across the laboratory.

Every constant that enters a verified inequality lives here, under a
version number that is echoed into every report header.  None of these
values may be tuned to make a check pass; the structural ones are part
of the inequalities themselves.
"""

import math

DEFAULTS_VERSION = 1

# Structural constants of the inequalities under test.
TAIL_BOUND_DENOMINATOR = 4          # exp(-u^2 / (4 D ||dF||_2^2))
VARIANCE_BOUND_FACTOR = 2           # Var(F) <= 2 D ||dF||_2^2
VOLUME_DEVIATION_DENOMINATOR = 36   # exp(-|L| eps^2 / (36 D ||df||_1^2))
EVENT_MARGIN_DIVISOR = 3            # deviation events use a margin of eps/3
FREQUENCY_VOLUME_RATIO = 5.0 / 4.0  # ((2n+1)/(2(n-k)+1))^d <= 5/4 threshold
FREQUENCY_RHO_FACTOR = 2.0 / 5.0    # rho = (2/5) eps / (2k+1)^d
ABS_ENTROPY_SLACK = 2.0 / math.e    # sum nu |log(nu/mu)| <= H(nu|mu) + 2/e

# Bounded-differences constant of an i.i.d. product measure; validated by
# exact moment-generating-function enumeration, never assumed.
PRODUCT_MEASURE_D = 0.125

# Self-dual point of the two-dimensional nearest-neighbor +/-1 model.
CRITICAL_BETA_2D = math.log(1.0 + math.sqrt(2.0)) / 2.0

# Laboratory resource caps.
ENUMERATION_CAP = 2 ** 26           # max states for exact tables
BLOWUP_EXACT_CAP = 2 ** 22          # max states for exact Hamming blow-ups
BLOWUP_SCAN_SET_CAP = 2 ** 16       # max |C| in sampled blow-up mode
DENSE_TABLE_MAX = 2 ** 20           # dense pattern tables above this go sparse
MAX_DEPENDENCE_SITES = 20           # local functions stay exactly enumerable

# Moment-generating-function test grid: multiples of 1/||dF||_2, both signs.
LAMBDA_GRID = (0.1, 0.25, 0.5, 1.0, 2.0)
LAMBDA_L1_CAP = 20.0                # require |lambda| * ||dF||_1 <= 20

# Sampler defaults.
BURNIN_HIGH_TEMPERATURE = 1_000
BURNIN_LOW_TEMPERATURE = 10_000

# Exactness tolerances (float rounding only, no statistical slack).
EXACT_TOL = 1e-12
DLR_TOL = 1e-10


def as_dict() -> dict:
    """Snapshot of the defaults for report headers."""
    return {
        "defaults_version": DEFAULTS_VERSION,
        "tail_bound_denominator": TAIL_BOUND_DENOMINATOR,
        "variance_bound_factor": VARIANCE_BOUND_FACTOR,
        "volume_deviation_denominator": VOLUME_DEVIATION_DENOMINATOR,
        "event_margin_divisor": EVENT_MARGIN_DIVISOR,
        "frequency_volume_ratio": FREQUENCY_VOLUME_RATIO,
        "frequency_rho_factor": FREQUENCY_RHO_FACTOR,
        "abs_entropy_slack": ABS_ENTROPY_SLACK,
        "product_measure_d": PRODUCT_MEASURE_D,
        "critical_beta_2d": CRITICAL_BETA_2D,
        "enumeration_cap": ENUMERATION_CAP,
        "blowup_exact_cap": BLOWUP_EXACT_CAP,
        "blowup_scan_set_cap": BLOWUP_SCAN_SET_CAP,
        "dense_table_max": DENSE_TABLE_MAX,
        "max_dependence_sites": MAX_DEPENDENCE_SITES,
        "lambda_grid": list(LAMBDA_GRID),
        "lambda_l1_cap": LAMBDA_L1_CAP,
        "burnin_high_temperature": BURNIN_HIGH_TEMPERATURE,
        "burnin_low_temperature": BURNIN_LOW_TEMPERATURE,
    }
