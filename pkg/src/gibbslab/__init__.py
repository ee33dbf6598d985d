"""gibbslab: a verification laboratory for finite-volume Gibbs measures.

Exact enumeration, Dobrushin certification, reproducible sampling, and
empirical falsification of Gaussian concentration bounds on windows of
the lattice configuration space S^(Z^d).
"""

from .lattice import (Configuration, Pattern, Site, Window, box_sites,
                      hamming_distance, pattern_code, pattern_decode,
                      shift_window, FIXED, FREE, TORUS)
from .potential import (Potential, ModelParams, build_potential,
                        dyson_truncated_potential, dyson_truncation_tail,
                        hamiltonian, ising_potential, model_params_from_json,
                        potential_from_config, potts_potential,
                        single_site_field_potential, summability_norm)
from .specification import (FiniteGibbsMeasure, dlr_check, exact_marginal,
                            gibbs_kernel, partition_function)
from .dobrushin import (DobrushinReport, dobrushin_constant, gcb_certificate,
                        interdependence_row)
from .observables import (LocalFunction, OscillationVector,
                          PatternDistribution, block_sum, empirical_frequency,
                          frequency_stability_radius, marginalize,
                          oscillation_vector, shields_bound_check,
                          tv_distance, young_bound_check)
from .sampler import (ChainConfig, SampleSet, estimate_event_probability,
                      heat_bath_sweep, metropolis_sweep, run_chains,
                      run_chain_series, effective_sample_size)
from .concentration import (BlowupReport, GcbTestReport, blowup_bound_check,
                            blowup_set, deviation_rate_scan, gcb_test,
                            tail_bound, tail_bound_check,
                            variance_bound_check)
from .entropy import (AbsoluteContinuityError, EntropyReport,
                      abs_entropy_bound_check, per_site_entropy_sequence,
                      relative_entropy)

__version__ = "0.1.0"
