"""Discrete-time single-queue laboratory for checking when Bernoulli
arrivals see time averages under the five slot-scheduling rules."""

from .analytic import (AnalyticPmf, BirthDeathSpec, UnstableError, gamma_ratio,
                       geo_closed_form, ladf_prearrival_from_edge,
                       pa_distribution_eq8, pa_distribution_rule)
from .core import (Batch, Bernoulli, EmpiricalReport, Geometric, Hazard, IidPmf,
                   ModelSpec, SchedulingRule, SpecError, StateDependent,
                   ValidatedSpec, normalize_counts, tv_distance, validate_spec)
from .engine import (EpochRecord, QueueState, advance_slot, merge_reports,
                     run_replication, run_simulation, simulate_reference)
from .processes import (RngStream, mean_batch_size, sample_arrival,
                        sample_completion, sample_service_duration)
from .verify import (CheckResult, check_basta, check_epoch_equivalence,
                     check_ladf_relation, check_theorem31, compare_sim_analytic,
                     run_checks)

__version__ = "0.1.0"
