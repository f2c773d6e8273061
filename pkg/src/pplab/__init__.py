"""Ping-pong protocol under a loss-exploiting eavesdropper: simulation and analysis."""

__version__ = "0.1.0"

from .attack import (  # noqa: E402
    AttackProfile,
    AttackTag,
    ProfileError,
    RoundRecord,
    attack_fraction,
    default_profile,
    load_profile,
    parse_profile,
    sample_round,
    spd_joint,
)
from .information import (  # noqa: E402
    ErrorCount,
    JointDistribution,
    achievable,
    binary_entropy,
    empirical_joint,
    empirical_mi,
    expected_errors,
    mutual_information,
    qber,
)
from .montecarlo import (  # noqa: E402
    OutcomeAtlas,
    RunConfig,
    RunStats,
    convergence_experiment,
    enumerate_outcomes,
    prob_exact_match,
    simulate_run,
)
from .protocol import StateVector, bell_decode, encode, prepare_bell  # noqa: E402
from .security import (  # noqa: E402
    SweepRow,
    ThresholdReport,
    crossing_point,
    expected_case_threshold,
    info_curves,
    threshold_report,
    worst_case_threshold,
)
