"""Finite-horizon ideal convergence and turnpike analysis for discrete-time
controlled systems."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    HorizonExceededError,
    InvalidArgumentError,
    NoStationaryPointsError,
    ResourceLimitError,
    TrajectoryDivergenceError,
    TurnpikeError,
)
from .ideals import (
    IdealKind,
    IdealSpec,
    IndexSet,
    SmallnessReport,
    classify_small,
    log_density_estimate,
    longest_ap,
    named_set,
    summable_mass,
    translate_set,
    upper_density_estimate,
)
from .sequences import (
    ClusterEstimate,
    SampledSequence,
    cluster_estimate,
    escape_mass,
    functional_J,
    hitting_set,
    ideal_liminf,
    invariance_probe,
)
from .system import (
    ConditionReport,
    ControlSystem,
    Process,
    StationaryReport,
    check_conditions,
    decrease_sets,
    lemma_diagnostics,
    level_set,
    simulate,
    stationary_points,
)
from .optimizer import SearchConfig, TurnpikeReport, search, turnpike_report
from .examples import (
    CantorState,
    DenseParams,
    cantor_orbit,
    cantor_phi,
    cantor_step,
    cantor_system,
    cantor_zeta0,
    dense_dynamics,
    dense_phi,
    dense_system,
    verify_example,
)
