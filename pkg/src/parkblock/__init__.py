"""Continuous-time parking of files on the line: simulation, Levy-path oracle and theory."""

from .interval_engine import AllocationOutcome, CoveringState, WindowExhausted
from .levy_oracle import BoundaryInfimum, LevyPath, build_path, covering_from_path, remaining_mass, tau_forward
from .simulator import (
    Arrival,
    ConfigError,
    JumpRecord,
    QueryPastEnd,
    ReplicaBatch,
    SimConfig,
    SimResult,
    block_trajectory,
    generate_arrivals,
    replica_rng,
    run,
    simulate_batch,
)
from .size_measures import (
    Dirac,
    Exponential,
    FiniteDiscrete,
    Gamma,
    InfiniteMoment,
    MeasureError,
    SizeMeasure,
    parse_measure,
)

__version__ = "0.1.0"
