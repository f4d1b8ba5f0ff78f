"""Design engine for multi-stage platform trials with staggered arm entry."""

from .boundaries import ShapeFamily, shape, solve_boundaries, solve_scale
from .model import (
    AllocationSchedule,
    BoundaryMatrix,
    BoundaryShape,
    DesignSpec,
    OutcomeCell,
    PowerMode,
    ScenarioTheta,
    ScheduleError,
    build_schedule,
    correlation_matrix,
    information,
)
from .mvn import MvnSettings, mvn_prob
from .oc import (
    conjunctive_power,
    disjunctive_power,
    expected_sample_size,
    fwer,
    fwer_global_null,
    operating_characteristics,
    pairwise_power,
)
from .sizing import SizedDesign, size_design, size_fixed_adding, size_proportional

__version__ = "0.1.0"
