"""Traffic-driven spectrum allocation for heterogeneous cellular networks."""

from .model import (
    InstabilityError,
    SpectrumPartition,
    mm1_sojourn,
    objective,
    objective_gradient,
    rates_all_active_sets,
    service_rate,
    worst_case_rates,
)
from .optimizer import (
    SolveReport,
    find_feasible,
    full_reuse_baseline,
    solve,
    solve_orthogonal_baseline,
    solve_restricted,
)
from .power import alternate, update_psd
from .queuesim import SimConfig, SimulationStats, compare_bound, simulate
from .topology import (
    Deployment,
    EfficiencyTable,
    HexGrid,
    RadioParams,
    associate,
    build_efficiency_table,
    generate_hex_grid,
    place_bts,
)

__version__ = "0.1.0"
