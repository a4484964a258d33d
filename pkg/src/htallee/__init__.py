"""Holling-Tanner predator-prey model with a strong Allee effect.

The desingularized system

    du/dtau = u^2 ((u + A)(1 - u)(u - M) - Q v)
    dv/dtau = S (u + A)(u - v) v

is analysed through its equilibria, the manifolds of the saddle P1, basins of
attraction and the bifurcation sets in the (Q, S) plane.
"""

from .basins import BasinGrid, LimitCycle, basin_area_fraction, compute_basins, extract_unstable_cycle
from .bifurcation import (
    find_bt_point,
    find_heteroclinic_S,
    find_homoclinic_S,
    find_saddle_node_Q,
    region_diagram,
    sotomayor_check,
)
from .blowup import blowup_equilibria, blowup_field
from .equilibria import classify_all, f_trace, hopf_threshold, p1_eigen_data, solve_cubic_structure
from .integrate import Fate, FateLabel, IntegrationConfig, Trajectory, check_trapping, classify_fate, integrate
from .manifolds import ConnectionTopology, ManifoldBranch, classify_connection, separatrix, trace_branch
from .model import (
    DimensionalParams,
    NondimParams,
    ParameterError,
    State,
    dimensional_vector_field,
    jacobian,
    nondimensionalize,
    vector_field,
)

__version__ = "0.1.0"

__all__ = [
    "BasinGrid",
    "ConnectionTopology",
    "DimensionalParams",
    "Fate",
    "FateLabel",
    "IntegrationConfig",
    "LimitCycle",
    "ManifoldBranch",
    "NondimParams",
    "ParameterError",
    "State",
    "Trajectory",
    "basin_area_fraction",
    "blowup_equilibria",
    "blowup_field",
    "check_trapping",
    "classify_all",
    "classify_connection",
    "classify_fate",
    "compute_basins",
    "dimensional_vector_field",
    "extract_unstable_cycle",
    "f_trace",
    "find_bt_point",
    "find_heteroclinic_S",
    "find_homoclinic_S",
    "find_saddle_node_Q",
    "hopf_threshold",
    "integrate",
    "jacobian",
    "nondimensionalize",
    "p1_eigen_data",
    "region_diagram",
    "separatrix",
    "solve_cubic_structure",
    "sotomayor_check",
    "trace_branch",
    "vector_field",
]
