"""Thermodynamics of interval maps with a neutral fixed point and holes.

The top level re-exports the working vocabulary: the map family and its
renewal partition, induced (first-return) systems with optional holes,
pressure functions on both levels, transfer-operator discretizations,
conditionally invariant densities, and measures on the survivor set.
Heavier or more specialized routines stay in their modules.
"""

from .map_core import (ConvergenceError, DomainError, EmptyCylinderError,
                       MapParams, RenewalPartition, eval_deriv, eval_map,
                       renewal_endpoints)
from .induced import (Branch, InducedSystem, PotentialSpec, build_induced,
                      induced_potential, return_time)
from .pressure import (DimensionThreshold, PressureResult, PuncturedPressure,
                       RegimeReport, closed_pressure, dimension_threshold,
                       pressure_grid, punctured_pressure, regime)
from .holes import (IntervalHoleFamily, MarkovHole, SwallowingReport,
                    build_interval_family, build_markov_hole,
                    check_assumption_H, classify_swallowing, hole_from_json,
                    hole_to_json)
from .spectra import (AccimResult, AveragedResult, EscapeMass, accim_on_I,
                      assemble, averaged_accim, escape_mass, leading_eigen,
                      operator_root)
from .survivor import (ProjectedWeights, SurvivorMeasure, build_survivor,
                       free_energy, project_to_I, stability_sweep)
from .claims import ClaimReport, run_all

__version__ = "0.1.0"

__all__ = [
    "AccimResult",
    "AveragedResult",
    "Branch",
    "ClaimReport",
    "ConvergenceError",
    "DimensionThreshold",
    "DomainError",
    "EmptyCylinderError",
    "EscapeMass",
    "InducedSystem",
    "IntervalHoleFamily",
    "MapParams",
    "MarkovHole",
    "PotentialSpec",
    "PressureResult",
    "ProjectedWeights",
    "PuncturedPressure",
    "RegimeReport",
    "RenewalPartition",
    "SurvivorMeasure",
    "SwallowingReport",
    "accim_on_I",
    "assemble",
    "averaged_accim",
    "build_induced",
    "build_interval_family",
    "build_markov_hole",
    "build_survivor",
    "check_assumption_H",
    "classify_swallowing",
    "closed_pressure",
    "dimension_threshold",
    "escape_mass",
    "eval_deriv",
    "eval_map",
    "free_energy",
    "hole_from_json",
    "hole_to_json",
    "induced_potential",
    "leading_eigen",
    "operator_root",
    "pressure_grid",
    "project_to_I",
    "punctured_pressure",
    "regime",
    "renewal_endpoints",
    "return_time",
    "run_all",
    "stability_sweep",
    "__version__",
]
