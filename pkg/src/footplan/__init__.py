"""Foothold planning for quadrupeds: safety criteria on heightmap windows,
convex safe-region decomposition, and a foothold-optimizing SRBD MPC."""

from .terrain import (GridSpec, TerrainGrid, HeightmapWindow, generate_stairs,
                      generate_rough, generate_flat, sample_height, extract_window)
from .criteria import RobotGeometry, FootQuery, SafetyMask, evaluate, default_geometry
from .regions import (Polygon, ConvexRegion, RegionSelection, connected_components,
                      trace_contour, simplify, convex_decompose, inset,
                      select_region, decompose_and_select)
from .qpsolver import QpProblem, QpSettings, QpSolution, solve, kkt_residuals
from .locomotion import GaitSchedule, trot, contact_state, nominal_foothold, swing_trajectory
from .mpc import MpcParams, SrbdState, MpcController, MpcSolution, FootholdTarget, LegPlan
from .sim import SimConfig, SimLog, run_scenario, compare_modes, paper_scenario
from .safenet import (ARCHITECTURE, NetWeights, load_weights, save_weights,
                      forward, predict_mask, benchmark)

__version__ = "0.1.0"
