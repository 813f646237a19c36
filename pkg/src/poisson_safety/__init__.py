"""Full-body collision avoidance for serial-chain manipulators.

Pipeline: rasterize obstacles into a voxel grid, erode free space by the
surface-sampling resolution, solve Poisson's equation on the buffered region
for a smooth safety field, and filter joint-velocity commands through a
multi-constraint QP with one barrier row per robot-surface sample.
"""

from .geometry import Transform
from .kinematics import (BodyPoint, JointSpec, LinkGeometry, RobotModel,
                         body_point_position, default_models,
                         forward_kinematics, point_jacobian)
from .poisson_field import (EmptyInteriorError, FieldPair, OutOfDomainError,
                            ScalarField, SolverSettings, sample_gradient,
                            sample_value, solve_poisson, time_derivative)
from .qp import project_polyhedron
from .safety_filter import (ConstraintRow, FilterConfig, FilterResult,
                            SafetyFilter, barrier_rows, clf_row,
                            joint_limit_rows, solve_filter_qp)
from .sampling import (DenseSurfaceCloud, SampleSet, generate_dense_cloud,
                       poisson_disk_downsample, verify_coverage)
from .scenario_io import load_scenario, parse_scenario, save_scenario
from .simulator import (NominalSpec, Scenario, Simulation, TelemetryRecord,
                        Trajectory, ground_truth_min_clearance, run_episode,
                        step_state)
from .telemetry import summarize_file, summarize_records, write_jsonl
from .voxel_grid import (GridDims, ObstacleShape, OccupancyGrid, WorldBounds,
                         distance_to_occupied, erode_free_space,
                         rasterize_scene)

__version__ = "0.1.0"
